"""Spectral time embeddings for multivariate forecasting.

Extracts dominant oscillatory modes from a signal matrix via a
Hankel-lifted mode decomposition, prunes them with a sparsity-promoting
amplitude fit, and turns the surviving eigenvalues into per-timestep
covariates that any forecaster can consume. Ships with a windowed ridge
baseline and residual diagnostics to measure the benefit.
"""

__version__ = "0.1.0"

from .dmd import (
    CepThreshold,
    DmdConfig,
    DmdDecomposition,
    FixedRank,
    VandermondeMatrix,
    fit_dmd,
    fit_tdmd,
    mode_frequency,
    reconstruct,
    resolve_rank,
    vandermonde,
)
from .embedding import (
    TimeEmbedding,
    attach_covariates,
    build_embedding,
    export_embedding,
    import_embedding,
    select_representatives,
)
from .errors import ConfigError, DataError, DmdEmbedError, NumericalError
from .forecaster import (
    ForecastWindows,
    MetricsReport,
    RidgeModel,
    ZScore,
    evaluate,
    fit_ridge,
    make_splits,
    make_windows,
    predict,
    zscore_fit_apply,
)
from .hankel import (
    HankelView,
    SignalMatrix,
    apply_tall,
    build_hankel,
    default_tau,
    gram,
    impute_linear,
    shifted_view,
)
from .linalg import ComplexSpectrum, SnapshotSvd, dense_eig, lstsq, snapshot_svd
from .pipeline import PipelineConfig, load_csv, run_pipeline
from .spdmd import (
    AdmmOptions,
    GammaGrid,
    SpdmdPath,
    SpdmdSolution,
    gamma_sweep,
    polish,
    spdmd_solve,
)
from .synthetic import SyntheticComponent, SyntheticSpec, generate_synthetic

__all__ = [
    "__version__",
    "AdmmOptions",
    "CepThreshold",
    "ComplexSpectrum",
    "ConfigError",
    "DataError",
    "DmdConfig",
    "DmdDecomposition",
    "DmdEmbedError",
    "FixedRank",
    "ForecastWindows",
    "GammaGrid",
    "HankelView",
    "MetricsReport",
    "NumericalError",
    "PipelineConfig",
    "RidgeModel",
    "SignalMatrix",
    "SnapshotSvd",
    "SpdmdPath",
    "SpdmdSolution",
    "SyntheticComponent",
    "SyntheticSpec",
    "TimeEmbedding",
    "VandermondeMatrix",
    "ZScore",
    "apply_tall",
    "attach_covariates",
    "build_embedding",
    "build_hankel",
    "default_tau",
    "dense_eig",
    "evaluate",
    "export_embedding",
    "fit_dmd",
    "fit_ridge",
    "fit_tdmd",
    "gamma_sweep",
    "generate_synthetic",
    "gram",
    "import_embedding",
    "impute_linear",
    "load_csv",
    "lstsq",
    "make_splits",
    "make_windows",
    "mode_frequency",
    "polish",
    "predict",
    "reconstruct",
    "resolve_rank",
    "run_pipeline",
    "select_representatives",
    "shifted_view",
    "snapshot_svd",
    "spdmd_solve",
    "vandermonde",
    "zscore_fit_apply",
]
