"""Residual-structure diagnostics: ACF, lagged residual correlation, CEP.

Peaks in the residual autocorrelation at seasonal lags, or nonzero
correlation between residual vectors a season apart, indicate periodic
structure the forecaster failed to capture. The cumulative eigenvalue
percentage (CEP) curve summarizes how much variance a truncated
spectrum retains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class AcfReport:
    """Autocorrelation of one series up to max_lag, plus detected peaks.

    peak_lags are local maxima above the 2/sqrt(n) noise threshold.
    """

    node_id: str
    lags: np.ndarray
    acf: np.ndarray
    peak_lags: np.ndarray


@dataclass(frozen=True)
class ResidualCorrSummary:
    """Mean absolute Pearson correlation between residual vectors at lag S."""

    lag: int
    mean_abs_corr: float
    matrix: np.ndarray | None
    excluded_columns: int


@dataclass(frozen=True)
class CepCurve:
    """Cumulative squared-singular-value fraction by rank."""

    ranks: np.ndarray
    cep: np.ndarray


def acf(series: np.ndarray, max_lag: int, node_id: str = "") -> AcfReport:
    """Biased (length-normalized) autocorrelation estimator.

    acf[k] = sum_t (x_t - mean)(x_{t+k} - mean) / sum_t (x_t - mean)^2,
    which guarantees |acf[k]| <= 1 and acf[0] = 1.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if max_lag < 1:
        raise ValueError(f"max_lag must be >= 1, got {max_lag}")
    if n <= max_lag:
        raise DataError(f"series length {n} must exceed max_lag {max_lag}")
    if not np.all(np.isfinite(x)):
        raise DataError("series contains non-finite values")
    centered = x - x.mean()
    denom = float(np.dot(centered, centered))
    if denom <= 0.0:
        raise DataError("constant series has no autocorrelation")
    values = np.empty(max_lag + 1)
    values[0] = 1.0
    for k in range(1, max_lag + 1):
        values[k] = float(np.dot(centered[:-k], centered[k:])) / denom
    threshold = 2.0 / np.sqrt(n)
    peaks = []
    for k in range(1, max_lag + 1):
        if values[k] <= threshold:
            continue
        left_ok = values[k] > values[k - 1]
        right_ok = k == max_lag or values[k] >= values[k + 1]
        if left_ok and right_ok:
            peaks.append(k)
    return AcfReport(
        node_id=node_id,
        lags=np.arange(max_lag + 1),
        acf=values,
        peak_lags=np.asarray(peaks, dtype=int),
    )


def residual_correlation(
    residuals: np.ndarray,
    lag: int,
    keep_matrix: bool = True,
) -> ResidualCorrSummary:
    """Correlation between residual vectors at times t and t - lag.

    ``residuals`` is (time, d) with d the flattened space-horizon
    dimension. Entry (i, j) of the matrix is the Pearson correlation of
    column i at time t with column j at time t - lag, over the aligned
    range. Zero-variance columns are excluded and counted. A negative
    lag returns the transpose relation.
    """
    resid = np.asarray(residuals, dtype=float)
    if resid.ndim == 1:
        resid = resid[:, np.newaxis]
    if lag < 0:
        flipped = residual_correlation(resid, -lag, keep_matrix=keep_matrix)
        return ResidualCorrSummary(
            lag=lag,
            mean_abs_corr=flipped.mean_abs_corr,
            matrix=None if flipped.matrix is None else flipped.matrix.T,
            excluded_columns=flipped.excluded_columns,
        )
    n = resid.shape[0]
    if n <= lag:
        raise DataError(f"time length {n} must exceed lag {lag}")
    lead = resid[lag:]
    trail = resid[: n - lag]

    def standardize(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        centered = block - block.mean(axis=0)
        scale = np.sqrt(np.mean(centered**2, axis=0))
        # relative floor so numerically constant columns are excluded too
        floor = 1e-12 * np.maximum(1.0, np.max(np.abs(block), axis=0))
        keep = scale > floor
        out = np.zeros_like(centered)
        out[:, keep] = centered[:, keep] / scale[keep]
        return out, keep

    lead_z, keep_lead = standardize(lead)
    trail_z, keep_trail = standardize(trail)
    keep = keep_lead & keep_trail
    excluded = int((~keep).sum())
    if not keep.any():
        raise DataError("every residual column has zero variance")
    corr = (lead_z.T @ trail_z) / (n - lag)
    corr = np.clip(corr, -1.0, 1.0)
    kept = corr[np.ix_(keep, keep)]
    return ResidualCorrSummary(
        lag=lag,
        mean_abs_corr=float(np.mean(np.abs(kept))),
        matrix=corr if keep_matrix else None,
        excluded_columns=excluded,
    )


def cep_curve(singular_values: np.ndarray) -> CepCurve:
    """Cumulative eigenvalue percentage cep[k] = sum_{i<=k} s_i^2 / sum s_i^2."""
    sigma = np.asarray(singular_values, dtype=float).ravel()
    if sigma.size == 0:
        raise DataError("empty singular spectrum")
    energy = sigma**2
    total = energy.sum()
    if total <= 0.0:
        raise DataError("all-zero singular spectrum")
    cep = np.cumsum(energy) / total
    return CepCurve(ranks=np.arange(1, sigma.size + 1), cep=cep)


def write_acf_csv(reports: list[AcfReport], path) -> None:
    """One lag column plus one ACF column per node."""
    if not reports:
        raise ValueError("no reports to write")
    lags = reports[0].lags
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("lag," + ",".join(r.node_id or f"series_{i}" for i, r in enumerate(reports)) + "\n")
        for row, lag in enumerate(lags):
            cells = [str(int(lag))] + [f"{r.acf[row]:.17g}" for r in reports]
            fh.write(",".join(cells) + "\n")


def write_cep_csv(curve: CepCurve, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("rank,cep\n")
        for rank, value in zip(curve.ranks, curve.cep):
            fh.write(f"{int(rank)},{value:.17g}\n")


def write_residual_corr_csv(summaries: list[ResidualCorrSummary], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("lag,mean_abs_corr,excluded_columns\n")
        for s in summaries:
            fh.write(f"{s.lag},{s.mean_abs_corr:.17g},{s.excluded_columns}\n")
