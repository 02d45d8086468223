"""Windowed ridge forecaster used to measure covariate benefit.

A deliberately simple stand-in for a sequence model: every (P history,
Q target) window is flattened into one feature vector, node windows are
pooled into a single regularized least-squares fit with shared weights,
and future covariate rows enter as extra features. Metrics follow the
masked MAE/RMSE convention: missing values are excluded, and reporting
is in original units at horizons 3, 6, and 12.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .embedding import CovariateAttachment, TimeEmbedding, attach_covariates
from .errors import DataError
from .hankel import SignalMatrix

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class Window:
    """One Seq2Seq training example for a single node.

    ``anchor_step`` is the absolute index of the last history step; the
    targets cover anchor_step+1 .. anchor_step+Q. ``target_mask`` marks
    target entries that were actually observed (metric exclusion).
    """

    inputs: np.ndarray
    target: np.ndarray
    future_covariates: np.ndarray
    node_index: int
    anchor_step: int
    target_mask: np.ndarray


@dataclass
class ForecastWindows:
    """All windows of one split, plus the channel contract, if attached."""

    split: str
    windows: list[Window]
    attachment: CovariateAttachment | None = None

    def __len__(self) -> int:
        return len(self.windows)


@dataclass(frozen=True)
class SplitPart:
    """A contiguous chronological slice of the signal."""

    name: str
    signal: SignalMatrix
    start: int


@dataclass(frozen=True)
class Splits:
    train: SplitPart
    val: SplitPart | None
    test: SplitPart | None

    @property
    def boundaries(self) -> tuple[int, int]:
        t_train = self.train.signal.n_steps
        t_val = self.val.signal.n_steps if self.val else 0
        return (t_train, t_train + t_val)

    def parts(self) -> list[SplitPart]:
        return [p for p in (self.train, self.val, self.test) if p is not None]


def make_splits(signal: SignalMatrix, ratios: tuple[float, float, float]) -> Splits:
    """Contiguous chronological train/val/test split of the signal.

    Boundary steps are rounded from the ratios; zero ratios yield empty
    (absent) splits, which is convenient for unit tests.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise DataError(f"ratios must be three nonnegative numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"ratios must sum to 1, got {sum(ratios)}")
    t = signal.n_steps
    n_train = int(round(t * ratios[0]))
    n_val = int(round(t * ratios[1]))
    n_test = t - n_train - n_val
    for name, ratio, size in (("train", ratios[0], n_train), ("val", ratios[1], n_val), ("test", ratios[2], n_test)):
        if ratio > 0 and size <= 0:
            raise DataError(f"{name} split is empty at T={t} with ratios {ratios}")
    if n_train <= 0:
        raise DataError("training split may not be empty")

    def part(name: str, start: int, stop: int) -> SplitPart | None:
        if stop <= start:
            return None
        return SplitPart(
            name=name,
            signal=SignalMatrix(
                values=signal.values[:, start:stop].copy(),
                mask=signal.mask[:, start:stop].copy(),
                node_ids=list(signal.node_ids),
                step_seconds=signal.step_seconds,
            ),
            start=start,
        )

    train = part("train", 0, n_train)
    assert train is not None
    return Splits(
        train=train,
        val=part("val", n_train, n_train + n_val),
        test=part("test", n_train + n_val, t),
    )


@dataclass(frozen=True)
class ZScore:
    """Per-node normalization statistics fit on the training split only."""

    mean: np.ndarray
    std: np.ndarray
    source: str

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean[:, np.newaxis]) / self.std[:, np.newaxis]

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return values * self.std[:, np.newaxis] + self.mean[:, np.newaxis]

    def inverse_rows(self, rows: np.ndarray, node_indices: np.ndarray) -> np.ndarray:
        """Inverse-transform per-window rows given each row's node index."""
        std = self.std[node_indices][:, np.newaxis]
        mean = self.mean[node_indices][:, np.newaxis]
        return rows * std + mean


def zscore_fit(train: SignalMatrix, source: str = "train") -> ZScore:
    mean = train.values.mean(axis=1)
    std = train.values.std(axis=1)
    floored = std < STD_FLOOR
    if floored.any():
        names = [train.node_ids[i] for i in np.nonzero(floored)[0]]
        warnings.warn(f"zero-variance channels floored to {STD_FLOOR}: {names}")
        std = np.where(floored, STD_FLOOR, std)
    return ZScore(mean=mean, std=std, source=source)


def zscore_fit_apply(splits: Splits) -> tuple[Splits, ZScore]:
    """Normalize every split with statistics from the training split."""
    zs = zscore_fit(splits.train.signal)

    def apply(part: SplitPart | None) -> SplitPart | None:
        if part is None:
            return None
        sig = part.signal
        return SplitPart(
            name=part.name,
            signal=SignalMatrix(
                values=zs.transform(sig.values),
                mask=sig.mask.copy(),
                node_ids=list(sig.node_ids),
                step_seconds=sig.step_seconds,
            ),
            start=part.start,
        )

    normalized = Splits(train=apply(splits.train), val=apply(splits.val), test=apply(splits.test))
    return normalized, zs


def make_windows(
    splits: Splits,
    p: int = 12,
    q: int = 12,
    embedding: TimeEmbedding | None = None,
    exclusion_mask: np.ndarray | None = None,
) -> dict[str, ForecastWindows]:
    """One window per valid anchor per node for every nonempty split.

    Windows never straddle split boundaries. ``exclusion_mask`` is the
    pre-imputation observation mask over the full signal, indexed by
    absolute step; it rides along for metric exclusion.
    """
    if p < 1 or q < 1:
        raise DataError(f"P and Q must be positive, got P={p}, Q={q}")
    out: dict[str, ForecastWindows] = {}
    for part in splits.parts():
        sig = part.signal
        n, t = sig.values.shape
        if t < p + q:
            raise DataError(
                f"{part.name} split has {t} steps, needs at least P+Q={p + q}"
            )
        windows: list[Window] = []
        empty_cov = np.zeros((q, 0))
        for local_anchor in range(p - 1, t - q):
            anchor = part.start + local_anchor
            for node in range(n):
                hist = sig.values[node, local_anchor - p + 1 : local_anchor + 1]
                target = sig.values[node, local_anchor + 1 : local_anchor + q + 1]
                if exclusion_mask is not None:
                    tmask = exclusion_mask[node, anchor + 1 : anchor + q + 1].copy()
                else:
                    tmask = np.ones(q, dtype=bool)
                windows.append(
                    Window(
                        inputs=hist[:, np.newaxis].copy(),
                        target=target.copy(),
                        future_covariates=empty_cov,
                        node_index=node,
                        anchor_step=anchor,
                        target_mask=tmask,
                    )
                )
        collection = ForecastWindows(split=part.name, windows=windows)
        if embedding is not None:
            collection = attach_covariates(collection, embedding)
        out[part.name] = collection
    return out


@dataclass
class RidgeModel:
    """Closed-form regularized least squares on flattened window features."""

    weights: np.ndarray
    l2: float
    feature_layout: str


def _features(fw: ForecastWindows) -> np.ndarray:
    rows = [
        np.concatenate([w.inputs.ravel(), w.future_covariates.ravel()])
        for w in fw.windows
    ]
    dims = {row.size for row in rows}
    if len(dims) > 1:
        raise DataError(f"feature dimension mismatch across windows: {sorted(dims)}")
    return np.vstack(rows)


def _layout(fw: ForecastWindows) -> str:
    w = fw.windows[0]
    return (
        f"history({w.inputs.shape[0]}x{w.inputs.shape[1]})+"
        f"future({w.future_covariates.shape[0]}x{w.future_covariates.shape[1]})"
    )


def fit_ridge(train: ForecastWindows, l2: float = 1e-3) -> RidgeModel:
    """Deterministic ridge fit of the pooled window regression."""
    if not train.windows:
        raise DataError("no training windows")
    if l2 < 0:
        raise DataError(f"l2 must be nonnegative, got {l2}")
    x = _features(train)
    y = np.vstack([w.target for w in train.windows])
    gram = x.T @ x + l2 * np.eye(x.shape[1])
    weights = np.linalg.solve(gram, x.T @ y)
    return RidgeModel(weights=weights, l2=l2, feature_layout=_layout(train))


def predict(model: RidgeModel, fw: ForecastWindows) -> np.ndarray:
    """Q-step predictions per window, in the fitted (normalized) space."""
    if not fw.windows:
        return np.zeros((0, 0))
    layout = _layout(fw)
    if layout != model.feature_layout:
        raise DataError(
            f"window layout {layout} does not match model layout {model.feature_layout}"
        )
    return _features(fw) @ model.weights


@dataclass
class MetricsReport:
    """Masked MAE/RMSE overall and at selected horizons, original units."""

    horizon_mae: dict[int, float]
    horizon_rmse: dict[int, float]
    overall_mae: float
    overall_rmse: float
    excluded_count: int

    def to_json(self) -> str:
        payload = {
            "horizons": {
                str(h): {"mae": self.horizon_mae[h], "rmse": self.horizon_rmse[h]}
                for h in sorted(self.horizon_mae)
            },
            "overall": {"mae": self.overall_mae, "rmse": self.overall_rmse},
            "excluded_count": self.excluded_count,
        }
        return json.dumps(payload, sort_keys=True, indent=2)


def evaluate(
    predictions: np.ndarray,
    targets: np.ndarray,
    mask: np.ndarray | None = None,
    horizons: tuple[int, ...] = (3, 6, 12),
) -> MetricsReport:
    """Masked MAE/RMSE of aligned (n_windows, Q) arrays.

    Horizon k uses only the k-th output column; masked-out entries are
    excluded everywhere and counted.
    """
    predictions = np.asarray(predictions, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if predictions.shape != targets.shape:
        raise DataError(f"shape mismatch: {predictions.shape} vs {targets.shape}")
    if mask is None:
        mask = np.ones(targets.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != targets.shape:
        raise DataError(f"mask shape {mask.shape} does not match {targets.shape}")
    if not mask.any():
        raise DataError("all entries masked; no metric can be computed")
    err = predictions - targets
    q = targets.shape[1]

    def pair(values: np.ndarray, keep: np.ndarray) -> tuple[float, float]:
        kept = values[keep]
        return float(np.mean(np.abs(kept))), float(np.sqrt(np.mean(kept**2)))

    horizon_mae: dict[int, float] = {}
    horizon_rmse: dict[int, float] = {}
    for h in horizons:
        if not 1 <= h <= q:
            continue
        col_keep = mask[:, h - 1]
        if not col_keep.any():
            horizon_mae[h] = float("nan")
            horizon_rmse[h] = float("nan")
            continue
        horizon_mae[h], horizon_rmse[h] = pair(err[:, h - 1], col_keep)
    overall_mae, overall_rmse = pair(err, mask)
    return MetricsReport(
        horizon_mae=horizon_mae,
        horizon_rmse=horizon_rmse,
        overall_mae=overall_mae,
        overall_rmse=overall_rmse,
        excluded_count=int((~mask).sum()),
    )


def window_targets(fw: ForecastWindows) -> np.ndarray:
    return np.vstack([w.target for w in fw.windows]) if fw.windows else np.zeros((0, 0))


def window_masks(fw: ForecastWindows) -> np.ndarray:
    return np.vstack([w.target_mask for w in fw.windows]) if fw.windows else np.zeros((0, 0), bool)


def window_nodes(fw: ForecastWindows) -> np.ndarray:
    return np.array([w.node_index for w in fw.windows], dtype=int)
