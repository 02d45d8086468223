"""End-to-end orchestration: ingest, fit, select, embed, forecast, diagnose.

A run executes ingest -> impute -> split -> normalize -> Hankel ->
mode decomposition -> sparse selection -> embedding -> two ridge fits
(with and without covariates) -> metrics and residual diagnostics,
writing every artifact plus a manifest that records all resolved
parameters. A rerun from the manifest alone reproduces the metric and
embedding files byte for byte.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics as dg
from . import dmd, spdmd, svgplot
from .embedding import build_embedding, export_embedding, select_representatives
from .errors import ConfigError, DataError
from .forecaster import (
    evaluate,
    fit_ridge,
    make_splits,
    make_windows,
    predict,
    window_masks,
    window_nodes,
    window_targets,
    zscore_fit_apply,
)
from .hankel import SignalMatrix, build_hankel, default_tau, impute_linear
from .synthetic import SyntheticComponent, SyntheticSpec, generate_synthetic

L2_AUTO_GRID = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)


@dataclass
class PipelineConfig:
    """Resolved inputs of one run; defaults mirror the evaluation protocol
    (P=Q=12, 70/10/20 chronological split, diagnostics lags 0/72/504)."""

    input_csv: str | None = None
    synthetic: SyntheticSpec | None = None
    step_seconds: float = 900.0
    tau: int | None = None
    rank: str = "cep:0.9"
    solver: str = "exact"
    amplitude_method: str = "least_squares"
    # The splice-free window keeps recovered frequencies unbiased when
    # the training span is not a multiple of the dominant periods.
    fit_window: str = "truncated"
    target_modes: int = 4
    unit_circle: bool = True
    p: int = 12
    q: int = 12
    split: tuple[float, float, float] = (0.7, 0.1, 0.2)
    l2: float = 1e-3
    l2_auto: bool = False
    lags: tuple[int, ...] = (0, 72, 504)
    acf_max_lag: int = 144
    output_dir: str = "runs/latest"
    seed: int = 0

    def rank_policy(self) -> dmd.RankPolicy:
        return parse_rank_policy(self.rank)

    def validate(self) -> None:
        self.rank_policy()
        if self.solver not in ("exact", "total"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.fit_window not in ("circulant", "truncated"):
            raise ConfigError(f"unknown fit window {self.fit_window!r}")
        if len(self.split) != 3:
            raise ConfigError(f"split needs three ratios, got {self.split}")
        if self.p < 1 or self.q < 1:
            raise ConfigError(f"P and Q must be positive, got {self.p}, {self.q}")
        if self.target_modes < 1:
            raise ConfigError(f"target_modes must be positive, got {self.target_modes}")
        if (self.input_csv is None) == (self.synthetic is None):
            raise ConfigError("exactly one of input_csv or a synthetic spec is required")

    def to_mapping(self) -> dict:
        out: dict = {}
        for f in fields(self):
            if f.name == "synthetic":
                continue
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        if self.synthetic is not None:
            out["synth_nodes"] = self.synthetic.n_nodes
            out["synth_steps"] = self.synthetic.n_steps
            out["synth_periods"] = [c.period_steps for c in self.synthetic.components]
            out["synth_amplitudes"] = [c.amplitude for c in self.synthetic.components]
            out["synth_noise"] = self.synthetic.noise_sigma
            out["synth_trend"] = self.synthetic.trend
            out["synth_seed"] = self.synthetic.seed
        return out

    @classmethod
    def from_mapping(cls, mapping: dict) -> "PipelineConfig":
        cfg = cls()
        plain = {f.name: f for f in fields(cls) if f.name != "synthetic"}
        synth: dict = {}
        for key, raw in mapping.items():
            if key.startswith("synth_"):
                synth[key] = raw
                continue
            if key not in plain:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, _coerce(key, raw))
        if synth:
            periods = _float_list(synth.get("synth_periods", []))
            amplitudes = _float_list(synth.get("synth_amplitudes", [])) or [1.0] * len(periods)
            if len(amplitudes) != len(periods):
                raise ConfigError("synth_periods and synth_amplitudes lengths differ")
            cfg.synthetic = SyntheticSpec(
                n_nodes=int(synth.get("synth_nodes", 8)),
                n_steps=int(synth.get("synth_steps", 2016)),
                components=tuple(
                    SyntheticComponent(period_steps=p, amplitude=a)
                    for p, a in zip(periods, amplitudes)
                ),
                noise_sigma=float(synth.get("synth_noise", 0.0)),
                trend=float(synth.get("synth_trend", 0.0)),
                seed=int(synth.get("synth_seed", cfg.seed)),
                step_seconds=cfg.step_seconds,
            )
        return cfg


def _coerce(key: str, raw):
    kind = {
        "input_csv": str,
        "rank": str,
        "solver": str,
        "amplitude_method": str,
        "fit_window": str,
        "output_dir": str,
        "step_seconds": float,
        "l2": float,
        "tau": int,
        "target_modes": int,
        "p": int,
        "q": int,
        "acf_max_lag": int,
        "seed": int,
        "unit_circle": bool,
        "l2_auto": bool,
        "split": "floats",
        "lags": "ints",
    }[key]
    try:
        if kind == "floats":
            return tuple(_float_list(raw))
        if kind == "ints":
            return tuple(int(v) for v in _float_list(raw))
        if kind is bool:
            if isinstance(raw, bool):
                return raw
            return str(raw).strip().lower() in ("1", "true", "yes", "on")
        if raw is None:
            return None
        return kind(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from exc


def _float_list(raw) -> list[float]:
    if isinstance(raw, str):
        items = [s for s in raw.replace(";", ",").split(",") if s.strip()]
        return [float(s) for s in items]
    return [float(v) for v in raw]


def parse_rank_policy(text: str) -> dmd.RankPolicy:
    """Parse "fixed:R" or "cep:F" policy strings."""
    try:
        kind, _, value = text.partition(":")
        kind = kind.strip().lower()
        if kind == "fixed":
            return dmd.FixedRank(int(value))
        if kind == "cep":
            return dmd.CepThreshold(float(value) if value else 0.90)
    except ValueError as exc:
        raise ConfigError(f"bad rank policy {text!r}: {exc}") from exc
    raise ConfigError(f"bad rank policy {text!r}; expected 'fixed:R' or 'cep:F'")


def parse_config_file(path) -> dict:
    """Read a human-readable key-value config file.

    One ``key = value`` (or ``key: value``) pair per line; blank lines
    and #-comments ignored.
    """
    mapping: dict = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        sep = "=" if "=" in stripped else (":" if ":" in stripped else None)
        if sep is None:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition(sep)
        mapping[key.strip()] = value.strip()
    return mapping


def load_csv(path, step_seconds: float = 900.0) -> SignalMatrix:
    """Read a time-major CSV into node-major storage.

    First row: header with node ids (first cell names the step column).
    Following rows: step label then one value per node; blank cells are
    missing observations.
    """
    rows: list[list[str]] = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = [row for row in csv.reader(fh)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    header = rows[0]
    if len(header) < 2:
        raise DataError(f"{path}: header must name at least one node column")
    node_ids = [h.strip() for h in header[1:]]
    data_rows = rows[1:]
    if len(data_rows) < 2:
        raise DataError(f"{path}: need at least 2 time steps, got {len(data_rows)}")
    n_nodes = len(node_ids)
    values = np.zeros((n_nodes, len(data_rows)))
    mask = np.zeros((n_nodes, len(data_rows)), dtype=bool)
    for t, row in enumerate(data_rows):
        if len(row) != n_nodes + 1:
            raise DataError(
                f"{path}: row {t + 2} has {len(row)} cells, expected {n_nodes + 1}"
            )
        for i, cell in enumerate(row[1:]):
            cell = cell.strip()
            if not cell:
                continue
            try:
                values[i, t] = float(cell)
            except ValueError as exc:
                raise DataError(f"{path}: row {t + 2}, column {header[i + 1]!r}: "
                                f"non-numeric cell {cell!r}") from exc
            mask[i, t] = True
    return SignalMatrix(values=values, mask=mask, node_ids=node_ids, step_seconds=step_seconds)


def write_signal_csv(signal: SignalMatrix, path) -> None:
    """Inverse of load_csv; missing entries become blank cells."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("step," + ",".join(signal.node_ids) + "\n")
        for t in range(signal.n_steps):
            cells = [str(t)]
            for i in range(signal.n_nodes):
                cells.append(f"{signal.values[i, t]:.17g}" if signal.mask[i, t] else "")
            fh.write(",".join(cells) + "\n")


@dataclass
class _Run:
    """Bookkeeping for one run directory: lock, written files, timings."""

    out_dir: Path
    files: list[Path] = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.files.append(p)
        return p

    def cleanup(self) -> None:
        for p in self.files:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass


class _StageTimer:
    def __init__(self, run: _Run, name: str):
        self.run = run
        self.name = name

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.run.timings[self.name] = time.perf_counter() - self.start
        if exc is not None and isinstance(exc, Exception):
            exc.args = (f"[stage {self.name}] {exc}",) + exc.args[1:]
        return False


def _ingest(cfg: PipelineConfig) -> SignalMatrix:
    if (cfg.input_csv is None) == (cfg.synthetic is None):
        raise ConfigError("exactly one of input_csv or a synthetic spec is required")
    if cfg.input_csv is not None:
        return load_csv(cfg.input_csv, step_seconds=cfg.step_seconds)
    return generate_synthetic(cfg.synthetic)


def _choose_l2(cfg: PipelineConfig, train, val, zscore) -> float:
    if not cfg.l2_auto or val is None or not val.windows:
        return cfg.l2
    best = (float("inf"), cfg.l2)
    targets = window_targets(val)
    nodes = window_nodes(val)
    masks = window_masks(val)
    for candidate in L2_AUTO_GRID:
        model = fit_ridge(train, l2=candidate)
        preds = predict(model, val)
        report = evaluate(
            zscore.inverse_rows(preds, nodes),
            zscore.inverse_rows(targets, nodes),
            masks,
        )
        if report.overall_rmse < best[0]:
            best = (report.overall_rmse, candidate)
    return best[1]


def _forecast_metrics(cfg: PipelineConfig, train, val, test, zscore):
    l2 = _choose_l2(cfg, train, val, zscore)
    model = fit_ridge(train, l2=l2)
    preds_norm = predict(model, test)
    nodes = window_nodes(test)
    preds = zscore.inverse_rows(preds_norm, nodes)
    targets = zscore.inverse_rows(window_targets(test), nodes)
    report = evaluate(preds, targets, window_masks(test))
    residuals = preds - targets
    return report, residuals, l2


def _anchor_major_residuals(residuals: np.ndarray, n_nodes: int):
    """Reshape per-window residuals to (n_anchors, n_nodes * Q).

    make_windows emits windows anchor-major, node-minor, which this
    relies on.
    """
    q = residuals.shape[1]
    n_anchors = residuals.shape[0] // n_nodes
    stacked = residuals.reshape(n_anchors, n_nodes, q)
    return stacked.reshape(n_anchors, n_nodes * q), stacked


def run_pipeline(cfg: PipelineConfig, until: str = "forecast") -> Path:
    """Execute the pipeline and return the run directory.

    ``until`` takes "fit" (stop after sparse mode selection), "embed"
    (also export covariates), or "forecast" (everything, including the
    with/without comparison and diagnostics). Any stage error aborts
    with the stage name attached and partial outputs removed.
    """
    if until not in ("fit", "embed", "forecast"):
        raise ConfigError(f"unknown pipeline target {until!r}")
    cfg.validate()
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / ".lock"
    try:
        lock_fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise DataError(f"run directory {out_dir} is locked by another process") from None
    os.close(lock_fd)
    run = _Run(out_dir=out_dir)
    try:
        result = _run_stages(cfg, run, until)
    except Exception:
        run.cleanup()
        raise
    finally:
        lock.unlink(missing_ok=True)
    return result


def _run_stages(cfg: PipelineConfig, run: _Run, until: str) -> Path:
    resolved: dict = {}

    with _StageTimer(run, "ingest"):
        signal = _ingest(cfg)
        original_mask = signal.mask.copy()
        resolved["n_nodes"] = signal.n_nodes
        resolved["n_steps"] = signal.n_steps

    with _StageTimer(run, "impute"):
        signal = impute_linear(signal)

    with _StageTimer(run, "split"):
        splits = make_splits(signal, cfg.split)
        resolved["boundaries"] = list(splits.boundaries)

    with _StageTimer(run, "normalize"):
        norm_splits, zscore = zscore_fit_apply(splits)

    with _StageTimer(run, "hankel"):
        train_signal = norm_splits.train.signal
        if cfg.tau is not None:
            tau = cfg.tau
        else:
            tau = default_tau(train_signal)
            if cfg.fit_window == "truncated":
                # keep at least half the columns in the splice-free window
                tau = min(tau, max(1, train_signal.n_steps // 2))
        view = build_hankel(train_signal, tau)
        resolved["tau"] = tau

    with _StageTimer(run, "dmd"):
        dmd_cfg = dmd.DmdConfig(
            rank_policy=cfg.rank_policy(),
            solver=cfg.solver,
            amplitude_method=cfg.amplitude_method,
            fit_window=cfg.fit_window,
        )
        dec = dmd.fit_dmd(view, dmd_cfg)
        resolved["rank"] = dec.rank
        run.path("decomposition.json").write_text(dec.to_json(), encoding="utf-8")

    with _StageTimer(run, "spdmd"):
        target = max(1, min(cfg.target_modes, dec.rank))
        sweep = spdmd.gamma_sweep(dec, view, target_modes=target)
        spdmd.export_path_csv(sweep.path, run.path("spdmd_path.csv"))
        selected_eigs = dec.eigenvalues[sweep.selected.support]
        resolved["gamma"] = sweep.selected.gamma
        resolved["selected_pairs"] = sweep.achieved_pairs
        resolved["target_met"] = sweep.target_met
        resolved["spdmd_warnings"] = list(sweep.path.warnings)
        resolved["eigenvalues"] = [[float(z.real), float(z.imag)] for z in selected_eigs]

    if until == "fit":
        _write_manifest(cfg, run, resolved)
        return run.out_dir

    with _StageTimer(run, "embedding"):
        reps = select_representatives(selected_eigs)
        emb = build_embedding(reps, span=(0, signal.n_steps), project_unit_circle=cfg.unit_circle)
        export_embedding(emb, run.path("embedding.csv"))
        resolved["embedding_modes"] = int(reps.size)

    if until == "embed":
        _write_manifest(cfg, run, resolved)
        return run.out_dir

    with _StageTimer(run, "forecast"):
        if norm_splits.test is None:
            raise DataError("forecast comparison requires a nonempty test split")
        with_windows = make_windows(
            norm_splits, cfg.p, cfg.q, embedding=emb, exclusion_mask=original_mask
        )
        without_windows = make_windows(
            norm_splits, cfg.p, cfg.q, embedding=None, exclusion_mask=original_mask
        )
        report_with, resid_with, l2_with = _forecast_metrics(
            cfg, with_windows["train"], with_windows.get("val"), with_windows["test"], zscore
        )
        report_without, resid_without, l2_without = _forecast_metrics(
            cfg,
            without_windows["train"],
            without_windows.get("val"),
            without_windows["test"],
            zscore,
        )
        resolved["l2_with"] = l2_with
        resolved["l2_without"] = l2_without
        run.path("metrics_with.json").write_text(report_with.to_json(), encoding="utf-8")
        run.path("metrics_without.json").write_text(report_without.to_json(), encoding="utf-8")

    with _StageTimer(run, "diagnostics"):
        skipped = _write_diagnostics(
            cfg, run, dec,
            {"with": (with_windows["test"], resid_with),
             "without": (without_windows["test"], resid_without)},
            signal.n_nodes,
            list(signal.node_ids),
        )
        resolved["skipped_lags"] = skipped

    _write_manifest(cfg, run, resolved)
    return run.out_dir


def _write_diagnostics(cfg, run: _Run, dec, labelled, n_nodes: int, node_ids: list[str]):
    skipped: list[int] = []
    for label, (_, residuals) in labelled.items():
        flat, stacked = _anchor_major_residuals(residuals, n_nodes)
        n_anchors = flat.shape[0]

        summaries = []
        for lag in cfg.lags:
            if n_anchors <= abs(lag):
                if lag not in skipped:
                    skipped.append(lag)
                continue
            summary = dg.residual_correlation(flat, lag, keep_matrix=True)
            summaries.append(summary)
            svg = svgplot.heatmap(
                np.abs(summary.matrix),
                f"|residual correlation| lag {lag} ({label}, test)",
            )
            svgplot.write_svg(svg, run.path(f"residual_corr_{label}_lag{lag:03d}_test.svg"))
        dg.write_residual_corr_csv(summaries, run.path(f"residual_corr_{label}_test.csv"))

        max_lag = min(cfg.acf_max_lag, n_anchors - 1)
        if max_lag >= 1:
            reports = [
                dg.acf(stacked[:, node, -1], max_lag, node_id=node_ids[node])
                for node in range(n_nodes)
            ]
            dg.write_acf_csv(reports, run.path(f"acf_{label}_test.csv"))
            svg = svgplot.line_chart(
                reports[0].lags,
                [(r.node_id, r.acf) for r in reports[: len(svgplot.PALETTE)]],
                f"residual ACF at horizon {cfg.q} ({label}, test)",
            )
            svgplot.write_svg(svg, run.path(f"acf_{label}_test.svg"))

    if dec.singular_values is not None:
        curve = dg.cep_curve(dec.singular_values)
        dg.write_cep_csv(curve, run.path("cep.csv"))
        svg = svgplot.line_chart(
            curve.ranks, [("cep", curve.cep)], "cumulative eigenvalue percentage"
        )
        svgplot.write_svg(svg, run.path("cep.svg"))
    return skipped


def _write_manifest(cfg: PipelineConfig, run: _Run, resolved: dict) -> None:
    manifest = {
        "package_version": __version__,
        "config": cfg.to_mapping(),
        "resolved": resolved,
        "stage_seconds": run.timings,
    }
    run.path("manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2), encoding="utf-8"
    )


def config_from_manifest(path) -> PipelineConfig:
    """Rebuild the exact configuration recorded by a previous run."""
    try:
        manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    if "config" not in manifest:
        raise ConfigError(f"{path} is not a run manifest")
    return PipelineConfig.from_mapping(manifest["config"])


def diagnose_residuals(
    residuals: np.ndarray,
    lags: tuple[int, ...],
    acf_max_lag: int,
    out_dir,
    column_ids: list[str] | None = None,
) -> Path:
    """Standalone residual diagnostics on a (time, columns) matrix."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    resid = np.asarray(residuals, dtype=float)
    if resid.ndim == 1:
        resid = resid[:, np.newaxis]
    n, d = resid.shape
    if column_ids is None:
        column_ids = [f"series_{i}" for i in range(d)]
    summaries = []
    for lag in lags:
        if n <= abs(lag):
            continue
        summary = dg.residual_correlation(resid, lag, keep_matrix=True)
        summaries.append(summary)
        svgplot.write_svg(
            svgplot.heatmap(np.abs(summary.matrix), f"|residual correlation| lag {lag}"),
            out_dir / f"residual_corr_lag{lag:03d}.svg",
        )
    dg.write_residual_corr_csv(summaries, out_dir / "residual_corr.csv")
    max_lag = min(acf_max_lag, n - 1)
    if max_lag >= 1:
        reports = [dg.acf(resid[:, i], max_lag, node_id=column_ids[i]) for i in range(d)]
        dg.write_acf_csv(reports, out_dir / "acf.csv")
        svgplot.write_svg(
            svgplot.line_chart(
                reports[0].lags,
                [(r.node_id, r.acf) for r in reports[: len(svgplot.PALETTE)]],
                "residual ACF",
            ),
            out_dir / "acf.svg",
        )
    return out_dir
