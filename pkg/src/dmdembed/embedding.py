"""Per-timestep covariates from selected eigenvalues.

Each retained conjugate-pair representative contributes two real
channels per step: the real and imaginary parts of its eigenvalue
raised to the absolute step index. The resulting L x 2r table extends
past the fitted horizon simply by continuing the power recurrence, so
validation and test spans receive covariates without refitting.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from .dmd import conjugate_groups
from .errors import DataError

if TYPE_CHECKING:  # pragma: no cover
    from .forecaster import ForecastWindows


@dataclass(frozen=True)
class TimeEmbedding:
    """Covariate table with rows [Re(l_1^t)...Re(l_r^t), Im(l_1^t)...Im(l_r^t)].

    ``origin_step`` is the absolute data step of table row 0; powers are
    anchored at absolute step 0, so a table starting there opens with
    the identity row [1,...,1, 0,...,0].
    """

    eigenvalues: np.ndarray
    origin_step: int
    table: np.ndarray
    unit_circle_projected: bool

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    @property
    def length(self) -> int:
        return self.table.shape[0]

    def covers(self, step: int) -> bool:
        return self.origin_step <= step < self.origin_step + self.length

    def rows(self, steps: np.ndarray) -> np.ndarray:
        """Table rows for the given absolute steps (span must cover them)."""
        steps = np.asarray(steps, dtype=int)
        idx = steps - self.origin_step
        bad = (idx < 0) | (idx >= self.length)
        if bad.any():
            first = int(steps.ravel()[int(np.argmax(bad.ravel()))])
            raise DataError(f"embedding does not cover absolute step {first}")
        return self.table[idx]


def select_representatives(eigenvalues: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """One eigenvalue per conjugate group, with nonnegative imaginary part.

    The discarded conjugate carries no new real information: its real
    and imaginary channels duplicate the representative's up to sign.
    """
    eigs = np.asarray(eigenvalues, dtype=complex)
    reps = []
    for group in conjugate_groups(eigs, tol):
        members = eigs[group]
        pick = members[np.argmax(members.imag)]
        if abs(pick.imag) <= tol * (1.0 + abs(pick)):
            pick = complex(pick.real, 0.0)
        reps.append(pick)
    return np.asarray(reps, dtype=complex)


def build_embedding(
    selected: np.ndarray,
    span: tuple[int, int],
    project_unit_circle: bool = True,
    origin_step: int | None = None,
) -> TimeEmbedding:
    """Generate covariate rows for absolute steps [span[0], span[1]).

    Eigenvalues must be pair representatives (imaginary part >= 0). With
    ``project_unit_circle`` each eigenvalue is replaced by lambda/|lambda|
    before powering, so extrapolated covariates neither explode nor
    vanish; growth information stays in the decomposition.
    """
    start, end = int(span[0]), int(span[1])
    if end <= start:
        raise ValueError(f"empty span [{start}, {end})")
    eigs = np.asarray(selected, dtype=complex).ravel()
    if np.any(eigs == 0):
        raise ValueError("zero eigenvalue cannot be embedded")
    if np.any(eigs.imag < -1e-12 * (1.0 + np.abs(eigs))):
        raise ValueError("eigenvalues must be pair representatives with Im >= 0")
    if project_unit_circle and eigs.size:
        eigs = eigs / np.abs(eigs)
    length = end - start
    powers = np.empty((length, eigs.size), dtype=complex)
    if eigs.size:
        powers[0] = eigs**start
        for k in range(1, length):
            powers[k] = powers[k - 1] * eigs
    table = np.hstack([powers.real, powers.imag])
    return TimeEmbedding(
        eigenvalues=eigs,
        origin_step=start if origin_step is None else int(origin_step),
        table=table,
        unit_circle_projected=bool(project_unit_circle),
    )


@dataclass(frozen=True)
class CovariateAttachment:
    """Channel-count contract of an attachment: m -> m + 2r.

    ``origin_step`` records the absolute step of embedding row 0; window
    positions map to table rows through it.
    """

    base_channels: int
    embedded_channels: int
    embedding_modes: int
    origin_step: int


def attach_covariates(windows: "ForecastWindows", emb: TimeEmbedding) -> "ForecastWindows":
    """Append embedding channels to each window's history block and carry
    the future rows as decoder-side covariates.

    The embedding span must cover every absolute step any window touches,
    including the future target steps; the first uncovered step is
    reported otherwise.
    """
    if not windows.windows:
        return windows
    base = windows.windows[0].inputs.shape[1]
    new_windows = []
    for win in windows.windows:
        hist_steps = np.arange(win.anchor_step - win.inputs.shape[0] + 1, win.anchor_step + 1)
        fut_steps = np.arange(win.anchor_step + 1, win.anchor_step + 1 + win.target.shape[0])
        hist_rows = emb.rows(hist_steps)
        fut_rows = emb.rows(fut_steps)
        new_windows.append(
            replace(
                win,
                inputs=np.hstack([win.inputs, hist_rows]),
                future_covariates=fut_rows,
            )
        )
    attachment = CovariateAttachment(
        base_channels=base,
        embedded_channels=base + 2 * emb.n_modes,
        embedding_modes=emb.n_modes,
        origin_step=emb.origin_step,
    )
    return replace(windows, windows=new_windows, attachment=attachment)


def export_embedding(emb: TimeEmbedding, path) -> None:
    """Write the table as CSV: step, re_1..re_r, im_1..im_r.

    Values use 17 significant digits so the importer round-trips them
    bit-identically.
    """
    r = emb.n_modes
    header = ["step"] + [f"re_{i + 1}" for i in range(r)] + [f"im_{i + 1}" for i in range(r)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(emb.length):
            cells = [str(emb.origin_step + k)]
            cells += [f"{v:.17g}" for v in emb.table[k]]
            fh.write(",".join(cells) + "\n")


def import_embedding(path) -> tuple[np.ndarray, np.ndarray]:
    """Read an exported table back as (absolute steps, L x 2r table)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "step":
            raise DataError(f"not an embedding file: {path}")
        steps = []
        rows = []
        for row in reader:
            steps.append(int(row[0]))
            rows.append([float(v) for v in row[1:]])
    if not rows:
        raise DataError(f"embedding file has no data rows: {path}")
    return np.asarray(steps, dtype=int), np.asarray(rows, dtype=float)
