"""Sparsity-promoting amplitude selection for fitted mode decompositions.

Solves the l1-regularized amplitude fit

    minimize  ||H - modes diag(a) Vandermonde||_F^2 + gamma * sum_i |a_i|

by alternating-direction iterations: a closed-form Hermitian solve for
the quadratic block and group soft-thresholding for the l1 block.
Conjugate eigenvalue pairs are thresholded jointly on their combined
magnitude so a real-valued embedding never receives half a pair.
Surviving amplitudes are polished by an unregularized refit restricted
to the support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dmd import DmdDecomposition, amplitude_quadratic, conjugate_groups, fit_geometry
from .hankel import HankelView

SUPPORT_EPS = 0.0  # prox produces exact zeros; support is strict nonzero


@dataclass(frozen=True)
class AdmmOptions:
    """Iteration controls for the alternating-direction solver."""

    rho: float = 1.0
    max_iter: int = 10_000
    tol_primal: float = 1e-6
    tol_dual: float = 1e-6


@dataclass
class SpdmdSolution:
    """One solve at a fixed sparsity weight gamma.

    fit_loss is the squared Frobenius residual of the reconstruction at
    these amplitudes (no penalty term). Pruned entries are exactly zero.
    """

    gamma: float
    amplitudes: np.ndarray
    support: np.ndarray
    nonzero_count: int
    fit_loss: float
    polished: bool
    converged: bool
    iterations: int

    @property
    def pair_count(self) -> int:
        """Number of supported conjugate groups (pairs count once)."""
        return sum(1 for g in self._groups if self.support[g[0]])

    _groups: list[list[int]] = field(default_factory=list, repr=False)


@dataclass
class SpdmdPath:
    """Solutions along an ascending gamma grid, warm-started in order."""

    gammas: np.ndarray
    solutions: list[SpdmdSolution]
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class GammaGrid:
    """Geometric gamma grid spanning the two trivial limits."""

    num: int = 50
    lo_ratio: float = 1e-6


@dataclass
class SweepResult:
    path: SpdmdPath
    selected: SpdmdSolution
    target_pairs: int
    achieved_pairs: int
    target_met: bool


class _AmplitudeProblem:
    """Cached quadratic form a*Pa - 2Re(q*a) + s plus pair structure."""

    def __init__(self, dec: DmdDecomposition, view: HankelView):
        geometry = fit_geometry(view, dec.fit_span)
        self.p, self.q, self.s = amplitude_quadratic(dec.eigenvalues, dec.modes, geometry)
        self.groups = conjugate_groups(dec.eigenvalues)
        # Group-lasso weight sqrt(group size) makes the joint threshold
        # equivalent to the plain l1 penalty on a conjugate-symmetric pair.
        self.weights = np.empty(len(dec.eigenvalues))
        for g in self.groups:
            self.weights[g] = math.sqrt(len(g))

    def loss(self, amplitudes: np.ndarray) -> float:
        quad = np.real(amplitudes.conj() @ (self.p @ amplitudes))
        lin = 2.0 * np.real(self.q.conj() @ amplitudes)
        return max(0.0, self.s + quad - lin)

    def least_squares(self) -> np.ndarray:
        try:
            return np.linalg.solve(self.p, self.q)
        except np.linalg.LinAlgError:
            return np.linalg.lstsq(self.p, self.q, rcond=None)[0]

    def gamma_max(self) -> float:
        """Smallest gamma whose optimum is the all-zero amplitude vector.

        Zero is optimal once gamma >= 2 ||q_g||_2 / w_g for every
        conjugate group g (subgradient certificate of the group-l1
        problem at the origin).
        """
        bound = 0.0
        for g in self.groups:
            norm = float(np.linalg.norm(self.q[g]))
            bound = max(bound, 2.0 * norm / math.sqrt(len(g)))
        return bound

    def group_threshold(self, v: np.ndarray, kappa: float) -> np.ndarray:
        out = np.zeros_like(v)
        for g in self.groups:
            w = self.weights[g[0]]
            norm = float(np.linalg.norm(v[g]))
            if norm > kappa * w:
                out[g] = (1.0 - kappa * w / norm) * v[g]
        return out


def _admm(
    problem: _AmplitudeProblem,
    gamma: float,
    opts: AdmmOptions,
    beta0: np.ndarray | None = None,
    dual0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, bool, int]:
    r = problem.q.size
    rho = opts.rho
    system = problem.p + 0.5 * rho * np.eye(r)
    beta = np.zeros(r, dtype=complex) if beta0 is None else beta0.copy()
    dual = np.zeros(r, dtype=complex) if dual0 is None else dual0.copy()
    kappa = gamma / rho
    converged = False
    iterations = opts.max_iter
    for it in range(1, opts.max_iter + 1):
        alpha = np.linalg.solve(system, problem.q + 0.5 * rho * (beta - dual))
        beta_prev = beta
        beta = problem.group_threshold(alpha + dual, kappa)
        dual = dual + alpha - beta
        primal = float(np.linalg.norm(alpha - beta))
        dual_res = rho * float(np.linalg.norm(beta - beta_prev))
        if primal <= opts.tol_primal and dual_res <= opts.tol_dual:
            converged = True
            iterations = it
            break
    return beta, dual, converged, iterations


def _make_solution(
    problem: _AmplitudeProblem,
    gamma: float,
    amplitudes: np.ndarray,
    polished: bool,
    converged: bool,
    iterations: int,
) -> SpdmdSolution:
    support = np.abs(amplitudes) > SUPPORT_EPS
    return SpdmdSolution(
        gamma=gamma,
        amplitudes=amplitudes,
        support=support,
        nonzero_count=int(support.sum()),
        fit_loss=problem.loss(amplitudes),
        polished=polished,
        converged=converged,
        iterations=iterations,
        _groups=problem.groups,
    )


def spdmd_solve(
    dec: DmdDecomposition,
    view: HankelView,
    gamma: float,
    opts: AdmmOptions | None = None,
) -> SpdmdSolution:
    """Sparse amplitude solve at one gamma; no polishing applied.

    Non-convergence at the iteration cap returns the best iterate with
    ``converged`` False rather than raising.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    opts = opts or AdmmOptions()
    problem = _AmplitudeProblem(dec, view)
    beta, _, converged, iterations = _admm(problem, gamma, opts)
    return _make_solution(problem, gamma, beta, False, converged, iterations)


def polish(dec: DmdDecomposition, view: HankelView, support: np.ndarray) -> np.ndarray:
    """Unregularized amplitude refit restricted to the support mask.

    Off-support entries are exactly zero; on-support entries solve the
    restricted normal equations.
    """
    problem = _AmplitudeProblem(dec, view)
    return _polish_on(problem, np.asarray(support, dtype=bool))


def _polish_on(problem: _AmplitudeProblem, support: np.ndarray) -> np.ndarray:
    if not support.any():
        raise ValueError("polish requires a nonempty support")
    idx = np.nonzero(support)[0]
    sub = problem.p[np.ix_(idx, idx)]
    try:
        solved = np.linalg.solve(sub, problem.q[idx])
    except np.linalg.LinAlgError:
        solved = np.linalg.lstsq(sub, problem.q[idx], rcond=None)[0]
    out = np.zeros(support.size, dtype=complex)
    out[idx] = solved
    return out


def gamma_sweep(
    dec: DmdDecomposition,
    view: HankelView,
    target_modes: int,
    grid: GammaGrid | None = None,
    opts: AdmmOptions | None = None,
) -> SweepResult:
    """Warm-started sweep over an ascending gamma grid.

    ``target_modes`` counts conjugate-pair representatives: a retained
    pair and a retained real mode each count once. Returns the polished
    solution whose pair count is closest to the target, preferring fewer
    pairs on ties, then lower fit loss.
    """
    grid = grid or GammaGrid()
    opts = opts or AdmmOptions()
    problem = _AmplitudeProblem(dec, view)
    n_groups = len(problem.groups)
    if not 1 <= target_modes <= dec.rank:
        raise ValueError(f"target_modes must be in [1, {dec.rank}], got {target_modes}")
    gamma_hi = problem.gamma_max()
    if gamma_hi <= 0:
        raise ValueError("degenerate problem: zero data certificate")
    gammas = np.geomspace(grid.lo_ratio * gamma_hi, gamma_hi, grid.num)

    solutions: list[SpdmdSolution] = []
    warnings: list[str] = []
    beta = problem.least_squares()
    dual = np.zeros_like(beta)
    prev_count: int | None = None
    for gamma in gammas:
        beta, dual, converged, iterations = _admm(problem, float(gamma), opts, beta, dual)
        support = np.abs(beta) > SUPPORT_EPS
        if support.any():
            amplitudes = _polish_on(problem, support)
        else:
            amplitudes = np.zeros_like(beta)
        sol = _make_solution(problem, float(gamma), amplitudes, True, converged, iterations)
        if prev_count is not None and sol.nonzero_count > prev_count + 1:
            warnings.append(
                f"nonzero count rose from {prev_count} to {sol.nonzero_count} "
                f"at gamma={gamma:.6g}"
            )
        prev_count = sol.nonzero_count
        solutions.append(sol)

    path = SpdmdPath(gammas=gammas, solutions=solutions, warnings=warnings)
    target = min(target_modes, n_groups)

    def sort_key(sol: SpdmdSolution):
        pairs = sol.pair_count
        return (abs(pairs - target), pairs, sol.fit_loss, sol.gamma)

    selected = min(solutions, key=sort_key)
    achieved = selected.pair_count
    return SweepResult(
        path=path,
        selected=selected,
        target_pairs=target,
        achieved_pairs=achieved,
        target_met=achieved == target,
    )


def export_path_csv(path: SpdmdPath, destination) -> None:
    """Write the sweep path as CSV: gamma, nonzero_count, fit_loss, flags."""
    with open(destination, "w", encoding="utf-8") as fh:
        fh.write("gamma,nonzero_count,fit_loss,polished,converged\n")
        for sol in path.solutions:
            fh.write(
                f"{sol.gamma:.17g},{sol.nonzero_count},{sol.fit_loss:.17g},"
                f"{int(sol.polished)},{int(sol.converged)}\n"
            )
