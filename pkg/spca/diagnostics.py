"""Numerical checks of the surrogate objective behind the self-paced updates.

F_eta(ell) integrates the closed-form weight w*(l, eta) from 0 to ell. It is
convex with F' = w*, its tangent Q is a minorant, the alternating updates
ascend sum_i F_eta(ell_i) as an MM scheme, and F contracts fidelity gaps by
at most w*(M, eta) when every fidelity stays below M.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy import integrate

from spca import constants
from spca.core import TrainingHistory, optimal_weight
from spca.errors import InvalidArgumentError

logger = logging.getLogger(__name__)


def _check_steps(steps):
    if isinstance(steps, bool) or not isinstance(steps, (int, np.integer)) or steps < 16:
        raise InvalidArgumentError(f"steps must be an integer >= 16, got {steps!r}")


def _check_fidelities(ell, name="ell"):
    ell = np.asarray(ell, dtype=float)
    if not np.all(np.isfinite(ell)) or np.any(ell < 0):
        raise InvalidArgumentError(f"{name} must be finite and non-negative")
    return ell


def surrogate_F(ell, eta, steps=constants.QUADRATURE_STEPS):
    """Composite Simpson estimate of the integral of w*(l, eta) over [0, ell].

    Vectorized over ell; each value gets its own uniform grid of `steps`
    intervals.
    """
    _check_steps(steps)
    ell = _check_fidelities(ell)
    t = np.linspace(0.0, 1.0, steps + 1)
    values = optimal_weight(ell[..., None] * t, eta)
    F = integrate.simpson(values, dx=1.0, axis=-1) * (ell / steps)
    return float(F) if F.ndim == 0 else F


def surrogate_Q(ell_U, ell_Ustar, eta, steps=constants.QUADRATURE_STEPS):
    """First-order expansion of F_eta at ell_Ustar, evaluated at ell_U."""
    ell_U = _check_fidelities(ell_U, "ell_U")
    ell_Ustar = _check_fidelities(ell_Ustar, "ell_Ustar")
    Q = surrogate_F(ell_Ustar, eta, steps) + optimal_weight(ell_Ustar, eta) * (ell_U - ell_Ustar)
    Q = np.asarray(Q)
    return float(Q) if Q.ndim == 0 else Q


@dataclass(frozen=True)
class SurrogateCurve:
    eta: float
    grid: np.ndarray
    F: np.ndarray
    steps: int


def surrogate_curve(eta, ell_grid, steps=constants.QUADRATURE_STEPS):
    grid = _check_fidelities(ell_grid, "ell_grid")
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidArgumentError("ell_grid must be a non-empty vector")
    return SurrogateCurve(eta=eta, grid=grid, F=surrogate_F(grid, eta, steps), steps=steps)


@dataclass(frozen=True)
class MinorantReport:
    worst_gap: float
    violations: int

    @property
    def ok(self):
        return self.violations == 0


def check_minorant(ell, ell_star, eta, steps=constants.QUADRATURE_STEPS):
    """Check F(ell) >= Q(ell | ell_star) element-wise."""
    gap = np.atleast_1d(surrogate_F(ell, eta, steps) - surrogate_Q(ell, ell_star, eta, steps))
    return MinorantReport(
        worst_gap=float(gap.min()),
        violations=int(np.sum(gap < -constants.MINORANT_ATOL)),
    )


@dataclass
class MonotonicityReport:
    objectives: np.ndarray
    deltas: np.ndarray
    violations: List[int] = field(default_factory=list)
    inner_violations: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations and not self.inner_violations

    def rows(self):
        """(iter, objective, delta, violation) rows, iterations counted from 1."""
        flagged = set(self.violations)
        for index, (objective, delta) in enumerate(zip(self.objectives, self.deltas)):
            yield index + 1, float(objective), float(delta), int(index + 1 in flagged)


def check_mm_monotonicity(
    history: TrainingHistory,
    eta,
    steps=constants.QUADRATURE_STEPS,
    rtol=constants.MONOTONE_RTOL,
    trace_rtol=constants.TRACE_RTOL,
):
    """Report ascent of sum_i F_eta(ell_i) across outer iterations and of
    tr(U'H) across the inner steps of each iteration."""
    if len(history) == 0:
        raise InvalidArgumentError("history is empty")
    objectives = np.array([np.sum(surrogate_F(record.fidelity.ell, eta, steps)) for record in history])
    deltas = np.concatenate([[0.0], np.diff(objectives)])
    violations = [
        index + 1
        for index in range(1, len(objectives))
        if deltas[index] < -rtol * abs(objectives[index - 1])
    ]

    inner_violations = []
    for record in history:
        trace = np.asarray(record.trace, dtype=float)
        for step in range(1, trace.shape[0]):
            if trace[step] < trace[step - 1] - trace_rtol * abs(trace[step - 1]):
                inner_violations.append((record.iteration, step))

    if violations:
        logger.warning("surrogate objective decreased at outer iterations %s", violations)
    if inner_violations:
        logger.warning("trace objective decreased at (iteration, step) %s", inner_violations)
    return MonotonicityReport(objectives, deltas, violations, inner_violations)


@dataclass(frozen=True)
class RobustnessReport:
    lipschitz: float
    worst_slack: float
    max_slack: float
    violations: int

    @property
    def ok(self):
        return self.violations == 0


def check_robustness_bound(ells, eta, M, steps=constants.QUADRATURE_STEPS):
    """Check |F(ell_i) - F(ell_j)| <= w*(M, eta) |ell_i - ell_j| over all pairs.

    Slack is w*(M) |ell_i - ell_j| - |F_i - F_j|; pairs with slack below
    -1e-9 count as violations.
    """
    ells = _check_fidelities(ells, "ells")
    if ells.ndim != 1 or ells.size == 0:
        raise InvalidArgumentError("ells must be a non-empty vector")
    if not np.isfinite(M) or np.any(ells >= M):
        raise InvalidArgumentError(f"every fidelity must lie below M = {M}")

    lipschitz = optimal_weight(M, eta)
    F = np.atleast_1d(surrogate_F(ells, eta, steps))
    slack = lipschitz * np.abs(ells[:, None] - ells[None, :]) - np.abs(F[:, None] - F[None, :])
    upper = np.triu_indices(ells.size, k=1)
    pairs = slack[upper] if upper[0].size else np.zeros(1)
    return RobustnessReport(
        lipschitz=float(lipschitz),
        worst_slack=float(pairs.min()),
        max_slack=float(pairs.max()),
        violations=int(np.sum(pairs < -constants.ROBUSTNESS_ATOL)),
    )


@dataclass(frozen=True)
class WeightCurve:
    etas: np.ndarray
    ells: np.ndarray
    w: np.ndarray  # len(etas) x len(ells)

    def rows(self):
        """(eta, ell, w, threshold) rows with threshold = 1/eta."""
        for i, eta in enumerate(self.etas):
            for j, ell in enumerate(self.ells):
                yield float(eta), float(ell), float(self.w[i, j]), 1.0 / float(eta)


def weight_curve(eta_list, ell_grid):
    etas = np.asarray(eta_list, dtype=float).ravel()
    ells = _check_fidelities(ell_grid, "ell_grid").ravel()
    if etas.size == 0 or ells.size == 0:
        raise InvalidArgumentError("eta_list and ell_grid must be non-empty")
    if not np.all(np.isfinite(etas)) or np.any(etas <= 0):
        raise InvalidArgumentError("every eta must be finite and positive")
    w = np.vstack([optimal_weight(ells, eta) for eta in etas])
    return WeightCurve(etas=etas, ells=ells, w=w)


def estimate_threshold(eta, ell_grid):
    """Fidelity at which w*(., eta) is steepest, i.e. where its second
    difference changes sign. Expected near 1/eta."""
    grid = _check_fidelities(ell_grid, "ell_grid").ravel()
    if grid.size < 3 or np.any(np.diff(grid) <= 0):
        raise InvalidArgumentError("ell_grid needs at least 3 strictly increasing values")
    slope = np.diff(optimal_weight(grid, eta)) / np.diff(grid)
    index = int(np.argmax(slope))
    if index in (0, slope.size - 1):
        raise InvalidArgumentError(f"ell_grid does not bracket the threshold 1/eta = {1.0 / eta}")
    return float((grid[index] + grid[index + 1]) / 2.0)
