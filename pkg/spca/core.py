"""Self-paced PCA: sample weights, fidelities, the weighted-Laplacian
Procrustes solver and the alternating driver.

Matrices follow the column convention: a data matrix is d x n with one
sample per column, a projection basis is d x k with orthonormal columns.
"""

import logging
import sys
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist
from scipy.special import expit, xlogy
from tqdm import tqdm

from spca import constants
from spca.errors import (
    DegenerateInputError,
    DimensionMismatchError,
    InvalidArgumentError,
)
from spca.global_random import GlobalRandom

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# validation


def as_data_matrix(X, name="X"):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InvalidArgumentError(f"{name} must be a 2-d matrix, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 2:
        raise InvalidArgumentError(
            f"{name} needs d >= 1 rows and n >= 2 sample columns, got {X.shape}"
        )
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError(f"{name} contains NaN or Inf entries")
    return X


def orthonormality_error(U):
    U = np.asarray(U, dtype=float)
    return float(np.max(np.abs(U.T @ U - np.eye(U.shape[1]))))


def check_basis(U, d=None, name="U"):
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[1] < 1:
        raise InvalidArgumentError(f"{name} must be a d x k matrix, got shape {U.shape}")
    if d is not None and U.shape[0] != d:
        raise DimensionMismatchError(
            f"{name} has {U.shape[0]} rows but the data have d = {d}"
        )
    if U.shape[1] > U.shape[0]:
        raise InvalidArgumentError(f"{name} has k = {U.shape[1]} > d = {U.shape[0]}")
    error = orthonormality_error(U)
    if error > constants.ORTHONORMAL_TOL:
        raise InvalidArgumentError(
            f"{name} is not column-orthonormal (max |U'U - I| = {error:.3g})"
        )
    return U


def check_weights(w, n, name="w"):
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise DimensionMismatchError(f"{name} has shape {w.shape}, expected ({n},)")
    if not np.all(np.isfinite(w)) or np.any(w < 0) or np.any(w > 1):
        raise InvalidArgumentError(f"every entry of {name} must lie in [0, 1]")
    return w


def _check_p(p):
    if not np.isfinite(p) or not 0 < p <= 2:
        raise InvalidArgumentError(f"p must lie in (0, 2], got {p}")


def _check_positive(value, name):
    if not np.isfinite(value) or value <= 0:
        raise InvalidArgumentError(f"{name} must be a finite positive number, got {value}")


def _as_output(value):
    # scalars in, floats out
    value = np.asarray(value)
    return float(value) if value.ndim == 0 else value


# ---------------------------------------------------------------------------
# self-paced weights


def regularizer_value(w, eta):
    """Self-paced regularizer f(w, eta), vectorized over w.

    The (1 - w) log(1 - w) term takes its limit 0 at w = 1.
    """
    _check_positive(eta, "eta")
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)) or np.any(w < 0) or np.any(w > 1):
        raise InvalidArgumentError("w must lie in [0, 1]")
    shifted = w + np.exp(-1.0 / eta)
    value = -xlogy(shifted, shifted) - xlogy(1.0 - w, 1.0 - w) - w / eta
    return _as_output(value)


def optimal_weight(ell, eta):
    """Closed-form maximizer of w * ell + f(w, eta) over w in [0, 1].

    Evaluated as sigmoid(ell - 1/eta) * (1 - exp(-ell)), which equals
    (exp(ell - 1/eta) - exp(-1/eta)) / (1 + exp(ell - 1/eta)) and cannot
    overflow for large ell.
    """
    _check_positive(eta, "eta")
    ell = np.asarray(ell, dtype=float)
    if np.any(np.isnan(ell)) or np.any(ell < 0):
        raise InvalidArgumentError("fidelity ell must be non-negative")
    # abs turns expm1(-0.0) = -0.0 into +0.0
    value = expit(ell - 1.0 / eta) * np.abs(np.expm1(-ell))
    return _as_output(value)


def explicit_objective(w, ell, eta):
    """sum_i w_i ell_i + f(w_i, eta) for one outer iteration."""
    w = np.asarray(w, dtype=float)
    ell = np.asarray(ell, dtype=float)
    return float(np.sum(w * ell) + np.sum(regularizer_value(w, eta)))


# ---------------------------------------------------------------------------
# fidelities


@dataclass(frozen=True)
class FidelityVector:
    """Per-sample fidelities.

    `normalized` means the vector was rescaled by its own maximum, so that
    maximum equals c. `scale` is the factor applied to the raw fidelities.
    """

    ell: np.ndarray
    normalized: bool = False
    scale: float = 1.0

    def __post_init__(self):
        ell = np.asarray(self.ell, dtype=float)
        if ell.ndim != 1 or np.any(np.isnan(ell)) or np.any(ell < 0):
            raise InvalidArgumentError("fidelities must be a vector of non-negative values")
        object.__setattr__(self, "ell", ell)

    def __len__(self):
        return self.ell.shape[0]


def fidelity(X, U, p):
    """ell_i = sum_j ||U'(x_i - x_j)||^p for every sample."""
    X = as_data_matrix(X)
    U = check_basis(U, d=X.shape[0])
    _check_p(p)
    projected = (U.T @ X).T
    distances = cdist(projected, projected)
    return FidelityVector(np.sum(distances**p, axis=1), normalized=False)


def normalize_fidelity(fid, c, peak=None):
    """Rescale fidelities so the largest maps to c.

    `peak` overrides the divisor; the driver passes the first iteration's
    maximum when the normalization is frozen. Only a vector divided by its
    own maximum comes back flagged `normalized`.
    """
    _check_positive(c, "c")
    if fid.normalized or fid.scale != 1.0:
        raise InvalidArgumentError("fidelity vector is already rescaled")
    own_peak = peak is None
    if own_peak:
        peak = float(np.max(fid.ell))
    if not peak > 0:
        raise DegenerateInputError(
            "all fidelities are zero: every pair of samples coincides after projection"
        )
    return FidelityVector((fid.ell / peak) * c, normalized=own_peak, scale=c / peak)


# ---------------------------------------------------------------------------
# projection update


@dataclass(frozen=True)
class PairGraph:
    """Reweighting graph of one inner step.

    s holds the smoothed distance powers, S the weight-symmetrized graph,
    degree the diagonal of D and laplacian = D - S.
    """

    s: np.ndarray
    S: np.ndarray
    degree: np.ndarray
    laplacian: np.ndarray

    @property
    def D(self):
        return np.diag(self.degree)


def pair_weights(X, U, w, p, eps_dist=constants.EPS_DIST):
    X = as_data_matrix(X)
    U = check_basis(U, d=X.shape[0])
    w = check_weights(w, X.shape[1])
    _check_p(p)
    if not np.isfinite(eps_dist) or eps_dist < 0:
        raise InvalidArgumentError(f"eps_dist must be >= 0, got {eps_dist}")

    projected = (U.T @ X).T
    squared = cdist(projected, projected, "sqeuclidean")
    with np.errstate(divide="ignore"):
        s = (squared + eps_dist) ** ((p - 2.0) / 2.0)
    np.fill_diagonal(s, 0.0)
    S = s * ((w[:, None] + w[None, :]) / 2.0)
    degree = S.sum(axis=1)
    return PairGraph(s=s, S=S, degree=degree, laplacian=np.diag(degree) - S)


def sign_fix(Q, Vt=None):
    """Flip column pairs so the largest-magnitude entry of each Q column is positive."""
    rows = np.argmax(np.abs(Q), axis=0)
    signs = np.sign(Q[rows, np.arange(Q.shape[1])])
    signs[signs == 0] = 1.0
    if Vt is None:
        return Q * signs
    return Q * signs, Vt * signs[:, None]


def procrustes_polar(H):
    """Column-orthonormal maximizer of tr(W'H).

    With the thin SVD H = Q Sigma V', the maximizer is Q V'. Rank-deficient
    input still yields an orthonormal basis: the LAPACK factors are
    deterministic and signs are fixed by `sign_fix`.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] < H.shape[1]:
        raise InvalidArgumentError(f"H must be d x k with d >= k, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise InvalidArgumentError("H contains NaN or Inf entries")
    Q, _, Vt = linalg.svd(H, full_matrices=False)
    Q, Vt = sign_fix(Q, Vt)
    return Q @ Vt


def _evaluate(X, U, w, p, eps_dist):
    graph = pair_weights(X, U, w, p, eps_dist)
    H = X @ (graph.laplacian @ (X.T @ U))
    return graph, H, float(np.sum(U * H))


def _is_degenerate(H, X, laplacian):
    h_norm = linalg.norm(H)
    scale = linalg.norm(X) ** 2 * linalg.norm(laplacian)
    return h_norm == 0 or h_norm <= constants.DEGENERATE_RTOL * scale


def update_projection(
    X,
    w,
    p,
    U0,
    inner_tol=constants.INNER_TOL,
    inner_max=constants.INNER_MAX,
    eps_dist=constants.EPS_DIST,
):
    """Maximize sum_ij w_i ||U'(x_i - x_j)||^p over orthonormal U for fixed w.

    Args:
        X: d x n data matrix.
        w: sample weights in [0, 1].
        p: distance exponent in (0, 2].
        U0: starting basis.
        inner_tol: stop once tr(U'H) changes by less than this, relatively.
        inner_max: maximum number of Procrustes updates.
        eps_dist: smoothing added to squared distances before the p - 2 power.

    Returns:
        (U, trace) where trace[t] is tr(U_t' H_t) at the t-th iterate,
        starting with the incoming basis.
    """
    X = as_data_matrix(X)
    U = check_basis(U0, d=X.shape[0], name="U0")
    if inner_max < 1 or not inner_tol > 0:
        raise InvalidArgumentError("inner_max must be >= 1 and inner_tol > 0")

    graph, H, value = _evaluate(X, U, w, p, eps_dist)
    trace = [value]
    for step in range(inner_max):
        if _is_degenerate(H, X, graph.laplacian):
            logger.warning(
                "weighted pair differences vanish at inner step %d, keeping the current basis",
                step,
            )
            break
        U = procrustes_polar(H)
        graph, H, value = _evaluate(X, U, w, p, eps_dist)
        logger.debug("inner step %d: trace %.17g", step + 1, value)
        previous = trace[-1]
        trace.append(value)
        if abs(value - previous) <= inner_tol * abs(previous):
            break
    return U, trace


def weighted_objective(X, U, w, p):
    """sum_ij w_i ||U'(x_i - x_j)||^p, evaluated exactly."""
    X = as_data_matrix(X)
    U = check_basis(U, d=X.shape[0])
    w = check_weights(w, X.shape[1])
    projected = (U.T @ X).T
    return float(np.sum(w[:, None] * cdist(projected, projected) ** p))


# ---------------------------------------------------------------------------
# initialization


def _complete_basis(B, k):
    # extend orthonormal columns with Gram-Schmidt on the coordinate axes
    d = B.shape[0]
    columns = [B[:, j] for j in range(B.shape[1])]
    for axis in range(d):
        if len(columns) == k:
            break
        v = np.zeros(d)
        v[axis] = 1.0
        for _ in range(2):
            for u in columns:
                v = v - (u @ v) * u
        norm = linalg.norm(v)
        if norm > 1e-6:
            columns.append(v / norm)
    return np.column_stack(columns)


def pca_basis(X, k):
    """Top-k principal directions of the centered data.

    Returns:
        (U, eigenvalues, mean) with eigenvalues of the covariance in
        descending order.
    """
    X = as_data_matrix(X)
    d, n = X.shape
    if not 1 <= k <= d:
        raise InvalidArgumentError(f"k must lie in [1, d = {d}], got {k}")
    mean = X.mean(axis=1)
    Q, sigma, _ = linalg.svd(X - mean[:, None], full_matrices=False)
    eigenvalues = sigma**2 / n
    Q = sign_fix(Q[:, :k])
    if Q.shape[1] < k:
        Q = _complete_basis(Q, k)
        eigenvalues = np.concatenate([eigenvalues, np.zeros(k - eigenvalues.shape[0])])
    return Q, eigenvalues[:k], mean


def initial_basis(X, k, init=constants.INIT, seed=constants.SEED):
    X = as_data_matrix(X)
    d = X.shape[0]
    if init == "pca":
        U, _, _ = pca_basis(X, k)
        return U
    if init == "random":
        if not 1 <= k <= d:
            raise InvalidArgumentError(f"k must lie in [1, d = {d}], got {k}")
        gaussian = GlobalRandom(seed).standard_normal((d, k))
        Q, _ = linalg.qr(gaussian, mode="economic")
        return sign_fix(Q)
    raise InvalidArgumentError(f"unknown init {init!r}, expected one of {constants.INIT_METHODS}")


def principal_angles(A, B):
    """Principal angles (radians, descending) between the column spaces of A and B."""
    return linalg.subspace_angles(np.asarray(A, dtype=float), np.asarray(B, dtype=float))


# ---------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class SelfPacedConfig:
    k: int
    p: float = constants.P
    eta: float = constants.ETA
    c: float = constants.C
    outer_iters: int = constants.OUTER_ITERS
    inner_tol: float = constants.INNER_TOL
    inner_max: int = constants.INNER_MAX
    eps_dist: float = constants.EPS_DIST
    seed: int = constants.SEED
    init: str = constants.INIT
    normalization: str = constants.NORMALIZATION

    def __post_init__(self):
        for name in ("k", "outer_iters", "inner_max"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise InvalidArgumentError(f"seed must be an unsigned integer, got {self.seed!r}")
        _check_p(self.p)
        _check_positive(self.eta, "eta")
        _check_positive(self.c, "c")
        _check_positive(self.inner_tol, "inner_tol")
        _check_positive(self.eps_dist, "eps_dist")
        if self.init not in constants.INIT_METHODS:
            raise InvalidArgumentError(
                f"init must be one of {constants.INIT_METHODS}, got {self.init!r}"
            )
        if self.normalization not in constants.NORMALIZATION_MODES:
            raise InvalidArgumentError(
                f"normalization must be one of {constants.NORMALIZATION_MODES}, "
                f"got {self.normalization!r}"
            )


@dataclass
class IterationRecord:
    iteration: int
    weights: np.ndarray
    raw_fidelity: np.ndarray
    fidelity: FidelityVector
    objective: float
    trace: List[float] = field(default_factory=list)

    @property
    def inner_iterations(self):
        return len(self.trace) - 1


class TrainingHistory:
    def __init__(self, records: Optional[List[IterationRecord]] = None):
        self.records = list(records) if records else []

    def append(self, record: IterationRecord):
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, index):
        return self.records[index]

    @property
    def objectives(self):
        return np.array([record.objective for record in self.records])

    @property
    def weights(self):
        return np.vstack([record.weights for record in self.records])


def fit_spca(X, cfg: SelfPacedConfig, progress=False):
    """Alternate fidelity, weight and projection updates for cfg.outer_iters rounds.

    Columns of X are expected to be normalized by the caller.

    Returns:
        (U, w, history): final basis, final weights and one record per
        outer iteration.
    """
    X = as_data_matrix(X)
    d = X.shape[0]
    if cfg.k > d:
        raise InvalidArgumentError(f"k = {cfg.k} exceeds the data dimension d = {d}")

    U = initial_basis(X, cfg.k, cfg.init, cfg.seed)
    history = TrainingHistory()
    frozen_peak = None
    for iteration in tqdm(
        range(1, cfg.outer_iters + 1), file=sys.stdout, disable=not progress, desc="spca"
    ):
        raw = fidelity(X, U, cfg.p)
        peak = float(np.max(raw.ell))
        if not peak > 0:
            raise DegenerateInputError(
                f"outer iteration {iteration}: all fidelities are zero "
                "(every sample coincides with every other after projection)"
            )
        if cfg.normalization == "every":
            ell = normalize_fidelity(raw, cfg.c)
        elif cfg.normalization == "first":
            if frozen_peak is None:
                frozen_peak = peak
                ell = normalize_fidelity(raw, cfg.c)
            else:
                ell = normalize_fidelity(raw, cfg.c, peak=frozen_peak)
        else:
            ell = raw

        weights = optimal_weight(ell.ell, cfg.eta)
        objective = explicit_objective(weights, ell.ell, cfg.eta)
        U, trace = update_projection(
            X, weights, cfg.p, U, cfg.inner_tol, cfg.inner_max, cfg.eps_dist
        )
        history.append(
            IterationRecord(
                iteration=iteration,
                weights=weights,
                raw_fidelity=raw.ell,
                fidelity=ell,
                objective=objective,
                trace=trace,
            )
        )
        logger.info(
            "outer iteration %d: objective %.6g, weights in [%.4f, %.4f], %d inner steps",
            iteration,
            objective,
            weights.min(),
            weights.max(),
            len(trace) - 1,
        )
    return U, weights, history
