"""Reference methods (classical PCA, L2,p-RPCA) and the reconstruction-error metric."""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from spca import constants
from spca.core import (
    as_data_matrix,
    check_basis,
    initial_basis,
    pca_basis,
    update_projection,
)
from spca.errors import DimensionMismatchError, InvalidArgumentError


@dataclass(frozen=True)
class PcaModel:
    U: np.ndarray
    mean: np.ndarray
    eigenvalues: np.ndarray

    def reconstruct(self, x):
        """Mean-aware reconstruction m + UU'(x - m)."""
        x = _as_vector(x, self.U.shape[0])
        return self.mean + self.U @ (self.U.T @ (x - self.mean))


def _as_vector(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise DimensionMismatchError(f"expected a vector of length {d}, got shape {x.shape}")
    return x


def fit_pca(X, k):
    X = as_data_matrix(X)
    d, n = X.shape
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 1 <= k <= min(d, n):
        raise InvalidArgumentError(f"k must be an integer in [1, min(d, n) = {min(d, n)}], got {k!r}")
    U, eigenvalues, mean = pca_basis(X, k)
    return PcaModel(U=U, mean=mean, eigenvalues=eigenvalues)


def fit_l2p_rpca(
    X,
    k,
    p,
    inner_tol=constants.INNER_TOL,
    inner_max=constants.L2P_MAX_ITER,
    eps_dist=constants.EPS_DIST,
    init=constants.INIT,
    seed=constants.SEED,
    return_trace=False,
):
    """Maximize sum_ij ||U'(x_i - x_j)||^p, i.e. the self-paced update with w = 1."""
    X = as_data_matrix(X)
    U0 = initial_basis(X, k, init, seed)
    U, trace = update_projection(X, np.ones(X.shape[1]), p, U0, inner_tol, inner_max, eps_dist)
    if return_trace:
        return U, trace
    return U


def reconstruction_error(X_clean_test, U):
    """Average residual norm (1/n) sum_i ||x_i - UU'x_i|| over test columns, no centering."""
    X = np.asarray(X_clean_test, dtype=float)
    if X.ndim != 2 or X.shape[1] < 1:
        raise InvalidArgumentError(f"test data must be a d x n matrix, got shape {X.shape}")
    U = check_basis(U, d=X.shape[0])
    residual = X - U @ (U.T @ X)
    return float(np.mean(linalg.norm(residual, axis=0)))


def reconstruct(x, U):
    U = check_basis(U)
    x = _as_vector(x, U.shape[0])
    return U @ (U.T @ x)
