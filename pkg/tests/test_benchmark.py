import numpy as np
import pytest

from spca import data
from spca.baselines import fit_l2p_rpca, reconstruction_error
from spca.core import SelfPacedConfig, fit_spca


def occluded_split(seed, height=4, width=5, n=60, rank=3):
    ds = data.make_low_rank(height, width, n, rank, seed=seed)
    ds = data.occlude(ds, fraction=0.3, side_ratio=0.5, fill="black", seed=seed + 1000)
    train, test = data.split_per_class(ds, 0.5, seed=seed + 2000)
    X_train = data.normalize_samples(train).matrix
    X_test = data.normalize_samples(test).clean
    return X_train, X_test


@pytest.mark.slow
def test_self_paced_fit_beats_unit_weights_at_the_true_rank():
    wins = 0
    for seed in range(5):
        X_train, X_test = occluded_split(seed)
        U_spca, _, _ = fit_spca(X_train, SelfPacedConfig(k=3))
        U_l2p = fit_l2p_rpca(X_train, 3, 1.0)
        spca_error = reconstruction_error(X_test, U_spca)
        l2p_error = reconstruction_error(X_test, U_l2p)
        wins += spca_error <= l2p_error * 1.02
    assert wins >= 4


@pytest.mark.slow
@pytest.mark.parametrize("p", [0.5, 1.0])
def test_self_paced_fit_wins_across_target_dimensions(p):
    X_train, X_test = occluded_split(0, height=12, width=12, n=160, rank=15)
    wins = 0
    for k in (10, 20, 30, 40, 50):
        U_spca, _, _ = fit_spca(X_train, SelfPacedConfig(k=k, p=p))
        U_l2p = fit_l2p_rpca(X_train, k, p)
        wins += reconstruction_error(X_test, U_spca) <= reconstruction_error(X_test, U_l2p)
    assert wins >= 4


@pytest.mark.slow
def test_errors_shrink_with_k():
    X_train, X_test = occluded_split(0)
    errors = []
    for k in (1, 2, 3):
        U, _, _ = fit_spca(X_train, SelfPacedConfig(k=k))
        errors.append(reconstruction_error(X_test, U))
    assert errors[2] < errors[0]
    assert np.all(np.isfinite(errors))
