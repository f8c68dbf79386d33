import numpy as np
import pytest

from spca.core import (
    FidelityVector,
    IterationRecord,
    SelfPacedConfig,
    TrainingHistory,
    fit_spca,
    optimal_weight,
    regularizer_value,
)
from spca.diagnostics import (
    check_minorant,
    check_mm_monotonicity,
    check_robustness_bound,
    estimate_threshold,
    surrogate_F,
    surrogate_Q,
    surrogate_curve,
    weight_curve,
)
from spca.errors import InvalidArgumentError


def closed_form_F(ell, eta):
    """Antiderivative of the weight curve, vanishing at zero."""
    a = 1.0 / eta
    ell = np.asarray(ell, dtype=float)
    scale = 1.0 + np.exp(-a)
    return scale * (np.logaddexp(0.0, ell - a) - np.logaddexp(0.0, -a)) - np.exp(-a) * ell


def record(iteration, ell, trace=(0.0, 1.0)):
    ell = np.asarray(ell, dtype=float)
    return IterationRecord(
        iteration=iteration,
        weights=optimal_weight(ell, 0.1),
        raw_fidelity=ell,
        fidelity=FidelityVector(ell),
        objective=0.0,
        trace=list(trace),
    )


# surrogate F and its tangent


def test_surrogate_vanishes_at_zero():
    assert surrogate_F(0.0, 0.1) == 0.0


@pytest.mark.parametrize("eta", [0.05, 0.1, 0.2, 1.0])
def test_surrogate_matches_the_closed_form(eta):
    ell = np.linspace(0.0, 20.0, 41)
    np.testing.assert_allclose(surrogate_F(ell, eta), closed_form_F(ell, eta), atol=1e-7)


def test_coarse_and_fine_quadrature_agree():
    assert surrogate_F(10.0, 0.2, steps=256) == pytest.approx(surrogate_F(10.0, 0.2, steps=4096), abs=1e-6)


def test_surrogate_is_bounded_by_the_rectangle():
    ell = np.linspace(0.0, 25.0, 101)
    assert np.all(surrogate_F(ell, 0.1) <= ell * optimal_weight(ell, 0.1) + 1e-9)


def test_surrogate_vectorizes_like_the_scalar_form():
    ell = np.array([0.5, 3.0, 12.0])
    vector = surrogate_F(ell, 0.2)
    for value, expected in zip(vector, ell):
        assert value == pytest.approx(surrogate_F(float(expected), 0.2), rel=1e-14)


@pytest.mark.parametrize("steps", [8, 100.0, True])
def test_surrogate_rejects_bad_steps(steps):
    with pytest.raises(InvalidArgumentError):
        surrogate_F(1.0, 0.1, steps=steps)


@pytest.mark.parametrize("ell", [-1.0, np.inf, np.nan])
def test_surrogate_rejects_bad_fidelity(ell):
    with pytest.raises(InvalidArgumentError):
        surrogate_F(ell, 0.1)


def test_surrogate_is_convex():
    curve = surrogate_curve(0.1, np.linspace(0.0, 20.0, 201))
    assert np.all(np.diff(curve.F, 2) >= -1e-9)


@pytest.mark.parametrize("eta", [0.1, 0.5])
def test_surrogate_derivative_is_the_weight(eta):
    h = 1e-3
    ell = np.linspace(0.5, 15.0, 30)
    derivative = (surrogate_F(ell + h, eta) - surrogate_F(ell - h, eta)) / (2 * h)
    np.testing.assert_allclose(derivative, optimal_weight(ell, eta), atol=1e-5)


def test_tangent_touches_at_the_expansion_point():
    ell = np.array([0.0, 2.0, 9.5])
    np.testing.assert_allclose(surrogate_Q(ell, ell, 0.1), surrogate_F(ell, 0.1), rtol=1e-14)


def test_tangent_is_a_minorant(rng):
    ell = rng.uniform(0.0, 30.0, size=1000)
    ell_star = rng.uniform(0.0, 30.0, size=1000)
    for eta in (0.05, 0.1, 0.5, 2.0):
        report = check_minorant(ell, ell_star, eta)
        assert report.ok, (eta, report.worst_gap)


def test_tangent_at_zero_is_flat():
    ell = np.linspace(0.0, 10.0, 11)
    np.testing.assert_array_equal(surrogate_Q(ell, np.zeros(11), 0.1), np.zeros(11))
    assert check_minorant(ell, np.zeros(11), 0.1).worst_gap >= 0.0


# monotonicity


def test_single_record_is_trivially_monotone():
    history = TrainingHistory([record(1, [1.0, 2.0])])
    report = check_mm_monotonicity(history, 0.1)
    assert report.ok
    assert list(report.rows()) == [(1, report.objectives[0], 0.0, 0)]


def test_empty_history_is_rejected():
    with pytest.raises(InvalidArgumentError):
        check_mm_monotonicity(TrainingHistory(), 0.1)


def test_frozen_scale_fit_ascends(occluded_synthetic):
    X = occluded_synthetic().matrix
    cfg = SelfPacedConfig(k=3, outer_iters=6, normalization="first")
    _, _, history = fit_spca(X, cfg)
    report = check_mm_monotonicity(history, cfg.eta)
    assert report.ok, (report.violations, report.inner_violations)
    assert len(report.objectives) == 6


def test_surrogate_sum_tracks_the_explicit_objective(occluded_synthetic):
    X = occluded_synthetic().matrix
    cfg = SelfPacedConfig(k=3, outer_iters=3)
    _, _, history = fit_spca(X, cfg)
    report = check_mm_monotonicity(history, cfg.eta)
    offset = X.shape[1] * regularizer_value(0.0, cfg.eta)
    np.testing.assert_allclose(report.objectives + offset, history.objectives, atol=1e-6)


def test_injected_decrease_is_flagged():
    ells = [[1.0, 2.0], [2.0, 3.0], [0.5, 0.5], [3.0, 4.0]]
    history = TrainingHistory([record(i + 1, ell) for i, ell in enumerate(ells)])
    report = check_mm_monotonicity(history, 0.1)
    assert report.violations == [3]
    assert not report.ok
    flags = [row[3] for row in report.rows()]
    assert flags == [0, 0, 1, 0]


def test_injected_trace_drop_is_flagged():
    history = TrainingHistory(
        [record(1, [1.0, 2.0]), record(2, [2.0, 3.0], trace=[1.0, 2.0, 1.5, 1.6])]
    )
    report = check_mm_monotonicity(history, 0.1)
    assert report.violations == []
    assert report.inner_violations == [(2, 2)]


# robustness bound


def test_equal_fidelities_have_zero_slack():
    report = check_robustness_bound(np.full(5, 3.0), 0.1, 10.0)
    assert report.ok
    assert report.worst_slack == 0.0


def test_single_fidelity_is_accepted():
    report = check_robustness_bound(np.array([2.0]), 0.1, 10.0)
    assert report.ok
    assert report.lipschitz == pytest.approx(optimal_weight(10.0, 0.1))


def test_bound_holds_on_an_even_grid():
    report = check_robustness_bound(np.linspace(0.0, 14.9, 50), 0.1, 15.0)
    assert report.ok
    assert report.lipschitz < 1.0
    assert report.max_slack > 0.0


@pytest.mark.parametrize("eta", [0.05, 0.1, 0.2, 1.0])
def test_bound_holds_on_random_fidelities(rng, eta):
    ells = rng.uniform(0.0, 15.0, size=200)
    M = ells.max() * (1 + 1e-6) + 1e-12
    report = check_robustness_bound(ells, eta, M)
    assert report.ok, report.worst_slack
    assert report.lipschitz < 1.0


@pytest.mark.parametrize("M", [5.0, 4.0, np.inf])
def test_bound_needs_fidelities_below_M(M):
    with pytest.raises(InvalidArgumentError):
        check_robustness_bound(np.array([1.0, 5.0]), 0.1, M)


# weight curve and threshold


def test_weight_curve_rows():
    curve = weight_curve([0.1, 0.5], [0.0, 1.0, 10.0])
    rows = list(curve.rows())
    assert len(rows) == 6
    assert rows[0] == (0.1, 0.0, 0.0, 10.0)
    assert rows[4][:2] == (0.5, 1.0)
    assert rows[4][2] == pytest.approx(optimal_weight(1.0, 0.5))
    assert rows[4][3] == 2.0


def test_weight_curve_shape_and_ordering():
    etas = [0.05, 0.1, 0.2, 0.5, 1.0]
    curve = weight_curve(etas, np.linspace(0.0, 20.0, 201))
    assert curve.w.shape == (5, 201)
    np.testing.assert_array_equal(curve.w[:, 0], np.zeros(5))
    assert np.all(np.diff(curve.w, axis=1) >= -1e-15)
    # larger eta admits samples earlier
    assert np.all(np.diff(curve.w[:, 1:-1], axis=0) >= 0)


@pytest.mark.parametrize("etas", [[], [0.0], [-1.0], [np.nan]])
def test_weight_curve_rejects_bad_etas(etas):
    with pytest.raises(InvalidArgumentError):
        weight_curve(etas, [0.0, 1.0])


@pytest.mark.parametrize("eta", [0.1, 0.2])
def test_threshold_sits_at_one_over_eta(eta):
    estimate = estimate_threshold(eta, np.linspace(0.0, 20.0, 2001))
    assert estimate == pytest.approx(1.0 / eta, abs=0.05)


def test_threshold_needs_a_bracketing_grid():
    with pytest.raises(InvalidArgumentError):
        estimate_threshold(0.1, np.linspace(0.0, 5.0, 51))


def test_threshold_needs_an_increasing_grid():
    with pytest.raises(InvalidArgumentError):
        estimate_threshold(0.1, [0.0, 12.0, 11.0, 20.0])
