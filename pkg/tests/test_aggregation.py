import numpy as np
import pytest

from src.gp.core import fit_gp
from src.gp.kernel import JITTER
from src.lagp.local_expert import LocalExpert
from src.palm.aggregation import (
    calibrate_tau2,
    combine_predictions,
    default_power,
    empirical_s2,
    estimate_rho,
    indicator_weights,
    pooled_nugget,
    predictive_kernel,
    rho_matrix,
    weights,
)


def test_weights_form_a_simplex(rng):
    s = np.exp(rng.uniform(-20, 5, size=(10_000, 7)))
    for p in (0.5, 1.0, 4.64, 7.0):
        w = weights(s, p)
        assert np.all(w >= 0)
        np.testing.assert_allclose(w.sum(axis=1), 1.0, rtol=0, atol=1e-12)


def test_power_one_is_plain_precision_weighting(rng):
    s = rng.uniform(0.01, 3.0, size=(10_000, 5))
    phi = 1.0 / s
    np.testing.assert_allclose(weights(s, 1.0), phi / phi.sum(axis=1, keepdims=True), rtol=1e-12)


def test_equal_variances_give_uniform_weights():
    np.testing.assert_array_equal(weights(np.full(4, 0.37), 6.0), np.full(4, 0.25))


def test_powering_sharpens_weights():
    s = np.array([0.1, 0.2, 0.4])
    assert weights(s, 4.0)[0] > weights(s, 1.0)[0]


def test_tiny_variances_do_not_overflow():
    w = weights(np.array([1e-300, 1e-200, 1.0]), 7.0)
    np.testing.assert_allclose(w, [1.0, 0.0, 0.0], atol=1e-12)


def test_weights_reject_nonpositive_variance():
    with pytest.raises(ValueError):
        weights(np.array([1.0, 0.0]), 1.0)


def test_indicator_weights_reproduce_partition_prediction(rng):
    means = rng.standard_normal((6, 4))
    variances = rng.uniform(0.1, 1.0, size=(6, 4))
    assignment = np.array([0, 3, 1, 1, 2, 0])
    mean, variance = combine_predictions(means, variances, indicator_weights(assignment, 4), np.eye(4))
    rows = np.arange(6)
    np.testing.assert_array_equal(mean, means[rows, assignment])
    np.testing.assert_allclose(variance, variances[rows, assignment], rtol=1e-14)


def test_combined_variance_is_quadratic_form(rng):
    means = rng.standard_normal((1, 3))
    variances = rng.uniform(0.1, 1.0, size=(1, 3))
    w = np.array([[0.2, 0.5, 0.3]])
    rho = np.array([[1.0, 0.4, 0.1], [0.4, 1.0, 0.2], [0.1, 0.2, 1.0]])
    _, variance = combine_predictions(means, variances, w, rho)
    ws = w[0] * np.sqrt(variances[0])
    assert variance[0] == pytest.approx(ws @ rho @ ws, rel=1e-14)


def test_default_power():
    assert default_power(2, 25) == pytest.approx(np.log(25) / np.log(2))
    assert default_power(3, 27) == pytest.approx(3.0)
    assert default_power(1, 8) == pytest.approx(3.0)
    assert default_power(2, 1) == 0.0


def test_calibrate_tau2_limits():
    assert calibrate_tau2(2.0, np.eye(4)) == pytest.approx(8.0)
    assert calibrate_tau2(2.0, np.ones((4, 4))) == pytest.approx(2.0)


def test_empirical_s2_floor():
    assert empirical_s2(np.array([1.0, 2.0, 3.0])) == pytest.approx(1.0)
    assert empirical_s2(np.full(5, 4.0)) == 1e-12


def _expert(X, theta, eta):
    X = np.asarray(X, dtype=float)
    fit = fit_gp(X, np.sin(3 * X[:, 0]), theta, 1.0, eta)
    return LocalExpert(center=X.mean(axis=0), design_indices=np.arange(len(X)), fit=fit, mse=0.0)


def test_rho_of_an_expert_with_itself_is_one(rng):
    e = _expert(0.2 * rng.random((15, 2)), 0.01, JITTER)
    assert estimate_rho(e, e) == pytest.approx(1.0, abs=1e-5)


def test_rho_of_distant_experts_vanishes(rng):
    near = _expert(0.1 * rng.random((10, 2)), 0.01, JITTER)
    far = _expert(0.9 + 0.1 * rng.random((10, 2)), 0.01, JITTER)
    assert estimate_rho(near, far) < 1e-12
    assert estimate_rho(far, near) == estimate_rho(near, far)


def test_predictive_kernel_at_a_design_point():
    # isolated design points: k^T K^-1 k reduces to 1 / (1 + eta)
    e = _expert([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 0.001, 0.1)
    assert predictive_kernel(e, np.array([1.0, 0.0])) == pytest.approx(1.0 / 1.1, rel=1e-12)
    assert predictive_kernel(e, np.array([0.5, 0.5])) < 1e-12


def test_rho_matrix_is_symmetric_with_unit_diagonal(small_palm):
    rho = rho_matrix(small_palm.experts)
    np.testing.assert_array_equal(rho, rho.T)
    np.testing.assert_array_equal(np.diag(rho), 1.0)
    assert np.all((rho >= 0) & (rho <= 1))


def test_incremental_rho_row_matches_full(small_palm):
    full = rho_matrix(small_palm.experts)
    grown = rho_matrix(small_palm.experts, previous=full[:-1, :-1])
    np.testing.assert_array_equal(grown, full)


def test_pooled_nugget(small_palm):
    experts = small_palm.experts
    nugget = pooled_nugget(experts, tau2=1e12)
    assert nugget.is_jitter
    mean_mse = np.mean([e.mse for e in experts])
    if mean_mse / 2.0 >= 1e-8:
        assert pooled_nugget(experts, tau2=2.0).eta == pytest.approx(mean_mse / 2.0)
    size_mse = np.sum([e.mse / e.size for e in experts])
    assert pooled_nugget(experts, tau2=1e-20, normalization="size").eta == pytest.approx(size_mse / 1e-20)
