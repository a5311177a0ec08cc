"""Problem construction and objective/gradient contracts.

The gradient oracles are central finite differences of the loss; the
smoothed-gradient oracle is a Monte-Carlo average over fresh sphere
perturbations.
"""

import json
import math

import numpy as np
import pytest

from noisereg import linalg, model


def finite_difference_gradient(f, x, h=1e-6):
    """Central differences of a scalar function of a matrix."""
    g = np.zeros_like(x)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            xp = x.copy()
            xm = x.copy()
            xp[i, j] += h
            xm[i, j] -= h
            g[i, j] = (f(xp) - f(xm)) / (2 * h)
    return g


def one_dim_problem(y_value: float) -> model.RecoveryProblem:
    """Hand-built 1x1 instance (the factories require d >= 2)."""
    y = np.array([[y_value]])
    return model.RecoveryProblem(
        kind="psd",
        d=1,
        rank=1,
        sigma=0.0,
        ground_truth_factor=np.array([[1.0]]),
        gamma=y - 1.0,
        y_star=np.array([[1.0]]),
        y_observed=y,
        y_sym=y,
    )


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def test_rank_one_noiseless():
    p = model.make_rank_one_problem(2, (1.0, 1.0), 0.0, linalg.make_rng(0))
    assert np.array_equal(p.y_observed, np.ones((2, 2)))
    assert np.array_equal(p.y_star, np.ones((2, 2)))


def test_rank_one_reference_instance():
    # d=30, all-ones planted vector: ||Y*||_F = ||x*||^2 = 30.
    p = model.make_rank_one_problem(30, np.ones(30), math.sqrt(0.1), linalg.make_rng(1))
    assert abs(linalg.frobenius_norm(p.y_star) - 30.0) < 1e-12


def test_rank_one_symmetrization_identities():
    p = model.make_rank_one_problem(3, (1.0, 0.0, 0.0), 0.01, linalg.make_rng(2))
    gamma_sym = p.gamma_sym
    assert np.max(np.abs(gamma_sym - gamma_sym.T)) < 1e-15
    assert np.max(np.abs((p.y_sym - p.y_star) - gamma_sym)) < 1e-15
    assert np.max(np.abs(p.y_sym - (p.y_observed + p.y_observed.T) / 2)) == 0.0


def test_rank_one_rejects_bad_arguments():
    rng = linalg.make_rng(0)
    with pytest.raises(ValueError):
        model.make_rank_one_problem(1, (1.0,), 0.1, rng)
    with pytest.raises(ValueError):
        model.make_rank_one_problem(3, (1.0, 2.0), 0.1, rng)
    with pytest.raises(ValueError):
        model.make_rank_one_problem(3, np.ones(3), -0.1, rng)


def test_rank_r_numerical_rank():
    p = model.make_rank_r_problem(30, 3, math.sqrt(0.1), linalg.make_rng(3))
    svals = np.linalg.svd(p.y_star, compute_uv=False)
    assert np.sum(svals > 1e-8 * svals[0]) == 3


def test_full_rank_problem():
    p = model.make_rank_r_problem(4, 4, 0.0, linalg.make_rng(4))
    assert linalg.frobenius_norm(p.y_star) > 0
    assert np.linalg.matrix_rank(p.y_star) == 4


def test_rectangular_rank():
    p = model.make_rectangular_problem(5, 2, 0.1, linalg.make_rng(5))
    svals = np.linalg.svd(p.y_star, compute_uv=False)
    assert np.sum(svals > 1e-8) == 2


def test_rank_r_rejects_rank_above_dimension():
    with pytest.raises(ValueError):
        model.make_rank_r_problem(3, 4, 0.1, linalg.make_rng(0))
    with pytest.raises(ValueError):
        model.make_rectangular_problem(3, 4, 0.1, linalg.make_rng(0))


def test_psd_truth_has_nonnegative_spectrum():
    p = model.make_rank_r_problem(6, 2, 0.3, linalg.make_rng(6))
    assert np.linalg.eigvalsh(p.y_star).min() >= -1e-10


def test_problem_arrays_are_immutable():
    p = model.make_rank_one_problem(3, np.ones(3), 0.1, linalg.make_rng(7))
    with pytest.raises(ValueError):
        p.y_sym[0, 0] = 7.0


# ---------------------------------------------------------------------------
# loss and gradient
# ---------------------------------------------------------------------------


def test_loss_at_zero_iterate():
    p = model.make_rank_one_problem(3, np.ones(3), 0.2, linalg.make_rng(8))
    expected = 0.25 * linalg.frobenius_norm(p.y_observed) ** 2
    assert abs(model.loss(np.zeros((3, 3)), p) - expected) < 1e-12


def test_loss_zero_at_exact_recovery():
    p = model.make_rank_one_problem(3, (1.0, 2.0, -1.0), 0.0, linalg.make_rng(9))
    x = np.zeros((3, 3))
    x[:, 0] = [1.0, 2.0, -1.0]
    assert model.loss(x, p) < 1e-24


def test_loss_brute_force_entry_sum():
    rng = linalg.make_rng(10)
    p = model.make_rank_one_problem(3, np.ones(3), 0.5, rng)
    x = rng.standard_normal((3, 3))
    resid = x @ x.T - p.y_observed
    brute = 0.25 * sum(resid[i, j] ** 2 for i in range(3) for j in range(3))
    assert abs(model.loss(x, p) - brute) < 1e-12


def test_loss_orthogonal_invariance():
    rng = linalg.make_rng(11)
    p = model.make_rank_one_problem(4, np.ones(4), 0.3, rng)
    x = rng.standard_normal((4, 4))
    q = linalg.sample_orthogonal(4, rng)
    assert abs(model.loss(x, p) - model.loss(x @ q, p)) < 1e-10


def test_gradient_zero_iterate():
    p = model.make_rank_one_problem(3, np.ones(3), 0.2, linalg.make_rng(12))
    assert np.all(model.gradient(np.zeros((3, 3)), p) == 0.0)


def test_gradient_scalar_case():
    # x = 2, y = 1: (x^2 - 1) x = 6; finite differences agree.
    p = one_dim_problem(1.0)
    x = np.array([[2.0]])
    g = model.gradient(x, p)
    assert abs(g[0, 0] - 6.0) < 1e-12
    fd = finite_difference_gradient(lambda m: model.loss(m, p), x)
    assert abs(fd[0, 0] - 6.0) < 1e-6


def test_gradient_matches_finite_differences():
    rng = linalg.make_rng(13)
    p = model.make_rank_one_problem(4, np.ones(4), 0.3, rng)
    x = rng.standard_normal((4, 4))
    g = model.gradient(x, p)
    fd = finite_difference_gradient(lambda m: model.loss(m, p), x)
    rel = np.max(np.abs(fd - g)) / max(np.max(np.abs(g)), 1e-12)
    assert rel < 1e-5


def test_gradient_shape_mismatch():
    p = model.make_rank_one_problem(3, np.ones(3), 0.1, linalg.make_rng(14))
    with pytest.raises(ValueError):
        model.gradient(np.zeros((2, 2)), p)


# ---------------------------------------------------------------------------
# smoothed gradient
# ---------------------------------------------------------------------------


def test_smoothed_gradient_nu_zero_equals_gradient():
    rng = linalg.make_rng(15)
    p = model.make_rank_one_problem(4, np.ones(4), 0.2, rng)
    x = rng.standard_normal((4, 4))
    assert np.array_equal(model.smoothed_gradient_exact(x, p, 0.0), model.gradient(x, p))


def test_smoothed_gradient_zero_iterate():
    p = model.make_rank_one_problem(4, np.ones(4), 0.2, linalg.make_rng(16))
    assert np.all(model.smoothed_gradient_exact(np.zeros((4, 4)), p, 0.7) == 0.0)


def test_smoothed_gradient_ridge_identity():
    rng = linalg.make_rng(17)
    p = model.make_rank_one_problem(5, np.ones(5), 0.4, rng)
    x = rng.standard_normal((5, 5))
    nu = 0.6
    diff = model.smoothed_gradient_exact(x, p, nu) - model.gradient(x, p)
    expected = (2 * 5 + 1) * (nu**2 / 5) * x
    assert np.max(np.abs(diff - expected)) < 1e-12


def test_smoothed_gradient_monte_carlo():
    # Mean of gradient(X + W) over 1e6 sphere draws matches the closed form
    # within 3 standard errors entrywise.
    rng = linalg.make_rng(18)
    d, nu = 4, 0.5
    p = model.make_rank_one_problem(d, np.ones(d), 0.3, rng)
    x = rng.standard_normal((d, d))
    n = 1_000_000
    w = rng.standard_normal((n, d, d))
    w *= nu / np.sqrt(np.sum(w * w, axis=1, keepdims=True))
    xt = x[None, :, :] + w
    grads = (xt @ np.swapaxes(xt, 1, 2) - p.y_sym[None, :, :]) @ xt
    mean = grads.mean(axis=0)
    se = grads.std(axis=0, ddof=1) / math.sqrt(n)
    exact = model.smoothed_gradient_exact(x, p, nu)
    assert np.all(np.abs(mean - exact) <= 3.0 * se)


# ---------------------------------------------------------------------------
# rectangular objective
# ---------------------------------------------------------------------------


def test_rect_gradients_zero_pair():
    p = model.make_rectangular_problem(3, 2, 0.1, linalg.make_rng(19))
    gu, gv = model.rect_gradients(model.RectFactorPair(np.zeros((3, 3)), np.zeros((3, 3))), p)
    assert np.all(gu == 0.0) and np.all(gv == 0.0)


def test_rect_gradients_stationary_at_truth_noiseless():
    p = model.make_rectangular_problem(4, 2, 0.0, linalg.make_rng(20))
    u = np.zeros((4, 4))
    v = np.zeros((4, 4))
    u[:, :2] = p.ground_truth_factor
    v[:, :2] = p.ground_truth_factor_right
    gu, gv = model.rect_gradients(model.RectFactorPair(u, v), p)
    assert np.max(np.abs(gu)) < 1e-12
    assert np.max(np.abs(gv)) < 1e-12


def test_rect_gradients_match_finite_differences():
    rng = linalg.make_rng(21)
    p = model.make_rectangular_problem(3, 1, 0.2, rng)
    u = rng.standard_normal((3, 3))
    v = rng.standard_normal((3, 3))
    gu, gv = model.rect_gradients(model.RectFactorPair(u, v), p)
    fd_u = finite_difference_gradient(lambda m: model.rect_loss(model.RectFactorPair(m, v), p), u)
    fd_v = finite_difference_gradient(lambda m: model.rect_loss(model.RectFactorPair(u, m), p), v)
    scale = max(np.max(np.abs(gu)), np.max(np.abs(gv)), 1e-12)
    assert np.max(np.abs(fd_u - gu)) / scale < 1e-5
    assert np.max(np.abs(fd_v - gv)) / scale < 1e-5


def test_rect_gradients_reject_psd_problem():
    p = model.make_rank_one_problem(3, np.ones(3), 0.1, linalg.make_rng(22))
    with pytest.raises(ValueError):
        model.rect_gradients(model.RectFactorPair(np.zeros((3, 3)), np.zeros((3, 3))), p)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["rank_one", "rank_r", "rectangular"])
def test_json_round_trip_is_exact(kind):
    rng = linalg.make_rng(23)
    if kind == "rank_one":
        p = model.make_rank_one_problem(4, (1.0, -2.0, 0.5, 3.0), 0.1, rng, seed=99)
    elif kind == "rank_r":
        p = model.make_rank_r_problem(5, 2, 0.2, rng, seed=99)
    else:
        p = model.make_rectangular_problem(4, 2, 0.3, rng, seed=99)
    q = model.RecoveryProblem.from_json(p.to_json())
    assert q.kind == p.kind and q.d == p.d and q.rank == p.rank
    assert q.sigma == p.sigma and q.seed == 99
    for attr in ("ground_truth_factor", "gamma", "y_star", "y_observed", "y_sym"):
        assert np.array_equal(getattr(q, attr), getattr(p, attr)), attr
    # serialized form itself is stable
    assert json.loads(q.to_json()) == json.loads(p.to_json())
