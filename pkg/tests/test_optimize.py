"""Optimizer loops: initialization laws, step semantics, trajectory
bookkeeping, engine equivalence, and determinism."""

import dataclasses
import math

import numpy as np
import pytest

from noisereg import linalg, model, optimize
from noisereg.optimize import InitSpec, OptimizerConfig


def rank_one(d, sigma, seed, x_star=None):
    x = np.ones(d) if x_star is None else np.asarray(x_star, dtype=float)
    return model.make_rank_one_problem(d, x, sigma, linalg.make_rng(seed))


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def test_init_gd_small_norm():
    x0 = optimize.init_iterate(InitSpec.gd_small(), 4, linalg.make_rng(0))
    assert abs(np.sum(x0 * x0) - 0.25) < 1e-12  # ||A/d||_F^2 = d/d^2


def test_init_rank_one_ball():
    x0 = optimize.init_iterate(InitSpec.rank_one_ball(), 10, linalg.make_rng(1))
    svals = np.linalg.svd(x0, compute_uv=False)
    assert np.sum(svals > 1e-12) == 1
    assert np.sqrt(np.sum(x0 * x0)) <= 1.0
    assert np.max(np.abs(x0 - x0.T)) < 1e-15


def test_init_gd_large_mean_norm():
    rng = linalg.make_rng(2)
    norms = [np.sum(optimize.init_iterate(InitSpec.gd_large(), 30, rng) ** 2) for _ in range(100)]
    assert abs(np.mean(norms) - 30.0) < 0.15 * 30.0  # E||B||_F^2 / d = d


def test_init_explicit_shape_check():
    with pytest.raises(ValueError):
        optimize.init_iterate(InitSpec.explicit(np.zeros((2, 3))), 2, linalg.make_rng(0))
    with pytest.raises(ValueError):
        InitSpec("explicit")


def test_init_rect_variants():
    pair = optimize.init_rect_pair(InitSpec.gd_small(), 4, linalg.make_rng(3))
    assert abs(np.sum(pair.u**2) - 0.25) < 1e-12
    assert abs(np.sum(pair.v**2) - 0.25) < 1e-12
    with pytest.raises(ValueError):
        optimize.init_rect_pair(InitSpec.rank_one_ball(), 4, linalg.make_rng(3))


# ---------------------------------------------------------------------------
# single step
# ---------------------------------------------------------------------------


def test_step_zero_eta_is_identity():
    p = rank_one(3, 0.1, 4)
    rng = linalg.make_rng(5)
    x = rng.standard_normal((3, 3))
    out = optimize.pgd_step(x, p, 0.0, 0.5, rng)
    assert np.array_equal(out, x)


def test_step_scalar_oracle():
    # 1x1 instance with y = 1, x = 2: gradient 6, so x - 0.1 * 6 = 1.4.
    import tests.test_model as tm

    p = tm.one_dim_problem(1.0)
    out = optimize.pgd_step(np.array([[2.0]]), p, 0.1, 0.0)
    assert abs(out[0, 0] - 1.4) < 1e-12


def test_step_stubbed_zero_perturbation_is_gd():
    p = rank_one(4, 0.2, 6)
    rng = linalg.make_rng(7)
    x = rng.standard_normal((4, 4))
    gd = x - 0.01 * model.gradient(x, p)
    stubbed = optimize.pgd_step(x, p, 0.01, 0.9, rng, w=np.zeros((4, 4)))
    assert np.max(np.abs(stubbed - gd)) < 1e-15


def test_step_divergence_raises():
    p = rank_one(3, 0.0, 8)
    x = np.full((3, 3), 1e200)
    with pytest.raises(optimize.DivergenceError):
        optimize.pgd_step(x, p, 1.0, 0.0)


# ---------------------------------------------------------------------------
# run(): sampling cadence, oracle, reference loop equivalence
# ---------------------------------------------------------------------------


def test_run_records_endpoints():
    p = rank_one(3, 0.1, 9)
    traj = optimize.run(p, OptimizerConfig(eta=1e-3, horizon_t=1, metric_stride=1, seed=1))
    assert [s.t for s in traj.samples] == [0, 1]


def test_run_matches_reference_gd_loop():
    # Independent plain-GD recursion, step for step over 1000 iterations.
    p = rank_one(4, 0.2, 10)
    cfg = OptimizerConfig(eta=1e-3, nu=0.0, horizon_t=1000, metric_stride=1,
                          init=InitSpec.gd_large(), seed=11)
    traj = optimize.run(p, cfg)
    x = optimize.init_iterate(InitSpec.gd_large(), 4, linalg.make_rng(11))
    for s in traj.samples:
        assert s.recovery_error >= traj.min_error_sample.recovery_error
    errs = {s.t: s.recovery_error for s in traj.samples}
    for t in range(1, 1001):
        x = x - 1e-3 * ((x @ x.T - p.y_sym) @ x)
        ref = float(np.sum((x @ x.T - p.y_star) ** 2))
        assert abs(errs[t] - ref) <= 1e-12 * max(1.0, ref)
    assert np.max(np.abs(traj.final_state - x)) < 1e-12


def test_run_noiseless_gd_converges():
    # The excess factor directions decay algebraically (error ~ (eta t)^-2),
    # so the tolerance tracks the horizon: ~1e-5 at eta*T = 200, <1e-6 once
    # eta*T passes ~1.5e3.
    p = rank_one(5, 0.0, 12)
    cfg = OptimizerConfig(eta=1e-3, nu=0.0, horizon_t=200_000, metric_stride=50_000,
                          init=InitSpec.gd_large(), seed=13)
    traj = optimize.run(p, cfg)
    assert traj.final_sample.recovery_error < 1e-4
    long_cfg = OptimizerConfig(eta=1e-3, nu=0.0, horizon_t=1_500_000, metric_stride=500_000,
                               init=InitSpec.gd_large(), seed=13)
    assert optimize.run(p, long_cfg).final_sample.recovery_error < 1e-6


def test_run_engines_agree_with_perturbation():
    p = rank_one(4, 0.1, 14)
    base = dict(eta=5e-4, nu=0.4, horizon_t=2000, metric_stride=100,
                init=InitSpec.gd_large(), seed=15)
    a = optimize.run(p, OptimizerConfig(engine="numba", **base))
    b = optimize.run(p, OptimizerConfig(engine="numpy", **base))
    for sa, sb in zip(a.samples, b.samples):
        assert sa.t == sb.t
        assert abs(sa.recovery_error - sb.recovery_error) <= 1e-12 * max(1.0, sa.recovery_error)
    assert abs(a.min_error_sample.recovery_error - b.min_error_sample.recovery_error) <= 1e-10


def test_run_is_deterministic():
    p = rank_one(4, 0.1, 16)
    cfg = OptimizerConfig(eta=5e-4, nu=0.3, horizon_t=500, metric_stride=100, seed=17)
    a = optimize.run(p, cfg)
    b = optimize.run(p, cfg)
    assert optimize.trajectory_to_csv(a) == optimize.trajectory_to_csv(b)
    assert np.array_equal(a.final_state, b.final_state)


def test_run_min_error_oracle_tracks_every_step():
    # With stride larger than the dip, the oracle still sees the true minimum.
    p = rank_one(4, 0.1, 18)
    cfg = OptimizerConfig(eta=1e-3, nu=0.0, horizon_t=50_000, metric_stride=50_000,
                          init=InitSpec.gd_small(), seed=19)
    traj = optimize.run(p, cfg)
    assert traj.min_error_sample.t not in (0, cfg.horizon_t)
    assert traj.min_error_sample.recovery_error < traj.final_sample.recovery_error
    assert traj.min_error_sample.recovery_error < traj.samples[0].recovery_error


def test_run_divergence_carries_context():
    p = rank_one(3, 0.1, 20)
    cfg = OptimizerConfig(eta=10.0, nu=0.0, horizon_t=1000, metric_stride=10,
                          init=InitSpec.gd_large(), seed=21)
    with pytest.raises(optimize.DivergenceError) as err:
        optimize.run(p, cfg)
    assert err.value.t >= 1
    assert err.value.last_sample is not None
    assert math.isfinite(err.value.last_sample.recovery_error)


def test_run_subspace_fields_flagged_absent_for_rank_r():
    p = model.make_rank_r_problem(5, 2, 0.1, linalg.make_rng(22))
    traj = optimize.run(p, OptimizerConfig(eta=1e-3, horizon_t=10, metric_stride=5, seed=23))
    assert not traj.has_subspace_metrics
    assert math.isnan(traj.final_sample.r_norm_sq)
    assert math.isfinite(traj.final_sample.recovery_error)


def test_run_store_iterates():
    p = rank_one(3, 0.1, 24)
    cfg = OptimizerConfig(eta=1e-3, horizon_t=100, metric_stride=25, seed=25, store_iterates=True)
    traj = optimize.run(p, cfg)
    assert sorted(traj.iterates) == [0, 25, 50, 75, 100]
    x100 = traj.iterates[100]
    assert abs(float(np.sum((x100 @ x100.T - p.y_star) ** 2)) - traj.final_sample.recovery_error) < 1e-12


# ---------------------------------------------------------------------------
# rectangular runs
# ---------------------------------------------------------------------------


def test_rect_zero_eta_identity():
    p = model.make_rectangular_problem(3, 2, 0.1, linalg.make_rng(26))
    cfg = OptimizerConfig(eta=0.0, nu=0.2, horizon_t=50, metric_stride=10, seed=27)
    traj = optimize.run_rectangular(p, cfg)
    first, last = traj.samples[0], traj.samples[-1]
    assert first.recovery_error == last.recovery_error
    assert first.loss == last.loss


def test_rect_noiseless_gd_converges_to_observation():
    p = model.make_rectangular_problem(4, 2, 0.0, linalg.make_rng(28))
    cfg = OptimizerConfig(eta=5e-3, nu=0.0, horizon_t=200_000, metric_stride=50_000,
                          init=InitSpec.gd_large(), seed=29)
    traj = optimize.run_rectangular(p, cfg)
    pair = traj.final_state
    assert float(np.sum((pair.u @ pair.v.T - p.y_observed) ** 2)) < 1e-6


def test_rect_engines_agree():
    p = model.make_rectangular_problem(3, 1, 0.1, linalg.make_rng(30))
    base = dict(eta=1e-3, nu=0.3, horizon_t=500, metric_stride=100, seed=31)
    a = optimize.run_rectangular(p, OptimizerConfig(engine="numba", **base))
    b = optimize.run_rectangular(p, OptimizerConfig(engine="numpy", **base))
    for sa, sb in zip(a.samples, b.samples):
        assert abs(sa.recovery_error - sb.recovery_error) <= 1e-12 * max(1.0, sa.recovery_error)


def test_rect_rejects_psd_problem_and_vice_versa():
    psd = rank_one(3, 0.1, 32)
    rect = model.make_rectangular_problem(3, 1, 0.1, linalg.make_rng(33))
    cfg = OptimizerConfig(eta=1e-3, horizon_t=5, seed=0)
    with pytest.raises(ValueError):
        optimize.run_rectangular(psd, cfg)
    with pytest.raises(ValueError):
        optimize.run(rect, cfg)


# ---------------------------------------------------------------------------
# hyperparameter suggestion
# ---------------------------------------------------------------------------


def test_suggested_hyperparameters_reference_values():
    p = rank_one(30, math.sqrt(0.1), 34)
    eta, nu = optimize.suggested_hyperparameters(p)
    # eta = 0.25 sigma^2 / d^2 with sigma^2 = 0.1, d = 30.
    assert abs(eta - 0.25 * 0.1 / 900) < 1e-18
    assert abs(eta - 2.7777777777777777e-05) < 1e-12
    # nu^2 = 0.4 sqrt(d sigma^2) = 0.4 sqrt(3)
    assert abs(nu**2 - 0.4 * math.sqrt(3.0)) < 1e-12


def test_suggested_hyperparameters_rejects_noiseless():
    p = rank_one(4, 0.0, 35)
    with pytest.raises(ValueError):
        optimize.suggested_hyperparameters(p)
    with pytest.raises(ValueError):
        optimize.suggested_hyperparameters(rank_one(4, 0.1, 36), confidence_delta=1.5)


# ---------------------------------------------------------------------------
# config validation and CSV format
# ---------------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(eta=-1e-3)
    with pytest.raises(ValueError):
        OptimizerConfig(eta=1e-3, horizon_t=0)
    with pytest.raises(ValueError):
        OptimizerConfig(eta=1e-3, metric_stride=0)
    with pytest.raises(ValueError):
        OptimizerConfig(eta=1e-3, nu=-0.1)
    with pytest.raises(ValueError):
        OptimizerConfig(eta=1e-3, engine="cuda")


def test_trajectory_csv_format(tmp_path):
    p = rank_one(3, 0.1, 37)
    traj = optimize.run(p, OptimizerConfig(eta=1e-3, horizon_t=10, metric_stride=5, seed=38))
    path = tmp_path / "traj.csv"
    optimize.write_trajectory_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == optimize.CSV_HEADER
    assert len(lines) == 1 + len(traj.samples)
    cells = lines[1].split(",")
    assert len(cells) == 8
    # 17 significant digits round-trip exactly
    assert float(cells[2]) == traj.samples[0].recovery_error


def test_config_echo_is_frozen_copy():
    p = rank_one(3, 0.1, 39)
    cfg = OptimizerConfig(eta=1e-3, horizon_t=5, metric_stride=1, seed=40)
    traj = optimize.run(p, cfg)
    assert traj.config_echo == dataclasses.replace(cfg)
