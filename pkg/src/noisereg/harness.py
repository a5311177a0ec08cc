"""Experiment harness: repeated seeded trials, aggregation, scaling study,
and the verification bundle.

Trials are paired: for a fixed trial index every algorithm sees the same
problem instance (same noise draw) and the perturbed and plain large-init
runs share the same starting iterate.  Each trial owns RNG streams derived
from ``(seed, trial, purpose)``, so results are independent of worker
scheduling and re-running a configuration reproduces byte-identical files.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .diagnostics import (
    CheckResult,
    DiagnosticsReport,
    check_assumption_init,
    check_assumption_noise,
    check_trajectory_lemmas,
    dissipativity_probe,
    orthogonal_drift_params,
    martingale_drift_probe,
    sample_region_state,
)
from .linalg import child_rng, child_seed, make_rng
from .model import (
    RecoveryProblem,
    make_rank_one_problem,
    make_rank_r_problem,
    make_rectangular_problem,
)
from .optimize import (
    DivergenceError,
    InitSpec,
    OptimizerConfig,
    init_iterate,
    init_rect_pair,
    run,
    run_rectangular,
    write_trajectory_csv,
)

__all__ = [
    "ConfigError",
    "AllTrialsDivergedError",
    "ExperimentConfig",
    "AggregateResult",
    "run_experiment",
    "run_scaling_study",
    "run_verify",
    "emit_plot_data",
    "NU_SQ_COEFF_DEFAULTS",
    "ALGORITHMS",
]

ALGORITHMS = ("pgd", "gd_small", "gd_large")

NU_SQ_COEFF_DEFAULTS = {
    "rank1_psd": 0.4,
    "rank3_psd": 0.25,
    "rectangular": 0.6,
    "scaling_study": 0.4,
    "verify": 0.4,
}

_EXPERIMENTS = ("rank1_psd", "rank3_psd", "rectangular", "scaling_study", "verify")

# Stream tags for (seed, trial, tag) splitting.
_STREAM_PROBLEM = 0
_STREAM_INIT_LARGE = 1
_STREAM_INIT_SMALL = 2
_STREAM_RUN_BASE = 10

_SCALING_REFERENCE_D = 16


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class AllTrialsDivergedError(RuntimeError):
    """Every requested run diverged; there is nothing to aggregate."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment campaign.

    ``nu_sq_coeff`` and ``rank`` default per experiment kind; ``eta`` and
    ``nu_sq`` are normally derived from the noise level (``eta_coeff *
    sigma_sq / d^2`` and ``nu_sq_coeff * sqrt(d * sigma_sq)``) but can be
    pinned explicitly, which noiseless runs must do.  ``paper_scale``
    restores the full-size campaign (d = 30, T = 1e8).
    """

    experiment: str = "rank1_psd"
    d: int = 16
    rank: Optional[int] = None
    sigma_sq: float = 0.1
    nu_sq_coeff: Optional[float] = None
    eta_coeff: float = 0.25
    eta: Optional[float] = None
    nu_sq: Optional[float] = None
    horizon_t: int = 2_000_000
    trials: int = 20
    seed: int = 20240811
    output_dir: Optional[str] = None
    algorithms: Sequence[str] = ALGORITHMS
    d_list: Sequence[int] = (8, 16, 32)
    metric_points: int = 201
    paper_scale: bool = False
    workers: Optional[int] = None
    store_iterates: bool = False
    engine: str = "auto"

    def resolved(self) -> "ExperimentConfig":
        """Apply experiment-specific defaults, then validate."""
        if self.experiment not in _EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        cfg = self
        if cfg.paper_scale:
            cfg = replace(cfg, d=30, horizon_t=100_000_000)
        if cfg.nu_sq_coeff is None:
            cfg = replace(cfg, nu_sq_coeff=NU_SQ_COEFF_DEFAULTS[cfg.experiment])
        if cfg.rank is None:
            default_rank = 3 if cfg.experiment in ("rank3_psd", "rectangular") else 1
            cfg = replace(cfg, rank=default_rank)
        cfg._validate()
        return cfg

    def _validate(self) -> None:
        if self.trials < 1:
            raise ConfigError(f"need at least one trial, got {self.trials}")
        if self.d < 2:
            raise ConfigError(f"need d >= 2, got {self.d}")
        if self.sigma_sq < 0:
            raise ConfigError(f"sigma_sq must be nonnegative, got {self.sigma_sq}")
        if self.horizon_t < 1:
            raise ConfigError(f"horizon must be positive, got {self.horizon_t}")
        if not self.algorithms or any(a not in ALGORITHMS for a in self.algorithms):
            raise ConfigError(f"algorithms must be a nonempty subset of {ALGORITHMS}")
        if len(set(self.algorithms)) != len(tuple(self.algorithms)):
            raise ConfigError("duplicate algorithm names")
        if self.rank is not None and not 1 <= self.rank <= self.d:
            raise ConfigError(f"need 1 <= rank <= d, got rank={self.rank}, d={self.d}")
        if self.experiment == "scaling_study" and len(tuple(self.d_list)) < 3:
            raise ConfigError("scaling study needs at least three dimensions")
        if self.sigma_sq == 0 and self.eta is None:
            raise ConfigError("noiseless runs must pin the step size explicitly (eta=...)")
        if self.metric_points < 2:
            raise ConfigError("need at least two metric points")
        if self.engine not in ("auto", "numba", "numpy"):
            raise ConfigError(f"unknown engine {self.engine!r}")

    # -- derived hyperparameters ------------------------------------------

    def step_size(self, d: Optional[int] = None) -> float:
        if self.eta is not None:
            return self.eta
        d = self.d if d is None else d
        return self.eta_coeff * self.sigma_sq / d**2

    def perturbation_radius(self, d: Optional[int] = None) -> float:
        if self.nu_sq is not None:
            return math.sqrt(self.nu_sq)
        d = self.d if d is None else d
        return math.sqrt(self.nu_sq_coeff * math.sqrt(d * self.sigma_sq))

    # -- JSON round trip ---------------------------------------------------

    def to_json_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["algorithms"] = list(self.algorithms)
        out["d_list"] = list(self.d_list)
        return out

    @staticmethod
    def from_json_dict(payload: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(ExperimentConfig)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        payload = dict(payload)
        for key in ("algorithms", "d_list"):
            if key in payload and payload[key] is not None:
                payload[key] = tuple(payload[key])
        try:
            return ExperimentConfig(**payload)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def sample_times(horizon_t: int, n_points: int = 201) -> np.ndarray:
    """Geometric sample times with a linear tail, always including 0 and T."""
    if horizon_t <= n_points:
        return np.arange(0, horizon_t + 1, dtype=np.int64)
    n_geom = max(2, int(0.8 * n_points))
    n_lin = max(2, n_points - n_geom)
    geom = np.unique(np.round(np.geomspace(1, horizon_t, n_geom)).astype(np.int64))
    lin = np.linspace(0, horizon_t, n_lin + 1).astype(np.int64)
    return np.unique(np.concatenate([[0], geom, lin, [horizon_t]]))


def _problem_for_trial(cfg: ExperimentConfig, trial: int, d: Optional[int] = None) -> RecoveryProblem:
    d = cfg.d if d is None else d
    rng = child_rng(cfg.seed, trial, _STREAM_PROBLEM)
    seed_tag = child_seed(cfg.seed, trial, _STREAM_PROBLEM)
    sigma = math.sqrt(cfg.sigma_sq)
    if cfg.experiment in ("rank1_psd", "scaling_study", "verify"):
        return make_rank_one_problem(d, np.ones(d), sigma, rng, seed=seed_tag)
    if cfg.experiment == "rank3_psd":
        return make_rank_r_problem(d, cfg.rank, sigma, rng, seed=seed_tag)
    if cfg.experiment == "rectangular":
        return make_rectangular_problem(d, cfg.rank, sigma, rng, seed=seed_tag)
    raise ConfigError(f"experiment {cfg.experiment!r} does not build trial problems")


def _problem_hash(problem: RecoveryProblem) -> str:
    return hashlib.sha256(problem.to_json().encode("ascii")).hexdigest()


@dataclass
class _TrialResult:
    trial: int
    problem_hash: dict
    trajectories: dict  # algo -> Trajectory (completed runs only)
    diverged: dict  # algo -> step of divergence


def _run_trial(cfg: ExperimentConfig, trial: int, d: Optional[int] = None) -> _TrialResult:
    d = cfg.d if d is None else d
    problem = _problem_for_trial(cfg, trial, d)
    ts = sample_times(cfg.horizon_t, cfg.metric_points)
    eta = cfg.step_size(d)
    nu = cfg.perturbation_radius(d)
    rect = problem.kind == "rectangular"

    if rect:
        init_large = init_rect_pair(InitSpec.gd_large(), d, child_rng(cfg.seed, trial, _STREAM_INIT_LARGE))
        init_small = init_rect_pair(InitSpec.gd_small(), d, child_rng(cfg.seed, trial, _STREAM_INIT_SMALL))
        spec_large = InitSpec.explicit_rect(init_large.u, init_large.v)
        spec_small = InitSpec.explicit_rect(init_small.u, init_small.v)
    else:
        x_large = init_iterate(InitSpec.gd_large(), d, child_rng(cfg.seed, trial, _STREAM_INIT_LARGE))
        x_small = init_iterate(InitSpec.gd_small(), d, child_rng(cfg.seed, trial, _STREAM_INIT_SMALL))
        spec_large = InitSpec.explicit(x_large)
        spec_small = InitSpec.explicit(x_small)

    trajectories = {}
    diverged = {}
    hashes = {}
    for algo_idx, algo in enumerate(cfg.algorithms):
        # The perturbed run shares the plain large-init starting point.
        spec = spec_small if algo == "gd_small" else spec_large
        run_cfg = OptimizerConfig(
            eta=eta,
            nu=nu if algo == "pgd" else 0.0,
            horizon_t=cfg.horizon_t,
            init=spec,
            seed=child_seed(cfg.seed, trial, _STREAM_RUN_BASE + algo_idx),
            sample_times=ts,
            store_iterates=cfg.store_iterates,
            engine=cfg.engine,
        )
        hashes[algo] = _problem_hash(problem)
        try:
            traj = run_rectangular(problem, run_cfg) if rect else run(problem, run_cfg)
            trajectories[algo] = traj
        except DivergenceError as exc:
            diverged[algo] = exc.t
    return _TrialResult(trial=trial, problem_hash=hashes, trajectories=trajectories, diverged=diverged)


def _warm_kernels() -> None:
    """Compile the numba loops once in the parent before forking workers."""
    rng = make_rng(0)
    x = np.eye(2)
    ts = np.array([1], dtype=np.int64)
    snaps = np.empty((1, 2, 2))
    buf = np.empty((2, 2))
    _kernels.psd_loop(x.copy(), np.eye(2), np.eye(2), 1e-3, 0.5, 1, ts, snaps, buf.copy(), rng)
    _kernels.rect_loop(
        x.copy(), x.copy(), np.eye(2), np.eye(2), 1e-3, 0.5, 1, ts,
        snaps.copy(), snaps.copy(), buf.copy(), buf.copy(), rng,
    )


def _run_trials(cfg: ExperimentConfig, d: Optional[int] = None) -> list:
    """Execute all trials, in a fork pool when more than one worker helps."""
    workers = cfg.workers if cfg.workers is not None else min(os.cpu_count() or 1, cfg.trials)
    indices = list(range(cfg.trials))
    if workers <= 1 or cfg.trials == 1 or cfg.engine == "numpy":
        return [_run_trial(cfg, i, d) for i in indices]
    if cfg.engine in ("auto", "numba"):
        _warm_kernels()
    import multiprocessing

    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        futures = [pool.submit(_run_trial, cfg, i, d) for i in indices]
        return [f.result() for f in futures]


@dataclass
class AggregateResult:
    """Cross-trial statistics for one experiment configuration.

    ``finals``/``min_errors`` map algorithm name to per-trial values
    (``None`` for diverged runs).  ``gd_se`` statistics summarize the
    early-stopping oracle of the small-init run.  Learning curves are
    sampled on a common time grid over completed trials.
    """

    config: dict
    algorithms: list
    trials: int
    finals: dict
    min_errors: dict
    min_error_times: dict
    final_normalized_mse: dict
    divergences: dict
    problem_hashes: list
    curve_times: list
    curve_mean: dict
    curve_std: dict

    @staticmethod
    def _stats(values: list) -> dict:
        vals = np.array([v for v in values if v is not None], dtype=np.float64)
        if vals.size == 0:
            return {"n": 0, "mean": None, "std": None, "median": None, "min": None, "max": None}
        return {
            "n": int(vals.size),
            "mean": float(np.mean(vals)),
            "std": float(np.std(vals)),
            "median": float(np.median(vals)),
            "min": float(np.min(vals)),
            "max": float(np.max(vals)),
        }

    def final_stats(self, algo: str) -> dict:
        return self._stats(self.finals[algo])

    def min_error_stats(self, algo: str) -> dict:
        return self._stats(self.min_errors[algo])

    def gd_se_stats(self) -> dict:
        """Early-stopping oracle of the small-init run."""
        if "gd_small" not in self.min_errors:
            raise KeyError("gd_small was not part of this experiment")
        return self._stats(self.min_errors["gd_small"])

    def to_json_dict(self) -> dict:
        out = {
            "config": self.config,
            "algorithms": self.algorithms,
            "trials": self.trials,
            "finals": self.finals,
            "min_errors": self.min_errors,
            "min_error_times": self.min_error_times,
            "final_normalized_mse": self.final_normalized_mse,
            "divergences": self.divergences,
            "problem_hashes": self.problem_hashes,
            "curve_times": self.curve_times,
            "curve_mean": self.curve_mean,
            "curve_std": self.curve_std,
            "stats": {
                algo: {"final": self.final_stats(algo), "min_error": self.min_error_stats(algo)}
                for algo in self.algorithms
            },
        }
        return out

    @staticmethod
    def from_json_dict(payload: dict) -> "AggregateResult":
        fields = {f.name for f in dataclasses.fields(AggregateResult)}
        return AggregateResult(**{k: v for k, v in payload.items() if k in fields})


def _prepare_output_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write_probe"
    probe.write_text("ok")
    probe.unlink()
    return out


def _learning_curves(results: list, algorithms, times: np.ndarray):
    mean, std = {}, {}
    for algo in algorithms:
        rows = []
        for res in results:
            traj = res.trajectories.get(algo)
            if traj is None:
                continue
            errs = {s.t: s.recovery_error for s in traj.samples}
            rows.append([errs[int(t)] for t in times])
        if rows:
            arr = np.array(rows)
            mean[algo] = [float(v) for v in arr.mean(axis=0)]
            std[algo] = [float(v) for v in arr.std(axis=0)]
        else:
            mean[algo] = []
            std[algo] = []
    return mean, std


def run_experiment(config: ExperimentConfig) -> AggregateResult:
    """Run all trials of one experiment and write trajectories plus aggregates.

    Outputs under ``config.output_dir``: ``problems/trial*.json`` (exactly
    reconstructible instances), ``trials/<algo>_trial*.csv`` trajectories,
    ``learning_curve.csv``, and ``aggregate.json``.  Divergent runs are
    excluded from statistics and counted per algorithm.
    """
    cfg = config.resolved()
    if cfg.experiment not in ("rank1_psd", "rank3_psd", "rectangular"):
        raise ConfigError(f"run_experiment() does not handle {cfg.experiment!r}")
    out = _prepare_output_dir(cfg.output_dir or f"runs/{cfg.experiment}")
    (out / "trials").mkdir(exist_ok=True)
    (out / "problems").mkdir(exist_ok=True)

    results = _run_trials(cfg)
    agg = _aggregate(cfg, results)

    for res in results:
        problem = _problem_for_trial(cfg, res.trial)
        (out / "problems" / f"trial{res.trial:02d}.json").write_text(problem.to_json())
        for algo, traj in res.trajectories.items():
            write_trajectory_csv(traj, out / "trials" / f"{algo}_trial{res.trial:02d}.csv")
    _write_learning_curve(agg, out / "learning_curve.csv")
    (out / "aggregate.json").write_text(json.dumps(agg.to_json_dict(), indent=2, sort_keys=True))
    return agg


def _aggregate(cfg: ExperimentConfig, results: list) -> AggregateResult:
    algorithms = list(cfg.algorithms)
    times = sample_times(cfg.horizon_t, cfg.metric_points)
    finals = {a: [] for a in algorithms}
    mins = {a: [] for a in algorithms}
    min_ts = {a: [] for a in algorithms}
    final_mse = {a: [] for a in algorithms}
    divergences = {a: [] for a in algorithms}
    hashes = []
    for res in results:
        first = next(iter(res.problem_hash.values()))
        if any(h != first for h in res.problem_hash.values()):
            raise RuntimeError(f"trial {res.trial}: algorithms saw different problems")
        hashes.append(first)
        for algo in algorithms:
            traj = res.trajectories.get(algo)
            if traj is None:
                finals[algo].append(None)
                mins[algo].append(None)
                min_ts[algo].append(None)
                final_mse[algo].append(None)
                divergences[algo].append(res.trial)
            else:
                finals[algo].append(traj.final_sample.recovery_error)
                mins[algo].append(traj.min_error_sample.recovery_error)
                min_ts[algo].append(traj.min_error_sample.t)
                final_mse[algo].append(traj.final_sample.normalized_mse)
    if all(v is None for a in algorithms for v in finals[a]):
        raise AllTrialsDivergedError("every run diverged; nothing to aggregate")
    mean, std = _learning_curves(results, algorithms, times)
    return AggregateResult(
        config=cfg.to_json_dict(),
        algorithms=algorithms,
        trials=cfg.trials,
        finals=finals,
        min_errors=mins,
        min_error_times=min_ts,
        final_normalized_mse=final_mse,
        divergences={a: sorted(divergences[a]) for a in algorithms},
        problem_hashes=hashes,
        curve_times=[int(t) for t in times],
        curve_mean=mean,
        curve_std=std,
    )


def _write_learning_curve(agg: AggregateResult, path: Path) -> None:
    algos = [a for a in agg.algorithms if agg.curve_mean[a]]
    header = "t," + ",".join(f"{a}_mean,{a}_std" for a in algos) if algos else "t"
    lines = [header]
    for i, t in enumerate(agg.curve_times):
        row = [str(t)]
        for a in algos:
            row.append(f"{agg.curve_mean[a][i]:.17g}")
            row.append(f"{agg.curve_std[a][i]:.17g}")
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def emit_plot_data(agg: AggregateResult, output_dir) -> dict:
    """Write plot-ready CSVs: the learning curve and final-error boxplot stats.

    The boxplot table has one row per algorithm plus a ``gd_se`` row (the
    early-stopping oracle of the small-init run) when available; an empty
    aggregate produces header-only files.
    """
    out = _prepare_output_dir(output_dir)
    _write_learning_curve(agg, out / "learning_curve.csv")

    lines = ["algo,min,q1,median,q3,max"]
    series = [(a, agg.finals.get(a, [])) for a in agg.algorithms]
    if "gd_small" in agg.algorithms:
        series.append(("gd_se", agg.min_errors["gd_small"]))
    for name, values in series:
        vals = np.array([v for v in values if v is not None], dtype=np.float64)
        if vals.size == 0:
            continue
        q1, q2, q3 = (float(np.percentile(vals, q)) for q in (25, 50, 75))
        lines.append(
            f"{name},{float(vals.min()):.17g},{q1:.17g},{q2:.17g},{q3:.17g},{float(vals.max()):.17g}"
        )
    (out / "boxplot.csv").write_text("\n".join(lines) + "\n")
    return {"learning_curve": str(out / "learning_curve.csv"), "boxplot": str(out / "boxplot.csv")}


# ---------------------------------------------------------------------------
# Scaling study
# ---------------------------------------------------------------------------


def _fit_slope(ds: Sequence[int], medians: Sequence[float]) -> Optional[float]:
    # Medians at the noiseless sanity level measure the convergence tail,
    # not a noise law; the log-log fit is undefined there.
    vals = np.array(medians, dtype=np.float64)
    if np.any(~np.isfinite(vals)) or np.any(vals <= 1e-8):
        return None
    coef = np.polyfit(np.log(np.array(ds, dtype=np.float64)), np.log(vals), 1)
    return float(coef[0])


def run_scaling_study(config: ExperimentConfig) -> dict:
    """Median normalized MSE vs dimension for the perturbed and plain runs.

    For each ``d`` in ``config.d_list`` the horizon is rescaled by
    ``(d / 16)^2`` to track the ``1/d^2`` step-size rule, ``trials``
    paired runs are collected, and the log-log slope of the median final
    normalized MSE against ``d`` is fitted per algorithm.  Writes
    ``scaling.csv`` (d, algo, median_mse, iqr) and ``scaling.json``.
    """
    cfg = replace(config, experiment="scaling_study").resolved()
    d_list = tuple(int(d) for d in cfg.d_list)
    out = _prepare_output_dir(cfg.output_dir or "runs/scaling_study")
    algorithms = ("pgd", "gd_large")

    rows = []
    medians = {a: [] for a in algorithms}
    for d in d_list:
        horizon = max(1, round(cfg.horizon_t * (d / _SCALING_REFERENCE_D) ** 2))
        sub = replace(
            cfg,
            experiment="rank1_psd",
            d=d,
            horizon_t=horizon,
            algorithms=algorithms,
            nu_sq_coeff=cfg.nu_sq_coeff,
        ).resolved()
        results = _run_trials(sub, d)
        for algo in algorithms:
            vals = np.array(
                [
                    res.trajectories[algo].final_sample.normalized_mse
                    for res in results
                    if algo in res.trajectories
                ]
            )
            if vals.size == 0:
                raise AllTrialsDivergedError(f"all trials diverged at d={d} for {algo}")
            med = float(np.median(vals))
            iqr = float(np.percentile(vals, 75) - np.percentile(vals, 25))
            medians[algo].append(med)
            rows.append({"d": d, "algo": algo, "median_mse": med, "iqr": iqr})

    slopes = {algo: _fit_slope(d_list, medians[algo]) for algo in algorithms}
    table = {
        "d_list": list(d_list),
        "rows": rows,
        "slopes": {a: (s if s is not None else "not-applicable") for a, s in slopes.items()},
    }
    lines = ["d,algo,median_mse,iqr"]
    lines += [f"{r['d']},{r['algo']},{r['median_mse']:.17g},{r['iqr']:.17g}" for r in rows]
    (out / "scaling.csv").write_text("\n".join(lines) + "\n")
    (out / "scaling.json").write_text(json.dumps(table, indent=2, sort_keys=True))
    return table


# ---------------------------------------------------------------------------
# Verification bundle
# ---------------------------------------------------------------------------


def run_verify(
    config: ExperimentConfig,
    noise_draws: int = 500,
    init_draws: int = 500,
    noise_c1: float = 3.0,
    init_c1: float = 0.5,
    region_states: int = 1000,
    region_resamples: int = 500,
    region_d: int = 8,
    region_sigma: float = 0.01,
    region_nu_coeff: float = 1.0,
    drift_probes: int = 50,
    drift_resamples: int = 500,
) -> DiagnosticsReport:
    """Assemble the full diagnostics bundle and write one JSON report.

    Sections: Gaussian-noise concentration at d = 30 (stochastic bounds of
    the signal-to-noise assumption), ball-initialization rates, the three
    dissipativity region sweeps at a small-noise instance, the trajectory
    band checks on a fresh perturbed run at the configured desk scale with
    a plain-GD contrast, the one-step drift probes along that run, and a
    tail-stability summary of the final fifth of the run.
    """
    cfg = replace(config, experiment="verify").resolved()
    out = _prepare_output_dir(cfg.output_dir or "runs/verify")
    report = DiagnosticsReport()
    rng = child_rng(cfg.seed, 0xD1A6)

    # Noise concentration (d = 30 reference instance).
    d_mc = 30
    sigma_mc = math.sqrt(cfg.sigma_sq)
    hits = 0
    worst = 0.0
    for _ in range(noise_draws):
        problem = make_rank_one_problem(d_mc, np.ones(d_mc), sigma_mc, rng)
        rep = check_assumption_noise(problem, c0=1.0, c1=noise_c1)
        ok = rep.verdicts["gamma_fro"] and rep.verdicts["gamma_spec_max"]
        hits += ok
        if sigma_mc > 0:
            worst = max(worst, rep.quantities["gamma_sym_spec"] / (math.sqrt(d_mc) * sigma_mc))
    report.add(
        CheckResult(
            "noise_concentration",
            measured=worst,
            bound=noise_c1,
            pass_rate=hits / noise_draws,
            n=noise_draws,
            notes=f"stochastic noise bounds at d={d_mc}, C1={noise_c1}; measured = worst spectral ratio",
        )
    )

    # Ball initialization rates against the init assumption.
    problem_mc = make_rank_one_problem(d_mc, np.ones(d_mc), sigma_mc, rng)
    hits = 0
    for _ in range(init_draws):
        x0 = init_iterate(InitSpec.rank_one_ball(), d_mc, rng)
        hits += check_assumption_init(x0, problem_mc, c1=init_c1).all_pass
    report.add(
        CheckResult(
            "init_in_ball",
            measured=hits / init_draws,
            bound=0.5,
            pass_rate=hits / init_draws,
            n=init_draws,
            notes=f"ball-init pass rate at d={d_mc}, C1={init_c1} (normalized frame)",
        )
    )

    # Dissipativity region sweeps at a small-noise unit-signal instance.
    rng_r = child_rng(cfg.seed, 0xD155)
    u = np.zeros(region_d)
    u[0] = 1.0
    region_problem = make_rank_one_problem(region_d, u, region_sigma, rng_r)
    nu_region = math.sqrt(region_nu_coeff * math.sqrt(region_d * region_sigma**2))
    for which in ("pd_E", "pd_r", "pd_r2"):
        ok = 0
        worst_margin = math.inf
        for _ in range(region_states):
            state = sample_region_state(which, region_problem, nu_region, rng_r)
            est = dissipativity_probe(state, region_problem, nu_region, which, region_resamples, rng_r)
            ok += est.satisfied
            worst_margin = min(worst_margin, est.margin)
        report.add(
            CheckResult(
                f"dissipativity_{which}",
                measured=worst_margin,
                bound=0.0,
                pass_rate=ok / region_states,
                n=region_states,
                notes=f"d={region_d}, sigma={region_sigma}, {region_resamples} resamples; measured = worst margin",
            )
        )

    # Trajectory bands on a fresh perturbed run, with a plain-GD contrast.
    desk_problem = _problem_for_trial(cfg, 0)
    ts = sample_times(cfg.horizon_t, cfg.metric_points)
    base = dict(
        eta=cfg.step_size(),
        horizon_t=cfg.horizon_t,
        sample_times=ts,
        engine=cfg.engine,
    )
    try:
        pgd_traj = run(
            desk_problem,
            OptimizerConfig(
                nu=cfg.perturbation_radius(),
                init=InitSpec.gd_large(),
                seed=child_seed(cfg.seed, 0, _STREAM_RUN_BASE),
                store_iterates=True,
                **base,
            ),
        )
    except DivergenceError as exc:
        report.add(
            CheckResult(
                "trajectory_bounded",
                measured=float("inf"),
                bound=4.0 * cfg.d,
                pass_rate=0.0,
                n=len(exc.samples),
                notes=f"perturbed desk run diverged at step {exc.t}; "
                "band and drift checks skipped (step size far above the stable range?)",
            )
        )
        (out / "verify_report.json").write_text(report.to_json())
        return report
    lemma_report = check_trajectory_lemmas(pgd_traj, desk_problem)
    for entry in lemma_report.entries:
        entry.notes = f"perturbed desk run (d={cfg.d}); " + entry.notes
        report.add(entry)

    # The default band constant is wide enough at desk scale that even the
    # overfit plain-GD mass sits inside it; c1 = 1 exposes the contrast.
    try:
        gd_traj = run(
            desk_problem,
            OptimizerConfig(
                nu=0.0,
                init=InitSpec.gd_large(),
                seed=child_seed(cfg.seed, 0, _STREAM_RUN_BASE + 1),
                **base,
            ),
        )
        gd_entry = check_trajectory_lemmas(gd_traj, desk_problem, constants={"c1": 1.0}).entry("e_band")
        gd_entry.notes = "plain-GD contrast at c1=1; the orthogonal part overfits (a low rate is the expected outcome)"
    except DivergenceError as exc:
        gd_entry = CheckResult("e_band", float("inf"), float("nan"), 0.0, 0,
                               notes=f"plain-GD contrast run diverged at step {exc.t}")
    gd_entry.check_name = "e_band_gd_contrast"
    report.add(gd_entry)

    # One-step drift probes for the orthogonal part along the perturbed run.
    nu = cfg.perturbation_radius()
    try:
        alpha0, beta = orthogonal_drift_params(desk_problem, nu)
    except ValueError:
        alpha0 = beta = None
    if beta is None:
        report.add(
            CheckResult(
                "drift_e_fro_sq",
                measured=float("nan"),
                bound=0.0,
                pass_rate=float("nan"),
                n=0,
                notes="degenerate drift rate (no perturbation and no noise); probes not applicable",
            )
        )
        _finish_verify(report, pgd_traj, cfg, out)
        return report
    probe_cfg = OptimizerConfig(eta=cfg.step_size(), nu=nu, horizon_t=cfg.horizon_t)
    times = [t for t in sorted(pgd_traj.iterates) if t > 0]
    idx = np.linspace(0, len(times) - 1, min(drift_probes, len(times))).astype(int)
    rng_d = child_rng(cfg.seed, 0xDB1F7)
    ok = 0
    worst = -math.inf
    for i in idx:
        probe = martingale_drift_probe(
            pgd_traj.iterates[times[i]],
            desk_problem,
            probe_cfg,
            "e_fro_sq",
            (alpha0, beta, 0.0),
            drift_resamples,
            rng_d,
            t=times[i],
        )
        ok += probe.satisfied
        worst = max(worst, probe.conditional_mean - probe.drift_bound)
    report.add(
        CheckResult(
            "drift_e_fro_sq",
            measured=worst,
            bound=0.0,
            pass_rate=ok / len(idx),
            n=int(len(idx)),
            notes=f"{drift_resamples} resamples per probe; measured = worst (mean - bound)",
        )
    )

    _finish_verify(report, pgd_traj, cfg, out)
    return report


def _finish_verify(report: DiagnosticsReport, pgd_traj, cfg: ExperimentConfig, out: Path) -> None:
    """Append the tail-stability summary and write the report file."""
    tail = [s.recovery_error for s in pgd_traj.samples if s.t >= 0.8 * cfg.horizon_t]
    tail_arr = np.array(tail)
    med = float(np.median(tail_arr))
    within = float(np.mean(np.abs(tail_arr - med) <= 0.5 * med)) if med > 0 else 1.0
    report.add(
        CheckResult(
            "tail_stability",
            measured=float(tail_arr.max() / max(tail_arr.min(), 1e-300)),
            bound=float("nan"),
            pass_rate=within,
            n=len(tail),
            notes="report-only: max/min error ratio and fraction within 50% of the median over the final 20%",
        )
    )
    (out / "verify_report.json").write_text(report.to_json())
