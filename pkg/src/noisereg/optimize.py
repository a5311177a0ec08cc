"""Gradient-descent loops with per-column sphere perturbation.

``run`` drives the PSD update

    X_{t+1} = X_t - eta * (Xt~ Xt~^T - Y_sym) Xt~,   Xt~ = X_t + W_t,

where each column of ``W_t`` is drawn fresh and uniform on the
radius-``nu`` sphere (``nu == 0`` gives plain gradient descent), and
``run_rectangular`` drives the analogous simultaneous update of a
``(U, V)`` pair.  Metrics are recorded at configurable sample times; the
minimum recovery error over *every* step is tracked online as the
early-stopping oracle.

Two engines implement the same recursion: a numba-compiled loop (default)
and a pure-NumPy twin used for cross-validation.  Both consume the random
stream identically, so a fixed seed yields bit-identical trajectories.
"""

from __future__ import annotations

import dataclasses
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .linalg import make_rng, sample_orthogonal, sample_sphere_columns
from .model import RecoveryProblem, RectFactorPair

__all__ = [
    "InitSpec",
    "OptimizerConfig",
    "MetricSample",
    "Trajectory",
    "DivergenceError",
    "init_iterate",
    "init_rect_pair",
    "pgd_step",
    "run",
    "run_rectangular",
    "suggested_hyperparameters",
    "CSV_HEADER",
    "trajectory_to_csv",
    "write_trajectory_csv",
    "read_trajectory_csv",
]

CSV_HEADER = "t,loss,recovery_error,normalized_mse,r_norm_sq,e_fro_sq,er_norm_sq,x_fro_sq"

_INIT_VARIANTS = ("gd_small", "gd_large", "rank_one_ball", "explicit")


class DivergenceError(RuntimeError):
    """Raised when an iterate stops being finite; carries the last good sample."""

    def __init__(self, t: int, last_sample: Optional["MetricSample"], samples=None):
        self.t = t
        self.last_sample = last_sample
        self.samples = list(samples) if samples is not None else []
        last_t = last_sample.t if last_sample is not None else "none"
        super().__init__(f"iterate diverged at step {t} (last finite sample: t={last_t})")


@dataclass(frozen=True)
class InitSpec:
    """Initialization rule for the iterate.

    ``gd_small`` is ``(1/d) A`` with ``A`` Haar orthogonal, ``gd_large`` is
    ``(1/sqrt(d)) B`` with ``B`` standard Gaussian, ``rank_one_ball`` is
    ``x0 x0^T`` with ``x0`` uniform in the unit ball, and ``explicit``
    uses the supplied matrix (or ``(U, V)`` pair for rectangular runs).
    """

    variant: str = "gd_large"
    explicit_matrix: Optional[np.ndarray] = None
    explicit_pair: Optional[tuple] = None

    def __post_init__(self):
        if self.variant not in _INIT_VARIANTS:
            raise ValueError(f"unknown init variant {self.variant!r}")
        if self.variant == "explicit" and self.explicit_matrix is None and self.explicit_pair is None:
            raise ValueError("explicit init requires a matrix or a factor pair")

    @staticmethod
    def gd_small() -> "InitSpec":
        return InitSpec("gd_small")

    @staticmethod
    def gd_large() -> "InitSpec":
        return InitSpec("gd_large")

    @staticmethod
    def rank_one_ball() -> "InitSpec":
        return InitSpec("rank_one_ball")

    @staticmethod
    def explicit(matrix: np.ndarray) -> "InitSpec":
        return InitSpec("explicit", explicit_matrix=np.asarray(matrix, dtype=np.float64))

    @staticmethod
    def explicit_rect(u: np.ndarray, v: np.ndarray) -> "InitSpec":
        pair = (np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64))
        return InitSpec("explicit", explicit_pair=pair)


@dataclass(frozen=True)
class OptimizerConfig:
    """Hyperparameters and bookkeeping for one optimization run.

    ``eta == 0`` is permitted as a degenerate no-op (useful in tests even
    though real runs use a positive step size).  ``sample_times``
    overrides the stride cadence with explicit step indices; ``t = 0``
    and ``t = horizon_t`` are always recorded.  ``store_iterates`` keeps
    the iterate snapshot at each sample time on the trajectory, which the
    drift probes need.
    """

    eta: float
    nu: float = 0.0
    horizon_t: int = 1000
    metric_stride: int = 1
    init: InitSpec = field(default_factory=InitSpec)
    seed: int = 0
    confidence_delta: float = 0.1
    sample_times: Optional[Sequence[int]] = None
    store_iterates: bool = False
    engine: str = "auto"

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError(f"step size must be nonnegative, got eta={self.eta}")
        if not self.nu >= 0:
            raise ValueError(f"perturbation radius must be nonnegative, got nu={self.nu}")
        if self.horizon_t < 1:
            raise ValueError(f"horizon must be at least 1, got {self.horizon_t}")
        if self.metric_stride < 1:
            raise ValueError(f"metric stride must be at least 1, got {self.metric_stride}")
        if not 0 < self.confidence_delta < 1:
            raise ValueError(f"confidence delta must lie in (0, 1), got {self.confidence_delta}")
        if self.engine not in ("auto", "numba", "numpy"):
            raise ValueError(f"unknown engine {self.engine!r}")


@dataclass(frozen=True)
class MetricSample:
    """Point-in-time metrics; subspace fields are NaN when the rank-one
    decomposition does not apply (rank > 1 or rectangular runs).

    The decomposition fields are taken against the unit direction
    ``u* = x*/||x*||`` of the planted vector, with the raw iterate:
    ``r = X^T u*`` and ``E = X - u* r^T``.
    """

    t: int
    loss: float
    recovery_error: float
    normalized_mse: float
    r_norm_sq: float
    e_fro_sq: float
    er_norm_sq: float
    x_fro_sq: float


@dataclass
class Trajectory:
    """Recorded samples plus the early-stopping oracle of one run."""

    samples: list
    final_state: Union[np.ndarray, RectFactorPair]
    config_echo: OptimizerConfig
    min_error_sample: MetricSample
    has_subspace_metrics: bool
    problem_kind: str = "psd"
    iterates: Optional[dict] = None  # t -> iterate snapshot (or (U, V) tuple)

    @property
    def final_sample(self) -> MetricSample:
        return self.samples[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples], dtype=np.int64)


def init_iterate(spec: InitSpec, d: int, rng: np.random.Generator) -> np.ndarray:
    """Draw the starting iterate for a PSD run."""
    if spec.variant == "gd_small":
        return sample_orthogonal(d, rng) / d
    if spec.variant == "gd_large":
        return rng.standard_normal((d, d)) / math.sqrt(d)
    if spec.variant == "rank_one_ball":
        g = rng.standard_normal(d)
        g /= np.sqrt(g @ g)
        radius = rng.random() ** (1.0 / d)
        x0 = radius * g
        return np.outer(x0, x0)
    matrix = spec.explicit_matrix
    if matrix is None:
        raise ValueError("explicit init for a PSD run needs explicit_matrix")
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (d, d):
        raise ValueError(f"explicit init has shape {matrix.shape}, expected {(d, d)}")
    return matrix.copy()


def init_rect_pair(spec: InitSpec, d: int, rng: np.random.Generator) -> RectFactorPair:
    """Draw the starting ``(U, V)`` pair for a rectangular run (U first)."""
    if spec.variant == "gd_small":
        return RectFactorPair(sample_orthogonal(d, rng) / d, sample_orthogonal(d, rng) / d)
    if spec.variant == "gd_large":
        scale = 1.0 / math.sqrt(d)
        return RectFactorPair(scale * rng.standard_normal((d, d)), scale * rng.standard_normal((d, d)))
    if spec.variant == "explicit":
        if spec.explicit_pair is None:
            raise ValueError("explicit init for a rectangular run needs explicit_pair")
        u, v = (np.asarray(m, dtype=np.float64) for m in spec.explicit_pair)
        if u.shape != (d, d) or v.shape != (d, d):
            raise ValueError(f"explicit pair shapes {u.shape}, {v.shape} do not match d={d}")
        return RectFactorPair(u.copy(), v.copy())
    raise ValueError(f"init variant {spec.variant!r} is not defined for rectangular runs")


def pgd_step(
    x: np.ndarray,
    problem: RecoveryProblem,
    eta: float,
    nu: float,
    rng: Optional[np.random.Generator] = None,
    w: Optional[np.ndarray] = None,
) -> np.ndarray:
    """One exact update; ``nu == 0`` reduces to the plain GD step.

    A precomputed perturbation ``w`` overrides sampling (handy for tests
    and probes); otherwise ``nu > 0`` draws fresh sphere columns from
    ``rng``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.d, problem.d):
        raise ValueError(f"iterate shape {x.shape} does not match d={problem.d}")
    if nu < 0:
        raise ValueError(f"perturbation radius must be nonnegative, got {nu}")
    if w is None:
        if nu > 0:
            if rng is None:
                raise ValueError("nu > 0 requires a generator (or an explicit w)")
            w = sample_sphere_columns(problem.d, problem.d, nu, rng)
            xt = x + w
        else:
            xt = x
    else:
        xt = x + np.asarray(w, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        out = x - eta * ((xt @ xt.T - problem.y_sym) @ xt)
    if not np.all(np.isfinite(out)):
        raise DivergenceError(t=1, last_sample=None)
    return out


def suggested_hyperparameters(
    problem: RecoveryProblem,
    confidence_delta: float = 0.1,
    k_nu: float = 0.4,
    k_eta: float = 0.25,
) -> tuple[float, float]:
    """Step size and perturbation radius from the noise level.

    Returns ``(eta, nu)`` with ``nu**2 = k_nu * sqrt(d * sigma**2)`` and
    ``eta = k_eta * sigma**2 / d**2``.  The defaults are the rank-one
    experiment constants; pass other coefficients to override.  The
    confidence parameter is validated for interface stability; the
    default coefficients already absorb its logarithmic effect on the
    admissible step size.
    """
    if not 0 < confidence_delta < 1:
        raise ValueError(f"confidence delta must lie in (0, 1), got {confidence_delta}")
    if problem.sigma <= 0:
        raise ValueError("hyperparameter suggestion needs sigma > 0")
    d = problem.d
    sigma_sq = problem.sigma**2
    nu_sq = k_nu * math.sqrt(d * sigma_sq)
    eta = k_eta * sigma_sq / d**2
    return eta, math.sqrt(nu_sq)


def _resolve_sample_times(config: OptimizerConfig) -> np.ndarray:
    t_end = config.horizon_t
    if config.sample_times is not None:
        ts = np.unique(np.asarray(config.sample_times, dtype=np.int64))
        if ts.size and (ts[0] < 0 or ts[-1] > t_end):
            raise ValueError("sample times must lie in [0, horizon_t]")
    else:
        ts = np.arange(0, t_end + 1, config.metric_stride, dtype=np.int64)
    if t_end not in ts:
        ts = np.append(ts, t_end)
    if 0 not in ts:
        ts = np.append(ts, 0)
    return np.unique(ts)


def _psd_metrics(t: int, x: np.ndarray, problem: RecoveryProblem, u_star: Optional[np.ndarray]) -> MetricSample:
    s = x @ x.T
    resid_obs = s - problem.y_observed
    resid_star = s - problem.y_star
    loss_val = 0.25 * float(np.sum(resid_obs * resid_obs))
    err = float(np.sum(resid_star * resid_star))
    if u_star is not None:
        r = x.T @ u_star
        e = x - np.outer(u_star, r)
        er = e @ r
        r2 = float(r @ r)
        e2 = float(np.sum(e * e))
        er2 = float(er @ er)
    else:
        r2 = e2 = er2 = float("nan")
    return MetricSample(
        t=int(t),
        loss=loss_val,
        recovery_error=err,
        normalized_mse=err / problem.d**2,
        r_norm_sq=r2,
        e_fro_sq=e2,
        er_norm_sq=er2,
        x_fro_sq=float(np.sum(x * x)),
    )


def _rect_metrics(t: int, u: np.ndarray, v: np.ndarray, problem: RecoveryProblem) -> MetricSample:
    p = u @ v.T
    resid_obs = p - problem.y_observed
    resid_star = p - problem.y_star
    err = float(np.sum(resid_star * resid_star))
    return MetricSample(
        t=int(t),
        loss=0.5 * float(np.sum(resid_obs * resid_obs)),
        recovery_error=err,
        normalized_mse=err / problem.d**2,
        r_norm_sq=float("nan"),
        e_fro_sq=float("nan"),
        er_norm_sq=float("nan"),
        x_fro_sq=float(np.sum(u * u) + np.sum(v * v)),
    )


def _psd_loop_numpy(x, y_sym, y_star, eta, nu, n_steps, sample_ts, snaps, x_min, rng):
    """Pure-NumPy twin of :func:`noisereg._kernels.psd_loop`."""
    d = x.shape[0]
    s = x @ x.T
    min_err = float(np.sum((s - y_star) ** 2))
    min_t = 0
    x_min[:] = x
    ptr = 0
    diverged_t = -1
    for t in range(1, n_steps + 1):
        if nu > 0.0:
            w = rng.standard_normal((d, d))
            w *= nu / np.sqrt(np.sum(w * w, axis=0))
            xt = x + w
        else:
            xt = x
        g = (xt @ xt.T - y_sym) @ xt
        x -= eta * g
        s = x @ x.T
        err = float(np.sum((s - y_star) ** 2))
        if not (err < np.inf):
            diverged_t = t
            break
        if err < min_err:
            min_err = err
            min_t = t
            x_min[:] = x
        if ptr < sample_ts.shape[0] and t == sample_ts[ptr]:
            snaps[ptr] = x
            ptr += 1
    return min_err, min_t, diverged_t, ptr


def _rect_loop_numpy(u, v, y, y_star, eta, nu, n_steps, sample_ts, snaps_u, snaps_v, u_min, v_min, rng):
    """Pure-NumPy twin of :func:`noisereg._kernels.rect_loop`."""
    d = u.shape[0]
    p = u @ v.T
    min_err = float(np.sum((p - y_star) ** 2))
    min_t = 0
    u_min[:] = u
    v_min[:] = v
    ptr = 0
    diverged_t = -1
    for t in range(1, n_steps + 1):
        if nu > 0.0:
            w = rng.standard_normal((d, d))
            w *= nu / np.sqrt(np.sum(w * w, axis=0))
            z = rng.standard_normal((d, d))
            z *= nu / np.sqrt(np.sum(z * z, axis=0))
            ut = u + w
            vt = v + z
        else:
            ut = u
            vt = v
        resid = ut @ vt.T - y
        gu = resid @ vt
        gv = resid.T @ ut
        u -= eta * gu
        v -= eta * gv
        p = u @ v.T
        err = float(np.sum((p - y_star) ** 2))
        if not (err < np.inf):
            diverged_t = t
            break
        if err < min_err:
            min_err = err
            min_t = t
            u_min[:] = u
            v_min[:] = v
        if ptr < sample_ts.shape[0] and t == sample_ts[ptr]:
            snaps_u[ptr] = u
            snaps_v[ptr] = v
            ptr += 1
    return min_err, min_t, diverged_t, ptr


def run(problem: RecoveryProblem, config: OptimizerConfig) -> Trajectory:
    """Run the PSD recursion for ``horizon_t`` steps and collect metrics.

    Raises :class:`DivergenceError` (with the recorded prefix attached) as
    soon as an iterate stops being finite.
    """
    if problem.kind != "psd":
        raise ValueError("run() expects a PSD problem; use run_rectangular() otherwise")
    rng = make_rng(config.seed)
    x0 = np.ascontiguousarray(init_iterate(config.init, problem.d, rng), dtype=np.float64)

    ts = _resolve_sample_times(config)
    ts_after = ts[ts > 0]
    d = problem.d
    snaps = np.empty((ts_after.size, d, d), dtype=np.float64)
    x_min = np.empty((d, d), dtype=np.float64)
    x = x0.copy()
    loop = _kernels.psd_loop if config.engine in ("auto", "numba") else _psd_loop_numpy
    _, min_t, diverged_t, ptr = loop(
        x,
        np.ascontiguousarray(problem.y_sym),
        np.ascontiguousarray(problem.y_star),
        float(config.eta),
        float(config.nu),
        int(config.horizon_t),
        ts_after,
        snaps,
        x_min,
        rng,
    )

    u_star = problem.u_star if problem.rank == 1 else None
    samples = [_psd_metrics(0, x0, problem, u_star)]
    samples.extend(_psd_metrics(int(ts_after[i]), snaps[i], problem, u_star) for i in range(ptr))
    if diverged_t >= 0:
        raise DivergenceError(t=diverged_t, last_sample=samples[-1], samples=samples)

    # Re-derive the oracle's metrics from the stored argmin iterate and pick
    # the minimum consistently with the recorded samples.
    min_sample = _psd_metrics(min_t, x_min, problem, u_star)
    for s in samples:
        if s.recovery_error < min_sample.recovery_error:
            min_sample = s

    iterates = None
    if config.store_iterates:
        iterates = {0: x0.copy()}
        for i in range(ptr):
            iterates[int(ts_after[i])] = snaps[i].copy()

    return Trajectory(
        samples=samples,
        final_state=x,
        config_echo=dataclasses.replace(config),
        min_error_sample=min_sample,
        has_subspace_metrics=u_star is not None,
        problem_kind="psd",
        iterates=iterates,
    )


def run_rectangular(problem: RecoveryProblem, config: OptimizerConfig) -> Trajectory:
    """Rectangular twin of :func:`run`; subspace metrics are flagged absent."""
    if problem.kind != "rectangular":
        raise ValueError("run_rectangular() expects a rectangular problem")
    rng = make_rng(config.seed)
    pair = init_rect_pair(config.init, problem.d, rng)
    u0, v0 = pair.u.copy(), pair.v.copy()

    ts = _resolve_sample_times(config)
    ts_after = ts[ts > 0]
    d = problem.d
    snaps_u = np.empty((ts_after.size, d, d), dtype=np.float64)
    snaps_v = np.empty((ts_after.size, d, d), dtype=np.float64)
    u_min = np.empty((d, d), dtype=np.float64)
    v_min = np.empty((d, d), dtype=np.float64)
    u = np.ascontiguousarray(pair.u)
    v = np.ascontiguousarray(pair.v)
    loop = _kernels.rect_loop if config.engine in ("auto", "numba") else _rect_loop_numpy
    _, min_t, diverged_t, ptr = loop(
        u,
        v,
        np.ascontiguousarray(problem.y_observed),
        np.ascontiguousarray(problem.y_star),
        float(config.eta),
        float(config.nu),
        int(config.horizon_t),
        ts_after,
        snaps_u,
        snaps_v,
        u_min,
        v_min,
        rng,
    )

    samples = [_rect_metrics(0, u0, v0, problem)]
    samples.extend(_rect_metrics(int(ts_after[i]), snaps_u[i], snaps_v[i], problem) for i in range(ptr))
    if diverged_t >= 0:
        raise DivergenceError(t=diverged_t, last_sample=samples[-1], samples=samples)

    min_sample = _rect_metrics(min_t, u_min, v_min, problem)
    for s in samples:
        if s.recovery_error < min_sample.recovery_error:
            min_sample = s

    iterates = None
    if config.store_iterates:
        iterates = {0: (u0.copy(), v0.copy())}
        for i in range(ptr):
            iterates[int(ts_after[i])] = (snaps_u[i].copy(), snaps_v[i].copy())

    return Trajectory(
        samples=samples,
        final_state=RectFactorPair(u, v),
        config_echo=dataclasses.replace(config),
        min_error_sample=min_sample,
        has_subspace_metrics=False,
        problem_kind="rectangular",
        iterates=iterates,
    )


def trajectory_to_csv(traj: Trajectory) -> str:
    """Render all samples as CSV with 17 significant digits."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for s in traj.samples:
        buf.write(
            f"{s.t},{s.loss:.17g},{s.recovery_error:.17g},{s.normalized_mse:.17g},"
            f"{s.r_norm_sq:.17g},{s.e_fro_sq:.17g},{s.er_norm_sq:.17g},{s.x_fro_sq:.17g}\n"
        )
    return buf.getvalue()


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(trajectory_to_csv(traj))


def read_trajectory_csv(path) -> Trajectory:
    """Rebuild a metrics-only trajectory from an emitted CSV.

    Iterate-level data is not stored in the CSV, so ``final_state`` and
    ``iterates`` are ``None`` and ``min_error_sample`` is the minimum over
    the *recorded* samples (the online every-step oracle lives in the
    aggregate files).
    """
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected trajectory header {header!r}")
        samples = []
        for line in fh:
            cells = line.strip().split(",")
            samples.append(
                MetricSample(
                    t=int(cells[0]),
                    loss=float(cells[1]),
                    recovery_error=float(cells[2]),
                    normalized_mse=float(cells[3]),
                    r_norm_sq=float(cells[4]),
                    e_fro_sq=float(cells[5]),
                    er_norm_sq=float(cells[6]),
                    x_fro_sq=float(cells[7]),
                )
            )
    if not samples:
        raise ValueError(f"no samples in {path}")
    has_subspace = not math.isnan(samples[-1].r_norm_sq)
    return Trajectory(
        samples=samples,
        final_state=None,
        config_echo=OptimizerConfig(eta=0.0, horizon_t=max(1, samples[-1].t)),
        min_error_sample=min(samples, key=lambda s: s.recovery_error),
        has_subspace_metrics=has_subspace,
        problem_kind="psd" if has_subspace else "unknown",
    )
