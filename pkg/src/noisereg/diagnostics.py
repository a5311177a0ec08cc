"""Empirical checks of the assumptions, dissipativity bounds, trajectory
bands, and super-martingale drift behind the noise-regularization claim.

Every check here works in the normalized frame: with planted vector
``x*``, put ``s^2 = ||x*||^2`` and rescale ``u* = x*/s``, ``X' = X/s``,
``sigma' = sigma/s^2``, ``Gamma' = Gamma_sym/s^2``, ``eta' = eta s^2``,
``nu' = nu/s``.  The rescaled run is again a valid instance with a
unit-norm planted vector, which is the frame in which all the bounds are
stated; mixing frames silently breaks every one of them.  Problems built
with a unit-norm ``x*`` pass through unchanged.

Checks never throw on a failed bound; they return report objects with the
measured value, the bound, and a pass verdict or pass rate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linalg import spectral_norm
from .model import RecoveryProblem
from .optimize import OptimizerConfig, Trajectory

__all__ = [
    "SubspaceDecomposition",
    "decompose",
    "error_decomposition",
    "AssumptionReport",
    "check_assumption_noise",
    "check_assumption_init",
    "NormalizedView",
    "normalized_view",
    "dissipative_shift",
    "DissipativityEstimate",
    "RegionError",
    "dissipativity_probe",
    "sample_region_state",
    "CheckResult",
    "DiagnosticsReport",
    "check_trajectory_lemmas",
    "MartingaleProbe",
    "martingale_drift_probe",
    "orthogonal_drift_params",
    "DEFAULT_LEMMA_CONSTANTS",
]

DEFAULT_LEMMA_CONSTANTS = {"c1": 5.0, "c2": 5.0, "c3": 5.0}

_DRIFT_G_NAMES = ("e_fro_sq", "r_dist", "er_norm_sq")


# ---------------------------------------------------------------------------
# Signal/orthogonal decomposition and the three-term error identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubspaceDecomposition:
    """Split ``X = u* r^T + E`` with ``r = X^T u*`` and ``E`` column-wise
    orthogonal to ``u*``."""

    r: np.ndarray
    e: np.ndarray
    u_star: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return np.outer(self.u_star, self.r) + self.e


def decompose(x: np.ndarray, u_star: np.ndarray) -> SubspaceDecomposition:
    """Project ``x`` onto the planted direction and its orthogonal complement."""
    x = np.asarray(x, dtype=np.float64)
    u_star = np.asarray(u_star, dtype=np.float64).reshape(-1)
    norm = float(np.sqrt(u_star @ u_star))
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"u_star must be unit norm, got ||u|| = {norm}")
    if x.shape != (u_star.size, u_star.size):
        raise ValueError(f"iterate shape {x.shape} does not match d={u_star.size}")
    r = x.T @ u_star
    e = x - np.outer(u_star, r)
    return SubspaceDecomposition(r=r, e=e, u_star=u_star)


def error_decomposition(
    dec: SubspaceDecomposition, x: np.ndarray, y_star_unit: np.ndarray
) -> tuple[float, float, float, float]:
    """Three-term split of the recovery error in the unit frame.

    Returns ``(t1, t2, t3, total)`` with ``t1 = (1 - ||r||^2)^2``,
    ``t2 = 2 ||E r||^2``, ``t3 = ||E E^T||_F^2`` and ``total`` the directly
    computed ``||X X^T - u* u*^T||_F^2``; the three terms sum to the total.
    """
    x = np.asarray(x, dtype=np.float64)
    y_star_unit = np.asarray(y_star_unit, dtype=np.float64)
    expected = np.outer(dec.u_star, dec.u_star)
    if y_star_unit.shape != expected.shape or not np.allclose(y_star_unit, expected, atol=1e-10):
        raise ValueError("y_star_unit must equal the rank-one target u* u*^T")
    if not np.allclose(dec.reconstruct(), x, atol=1e-10):
        raise ValueError("decomposition does not reconstruct the given iterate")
    r2 = float(dec.r @ dec.r)
    er = dec.e @ dec.r
    ee = dec.e @ dec.e.T
    t1 = (1.0 - r2) ** 2
    t2 = 2.0 * float(er @ er)
    t3 = float(np.sum(ee * ee))
    resid = x @ x.T - y_star_unit
    total = float(np.sum(resid * resid))
    return t1, t2, t3, total


# ---------------------------------------------------------------------------
# Normalized frame plumbing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalizedView:
    """Rank-one problem mapped to the frame where the planted vector is unit."""

    d: int
    u_star: np.ndarray
    scale: float  # s = ||x*||
    scale_sq: float
    sigma: float  # sigma / s^2
    gamma_sym: np.ndarray  # Gamma_sym / s^2
    y_sym: np.ndarray  # Y_sym / s^2
    gamma_sym_spec: float
    gamma_sym_u_norm: float

    def iterate(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) / self.scale

    def eta(self, eta: float) -> float:
        return eta * self.scale_sq

    def nu(self, nu: float) -> float:
        return nu / self.scale


def normalized_view(problem: RecoveryProblem) -> NormalizedView:
    """Build the unit-frame view of a rank-one PSD problem."""
    if problem.kind != "psd" or problem.rank != 1:
        raise ValueError("the normalized frame is defined for rank-one PSD problems")
    s = problem.signal_scale
    if s == 0:
        raise ValueError("planted vector must be nonzero")
    s2 = s * s
    u = problem.u_star
    gamma_sym = problem.gamma_sym / s2
    return NormalizedView(
        d=problem.d,
        u_star=u,
        scale=s,
        scale_sq=s2,
        sigma=problem.sigma / s2,
        gamma_sym=gamma_sym,
        y_sym=problem.y_sym / s2,
        gamma_sym_spec=spectral_norm(gamma_sym),
        gamma_sym_u_norm=float(np.linalg.norm(gamma_sym @ u)),
    )


def dissipative_shift(problem: RecoveryProblem, nu: float) -> float:
    """Equilibrium target ``a = 1 - (2d + 1) nu'^2 / d + u*^T Gamma' u*``
    of the signal component, in the normalized frame (``nu`` raw)."""
    view = normalized_view(problem)
    nu_n = view.nu(nu)
    u = view.u_star
    return 1.0 - (2.0 * view.d + 1.0) * nu_n * nu_n / view.d + float(u @ (view.gamma_sym @ u))


# ---------------------------------------------------------------------------
# Assumption checks
# ---------------------------------------------------------------------------


@dataclass
class AssumptionReport:
    """Measured quantities vs thresholds; one verdict per inequality."""

    quantities: dict
    bounds: dict
    verdicts: dict
    notes: str = ""

    @property
    def all_pass(self) -> bool:
        return all(self.verdicts.values())

    def to_json_dict(self) -> dict:
        return {
            "quantities": self.quantities,
            "bounds": self.bounds,
            "verdicts": self.verdicts,
            "notes": self.notes,
        }


def check_assumption_noise(problem: RecoveryProblem, c0: float, c1: float) -> AssumptionReport:
    """Signal-to-noise inequalities for a rank-one instance.

    Evaluates, with ``u* = x*/||x*||``:

    - ``signal_norm``:    ``||x*||_2 >= c0``
    - ``sigma_small``:    ``sigma <= c1 / d``
    - ``gamma_fro``:      ``||Gamma_sym||_F <= 2 d sigma``
    - ``gamma_spec_max``: ``max(||Gamma_sym u*||_2, ||Gamma_sym||_2) <= c1 sqrt(d) sigma``

    All quantities are raw-frame; the noise-to-``sigma`` ratios are
    invariant under the unit-frame rescaling.  Reports, never raises, on a
    failed bound.
    """
    if problem.kind != "psd" or problem.rank != 1:
        raise ValueError("noise assumption check requires a rank-one PSD problem")
    d = problem.d
    sigma = problem.sigma
    gamma_sym = problem.gamma_sym
    u = problem.u_star
    x_norm = problem.signal_scale
    gamma_fro = float(np.sqrt(np.sum(gamma_sym * gamma_sym)))
    gamma_spec = spectral_norm(gamma_sym)
    gamma_u = float(np.linalg.norm(gamma_sym @ u))
    quantities = {
        "signal_norm": x_norm,
        "sigma": sigma,
        "gamma_sym_fro": gamma_fro,
        "gamma_sym_u_norm": gamma_u,
        "gamma_sym_spec": gamma_spec,
    }
    bounds = {
        "signal_norm": c0,
        "sigma_small": c1 / d,
        "gamma_fro": 2.0 * d * sigma,
        "gamma_spec_max": c1 * math.sqrt(d) * sigma,
    }
    verdicts = {
        "signal_norm": x_norm >= c0,
        "sigma_small": sigma <= bounds["sigma_small"],
        "gamma_fro": gamma_fro <= bounds["gamma_fro"],
        "gamma_spec_max": max(gamma_u, gamma_spec) <= bounds["gamma_spec_max"],
    }
    return AssumptionReport(quantities, bounds, verdicts, notes="noise norms measured against u* = x*/||x*||")


def check_assumption_init(x0: np.ndarray, problem: RecoveryProblem, c1: float) -> AssumptionReport:
    """Initialization inequalities, in the normalized frame.

    With ``sigma' = sigma/||x*||^2`` checks ``||X0||_F^2 <= 1 - c1 sqrt(d sigma'^2)``
    and ``||X0^T u*||_2^2 >= c1^2 d sigma'^2``.  ``x0`` is interpreted as a
    unit-frame iterate (the ball initialization already is one).
    """
    view = normalized_view(problem)
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (view.d, view.d):
        raise ValueError(f"iterate shape {x0.shape} does not match d={view.d}")
    d = view.d
    sqrt_dsig = math.sqrt(d * view.sigma**2)
    x0_fro_sq = float(np.sum(x0 * x0))
    align_sq = float(np.sum((x0.T @ view.u_star) ** 2))
    quantities = {"x0_fro_sq": x0_fro_sq, "x0_align_sq": align_sq, "sigma_normalized": view.sigma}
    bounds = {"x0_bounded": 1.0 - c1 * sqrt_dsig, "x0_aligned": c1**2 * d * view.sigma**2}
    verdicts = {
        "x0_bounded": x0_fro_sq <= bounds["x0_bounded"],
        "x0_aligned": align_sq >= bounds["x0_aligned"],
    }
    return AssumptionReport(quantities, bounds, verdicts, notes="normalized frame (unit planted vector)")


# ---------------------------------------------------------------------------
# Subspace dissipativity probes
# ---------------------------------------------------------------------------


class RegionError(ValueError):
    """A dissipativity probe was asked outside the region where its bound holds."""


@dataclass
class DissipativityEstimate:
    """Measured inner product (Monte-Carlo and closed form) vs the lower bound."""

    which: str
    lhs: float  # Monte-Carlo estimate
    lhs_closed_form: float
    rhs_bound: float
    rhs_bound_alt: Optional[float]  # lemma-statement slack variant for pd_E
    margin: float  # lhs - rhs_bound
    mc_samples: int
    mc_std_err: float
    satisfied: bool


def _sphere_batch(n: int, d: int, nu: float, rng: np.random.Generator) -> np.ndarray:
    w = rng.standard_normal((n, d, d))
    norms = np.sqrt(np.sum(w * w, axis=1, keepdims=True))
    return w * (nu / norms)


def _perturbed_gradients(xn, y_sym_n, nu_n, n, rng):
    if nu_n > 0:
        xt = xn[None, :, :] + _sphere_batch(n, xn.shape[0], nu_n, rng)
    else:
        xt = np.broadcast_to(xn, (n, *xn.shape)).copy()
    m = xt @ np.swapaxes(xt, 1, 2) - y_sym_n[None, :, :]
    return m @ xt


def dissipativity_probe(
    x: np.ndarray,
    problem: RecoveryProblem,
    nu: float,
    which: str,
    resamples: int,
    rng: np.random.Generator,
    c: float = 1.0,
) -> DissipativityEstimate:
    """Estimate one subspace-dissipativity inner product and compare to its bound.

    ``which`` selects the inequality:

    - ``pd_E``:  ``<E_W[grad_E(X+W)], E> >= ((2d+1)nu'^2/d - ||G'||_2)||E||_F^2 - slack``
      with the derivation's slack ``||G'||_2^2 / 4`` driving the verdict and
      the statement variant ``||G' u*||_2^2 / 4`` reported alongside
      (``G'`` is the normalized symmetrized noise).
    - ``pd_r``:  valid when ``||r||^2 >= a``;  bound ``||r||^2(||r||^2 - a) - ||G' u*||^2/4``.
    - ``pd_r2``: valid when ``||E||_F^2 <= c^2 ||G' u*||`` and
      ``||G' u*||^2 <= ||r||^2 <= a``; bound on the negated inner product
      ``||r||^2(a - ||r||^2) - (c^2 + c) ||G' u*||^2``.

    The left side is estimated two ways: Monte-Carlo over ``resamples``
    fresh perturbations, and in closed form through the exact smoothed
    gradient.  ``satisfied`` compares the Monte-Carlo value against the
    bound minus three standard errors.  Inputs are raw-frame; the probe
    rescales internally.
    """
    if which not in ("pd_E", "pd_r", "pd_r2"):
        raise ValueError(f"unknown dissipativity inequality {which!r}")
    if resamples < 1:
        raise ValueError("resamples must be at least 1")
    view = normalized_view(problem)
    xn = view.iterate(x)
    nu_n = view.nu(nu)
    d = view.d
    u = view.u_star
    r = xn.T @ u
    e = xn - np.outer(u, r)
    r2 = float(r @ r)
    e2 = float(np.sum(e * e))
    gnorm_u = view.gamma_sym_u_norm
    gnorm_spec = view.gamma_sym_spec
    a = 1.0 - (2.0 * d + 1.0) * nu_n * nu_n / d + float(u @ (view.gamma_sym @ u))

    if which == "pd_r" and not r2 >= a:
        raise RegionError(f"pd_r requires ||r||^2 >= a, got {r2:.6g} < {a:.6g}")
    if which == "pd_r2":
        if not e2 <= c * c * gnorm_u:
            raise RegionError(f"pd_r2 requires ||E||_F^2 <= c^2 ||G'u*||, got {e2:.6g} > {c * c * gnorm_u:.6g}")
        if not gnorm_u**2 <= r2 <= a:
            raise RegionError(f"pd_r2 requires ||G'u*||^2 <= ||r||^2 <= a, got ||r||^2 = {r2:.6g}")

    grads = _perturbed_gradients(xn, view.y_sym, nu_n, resamples, rng)
    ridge = (2.0 * d + 1.0) * nu_n * nu_n / d
    grad_exact = (xn @ xn.T - view.y_sym) @ xn + ridge * xn

    rhs_alt = None
    if which == "pd_E":
        vals = np.einsum("nij,ij->n", grads, e)
        lhs_cf = float(np.sum(grad_exact * e))
        rhs = (ridge - gnorm_spec) * e2 - 0.25 * gnorm_spec**2
        rhs_alt = (ridge - gnorm_spec) * e2 - 0.25 * gnorm_u**2
    else:
        vals = np.einsum("i,nij,j->n", u, grads, r)
        lhs_cf = float(u @ (grad_exact @ r))
        if which == "pd_r":
            rhs = r2 * (r2 - a) - 0.25 * gnorm_u**2
        else:
            vals = -vals
            lhs_cf = -lhs_cf
            rhs = r2 * (a - r2) - (c * c + c) * gnorm_u**2

    lhs_mc = float(np.mean(vals))
    std_err = float(np.std(vals, ddof=1) / math.sqrt(resamples)) if resamples > 1 else 0.0
    return DissipativityEstimate(
        which=which,
        lhs=lhs_mc,
        lhs_closed_form=lhs_cf,
        rhs_bound=rhs,
        rhs_bound_alt=rhs_alt,
        margin=lhs_mc - rhs,
        mc_samples=resamples,
        mc_std_err=std_err,
        satisfied=lhs_mc >= rhs - 3.0 * std_err,
    )


def sample_region_state(
    which: str,
    problem: RecoveryProblem,
    nu: float,
    rng: np.random.Generator,
    c: float = 1.0,
) -> np.ndarray:
    """Draw a random raw-frame iterate inside the validity region of ``which``.

    States are built as ``X = s (u* r^T + E)`` with the signal norm and the
    orthogonal mass sampled uniformly from the region's admissible ranges
    (``pd_E`` has no constraint and gets an O(1) generic state).
    """
    view = normalized_view(problem)
    d = view.d
    u = view.u_star
    nu_n = view.nu(nu)
    gnorm_u = view.gamma_sym_u_norm
    a = 1.0 - (2.0 * d + 1.0) * nu_n * nu_n / d + float(u @ (view.gamma_sym @ u))

    if which == "pd_E":
        r2 = rng.uniform(0.0, 2.0)
        e2 = rng.uniform(0.0, 2.0)
    elif which == "pd_r":
        if a <= 0:
            raise RegionError(f"pd_r region is empty: a = {a:.6g} <= 0")
        r2 = rng.uniform(a, max(2.0, 2.0 * a))
        e2 = rng.uniform(0.0, 1.0)
    elif which == "pd_r2":
        lo = gnorm_u**2
        if not lo < a:
            raise RegionError(f"pd_r2 region is empty: ||G'u*||^2 = {lo:.6g} >= a = {a:.6g}")
        r2 = rng.uniform(lo, a)
        e2 = rng.uniform(0.0, c * c * gnorm_u)
    else:
        raise ValueError(f"unknown dissipativity inequality {which!r}")

    r_dir = rng.standard_normal(d)
    r_dir /= np.linalg.norm(r_dir)
    r = math.sqrt(r2) * r_dir
    g = rng.standard_normal((d, d))
    e = g - np.outer(u, u @ g)
    e_norm = math.sqrt(float(np.sum(e * e)))
    e = e * (math.sqrt(e2) / e_norm) if e_norm > 0 else e
    return view.scale * (np.outer(u, r) + e)


# ---------------------------------------------------------------------------
# Trajectory lemma suite
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    """One verdict row of a diagnostics report."""

    check_name: str
    measured: float
    bound: float
    pass_rate: float
    n: int
    notes: str = ""

    def to_json_dict(self) -> dict:
        return {
            "check_name": self.check_name,
            "measured": self.measured,
            "bound": self.bound,
            "pass_rate": self.pass_rate,
            "n": self.n,
            "notes": self.notes,
        }


@dataclass
class DiagnosticsReport:
    """Ordered collection of check results with JSON serialization."""

    entries: list = field(default_factory=list)

    def add(self, entry: CheckResult) -> None:
        self.entries.append(entry)

    def entry(self, name: str) -> CheckResult:
        for e in self.entries:
            if e.check_name == name:
                return e
        raise KeyError(name)

    def to_json_dict(self) -> list:
        return [e.to_json_dict() for e in self.entries]

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent, sort_keys=True)


def check_trajectory_lemmas(
    traj: Trajectory,
    problem: RecoveryProblem,
    constants: Optional[dict] = None,
    burn_in_fraction: float = 0.5,
) -> DiagnosticsReport:
    """Evaluate the five trajectory bands on a recorded rank-one run.

    With ``sig = sqrt(d sigma'^2)`` in the normalized frame, per sample:

    - ``trajectory_bounded``:  ``||X'||_F^2 <= 4d``            (all samples)
    - ``saddle_avoided``:      ``||r'||^2 >= ||G'u*||^2``      (all samples)
    - ``e_band``:              ``||E'||_F^2 <= c1 sig``        (post burn-in)
    - ``r_band``:              ``| ||r'||^2 - 1 | <= c2 sig``  (post burn-in)
    - ``er_band``:             ``||E'r'||^2 <= c3 d sigma'^2`` (post burn-in)

    Each verdict is the fraction of applicable samples inside the band,
    with the extreme measured value attached.  Enlarging any constant can
    only raise the corresponding pass rate.  Noiseless instances collapse
    the bands to zero width that no finite run reaches (the orthogonal
    mass decays like 1/t), so with sigma == 0 the bounds get a 1e-4
    numerical-convergence floor.
    """
    if not traj.has_subspace_metrics:
        raise ValueError("trajectory lemma checks need the rank-one decomposition fields")
    if not 0 <= burn_in_fraction < 1:
        raise ValueError(f"burn-in fraction must lie in [0, 1), got {burn_in_fraction}")
    consts = dict(DEFAULT_LEMMA_CONSTANTS)
    if constants:
        consts.update(constants)
    view = normalized_view(problem)
    d = view.d
    s2 = view.scale_sq
    sig = math.sqrt(d * view.sigma**2)

    samples = traj.samples
    t_end = samples[-1].t
    t_burn = burn_in_fraction * t_end
    x2 = np.array([s.x_fro_sq for s in samples]) / s2
    r2 = np.array([s.r_norm_sq for s in samples]) / s2
    e2 = np.array([s.e_fro_sq for s in samples]) / s2
    er2 = np.array([s.er_norm_sq for s in samples]) / (s2 * s2)
    late = np.array([s.t >= t_burn for s in samples])

    report = DiagnosticsReport()

    def rate(ok: np.ndarray) -> float:
        return float(np.mean(ok)) if ok.size else float("nan")

    report.add(
        CheckResult(
            "trajectory_bounded",
            measured=float(np.max(x2)),
            bound=4.0 * d,
            pass_rate=rate(x2 <= 4.0 * d),
            n=len(samples),
            notes="||X'||_F^2 over all samples",
        )
    )
    saddle_bound = view.gamma_sym_u_norm**2
    report.add(
        CheckResult(
            "saddle_avoided",
            measured=float(np.min(r2)),
            bound=saddle_bound,
            pass_rate=rate(r2 >= saddle_bound),
            n=len(samples),
            notes="min ||r'||^2 over all samples vs ||G'u*||^2",
        )
    )
    band_floor = 1e-4 if view.sigma == 0 else 0.0
    e_bound = max(consts["c1"] * sig, band_floor)
    report.add(
        CheckResult(
            "e_band",
            measured=float(np.max(e2[late])) if late.any() else float("nan"),
            bound=e_bound,
            pass_rate=rate(e2[late] <= e_bound),
            n=int(late.sum()),
            notes=f"post burn-in (t >= {t_burn:.0f})",
        )
    )
    r_bound = max(consts["c2"] * sig, band_floor)
    r_dev = np.abs(r2 - 1.0)
    report.add(
        CheckResult(
            "r_band",
            measured=float(np.max(r_dev[late])) if late.any() else float("nan"),
            bound=r_bound,
            pass_rate=rate(r_dev[late] <= r_bound),
            n=int(late.sum()),
            notes=f"post burn-in (t >= {t_burn:.0f})",
        )
    )
    er_bound = max(consts["c3"] * d * view.sigma**2, band_floor)
    report.add(
        CheckResult(
            "er_band",
            measured=float(np.max(er2[late])) if late.any() else float("nan"),
            bound=er_bound,
            pass_rate=rate(er2[late] <= er_bound),
            n=int(late.sum()),
            notes=f"post burn-in (t >= {t_burn:.0f})",
        )
    )
    return report


# ---------------------------------------------------------------------------
# Super-martingale drift probes
# ---------------------------------------------------------------------------


@dataclass
class MartingaleProbe:
    """One Monte-Carlo test of the one-step drift inequality."""

    g_name: str
    alpha0: float
    beta: float
    lam: float
    t: int
    conditional_mean: float
    drift_bound: float
    satisfied: bool
    resamples: int
    std_err: float
    max_abs_deviation: float  # for the bounded-difference (phi * eta) check
    g_now: float


def orthogonal_drift_params(problem: RecoveryProblem, nu: float) -> tuple[float, float]:
    """Drift constants for ``g = ||E||_F^2`` from the orthogonal-part contraction.

    Returns ``(alpha0, beta)`` with ``beta = 2((2d+1)nu'^2/d - ||G'||_2)``
    and ``alpha0 = ||G'u*||^2 / (2 beta)``, normalized frame.  ``beta`` can
    be negative outside the small-noise regime; the probe handles that.
    """
    view = normalized_view(problem)
    nu_n = view.nu(nu)
    ridge = (2.0 * view.d + 1.0) * nu_n * nu_n / view.d
    beta = 2.0 * (ridge - view.gamma_sym_spec)
    if beta == 0:
        raise ValueError("degenerate drift rate beta = 0")
    alpha0 = view.gamma_sym_u_norm**2 / (2.0 * beta)
    return alpha0, beta


def _drift_g(g_name: str, u: np.ndarray, a: float) -> Callable[[np.ndarray], np.ndarray]:
    if g_name == "e_fro_sq":

        def g(xs: np.ndarray) -> np.ndarray:
            r = np.swapaxes(xs, -1, -2) @ u
            e = xs - u[:, None] * r[..., None, :]
            return np.sum(e * e, axis=(-2, -1))

    elif g_name == "r_dist":

        def g(xs: np.ndarray) -> np.ndarray:
            r = np.swapaxes(xs, -1, -2) @ u
            return np.sum(r * r, axis=-1) - a

    elif g_name == "er_norm_sq":

        def g(xs: np.ndarray) -> np.ndarray:
            r = np.swapaxes(xs, -1, -2) @ u
            e = xs - u[:, None] * r[..., None, :]
            er = e @ r[..., :, None]
            return np.sum(er * er, axis=(-2, -1))

    else:
        raise ValueError(f"unknown drift functional {g_name!r}; expected one of {_DRIFT_G_NAMES}")
    return g


def martingale_drift_probe(
    x_t: np.ndarray,
    problem: RecoveryProblem,
    config: OptimizerConfig,
    g_name: str,
    params: tuple,
    resamples: int,
    rng: np.random.Generator,
    t: int = 0,
) -> MartingaleProbe:
    """Monte-Carlo check of the one-step super-martingale drift condition.

    Resamples the perturbation ``resamples`` times at the frozen iterate
    ``x_t``, estimates ``E[g(x_{t+1}) | x_t]``, and compares it against

        ``(1 - eta beta) (g(x_t) - alpha0 - eta lam) + alpha0 + eta lam``

    declaring the probe satisfied when the conditional mean is below the
    bound plus three standard errors.  ``params = (alpha0, beta, lam)``.
    The largest ``|g(x_{t+1}) - mean|`` across draws is reported for the
    bounded-difference condition.  Raw-frame inputs; normalized internally.
    """
    if resamples < 100:
        raise ValueError(f"drift probes need at least 100 resamples, got {resamples}")
    alpha0, beta, lam = (float(v) for v in params)
    view = normalized_view(problem)
    xn = view.iterate(x_t)
    eta_n = view.eta(config.eta)
    nu_n = view.nu(config.nu)
    d = view.d
    a = 1.0 - (2.0 * d + 1.0) * nu_n * nu_n / d + float(view.u_star @ (view.gamma_sym @ view.u_star))
    g = _drift_g(g_name, view.u_star, a)

    grads = _perturbed_gradients(xn, view.y_sym, nu_n, resamples, rng)
    next_iterates = xn[None, :, :] - eta_n * grads
    gvals = g(next_iterates)
    g_now = float(g(xn[None, :, :])[0])

    cond_mean = float(np.mean(gvals))
    std_err = float(np.std(gvals, ddof=1) / math.sqrt(resamples)) if resamples > 1 else 0.0
    shift = alpha0 + eta_n * lam
    bound = (1.0 - eta_n * beta) * (g_now - shift) + shift
    return MartingaleProbe(
        g_name=g_name,
        alpha0=alpha0,
        beta=beta,
        lam=lam,
        t=int(t),
        conditional_mean=cond_mean,
        drift_bound=bound,
        satisfied=cond_mean <= bound + 3.0 * std_err,
        resamples=resamples,
        std_err=std_err,
        max_abs_deviation=float(np.max(np.abs(gvals - cond_mean))),
        g_now=g_now,
    )
