"""Why the perturbed iteration contracts: dissipativity and one-step drift.

Averaged over the perturbation, the update field has an exact closed form:
the plain gradient plus a ridge (2d+1) nu^2/d times the iterate.  Splitting
an iterate X = u* r^T + E into its planted-direction component r and the
orthogonal remainder E, three inner-product inequalities say the averaged
field pushes E toward zero everywhere and pushes ||r||^2 toward its
equilibrium from either side, up to noise-level slack.

Each probe below estimates the inner product two ways - Monte-Carlo over
fresh perturbations and through the closed form - and compares it to the
claimed lower bound.  The drift probe then checks the resulting one-step
super-martingale inequality for g = ||E||_F^2 at iterates taken from an
actual run.
"""

import math

import numpy as np

import noisereg as nr
from noisereg.harness import sample_times

D, SIGMA = 8, 0.01
u = np.zeros(D)
u[0] = 1.0
problem = nr.make_rank_one_problem(D, u, SIGMA, nr.make_rng(21))
nu = math.sqrt(math.sqrt(D * SIGMA**2))  # nu^2 = sqrt(d sigma^2)
rng = nr.make_rng(22)

print(f"region sweeps at d={D}, sigma={SIGMA} (200 states each, 400 resamples):")
for which in ("pd_E", "pd_r", "pd_r2"):
    ok = 0
    worst = math.inf
    for _ in range(200):
        state = nr.sample_region_state(which, problem, nu, rng)
        est = nr.dissipativity_probe(state, problem, nu, which, 400, rng)
        ok += est.satisfied
        worst = min(worst, est.margin)
    print(f"  {which:5s} satisfied {ok}/200, worst margin {worst:+.4f}")

est = nr.dissipativity_probe(nr.sample_region_state("pd_E", problem, nu, rng), problem, nu, "pd_E", 5000, rng)
print("\none pd_E probe in detail:")
print(f"  Monte-Carlo lhs  {est.lhs:+.5f}  (std err {est.mc_std_err:.2g})")
print(f"  closed-form lhs  {est.lhs_closed_form:+.5f}")
print(f"  lower bound      {est.rhs_bound:+.5f}  (statement variant {est.rhs_bound_alt:+.5f})")

# Drift along a real trajectory at a denser noise level.
d, sigma_sq = 12, 0.1
problem = nr.make_rank_one_problem(d, np.ones(d), math.sqrt(sigma_sq), nr.make_rng(23))
eta = 0.25 * sigma_sq / d**2
nu = math.sqrt(0.4 * math.sqrt(d * sigma_sq))
cfg = nr.OptimizerConfig(eta=eta, nu=nu, horizon_t=400_000,
                         sample_times=sample_times(400_000, 81),
                         init=nr.InitSpec.gd_large(), seed=24, store_iterates=True)
traj = nr.run(problem, cfg)
alpha0, beta = nr.orthogonal_drift_params(problem, nu)
print(f"\ndrift of g = ||E||_F^2 along a d={d} run (alpha0={alpha0:.4g}, beta={beta:.4g}):")
times = [t for t in sorted(traj.iterates) if t > 0]
ok = 0
for t in times[:: max(1, len(times) // 20)]:
    probe = nr.martingale_drift_probe(traj.iterates[t], problem, cfg, "e_fro_sq",
                                      (alpha0, beta, 0.0), 300, rng, t=t)
    ok += probe.satisfied
print(f"  satisfied at {ok} of {len(times[::max(1, len(times)//20)])} probed iterates")
print(f"  final recovery error of the run: {traj.final_sample.recovery_error:.3f}")
