"""Empirical checks of the working assumptions.

Two families of conditions back the convergence analysis: norm bounds on
the symmetrized observation noise (its Frobenius norm against 2 d sigma,
and its spectral norm and action on the planted direction against
C sqrt(d) sigma), and a requirement that the starting iterate is bounded
yet carries a minimum alignment with the planted direction.

Both are stated for single draws; here we measure how often they hold.
The noise bounds concentrate hard - with C = 3 they essentially never
fail.  The ball initialization x0 x0^T with x0 uniform in the unit ball
passes the alignment requirement at a moderate rate (the guarantee decays
only like a fourth root of the dimension, so no one should expect rates
near one).
"""

import math

import numpy as np

import noisereg as nr

D, SIGMA_SQ = 30, 0.1
N = 400
rng = nr.make_rng(11)

hits = {"gamma_fro": 0, "gamma_spec_max": 0, "both": 0}
worst_ratio = 0.0
for _ in range(N):
    problem = nr.make_rank_one_problem(D, np.ones(D), math.sqrt(SIGMA_SQ), rng)
    rep = nr.check_assumption_noise(problem, c0=1.0, c1=3.0)
    hits["gamma_fro"] += rep.verdicts["gamma_fro"]
    hits["gamma_spec_max"] += rep.verdicts["gamma_spec_max"]
    hits["both"] += rep.verdicts["gamma_fro"] and rep.verdicts["gamma_spec_max"]
    worst_ratio = max(worst_ratio, rep.quantities["gamma_sym_spec"] / (math.sqrt(D) * math.sqrt(SIGMA_SQ)))

print(f"noise bounds over {N} draws at d={D}, sigma^2={SIGMA_SQ}, C1=3:")
for key, val in hits.items():
    print(f"  {key:15s} {val}/{N}")
print(f"  worst spectral ratio ||G||_2 / (sqrt(d) sigma) = {worst_ratio:.2f} (threshold 3)")

problem = nr.make_rank_one_problem(D, np.ones(D), math.sqrt(SIGMA_SQ), nr.make_rng(12))
init_hits = 0
aligned_fail = 0
for _ in range(N):
    x0 = nr.init_iterate(nr.InitSpec.rank_one_ball(), D, rng)
    rep = nr.check_assumption_init(x0, problem, c1=0.5)
    init_hits += rep.all_pass
    aligned_fail += not rep.verdicts["x0_aligned"]
print(f"\nball initialization over {N} draws (C1=0.5, unit-signal frame):")
print(f"  both inequalities: {init_hits}/{N}")
print(f"  alignment was the binding one in {aligned_fail} failures")

# A constructed violation for contrast: sitting exactly at the saddle.
rep = nr.check_assumption_init(np.zeros((D, D)), problem, c1=0.5)
print(f"  zero iterate passes alignment? {rep.verdicts['x0_aligned']} (the saddle is excluded by design)")
