"""
The AND tradeoff and its robust cut-and-paste form
==================================================

A process that computes AND on Bernoulli(gamma) inputs without revealing
much about X must either reveal about gamma of Y or leave X and Y
correlated given its output.  We look at hand-built processes, then let a
local search try to beat the tradeoff.
"""

import math

from multiphase.andlab import (
    adversarial_search,
    and_costs,
    check_and_contract,
    copy_process,
    embed_and,
    ideal_process,
    largediv_sweep,
    or_process,
)
from multiphase.nof import megan_broadcasts_s_i

g = 1e-2
for name, proc in [("ideal", ideal_process(g)), ("copy X", copy_process(g)), ("OR", or_process(g))]:
    prof = and_costs(proc)
    print(f"{name:8s} I(Z;X)={prof.i_zx:.2e} I(Z;Y)={prof.i_zy:.2e} I(X;Y|Z)={prof.i_xy_given_z:.2e}"
          f"  contract ok={check_and_contract(proc).ok}")

# a real protocol, embedded into a single AND coordinate
emb = embed_and(megan_broadcasts_s_i(), 2, 2, 1, gamma=0.3)
print("embedded:", emb.profile)

# search with the contract enforced; a feasible point must still pay for Y
res = adversarial_search(1e-3, 4, 1e-2, restarts=32, seed=0, iterations=1000)
print("search feasible:", res.feasible, " I(Z;Y)/gamma =", res.ratio if res.feasible else "n/a")

sweep = largediv_sweep(g, grid_resolution=400)
print(f"sweep: {sweep.filtered + sweep.focused_filtered} filtered points, "
      f"{sweep.violations + sweep.focused_violations} violations, kappa={sweep.kappa:.4f} (ln 2 = {math.log(2):.4f})")
