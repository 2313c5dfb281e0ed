"""
Three data structures for the multiphase problem
================================================

Each scheme is run on hard instances; the harness counts probes into the
pre-update memory (t1) and the updated cells (t2) and checks the
semi-adaptive discipline on every query.
"""

import math

from multiphase.cellprobe import benchmark, rows_to_csv, run_multiphase, shipped_schemes
from multiphase.core import default_word_size, hard_gamma, sample_hard_instance

n, k = 4096, 256
print("gamma =", hard_gamma(n), " w =", default_word_size(n, k))

inst = sample_hard_instance(n, k, seed=0)
print("|T| =", int(inst.t.sum()), " first answers:", [inst.answer(i) for i in range(8)])

for ds in shipped_schemes():
    run = run_multiphase(ds, inst, queries=range(4))
    print(ds.name, "answers", run.answers, "tq", [log.tq for log in run.logs],
          "phase II writes", run.phase2_writes)

# the sqrt scheme keeps query time near sqrt(n) log n / w as n grows
for n in (1024, 4096, 16384):
    row = benchmark(shipped_schemes()[2:], n, 256, 2000, seed=1)[0]
    w = default_word_size(n, 256)
    print(f"n={n:6d}  p99 tq={row['p99_tq']:.0f}  3 sqrt(n) log n / w = {3 * math.sqrt(n) * math.log2(n) / w:.0f}")

print(rows_to_csv(benchmark(shipped_schemes(), 1024, 64, 500, seed=2)))
