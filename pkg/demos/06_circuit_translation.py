"""
Depth-d circuits as non-adaptive static data structures
=======================================================

Gates with fan-in above l/r are stored; every other gate is recomputed
at query time from its inputs, so a query touches at most (l/r)^d cells.
"""

import numpy as np

from multiphase.circuits import (
    disj_circuit,
    nonadaptivity_audit,
    random_circuit,
    run_static,
    static_disj_problem,
    translate_circuit,
)

rng = np.random.default_rng(0)
c = random_circuit(rng, 10, 4, 3, max_wires=2000)
print(f"circuit: {c.n_inputs} inputs, {c.k} outputs, {c.wires} wires, depth {c.depth}")

X = ((np.arange(1 << c.n_inputs)[:, None] >> np.arange(c.n_inputs)) & 1).astype(np.uint8)
truth = c.eval(X)
r = 1
while r <= c.wires:
    sds = translate_circuit(c, r)
    mem = sds.preprocess_batch(X)
    same = all(np.array_equal(sds.answer_batch(i, mem), truth[:, i]) for i in range(c.k))
    print(f"r={r:5d}  |G|={len(sds.G):4d}  probes={sds.max_probes_with_repeats:8.0f}  "
          f"(l/r)^d={sds.bound:12.1f}  equivalent={same}")
    r *= 4

print("audit:", nonadaptivity_audit(translate_circuit(c, 64), trials=200))

# the static disjointness problem, answered from the translated disj circuit
A = rng.integers(0, 2, size=(6, 10), dtype=np.uint8)
prob, sds = static_disj_problem(A), translate_circuit(disj_circuit(A), 8)
x = rng.integers(0, 2, size=10, dtype=np.uint8)
for i in range(3):
    run = run_static(sds, x, i)
    print(f"query {i}: answer {run.answer} (truth {prob.answer(i, x)}), probes {run.probes}")
