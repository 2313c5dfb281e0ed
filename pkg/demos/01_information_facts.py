"""
Exact information quantities on small joint tables
===================================================

"""

import numpy as np

from multiphase.info import (
    JointTable,
    bernoulli_divergence_check,
    entropy,
    fact_corpus,
    mutual_information,
    verify_facts,
)

# two fair bits and their XOR: pairwise independent, jointly determined
p = np.zeros((2, 2, 2))
for a in (0, 1):
    for b in (0, 1):
        p[a, b, a ^ b] = 0.25
J = JointTable(("A", "B", "C"), p)
print("H(C)       =", entropy(J, "C"))
print("I(A;B)     =", mutual_information(J, "A", "B"))
print("I(A;B | C) =", mutual_information(J, "A", "B", "C"))

# the same checks the acceptance suite runs, on a small seeded corpus
counts: dict = {}
for table in fact_corpus(seed=1, count=200):
    for r in verify_facts(table).results:
        counts.setdefault(r.fact, {}).setdefault(r.status, 0)
        counts[r.fact][r.status] += 1
for fact, by_status in sorted(counts.items()):
    print(fact, by_status)

# small Bernoulli divergence forces the parameter into a 1% band
for q in (1e-2, 1e-3, 1e-4):
    rep = bernoulli_divergence_check(q)
    print(f"p={q:g}  kl_up/threshold={rep['kl_up'] / rep['threshold']:.2f}  ok={rep['ok']}")
