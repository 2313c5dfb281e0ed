"""
From a data structure to a number-on-forehead protocol
======================================================

Charlie writes the update cells as advice, Megan broadcasts the addresses
a query would read from the old memory, and Alice and Bob finish the
query between themselves.  The counterfactual audit resamples whatever a
player should not see and checks that its message does not move.
"""

from multiphase.cellprobe import shipped_schemes
from multiphase.core import sample_hard_instance
from multiphase.nof import (
    dumps_transcript,
    ds_to_4party,
    reduction_check,
    run_protocol,
    visibility_audit,
)

n, k, w = 16, 4, 5
inst = sample_hard_instance(n, k, seed=3, gamma=0.3)

for ds in shipped_schemes():
    proto = ds_to_4party(ds, n, k, w)
    recs = reduction_check(proto, inst)
    worst = max(r.pi_bits - 1 - 4 * r.tq * w for r in recs)
    print(f"{ds.name:20s} answers agree: {all(r.ds_answer == r.protocol_answer for r in recs)}"
          f"  max(|Pi|-1 - 4 tq w) = {worst}  |U| = {recs[0].u_bits} <= {recs[0].t_u * n * w}")
    rep = visibility_audit(proto, inst, 0, trials=200, seed=0)
    print(" " * 20, "audit:", "clean" if rep.ok else rep.to_text())

print()
print(dumps_transcript(run_protocol(ds_to_4party(shipped_schemes()[2], n, k, w), inst, 1)))
