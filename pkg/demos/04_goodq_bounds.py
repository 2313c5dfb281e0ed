"""
Information bounds for the distilled process, by full enumeration
=================================================================

At n=2, k=3 every input can be listed, so each bound is an exact number
rather than an estimate.  The protocol whose advice is T itself is the
adversarial case for the last bound.
"""

from multiphase.nof import nonadaptive_identity, registered_protocols, verify_goodq_bounds

n, k, p = 2, 3, 2
for proto in registered_protocols(n, k):
    rep = verify_goodq_bounds(proto, n, k, p, gamma=0.3)
    print("\n".join(rep.lines()))
    if proto.model.startswith("four-party"):
        print(f"  max_P I(T; S_P Pi^M_P) = {nonadaptive_identity(proto, n, k, p, gamma=0.3):.2e}")
    print()
