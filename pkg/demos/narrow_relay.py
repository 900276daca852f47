"""A narrow middle node breaks causality for the nodes on either side.

N2 holds only s2. It relays N1's transaction to N3 without the s1 half,
but its version vector says it has seen both. Metadata-everywhere mode,
or widening N2, removes the problem.
"""

from interestsync.scenarios import builtin_document
from interestsync.sim import run_scenario, scenario_from_dict
from interestsync.verify import run_checks


def show(title, doc):
    found = run_checks(run_scenario(scenario_from_dict(doc)))
    print(f"{title}: {sum(map(len, found.values()))} violation(s)")
    for vs in found.values():
        for v in vs:
            print(f"  [t={v.time}] {v.node}: {v.explanation}")


doc = builtin_document("n1n2n3")
show("intersection-only", dict(doc, mode="intersection-only"))
show("metadata-everywhere", dict(doc, mode="metadata-everywhere"))
widened = [dict(n, subscriptions=["s1", "s2"]) if n["id"] == "N2" else n for n in doc["nodes"]]
show("intersection-only, N2 widened", dict(doc, mode="intersection-only", nodes=widened))
