"""Two groups of peers share an interest but have no path between them."""

from interestsync import load_builtin
from interestsync.sim import detect_data_islands, scenario_topology
from interestsync.verify import check_hierarchy

topo, interests = scenario_topology(load_builtin("fig1-islands"))
print("edges:", ", ".join(f"{a}-{b}" for a, b in topo.edge_list()))
report = detect_data_islands(topo, interests)
for f in report.findings:
    print(f"island: {{{', '.join(f.component_a)}}} cannot reach {{{', '.join(f.component_b)}}}, both want {f.shared}")
print("isolated peers (not islands):", ", ".join(report.singletons) or "none")
print("hierarchy violations:", len(check_hierarchy(topo, interests)))
