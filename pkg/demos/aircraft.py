"""Maintenance crew on a partially replicated aircraft record.

Each person subscribes to a slice of the data. After the crew syncs,
everyone holding the paint inventory agrees on 17 litres, and David,
who only follows the checklist, sees one narrowed op per transaction.
"""

from interestsync import load_builtin, simulate
from interestsync.report import final_states, state_table
from interestsync.sim import run_scenario

scenario = load_builtin("aircraft")
sim = simulate(scenario)

for name, node in sorted(sim.nodes.items()):
    print(f"{name:<12} interest {node.interest.effective}")
print()

print(state_table(final_states(run_scenario(scenario))))

print("David's log:")
for op in sorted(sim.nodes["David"].log.values(), key=lambda o: str(o.id)):
    print(f"  {op.id}  txn {op.txn}  {op.target}")
