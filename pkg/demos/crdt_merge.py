"""Replicas of a counter and a register merge to the same value in any order."""

import itertools

from interestsync.crdt import LwwRegister, PnCounter, Timestamp, merge_state

counters = [
    PnCounter(base=20).add("Alice", -1),
    PnCounter(base=20).add("Bob", -2),
    PnCounter(base=20).add("Sarah", 3).add("Sarah", -1),
]
registers = [
    LwwRegister("primer", Timestamp(3, "Alice")),
    LwwRegister("white", Timestamp(5, "Bob")),
    LwwRegister("grey", Timestamp(5, "Alice")),
]

for label, replicas in (("counter", counters), ("register", registers)):
    results = set()
    for order in itertools.permutations(replicas):
        state = order[0]
        for other in order[1:]:
            state = merge_state(state, other)
        results.add(state.value)
    print(f"{label}: every merge order gives {results}")
