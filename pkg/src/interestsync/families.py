"""Seeded generators of scenario documents for property runs and sweeps.

Each generator returns a plain scenario document (the same shape as a
scenario file), so any generated case can be dumped and replayed through
the CLI.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .model import InterestSet, ObjectPath, OpId, Region, Relation
from .trace import Trace
from .verify import (
    FULL,
    GuaranteeRow,
    Scoped,
    build_execution,
    check_atomicity,
    check_convergence,
    check_intersection_atomicity,
    check_intersection_cc,
    expected_guarantees,
)

TOPS = ("a", "b", "c")
MIDS = ("x", "y")
LEAVES = ("k0", "k1")
SCHEMA = {"a": {"type": "counter"}, "b": {"type": "register"}, "c": {"type": "counter"}}


def _prefix_pool() -> list[str]:
    return [*TOPS, *(f"{t}.{m}" for t in TOPS for m in MIDS)]


def random_region(rng: random.Random, lo: int = 1, hi: int = 3) -> list[str]:
    return sorted(rng.sample(_prefix_pool(), rng.randint(lo, hi)))


def random_path(rng: random.Random, region: Region) -> str:
    """A leaf path inside ``region``, which must not be empty."""
    if region.universal:
        base = ObjectPath((rng.choice(TOPS),))
    else:
        base = rng.choice(region.sorted_prefixes())
    segs = list(base.segments)
    if len(segs) < 2:
        segs.append(rng.choice(MIDS))
    if len(segs) < 3:
        segs.append(rng.choice(LEAVES))
    return ".".join(segs)


def random_body(rng: random.Random, region: Region, max_ops: int = 3) -> list[dict]:
    body, written = [], set()
    for _ in range(rng.randint(1, max_ops)):
        path = random_path(rng, region)
        if path.startswith("b."):
            if path in written:
                continue
            written.add(path)
            body.append({"path": path, "kind": "write", "value": rng.randint(0, 9)})
        else:
            body.append({"path": path, "kind": "add", "value": rng.choice([-2, -1, 1, 2, 3])})
    return body


def _doc(name, mode, seed, nodes, events, footprints=()) -> dict:
    return {
        "name": name,
        "mode": mode,
        "seed": seed,
        "schema": SCHEMA,
        "nodes": [{"id": nid, "subscriptions": subs} for nid, subs in nodes],
        "footprints": list(footprints),
        "events": events,
    }


def _random_txn(rng, events, interests, budget) -> int:
    """Append one random txn of at most ``budget`` ops; returns ops used."""
    name = rng.choice(sorted(interests))
    body = random_body(rng, Region.from_strings(interests[name]))[:budget]
    if body:
        events.append({"type": "txn", "node": name, "body": body})
    return len(body)


def random_small(seed: int, mode: str = "intersection-only", max_nodes: int = 5, max_ops: int = 30) -> dict:
    """Arbitrary topology, interests and schedule; occasional interest changes."""
    rng = random.Random(seed)
    count = rng.randint(2, max_nodes)
    names = [f"N{i}" for i in range(count)]
    interests = {n: random_region(rng) for n in names}
    if rng.random() < 0.3:
        interests[names[0]] = ["*"]
    initial = dict(interests)
    pairs = [(a, b) for i, a in enumerate(names) for b in names[i + 1:]]
    edges = set(rng.sample(pairs, rng.randint(1, len(pairs))))
    events = [{"type": "connect", "a": a, "b": b} for a, b in sorted(edges)]
    ops = 0
    while ops < max_ops:
        roll = rng.random()
        if roll < 0.35:
            used = _random_txn(rng, events, interests, max_ops - ops)
            ops += used
            if not used:
                break
        elif roll < 0.9:
            a, b = rng.choice(sorted(edges))
            events.append({"type": "sync", "a": a, "b": b})
        elif roll < 0.95:
            events.append({"type": "checkpoint", "label": f"c{len(events)}"})
        else:
            node = rng.choice(names)
            interests[node] = random_region(rng)
            events.append({"type": "change_interest", "node": node, "subscriptions": interests[node]})
        if rng.random() < 0.05:
            break
    for a, b in sorted(edges):
        events.append({"type": "sync", "a": a, "b": b})
    events.append({"type": "checkpoint", "label": "end"})
    return _doc(f"random-{seed}", mode, seed, sorted(initial.items()), events)


# -- guarantees per session relation ----------------------------------------

RELATION_INTERESTS = {
    Relation.A_SUBSET_B: (["p"], ["p", "q"]),
    Relation.A_SUPERSET_B: (["p", "q"], ["p"]),
    Relation.EQUAL: (["p", "q"], ["p", "q"]),
    Relation.OVERLAP: (["p", "q"], ["q", "r"]),
}


def relation_scenario(relation: Relation, seed: int, steps: int = 24) -> dict:
    """Origin O (sees everything) feeds sender L, which feeds receiver R.

    Transactions at O reach R only through L, so they are the remote
    transactions of the L to R session; transactions at L are its local ones.
    """
    rng = random.Random(seed)
    tops = list(TOPS)
    rng.shuffle(tops)
    rename = dict(zip("pqr", tops))
    lsubs, rsubs = ([rename[x] for x in side] for side in RELATION_INTERESTS[relation])
    interests = {"O": ["*"], "L": lsubs, "R": rsubs}
    events = [{"type": "connect", "a": "O", "b": "L"}, {"type": "connect", "a": "L", "b": "R"}]
    for _ in range(steps):
        roll = rng.random()
        if roll < 0.3:
            events.append({"type": "txn", "node": "O", "label": "remote", "body": random_body(rng, Region.everything(), 4)})
        elif roll < 0.45:
            events.append({"type": "txn", "node": "L", "label": "local",
                           "body": random_body(rng, Region.from_strings(lsubs), 4)})
        elif roll < 0.5:
            events.append({"type": "txn", "node": "R", "body": random_body(rng, Region.from_strings(rsubs), 2)})
        elif roll < 0.75:
            events.append({"type": "sync", "a": "O", "b": "L"})
        else:
            events.append({"type": "sync", "a": "L", "b": "R"})
    events += [
        {"type": "sync", "a": "O", "b": "L"},
        {"type": "sync", "a": "L", "b": "R"},
        {"type": "checkpoint", "label": "end"},
    ]
    return _doc(f"relation-{relation.value}-{seed}", "intersection-only", seed, sorted(interests.items()), events)


@dataclass
class RelationOutcome:
    """Violations observed at R, split by guarantee and by the row's scope."""

    expected: GuaranteeRow
    inside: dict[str, int]
    outside: dict[str, int]
    classic_atomicity_remote: int

    @property
    def conforms(self) -> bool:
        return not any(self.inside.values())


def _in_scope(entry, target: ObjectPath) -> bool:
    return entry is FULL or (isinstance(entry, Scoped) and entry.region.contains(target))


def relation_outcome(t: Trace, sender: str = "L", receiver: str = "R") -> RelationOutcome:
    interests = t.interests()
    row = expected_guarantees(interests[sender], interests[receiver])
    e = build_execution(t)
    inside = dict.fromkeys(("ia_local_txn", "ia_remote_txn", "icc_single", "icc_multi", "convergence"), 0)
    outside = dict(inside)

    def tally(column, target):
        bucket = inside if _in_scope(getattr(row, column), target) else outside
        bucket[column] += 1

    at_r = {receiver: interests[receiver]}
    for v in check_intersection_atomicity(e, at_r):
        if v.node != receiver:
            continue
        _, _, missing = v.witnesses
        origin = missing.split(":")[0]
        column = "ia_local_txn" if origin == sender else "ia_remote_txn"
        if origin == receiver:
            column = "ia_local_txn"  # never expected; counted against the strictest column
        tally(column, e.ops[OpId.parse(missing)].target)
    for v in check_intersection_cc(e, at_r):
        if v.node != receiver:
            continue
        o1, o2 = (e.ops[OpId.parse(w)] for w in v.witnesses)
        single = e.hb_on_object(o1.id, o2.id)
        tally("icc_single" if single else "icc_multi", o1.target)
    for v in check_convergence(t, {sender: interests[sender], receiver: interests[receiver]}):
        inside["convergence"] += 1
    classic = sum(
        1 for v in check_atomicity(e)
        if v.node == receiver and v.witnesses[0].split("/")[0] not in (sender, receiver)
    )
    return RelationOutcome(row, inside, outside, classic)


# -- partition and heal ------------------------------------------------------


def partition_heal(seed: int, mode: str = "metadata-everywhere") -> dict:
    """Connected peers split into two halves, write on both sides, then reconnect.

    P0 holds everything and is linked to every peer, because a payload can
    only travel through peers interested in it; without such a hub full
    propagation may be impossible. The heal phase syncs every edge for as
    many rounds as there are nodes.
    """
    rng = random.Random(seed)
    count = rng.randint(3, 6)
    names = [f"P{i}" for i in range(count)]
    interests = {n: random_region(rng, 1, 4) for n in names}
    interests["P0"] = ["*"]
    order = names[:]
    rng.shuffle(order)
    edges = {("P0", n) for n in names[1:]}
    pairs = [(a, b) for i, a in enumerate(names) for b in names[i + 1:]]
    edges |= set(rng.sample(pairs, rng.randint(0, count)))
    edges = sorted(edges)
    cut = set(order[: count // 2 + 1])
    crossing = [e for e in edges if (e[0] in cut) != (e[1] in cut)]
    inner = [e for e in edges if e not in crossing]
    events = [{"type": "connect", "a": a, "b": b} for a, b in edges]

    def chatter(usable, rounds):
        for _ in range(rounds):
            if rng.random() < 0.5:
                node = rng.choice(names)
                events.append({"type": "txn", "node": node,
                               "body": random_body(rng, Region.from_strings(interests[node]))})
            elif usable:
                a, b = rng.choice(usable)
                events.append({"type": "sync", "a": a, "b": b})

    chatter(edges, 10)
    events += [{"type": "disconnect", "a": a, "b": b} for a, b in crossing]
    chatter(inner, 20)
    events.append({"type": "checkpoint", "label": "partitioned"})
    events += [{"type": "connect", "a": a, "b": b} for a, b in crossing]
    for _ in range(count + 1):
        events += [{"type": "sync", "a": a, "b": b} for a, b in edges]
    events.append({"type": "checkpoint", "label": "healed"})
    return _doc(f"partition-heal-{seed}", mode, seed, sorted(interests.items()), events)


# -- static-condition families -----------------------------------------------


def widening_forest(seed: int, mode: str = "intersection-only") -> dict:
    """Trees whose regions only narrow going away from each root."""
    rng = random.Random(seed)
    count = rng.randint(2, 6)
    names = [f"T{i}" for i in range(count)]
    interests: dict[str, list[str]] = {}
    edges = []
    for i, n in enumerate(names):
        parent = rng.choice(names[:i]) if i and rng.random() < 0.85 else None
        if parent is None:
            interests[n] = ["*"] if rng.random() < 0.3 else random_region(rng, 2, 4)
        else:
            edges.append((parent, n))
            interests[n] = _narrower(rng, interests[parent])
    events = [{"type": "connect", "a": a, "b": b} for a, b in edges]
    for _ in range(30):
        if rng.random() < 0.4 or not edges:
            n = rng.choice(names)
            events.append({"type": "txn", "node": n, "body": random_body(rng, Region.from_strings(interests[n]))})
        else:
            a, b = rng.choice(edges)
            events.append({"type": "sync", "a": a, "b": b})
    events.append({"type": "checkpoint", "label": "end"})
    return _doc(f"forest-{seed}", mode, seed, sorted(interests.items()), events)


def _narrower(rng: random.Random, parent: list[str]) -> list[str]:
    region = Region.from_strings(parent)
    if rng.random() < 0.25:
        return list(parent)
    picks = set()
    for _ in range(rng.randint(1, 2)):
        path = random_path(rng, region).split(".")
        picks.add(".".join(path[: rng.randint(1, 2)]))
    # a short pick may be wider than the parent; clip it back
    return Region.from_strings(sorted(picks)).intersection(region).to_strings()


def block_config(seed: int, mode: str = "intersection-only") -> dict:
    """Footprints are whole top-level blocks and every interest is a union of blocks.

    That satisfies the interest-configuration condition by construction,
    on an arbitrary (possibly cyclic) topology.
    """
    rng = random.Random(seed)
    count = rng.randint(3, 5)
    names = [f"B{i}" for i in range(count)]
    interests = {n: sorted(rng.sample(TOPS, rng.randint(1, 3))) for n in names}
    pairs = [(a, b) for i, a in enumerate(names) for b in names[i + 1:]]
    edges = sorted(set(rng.sample(pairs, rng.randint(count - 1, len(pairs)))))
    footprints = [{"name": f"in-{t}", "writes": [t], "deps": [t]} for t in TOPS]
    events = [{"type": "connect", "a": a, "b": b} for a, b in edges]
    for _ in range(40):
        if rng.random() < 0.35:
            n = rng.choice(names)
            block = rng.choice(interests[n])
            events.append({"type": "txn", "node": n, "label": f"in-{block}",
                           "body": random_body(rng, Region.of(block))})
        else:
            a, b = rng.choice(edges)
            events.append({"type": "sync", "a": a, "b": b})
    events.append({"type": "checkpoint", "label": "end"})
    return _doc(f"blocks-{seed}", mode, seed, sorted(interests.items()), events, footprints)


def interest_of(doc: dict, node: str) -> InterestSet:
    for n in doc["nodes"]:
        if n["id"] == node:
            return InterestSet.from_json(n)
    raise KeyError(node)
