"""Checkers over recorded executions.

A trace is lifted to an abstract execution: the set of committed ops, and
for every node the logical time at which each op became visible there.
Happened-before is the transitive closure of visibility (an op visible at
a node before that node commits something) and per-origin program order.

Every checker reports all violations, each with the earliest logical time
at which it can be observed. Visibility only grows, so for atomicity the
earliest time is when the first op of the pair shows up, and for causal
consistency it is when the later op shows up.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .crdt import ObjectStore, RegisterWrite, apply_mutation, store_digest
from .model import (
    InterestSet,
    NodeId,
    OpId,
    Operation,
    Region,
    Relation,
    TransactionId,
    classify_session,
    region_intersection,
)
from .sim import Footprint, TopologySnapshot
from .trace import MalformedTrace, Trace, op_from_json


class Kind(str, enum.Enum):
    INTERSECTION_ATOMICITY = "IntersectionAtomicity"
    INTERSECTION_CC = "IntersectionCC"
    ATOMICITY = "Atomicity"
    CC = "CC"
    CONVERGENCE = "Convergence"
    HIERARCHY = "Hierarchy"
    INTEREST_CONFIG = "InterestConfig"


@dataclass(frozen=True)
class Violation:
    kind: Kind
    node: NodeId
    witnesses: tuple[str, ...]
    time: int | None = None
    explanation: str = ""

    def key(self) -> tuple:
        return (self.kind.value, self.node, self.witnesses, self.time)

    def to_json(self) -> dict:
        out = {"kind": self.kind.value, "node": self.node, "witnesses": list(self.witnesses)}
        if self.time is not None:
            out["t"] = self.time
        out["explanation"] = self.explanation
        return out


@dataclass
class AbstractExecution:
    ops: dict[OpId, Operation]
    txns: dict[TransactionId, tuple[OpId, ...]]
    commit_time: dict[OpId, int]
    vis_time: dict[NodeId, dict[OpId, int]]
    program_order: dict[NodeId, list[OpId]]
    ar: list[OpId] = field(default_factory=list)
    labels: dict[TransactionId, str] = field(default_factory=dict)
    _past: dict[OpId, frozenset[OpId]] | None = field(default=None, repr=False)

    @property
    def vis_at(self) -> dict[NodeId, list[tuple[int, frozenset[OpId]]]]:
        """Per node, the step function of visible sets over logical time."""
        out = {}
        for node, vt in self.vis_time.items():
            steps = []
            seen: set[OpId] = set()
            for t in sorted(set(vt.values())):
                seen |= {o for o, when in vt.items() if when == t}
                steps.append((t, frozenset(seen)))
            out[node] = steps
        return out

    def visible(self, node: NodeId, t: int) -> frozenset[OpId]:
        return frozenset(o for o, when in self.vis_time.get(node, {}).items() if when <= t)

    def causal_past(self, op_id: OpId) -> frozenset[OpId]:
        if self._past is None:
            self._past = _causal_pasts(self)
        return self._past[op_id]

    def hb(self, a: OpId, b: OpId) -> bool:
        return a in self.causal_past(b)

    def direct_predecessors(self, op_id: OpId) -> list[OpId]:
        """Ops with a visibility or program-order edge into ``op_id``."""
        op = self.ops[op_id]
        t = self.commit_time[op_id]
        preds = {o for o, when in self.vis_time.get(op.id.origin, {}).items() if when < t}
        if op_id.seq > 1:
            preds.add(OpId(op_id.origin, op_id.seq - 1))
        return sorted(preds)

    def hb_on_object(self, a: OpId, b: OpId) -> bool:
        """Happened-before in the execution projected onto one object.

        Only chains whose every step touches the shared target count, so
        causality carried through other objects is ignored.
        """
        target = self.ops[b].target
        if self.ops[a].target != target:
            return False
        stack, seen = [b], {b}
        while stack:
            cur = stack.pop()
            t = self.commit_time[cur]
            preds = [
                o for o, when in self.vis_time.get(cur.origin, {}).items()
                if when < t and self.ops[o].target == target
            ]
            preds += [
                o for o in self.program_order.get(cur.origin, [])
                if o.seq < cur.seq and self.ops[o].target == target
            ]
            for p in preds:
                if p == a:
                    return True
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return False

    def hb_chain(self, a: OpId, b: OpId) -> list[OpId]:
        """A shortest chain of direct edges from ``a`` to ``b``."""
        back = {b: None}
        queue = deque([b])
        while queue:
            cur = queue.popleft()
            if cur == a:
                break
            for p in self.direct_predecessors(cur):
                if p not in back:
                    back[p] = cur
                    queue.append(p)
        chain, cur = [], a
        while cur is not None:
            chain.append(cur)
            cur = back.get(cur)
        return chain


def _causal_pasts(e: AbstractExecution) -> dict[OpId, frozenset[OpId]]:
    order = sorted(e.ops, key=lambda o: (e.commit_time[o], o))
    index = {o: i for i, o in enumerate(order)}
    anc = [0] * len(order)
    for i, o in enumerate(order):
        t = e.commit_time[o]
        mask = 0
        for p, when in e.vis_time.get(o.origin, {}).items():
            if when < t:
                j = index[p]
                mask |= anc[j] | (1 << j)
        if o.seq > 1:
            prev = OpId(o.origin, o.seq - 1)
            j = index[prev]
            mask |= anc[j] | (1 << j)
        anc[i] = mask
    out = {}
    for i, o in enumerate(order):
        mask = anc[i]
        out[o] = frozenset(order[j] for j in range(len(order)) if mask >> j & 1)
    return out


def build_execution(t: Trace) -> AbstractExecution:
    ops: dict[OpId, Operation] = {}
    txns: dict[TransactionId, tuple[OpId, ...]] = {}
    labels: dict[TransactionId, str] = {}
    commit_time: dict[OpId, int] = {}
    vis_time: dict[NodeId, dict[OpId, int]] = {nid: {} for nid in t.interests()}
    for ev in t.events:
        kind = ev["type"]
        if kind == "LocalCommit":
            node = ev["node"]
            txn_ops = [op_from_json(d) for d in ev["ops"]]
            if not txn_ops:
                raise MalformedTrace(f"t={ev['t']}: empty commit")
            tid = TransactionId.parse(ev["txn"])
            for op in txn_ops:
                if op.id in ops:
                    raise MalformedTrace(f"t={ev['t']}: {op.id} committed twice")
                if op.id.origin != node or op.txn != tid:
                    raise MalformedTrace(f"t={ev['t']}: {op.id} does not belong to {tid}")
                ops[op.id] = op
                commit_time[op.id] = ev["t"]
                vis_time.setdefault(node, {})[op.id] = ev["t"]
            txns[tid] = tuple(op.id for op in txn_ops)
            labels[tid] = ev.get("label", "")
        elif kind == "RemoteApply":
            node = ev["node"]
            vt = vis_time.setdefault(node, {})
            for raw in ev["op_ids"]:
                op_id = OpId.parse(raw)
                if op_id not in ops:
                    raise MalformedTrace(f"t={ev['t']}: {node} applied unknown op {op_id}")
                vt.setdefault(op_id, ev["t"])
    program_order: dict[NodeId, list[OpId]] = {}
    for op_id in sorted(ops):
        program_order.setdefault(op_id.origin, []).append(op_id)
    for origin, seqs in program_order.items():
        if [o.seq for o in seqs] != list(range(1, len(seqs) + 1)):
            raise MalformedTrace(f"ops of {origin} do not form a contiguous sequence")
    writes = [o for o in ops.values() if isinstance(o.mutation, RegisterWrite)]
    ar = [o.id for o in sorted(writes, key=lambda o: (o.mutation.ts, o.id))]
    return AbstractExecution(ops, txns, commit_time, vis_time, program_order, ar, labels)


def _everything(_op: Operation) -> bool:
    return True


def _checked_nodes(e: AbstractExecution, interests) -> list[NodeId]:
    """All nodes for the classic checks, else those with a given interest."""
    if interests is None:
        return sorted(e.vis_time)
    return sorted(n for n in e.vis_time if n in interests)


def _atomicity(e: AbstractExecution, interests, kind: Kind) -> list[Violation]:
    out = []
    for node in _checked_nodes(e, interests):
        vt = e.vis_time[node]
        interest = interests[node] if interests is not None else None
        for tid in sorted(e.txns):
            members = e.txns[tid]
            for o1 in members:
                if o1 not in vt:
                    continue
                for o2 in members:
                    if o2 == o1:
                        continue
                    if interest is not None and not interest.contains(e.ops[o2].target):
                        continue
                    if o2 in vt and vt[o2] <= vt[o1]:
                        continue
                    out.append(Violation(
                        kind, node, (str(tid), str(o1), str(o2)), vt[o1],
                        f"{o1} of {tid} visible at {node} while {o2} is not",
                    ))
    return out


def _causal(e: AbstractExecution, interests, kind: Kind, chains: bool = True) -> list[Violation]:
    out = []
    for node in _checked_nodes(e, interests):
        vt = e.vis_time[node]
        interest = interests[node] if interests is not None else None
        for o2 in sorted(vt):
            for o1 in sorted(e.causal_past(o2)):
                if interest is not None and not interest.contains(e.ops[o1].target):
                    continue
                if o1 in vt and vt[o1] <= vt[o2]:
                    continue
                why = f"{o2} visible at {node} before its cause {o1}"
                if chains:
                    why += " (" + " -> ".join(map(str, e.hb_chain(o1, o2))) + ")"
                out.append(Violation(kind, node, (str(o1), str(o2)), vt[o2], why))
    return out


def check_intersection_atomicity(e: AbstractExecution, interests: Mapping[NodeId, InterestSet]) -> list[Violation]:
    return _atomicity(e, interests, Kind.INTERSECTION_ATOMICITY)


def check_intersection_cc(e: AbstractExecution, interests: Mapping[NodeId, InterestSet]) -> list[Violation]:
    return _causal(e, interests, Kind.INTERSECTION_CC)


def check_atomicity(e: AbstractExecution, interests=None) -> list[Violation]:
    return _atomicity(e, None, Kind.ATOMICITY)


def check_cc(e: AbstractExecution, interests=None) -> list[Violation]:
    return _causal(e, None, Kind.CC)


# -- convergence -------------------------------------------------------------


def replay(t: Trace):
    """Yield ``(event, stores, applied, ops)`` after every event of the trace.

    Stores are rebuilt purely from the trace, by folding each node's ops in
    the order it applied them. The yielded mappings are live; copy them if
    they must outlive the next step.
    """
    schema = t.schema
    ops: dict[OpId, Operation] = {}
    stores: dict[NodeId, ObjectStore] = {}
    applied: dict[NodeId, set[OpId]] = {}

    def apply(node, op_ids):
        store = stores.get(node) or ObjectStore({}, schema)
        for op_id in op_ids:
            store = apply_mutation(store, ops[op_id])
            applied.setdefault(node, set()).add(op_id)
        stores[node] = store

    for ev in t.events:
        if ev["type"] == "LocalCommit":
            for d in ev["ops"]:
                op = op_from_json(d)
                ops[op.id] = op
            apply(ev["node"], [OpId.parse(x) for x in ev["op_ids"]])
        elif ev["type"] == "RemoteApply":
            apply(ev["node"], [OpId.parse(x) for x in ev["op_ids"]])
        yield ev, stores, applied, ops


def replay_stores(t: Trace):
    """Replayed state at every checkpoint, as ``(checkpoint, stores, applied, ops)``."""
    for ev, stores, applied, ops in replay(t):
        if ev["type"] == "Checkpoint":
            yield ev, dict(stores), {k: set(v) for k, v in applied.items()}, ops


def final_stores(t: Trace) -> dict[NodeId, ObjectStore]:
    stores: dict[NodeId, ObjectStore] = {}
    for _, stores, _, _ in replay(t):
        pass
    return dict(stores)


def check_convergence(t: Trace, interests: Mapping[NodeId, InterestSet]) -> list[Violation]:
    out = []
    for ev, stores, applied, ops in replay_stores(t):
        active = sorted(n for n in ev["hashes"] if n in interests)
        for i, a in enumerate(active):
            for b in active[i + 1:]:
                shared = region_intersection(interests[a].effective, interests[b].effective)
                if shared.is_empty():
                    continue
                seen_a = {o for o in applied.get(a, ()) if shared.contains(ops[o].target)}
                seen_b = {o for o in applied.get(b, ()) if shared.contains(ops[o].target)}
                if seen_a != seen_b:
                    continue
                empty = ObjectStore({}, t.schema)
                ha = store_digest(stores.get(a, empty), shared)
                hb = store_digest(stores.get(b, empty), shared)
                if ha != hb:
                    out.append(Violation(
                        Kind.CONVERGENCE, a, (a, b, ev["label"]), ev["t"],
                        f"{a} and {b} applied the same ops in {shared} but disagree on state",
                    ))
    return out


def check_replay(t: Trace) -> list[str]:
    """Checkpoint hashes that a from-scratch replay fails to reproduce."""
    interests = t.interests()
    bad = []
    for ev, stores, _, _ in replay_stores(t):
        for node, recorded in ev["hashes"].items():
            store = stores.get(node, ObjectStore({}, t.schema))
            if store_digest(store, interests[node].effective) != recorded:
                bad.append(f"{ev['label']}:{node}")
    return bad


# -- guarantees per session relation -----------------------------------------


class DisjointSession(ValueError):
    pass


@dataclass(frozen=True)
class Full:
    def __str__(self) -> str:
        return "full"


@dataclass(frozen=True)
class Scoped:
    region: Region

    def __str__(self) -> str:
        return f"scoped to {self.region}"


FULL = Full()


@dataclass(frozen=True)
class GuaranteeRow:
    ia_local_txn: Full | Scoped
    ia_remote_txn: Full | Scoped
    icc_single: Full | Scoped
    icc_multi: Full | Scoped
    convergence: Full | Scoped


def expected_guarantees(lset: InterestSet, rset: InterestSet) -> GuaranteeRow:
    """Which data keeps each guarantee when ``lset`` sends to ``rset``."""
    relation = classify_session(lset, rset)
    if relation is Relation.DISJOINT:
        raise DisjointSession("disjoint interest sets: nothing is replicated")
    if relation in (Relation.EQUAL, Relation.A_SUPERSET_B):
        return GuaranteeRow(FULL, FULL, FULL, FULL, FULL)
    if relation is Relation.A_SUBSET_B:
        local = Scoped(lset.effective)
        return GuaranteeRow(FULL, local, FULL, local, FULL)
    shared = Scoped(region_intersection(lset.effective, rset.effective))
    return GuaranteeRow(shared, shared, FULL, shared, FULL)


# -- static conditions -------------------------------------------------------


def check_hierarchy(topo: TopologySnapshot, interests: Mapping[NodeId, InterestSet]) -> list[Violation]:
    """Forest topology whose regions widen from the leaves towards a root.

    A tree admits such a root exactly when every edge joins comparable
    regions and no group of equal-region neighbours has more than one
    strictly wider neighbour.
    """
    g = topo.graph()
    out = []
    if not nx.is_forest(g):
        cycle = nx.find_cycle(g)
        nodes = tuple(sorted({n for edge in cycle for n in edge}))
        return [Violation(Kind.HIERARCHY, nodes[0], nodes, None, f"topology contains a cycle through {', '.join(nodes)}, not a forest")]

    region = {n: interests[n].effective for n in g.nodes}
    equal = nx.Graph()
    equal.add_nodes_from(g.nodes)
    for a, b in g.edges:
        ra, rb = region[a], region[b]
        if ra.issubset(rb) and rb.issubset(ra):
            equal.add_edge(a, b)
        elif not ra.issubset(rb) and not rb.issubset(ra):
            a, b = sorted((a, b))
            out.append(Violation(
                Kind.HIERARCHY, a, (a, b), None,
                f"{a} {ra} and {b} {rb} are incomparable: neither can be the other's parent",
            ))
    for group in sorted(sorted(c) for c in nx.connected_components(equal)):
        members = set(group)
        wider = sorted(
            (n, m) for n in group for m in g.neighbors(n)
            if m not in members and region[n].issubset(region[m]) and not region[m].issubset(region[n])
        )
        if len(wider) > 1:
            for n, m in wider:
                out.append(Violation(
                    Kind.HIERARCHY, n, (n, m), None,
                    f"{n} {region[n]} sits below more than one wider neighbour; {m} is one of them",
                ))
    return out


def check_interest_config(
    footprints: Sequence[Footprint], interests: Mapping[NodeId, InterestSet]
) -> list[Violation]:
    """Every node touching a transaction class's footprint must hold all of it."""
    out = []
    for fp in footprints:
        whole = fp.region
        for node in sorted(interests):
            mine = interests[node].effective
            if region_intersection(mine, whole).is_empty() or whole.issubset(mine):
                continue
            uncovered = Region(frozenset(p for p in whole.prefixes if not mine.contains(p)))
            out.append(Violation(
                Kind.INTEREST_CONFIG, node, (fp.name, *uncovered.to_strings()), None,
                f"{node} holds part of {fp.name}'s footprint {whole} but not {uncovered}",
            ))
    return out


CHECKS = {
    "intersection-atomicity": lambda e, tr, i: check_intersection_atomicity(e, i),
    "intersection-cc": lambda e, tr, i: check_intersection_cc(e, i),
    "atomicity": lambda e, tr, i: check_atomicity(e),
    "cc": lambda e, tr, i: check_cc(e),
    "convergence": lambda e, tr, i: check_convergence(tr, i),
}

DEFAULT_CHECKS = ("intersection-atomicity", "intersection-cc", "convergence")


def run_checks(t: Trace, checks: Iterable[str] = DEFAULT_CHECKS) -> dict[str, list[Violation]]:
    e = build_execution(t)
    interests = t.interests()
    out = {}
    for name in checks:
        if name not in CHECKS:
            raise KeyError(f"unknown check {name!r}; choose from {sorted(CHECKS)}")
        out[name] = CHECKS[name](e, t, interests)
    return out
