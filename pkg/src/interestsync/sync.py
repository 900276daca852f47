"""Peer-to-peer sessions: interest exchange, version-vector diffs, narrowing.

A batch advances the receiver's knowledge origin by origin. For each origin
X the sender walks the ids ``(receiver.known[X], limit[X]]`` and ships each
one as a payload op (it matches the receiver's interest), as a header
(metadata-everywhere mode, no match) or not at all (intersection-only mode,
no match). ``batch.advance`` records the new per-origin limits, and the
receiver merges it into ``known``.

In metadata-everywhere mode the sender may only advance past an id it can
vouch for, so a limit is pulled back to the start of the transaction
containing the first id it cannot deliver, and the pull-back is propagated
through dependencies until nothing moves.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from typing import Iterable

from .model import (
    InterestSet,
    OpId,
    Operation,
    Region,
    Relation,
    VersionVector,
    classify_session,
)
from .node import (
    CausalGap,
    MalformedBatch,
    NodeState,
    OperationHeader,
    OutOfInterest,
    ReplicationError,
    apply_batch,
    new_ids,
)


class MetadataMode(enum.Enum):
    INTERSECTION_ONLY = "intersection-only"
    METADATA_EVERYWHERE = "metadata-everywhere"

    @classmethod
    def parse(cls, text: str | MetadataMode) -> MetadataMode:
        if isinstance(text, MetadataMode):
            return text
        return cls(text.replace("_", "-").lower())


@dataclass(frozen=True)
class SessionConfig:
    metadata_mode: MetadataMode = MetadataMode.INTERSECTION_ONLY


@dataclass(frozen=True)
class Summary:
    interest: InterestSet
    known: VersionVector

    @classmethod
    def of(cls, n: NodeState) -> Summary:
        return cls(n.interest, n.known)


@dataclass(frozen=True)
class SyncBatch:
    session_id: str
    mode: MetadataMode
    advance: VersionVector
    payload_ops: tuple[Operation, ...] = ()
    header_ops: tuple[OperationHeader, ...] = ()

    @property
    def op_ids(self) -> list[OpId]:
        return [op.id for op in self.payload_ops]

    @property
    def header_ids(self) -> list[OpId]:
        return [h.id for h in self.header_ops]

    def is_empty(self) -> bool:
        return not self.payload_ops and not self.header_ops


@dataclass(frozen=True)
class SessionInfo:
    relation: Relation
    intersection: Region

    @property
    def closed(self) -> bool:
        return self.relation is Relation.DISJOINT


@dataclass(frozen=True)
class BatchProblem:
    kind: str  # "causal-gap" | "out-of-interest" | "malformed"
    witness: OpId | None
    detail: str

    def as_error(self) -> ReplicationError:
        cls = {
            "causal-gap": CausalGap,
            "out-of-interest": OutOfInterest,
        }.get(self.kind, MalformedBatch)
        return cls(self.detail, self.witness)


def open_session(a: NodeState, b: NodeState) -> SessionInfo:
    if a.id == b.id:
        raise ValueError("a node cannot open a session with itself")
    relation = classify_session(a.interest, b.interest)
    return SessionInfo(relation, a.interest.effective.intersection(b.interest.effective))


def _txn_start(sender: NodeState, op_id: OpId) -> int:
    """First seq of the transaction containing ``op_id``, as far as sender knows."""
    txn = sender.describe(op_id).txn
    seq = op_id.seq
    while seq > 1:
        prev = sender.describe(OpId(op_id.origin, seq - 1))
        if prev is None or prev.txn != txn:
            break
        seq -= 1
    return seq


def _topo_order(items: Iterable[Operation | OperationHeader]) -> list:
    """Deterministic topological order by deps, ties broken by op id."""
    items = list(items)
    by_origin: dict[str, list] = {}
    for it in items:
        by_origin.setdefault(it.id.origin, []).append(it)
    for seqs in by_origin.values():
        seqs.sort(key=lambda it: it.id.seq)
    preds: dict[OpId, set[OpId]] = {it.id: set() for it in items}
    succs: dict[OpId, list[OpId]] = {it.id: [] for it in items}
    for it in items:
        for origin, chain in by_origin.items():
            bound = it.deps.get(origin)
            # the latest batch item this one depends on, per origin; earlier
            # ones are reached through the per-origin chain
            best = None
            for cand in chain:
                if cand.id.seq <= bound and cand.id != it.id:
                    best = cand
            if best is not None:
                preds[it.id].add(best.id)
        chain = by_origin[it.id.origin]
        idx = chain.index(it)
        if idx:
            preds[it.id].add(chain[idx - 1].id)
    for node, ps in preds.items():
        for p in ps:
            succs[p].append(node)
    lookup = {it.id: it for it in items}
    indeg = {k: len(v) for k, v in preds.items()}
    ready = [k for k, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    out = []
    while ready:
        k = heapq.heappop(ready)
        out.append(lookup[k])
        for s in succs[k]:
            indeg[s] -= 1
            if indeg[s] == 0:
                heapq.heappush(ready, s)
    if len(out) != len(items):
        raise ValueError("dependency cycle among batch operations")
    return out


def compute_diff(
    sender: NodeState,
    receiver: Summary,
    cfg: SessionConfig = SessionConfig(),
    session_id: str = "",
) -> SyncBatch:
    everywhere = cfg.metadata_mode is MetadataMode.METADATA_EVERYWHERE
    base = receiver.known
    limit = {x: n for x, n in sender.known if n > base.get(x)}

    def blocked(op_id: OpId, horizon: VersionVector) -> bool:
        held = sender.describe(op_id)
        if held is None:
            # intersection-only skips what it never saw; the metadata mode
            # cannot vouch for it
            return everywhere
        if receiver.interest.contains(held.target):
            return not isinstance(held, Operation) or not held.deps.leq(horizon)
        return everywhere and not held.deps.leq(horizon)

    moved = True
    while moved:
        moved = False
        horizon = base.merge(VersionVector.from_dict(limit))
        for origin in sorted(limit):
            lo = base.get(origin)
            for seq in range(lo + 1, limit[origin] + 1):
                op_id = OpId(origin, seq)
                if blocked(op_id, horizon):
                    start = _txn_start(sender, op_id) if sender.describe(op_id) else seq
                    limit[origin] = max(lo, start - 1)
                    moved = True
                    break
            if moved:
                break
        limit = {x: n for x, n in limit.items() if n > base.get(x)}

    payload: list[Operation] = []
    headers: list[OperationHeader] = []
    for origin in sorted(limit):
        for seq in range(base.get(origin) + 1, limit[origin] + 1):
            held = sender.describe(OpId(origin, seq))
            if held is None:
                continue
            if receiver.interest.contains(held.target):
                payload.append(held)
            elif everywhere:
                headers.append(OperationHeader.of(held))

    order = _topo_order(payload + headers)
    payload_ids = {op.id for op in payload}
    return SyncBatch(
        session_id=session_id,
        mode=cfg.metadata_mode,
        advance=VersionVector.from_dict(limit),
        payload_ops=tuple(it for it in order if it.id in payload_ids),
        header_ops=tuple(it for it in order if it.id not in payload_ids),
    )


def validate_batch(receiver: NodeState, batch: SyncBatch) -> BatchProblem | None:
    known = receiver.known
    final = known.merge(batch.advance)
    seen: set[OpId] = set()
    for item in (*batch.payload_ops, *batch.header_ops):
        if item.id in seen:
            return BatchProblem("malformed", item.id, f"{item.id} appears twice in the batch")
        seen.add(item.id)
        if not final.covers(item.id):
            return BatchProblem("malformed", item.id, f"{item.id} lies beyond the batch's advance")

    if batch.header_ops and batch.mode is not MetadataMode.METADATA_EVERYWHERE:
        return BatchProblem("malformed", batch.header_ops[0].id,
                            "headers are only shipped in metadata-everywhere mode")

    fresh_payload = [op for op in batch.payload_ops if not known.covers(op.id)]
    fresh_headers = [h for h in batch.header_ops if not known.covers(h.id)]

    for op in fresh_payload:
        if not receiver.interest.contains(op.target):
            return BatchProblem("out-of-interest", op.id,
                                f"{op.id} targets {op.target}, outside {receiver.id}'s interest")
    for hdr in fresh_headers:
        if receiver.interest.contains(hdr.target):
            return BatchProblem("causal-gap", hdr.id,
                                f"{hdr.id} is in {receiver.id}'s interest but arrived without payload")

    for item in (*fresh_payload, *fresh_headers):
        if not item.deps.leq(final):
            missing = next(
                OpId(o, final.get(o) + 1) for o, n in item.deps if n > final.get(o)
            )
            return BatchProblem("causal-gap", missing,
                                f"{item.id} depends on {missing}, which {receiver.id} lacks")

    # dependencies shipped in the same batch must come first
    position = {op.id: i for i, op in enumerate(batch.payload_ops)}
    for i, op in enumerate(batch.payload_ops):
        for dep_id, j in position.items():
            if j > i and op.deps.covers(dep_id):
                return BatchProblem("causal-gap", dep_id,
                                    f"{op.id} is ordered before its dependency {dep_id}")

    if batch.mode is MetadataMode.METADATA_EVERYWHERE:
        # every newly covered id must actually be delivered
        for origin, n in batch.advance:
            for seq in range(known.get(origin) + 1, n + 1):
                if OpId(origin, seq) not in seen:
                    return BatchProblem("causal-gap", OpId(origin, seq),
                                        f"{OpId(origin, seq)} would be covered but was not shipped")
    return None


@dataclass
class SessionResult:
    a: NodeState
    b: NodeState
    events: list[dict] = field(default_factory=list)
    batches: tuple[SyncBatch, ...] = ()

    def __iter__(self):
        return iter((self.a, self.b, self.events))


def run_session(
    a: NodeState, b: NodeState, cfg: SessionConfig = SessionConfig(), session_id: str = "s"
) -> SessionResult:
    info = open_session(a, b)
    events: list[dict] = [{
        "type": "SessionStart",
        "session": session_id,
        "a": a.id,
        "b": b.id,
        "relation": info.relation.value,
        "intersection": info.intersection.to_strings(),
    }]
    if info.closed:
        events.append({"type": "SessionEnd", "session": session_id})
        return SessionResult(a, b, events)

    # both directions are computed from the pre-session snapshots
    to_b = compute_diff(a, Summary.of(b), cfg, session_id)
    to_a = compute_diff(b, Summary.of(a), cfg, session_id)
    for src, dst, batch in ((a, b, to_b), (b, a, to_a)):
        events.append({
            "type": "BatchSent",
            "session": session_id,
            "from": src.id,
            "to": dst.id,
            "op_ids": [str(i) for i in batch.op_ids],
            "header_ids": [str(i) for i in batch.header_ids],
            "advance": batch.advance.as_dict(),
        })
    results = {}
    for dst, batch in ((b, to_b), (a, to_a)):
        ops, hdrs = new_ids(dst, batch)
        results[dst.id] = apply_batch(dst, batch)
        events.append({
            "type": "RemoteApply",
            "node": dst.id,
            "session": session_id,
            "op_ids": [str(i) for i in ops],
            "header_ids": [str(i) for i in hdrs],
        })
    events.append({"type": "SessionEnd", "session": session_id})
    return SessionResult(results[a.id], results[b.id], events, (to_b, to_a))
