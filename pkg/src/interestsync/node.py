"""Per-node replica state: local commits, atomic batch application, op log."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from .crdt import (
    CrdtMutation,
    ObjectStore,
    RegisterWrite,
    Schema,
    Timestamp,
    apply_mutation,
    read_value,
    store_digest,
)
from .model import (
    InterestSet,
    NodeId,
    ObjectPath,
    OpId,
    Operation,
    Region,
    Transaction,
    TransactionId,
    VersionVector,
)

if TYPE_CHECKING:
    from .sync import SyncBatch


class ReplicationError(Exception):
    """A protocol invariant was broken; carries the witnessing op id."""

    def __init__(self, message: str, witness: OpId | None = None):
        super().__init__(message)
        self.witness = witness


class OutOfInterest(ReplicationError):
    pass


class CausalGap(ReplicationError):
    pass


class MalformedBatch(ReplicationError):
    pass


class EmptyTransaction(ValueError):
    pass


@dataclass(frozen=True)
class OperationHeader:
    id: OpId
    txn: TransactionId
    target: ObjectPath
    deps: VersionVector

    @classmethod
    def of(cls, op: Operation | OperationHeader) -> OperationHeader:
        if isinstance(op, OperationHeader):
            return op
        return cls(op.id, op.txn, op.target, op.deps)


@dataclass(frozen=True)
class NodeState:
    id: NodeId
    interest: InterestSet
    store: ObjectStore = field(default_factory=ObjectStore)
    log: Mapping[OpId, Operation] = field(default_factory=dict)
    headers: Mapping[OpId, OperationHeader] = field(default_factory=dict)
    known: VersionVector = field(default_factory=VersionVector)
    clock: int = 0
    next_txn: int = 1

    @classmethod
    def fresh(cls, node_id: NodeId, interest: InterestSet, schema: Schema | None = None) -> NodeState:
        return cls(node_id, interest, ObjectStore({}, schema or Schema()))

    def describe(self, op_id: OpId) -> Operation | OperationHeader | None:
        """Whatever this node holds for an op id: the full op, a header, or nothing."""
        return self.log.get(op_id) or self.headers.get(op_id)

    def read(self, path: ObjectPath | str):
        return read_value(self.store, path)


def execute_local_txn(
    n: NodeState, body: Sequence[tuple[ObjectPath | str, CrdtMutation]]
) -> tuple[NodeState, Transaction]:
    if not body:
        raise EmptyTransaction(f"{n.id}: a transaction needs at least one mutation")
    targets = [ObjectPath.parse(path) for path, _ in body]
    for path in targets:
        if not n.interest.contains(path):
            raise OutOfInterest(f"{n.id} cannot mutate {path}: outside its interest set")
    written = [p for p, (_, m) in zip(targets, body) if isinstance(m, RegisterWrite)]
    if len(written) != len(set(written)):
        # all writes of one transaction share a timestamp, so a second write
        # to the same register could not be ordered against the first
        raise ValueError(f"{n.id}: transaction writes the same register twice")

    clock = n.clock + 1
    ts = Timestamp(clock, n.id)
    txn_id = TransactionId(n.id, n.next_txn)
    known = n.known
    store = n.store
    log = dict(n.log)
    ops = []
    for path, mutation in zip(targets, (m for _, m in body)):
        if isinstance(mutation, RegisterWrite):
            mutation = replace(mutation, ts=ts)
        op_id = OpId(n.id, known.get(n.id) + 1)
        op = Operation(op_id, txn_id, path, mutation, known)
        # type errors surface here, before anything is committed
        store = apply_mutation(store, op)
        log[op_id] = op
        known = known.with_entry(n.id, op_id.seq)
        ops.append(op)
    txn = Transaction(txn_id, tuple(ops), n.id)
    new = replace(n, store=store, log=log, known=known, clock=clock, next_txn=n.next_txn + 1)
    return new, txn


def new_ids(n: NodeState, batch: SyncBatch) -> tuple[list[OpId], list[OpId]]:
    """Op ids and header ids the batch would add to ``n`` (duplicates dropped)."""
    ops = [op.id for op in batch.payload_ops if not n.known.covers(op.id)]
    hdrs = [h.id for h in batch.header_ops if not n.known.covers(h.id)]
    return ops, hdrs


def apply_batch(n: NodeState, batch: SyncBatch) -> NodeState:
    from .sync import validate_batch

    problem = validate_batch(n, batch)
    if problem is not None:
        raise problem.as_error()

    store = n.store
    log = dict(n.log)
    headers = dict(n.headers)
    lamport = 0
    for op in batch.payload_ops:
        if n.known.covers(op.id):
            continue
        store = apply_mutation(store, op)
        log[op.id] = op
        ts = getattr(op.mutation, "ts", None)
        if ts is not None:
            lamport = max(lamport, ts.lamport)
    for hdr in batch.header_ops:
        if not n.known.covers(hdr.id):
            headers[hdr.id] = hdr
    applied = len(log) != len(n.log)
    known = n.known.merge(batch.advance)
    if not applied and known == n.known and len(headers) == len(n.headers):
        return n
    clock = max(n.clock, lamport) + 1 if applied else n.clock
    return replace(n, store=store, log=log, headers=headers, known=known, clock=clock)


def state_hash(n: NodeState, scope: Region) -> str:
    return store_digest(n.store, scope)


def change_interest(n: NodeState, new: InterestSet, new_id: NodeId) -> NodeState:
    """Interest changes are modelled as leave + join: a brand-new empty node."""
    if new_id == n.id:
        raise ValueError("the replacement node needs a fresh id")
    return NodeState.fresh(new_id, new, n.store.schema)


def rebuild_store(schema: Schema, ops: Iterable[Operation]) -> ObjectStore:
    store = ObjectStore({}, schema)
    for op in ops:
        store = apply_mutation(store, op)
    return store
