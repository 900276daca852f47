"""PN-counters, LWW-registers and the per-node object store.

Every mutation in the maintenance example is either a counter delta
(``inventory.paint.white -= 1``) or a scalar assignment
(``landing_gear.bolt.replaced_on = '2024-02-16'``), so those two types are
all the store supports. Booleans and dates are registers.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping, Union

from .model import NodeId, ObjectPath, Operation, Region

COUNTER = "counter"
REGISTER = "register"
TYPE_TAGS = (COUNTER, REGISTER)

Scalar = Union[str, int, bool, None]


class TypeMismatch(TypeError):
    pass


class _Absent:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Absent"

    def __bool__(self) -> bool:
        return False


Absent = _Absent()


@dataclass(frozen=True, order=True)
class Timestamp:
    """Lamport time with the origin as tie-break. This order is the arbitration."""

    lamport: int
    origin: NodeId


ZERO_TS = Timestamp(0, "")


@dataclass(frozen=True)
class CounterAdd:
    delta: int

    tag = COUNTER


@dataclass(frozen=True)
class RegisterWrite:
    value: Scalar
    ts: Timestamp | None = None  # stamped by the committing node

    tag = REGISTER


CrdtMutation = Union[CounterAdd, RegisterWrite]


def _canon(mapping: Mapping[NodeId, int]) -> tuple[tuple[NodeId, int], ...]:
    return tuple(sorted((k, v) for k, v in mapping.items() if v))


@dataclass(frozen=True)
class PnCounter:
    increments: tuple[tuple[NodeId, int], ...] = ()
    decrements: tuple[tuple[NodeId, int], ...] = ()
    base: int = 0  # schema initial value, identical on every replica

    tag = COUNTER

    def __post_init__(self):
        object.__setattr__(self, "increments", _canon(dict(self.increments)))
        object.__setattr__(self, "decrements", _canon(dict(self.decrements)))

    @classmethod
    def of(cls, inc: Mapping[NodeId, int] | None = None,
           dec: Mapping[NodeId, int] | None = None, base: int = 0) -> PnCounter:
        return cls(tuple((inc or {}).items()), tuple((dec or {}).items()), base)

    @property
    def value(self) -> int:
        return self.base + sum(v for _, v in self.increments) - sum(v for _, v in self.decrements)

    def add(self, origin: NodeId, delta: int) -> PnCounter:
        inc, dec = dict(self.increments), dict(self.decrements)
        if delta >= 0:
            inc[origin] = inc.get(origin, 0) + delta
        else:
            dec[origin] = dec.get(origin, 0) - delta
        return PnCounter.of(inc, dec, self.base)


@dataclass(frozen=True)
class LwwRegister:
    value: Scalar = None
    ts: Timestamp = ZERO_TS

    tag = REGISTER


CrdtState = Union[PnCounter, LwwRegister]


def _entrywise_max(a, b) -> dict[NodeId, int]:
    out = dict(a)
    for k, v in b:
        out[k] = max(out.get(k, 0), v)
    return out


def merge_state(a: CrdtState, b: CrdtState) -> CrdtState:
    if a.tag != b.tag:
        raise TypeMismatch(f"cannot merge {a.tag} with {b.tag}")
    if isinstance(a, PnCounter):
        if a.base != b.base:
            raise ValueError("counters disagree on their initial value")
        return PnCounter.of(
            _entrywise_max(a.increments, b.increments),
            _entrywise_max(a.decrements, b.decrements),
            a.base,
        )
    return a if a.ts >= b.ts else b


def state_leq(a: CrdtState, b: CrdtState) -> bool:
    """The semilattice order: entrywise for counters, timestamp for registers."""
    if a.tag != b.tag:
        raise TypeMismatch(f"cannot compare {a.tag} with {b.tag}")
    if isinstance(a, PnCounter):
        inc_b, dec_b = dict(b.increments), dict(b.decrements)
        return (
            a.base == b.base
            and all(v <= inc_b.get(k, 0) for k, v in a.increments)
            and all(v <= dec_b.get(k, 0) for k, v in a.decrements)
        )
    return a.ts < b.ts or a == b


@dataclass(frozen=True)
class SchemaEntry:
    tag: str
    initial: Scalar = None

    def __post_init__(self):
        if self.tag not in TYPE_TAGS:
            raise ValueError(f"unknown CRDT type {self.tag!r}")
        if self.tag == COUNTER and not isinstance(self.initial, int):
            object.__setattr__(self, "initial", int(self.initial or 0))

    def fresh_state(self) -> CrdtState:
        if self.tag == COUNTER:
            return PnCounter(base=self.initial)
        return LwwRegister(self.initial, ZERO_TS)


@dataclass(frozen=True)
class Schema:
    """Declared CRDT type per path prefix; the longest matching prefix wins."""

    entries: Mapping[ObjectPath, SchemaEntry] = field(default_factory=dict)

    def lookup(self, path: ObjectPath) -> SchemaEntry | None:
        best = None
        for prefix, entry in self.entries.items():
            if prefix.is_prefix_of(path) and (
                best is None or len(prefix.segments) > len(best[0].segments)
            ):
                best = (prefix, entry)
        return best[1] if best else None

    def to_json(self) -> dict:
        out = {}
        for prefix in sorted(self.entries):
            entry = self.entries[prefix]
            item = {"type": entry.tag}
            if entry.initial is not None and not (entry.tag == COUNTER and entry.initial == 0):
                item["initial"] = entry.initial
            out[str(prefix)] = item
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> Schema:
        return cls({
            ObjectPath.parse(k): SchemaEntry(v["type"], v.get("initial"))
            for k, v in data.items()
        })


@dataclass(frozen=True)
class ObjectStore:
    objects: Mapping[ObjectPath, CrdtState] = field(default_factory=dict)
    schema: Schema = field(default_factory=Schema)

    def __eq__(self, other):
        if not isinstance(other, ObjectStore):
            return NotImplemented
        return dict(self.objects) == dict(other.objects)

    def __hash__(self):
        return hash(frozenset(self.objects.items()))

    def paths(self) -> list[ObjectPath]:
        return sorted(self.objects)

    def declared_tag(self, path: ObjectPath) -> str | None:
        if path in self.objects:
            return self.objects[path].tag
        entry = self.schema.lookup(path)
        return entry.tag if entry else None


def apply_mutation(store: ObjectStore, op: Operation) -> ObjectStore:
    """Fold one operation into the store.

    Not idempotent for counters; callers dedupe by op id.
    """
    m = op.mutation
    declared = store.declared_tag(op.target)
    if declared is not None and declared != m.tag:
        raise TypeMismatch(f"{op.target} is a {declared}, got a {m.tag} mutation")
    current = store.objects.get(op.target)
    if current is None:
        entry = store.schema.lookup(op.target)
        current = entry.fresh_state() if entry else (
            PnCounter() if m.tag == COUNTER else LwwRegister()
        )
    if isinstance(m, CounterAdd):
        new = current.add(op.id.origin, m.delta)
    else:
        if m.ts is None:
            raise ValueError(f"register write {op.id} carries no timestamp")
        new = LwwRegister(m.value, m.ts) if m.ts > current.ts else current
    objects = dict(store.objects)
    objects[op.target] = new
    return ObjectStore(objects, store.schema)


def merge_store(a: ObjectStore, b: ObjectStore, scope: Region) -> ObjectStore:
    objects = dict(a.objects)
    for path, state in b.objects.items():
        if not scope.contains(path):
            continue
        objects[path] = merge_state(objects[path], state) if path in objects else state
    return ObjectStore(objects, a.schema)


def materialize(state: CrdtState) -> Scalar:
    return state.value


def read_value(store: ObjectStore, path: ObjectPath | str):
    path = ObjectPath.parse(path)
    state = store.objects.get(path)
    if state is not None:
        return state.value
    if path in store.schema.entries:
        # declared leaf that nobody has touched yet
        return store.schema.entries[path].fresh_state().value
    return Absent


def scoped_values(store: ObjectStore, scope: Region) -> list[tuple[str, str, Scalar]]:
    return [
        (str(path), store.objects[path].tag, store.objects[path].value)
        for path in store.paths()
        if scope.contains(path)
    ]


def store_digest(store: ObjectStore, scope: Region) -> str:
    payload = json.dumps(scoped_values(store, scope), separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()
