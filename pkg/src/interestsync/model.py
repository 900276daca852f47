"""Core vocabulary: object paths, prefix regions, interest sets, version
vectors, operations and transactions.

Regions are finite sets of path prefixes. A prefix matches itself and every
extension of it, so ``Region.of("inventory")`` contains
``inventory.paint.white``. The universal region (everything) is a separate
flag rather than a prefix, because a path always has at least one segment.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Iterator, Mapping

if TYPE_CHECKING:
    from .crdt import CrdtMutation

NodeId = str

_SEGMENT = re.compile(r"[A-Za-z0-9_-]+")

UNIVERSAL_TOKEN = "*"


class PathError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class ObjectPath:
    segments: tuple[str, ...]

    def __post_init__(self):
        if not self.segments:
            raise PathError("an object path needs at least one segment")
        for seg in self.segments:
            if not isinstance(seg, str) or not _SEGMENT.fullmatch(seg):
                raise PathError(f"bad path segment {seg!r}")

    @classmethod
    def parse(cls, text: str | ObjectPath) -> ObjectPath:
        if isinstance(text, ObjectPath):
            return text
        if not isinstance(text, str):
            raise PathError(f"expected a dotted path string, got {text!r}")
        return cls(tuple(text.split(".")))

    def is_prefix_of(self, other: ObjectPath) -> bool:
        n = len(self.segments)
        return n <= len(other.segments) and other.segments[:n] == self.segments

    def __str__(self) -> str:
        return ".".join(self.segments)

    def __repr__(self) -> str:
        return f"ObjectPath({str(self)!r})"


def _normalize(prefixes: Iterable[ObjectPath]) -> frozenset[ObjectPath]:
    kept: list[ObjectPath] = []
    # shortest first, so any covering prefix is seen before its extensions
    for p in sorted(set(prefixes), key=lambda p: (len(p.segments), p.segments)):
        if not any(q.is_prefix_of(p) for q in kept):
            kept.append(p)
    return frozenset(kept)


@dataclass(frozen=True)
class Region:
    """A set of paths denoted by prefix patterns, or the universal set."""

    prefixes: frozenset[ObjectPath] = frozenset()
    universal: bool = False

    def __post_init__(self):
        prefixes = frozenset() if self.universal else _normalize(self.prefixes)
        object.__setattr__(self, "prefixes", prefixes)

    @classmethod
    def of(cls, *paths: str | ObjectPath) -> Region:
        if any(p == UNIVERSAL_TOKEN for p in paths):
            return cls.everything()
        return cls(frozenset(ObjectPath.parse(p) for p in paths))

    @classmethod
    def everything(cls) -> Region:
        return cls(universal=True)

    @classmethod
    def empty(cls) -> Region:
        return cls()

    @classmethod
    def from_strings(cls, items: Iterable[str]) -> Region:
        return cls.of(*items)

    def to_strings(self) -> list[str]:
        if self.universal:
            return [UNIVERSAL_TOKEN]
        return [str(p) for p in self.sorted_prefixes()]

    def sorted_prefixes(self) -> list[ObjectPath]:
        return sorted(self.prefixes)

    def contains(self, path: ObjectPath | str) -> bool:
        if self.universal:
            return True
        path = ObjectPath.parse(path)
        return any(p.is_prefix_of(path) for p in self.prefixes)

    __contains__ = contains

    def is_empty(self) -> bool:
        return not self.universal and not self.prefixes

    def issubset(self, other: Region) -> bool:
        if other.universal:
            return True
        if self.universal:
            return False
        # every prefix denotes an infinite subtree, so containment of the
        # subtree root is both necessary and sufficient
        return all(other.contains(p) for p in self.prefixes)

    def intersection(self, other: Region) -> Region:
        return region_intersection(self, other)

    def union(self, other: Region) -> Region:
        if self.universal or other.universal:
            return Region.everything()
        return Region(self.prefixes | other.prefixes)

    def __str__(self) -> str:
        return "{" + ", ".join(self.to_strings()) + "}"


class Relation(enum.Enum):
    DISJOINT = "disjoint"
    EQUAL = "equal"
    A_SUBSET_B = "a-subset-b"
    A_SUPERSET_B = "a-superset-b"
    OVERLAP = "overlap"

    def mirrored(self) -> Relation:
        if self is Relation.A_SUBSET_B:
            return Relation.A_SUPERSET_B
        if self is Relation.A_SUPERSET_B:
            return Relation.A_SUBSET_B
        return self


def region_intersection(a: Region, b: Region) -> Region:
    if a.universal:
        return b
    if b.universal:
        return a
    out = []
    for p in a.prefixes:
        for q in b.prefixes:
            if p.is_prefix_of(q):
                out.append(q)
            elif q.is_prefix_of(p):
                out.append(p)
    return Region(frozenset(out))


def region_relation(a: Region, b: Region) -> Relation:
    if region_intersection(a, b).is_empty():
        return Relation.DISJOINT
    a_in_b = a.issubset(b)
    b_in_a = b.issubset(a)
    if a_in_b and b_in_a:
        return Relation.EQUAL
    if a_in_b:
        return Relation.A_SUBSET_B
    if b_in_a:
        return Relation.A_SUPERSET_B
    return Relation.OVERLAP


@dataclass(frozen=True)
class InterestSet:
    """Subscriptions narrowed by permissions. Permissions default to everything."""

    subscriptions: Region
    permissions: Region = field(default_factory=Region.everything)

    @classmethod
    def of(cls, *subscriptions: str, permissions: Iterable[str] | None = None) -> InterestSet:
        perms = Region.everything() if permissions is None else Region.from_strings(permissions)
        return cls(Region.of(*subscriptions), perms)

    @property
    def effective(self) -> Region:
        return region_intersection(self.subscriptions, self.permissions)

    def contains(self, path: ObjectPath | str) -> bool:
        path = ObjectPath.parse(path)
        return self.subscriptions.contains(path) and self.permissions.contains(path)

    __contains__ = contains

    def to_json(self) -> dict:
        return {
            "subscriptions": self.subscriptions.to_strings(),
            "permissions": self.permissions.to_strings(),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> InterestSet:
        perms = data.get("permissions")
        return cls(
            Region.from_strings(data["subscriptions"]),
            Region.everything() if perms is None else Region.from_strings(perms),
        )


def classify_session(lset: InterestSet, rset: InterestSet) -> Relation:
    return region_relation(lset.effective, rset.effective)


@dataclass(frozen=True, order=True)
class OpId:
    origin: NodeId
    seq: int

    def __str__(self) -> str:
        return f"{self.origin}:{self.seq}"

    @classmethod
    def parse(cls, text: str) -> OpId:
        origin, _, seq = text.rpartition(":")
        return cls(origin, int(seq))


@dataclass(frozen=True, order=True)
class TransactionId:
    origin: NodeId
    number: int

    def __str__(self) -> str:
        return f"{self.origin}/{self.number}"

    @classmethod
    def parse(cls, text: str) -> TransactionId:
        origin, _, number = text.rpartition("/")
        return cls(origin, int(number))


@dataclass(frozen=True)
class VersionVector:
    """Per-origin counters. Stored canonically: sorted, no zero entries."""

    entries: tuple[tuple[NodeId, int], ...] = ()

    def __post_init__(self):
        items = dict(self.entries)
        for node, count in items.items():
            if count < 0:
                raise ValueError(f"negative counter for {node!r}")
        canon = tuple(sorted((k, v) for k, v in items.items() if v))
        object.__setattr__(self, "entries", canon)

    @classmethod
    def from_dict(cls, mapping: Mapping[NodeId, int]) -> VersionVector:
        return cls(tuple(mapping.items()))

    def as_dict(self) -> dict[NodeId, int]:
        return dict(self.entries)

    def get(self, node: NodeId) -> int:
        for k, v in self.entries:
            if k == node:
                return v
        return 0

    __getitem__ = get

    def __iter__(self) -> Iterator[tuple[NodeId, int]]:
        return iter(self.entries)

    def merge(self, other: VersionVector) -> VersionVector:
        out = self.as_dict()
        for k, v in other.entries:
            out[k] = max(out.get(k, 0), v)
        return VersionVector.from_dict(out)

    def leq(self, other: VersionVector) -> bool:
        return all(v <= other.get(k) for k, v in self.entries)

    def increment(self, node: NodeId) -> VersionVector:
        out = self.as_dict()
        out[node] = out.get(node, 0) + 1
        return VersionVector.from_dict(out)

    def with_entry(self, node: NodeId, value: int) -> VersionVector:
        out = self.as_dict()
        out[node] = value
        return VersionVector.from_dict(out)

    def covers(self, op_id: OpId) -> bool:
        return self.get(op_id.origin) >= op_id.seq

    def __str__(self) -> str:
        return "{" + ", ".join(f"{k}:{v}" for k, v in self.entries) + "}"


def vv_merge(a: VersionVector, b: VersionVector) -> VersionVector:
    return a.merge(b)


def vv_leq(a: VersionVector, b: VersionVector) -> bool:
    return a.leq(b)


def vv_increment(v: VersionVector, node: NodeId) -> VersionVector:
    return v.increment(node)


def vv_covers(v: VersionVector, op_id: OpId) -> bool:
    return v.covers(op_id)


@dataclass(frozen=True)
class Operation:
    id: OpId
    txn: TransactionId
    target: ObjectPath
    mutation: CrdtMutation
    deps: VersionVector

    def __post_init__(self):
        if self.deps.get(self.id.origin) != self.id.seq - 1:
            raise ValueError(
                f"deps of {self.id} must record {self.id.seq - 1} ops at its origin"
            )


@dataclass(frozen=True)
class Transaction:
    id: TransactionId
    ops: tuple[Operation, ...]
    origin: NodeId

    def __post_init__(self):
        if not self.ops:
            raise ValueError("a transaction needs at least one operation")
        first = self.ops[0].id.seq
        for i, op in enumerate(self.ops):
            if op.txn != self.id or op.id != OpId(self.origin, first + i):
                raise ValueError(f"operation {op.id} does not belong to {self.id}")


def op_matches(op: Operation, interest: InterestSet) -> bool:
    return interest.contains(op.target)


def txn_project(
    txn: Transaction | Iterable[Operation], interest: InterestSet
) -> tuple[Operation, ...]:
    """The in-interest slice of a transaction, in original order.

    Returns a plain tuple because a projection may be empty, which a
    ``Transaction`` cannot be. The ops keep their transaction id. A
    previous projection can be passed back in.
    """
    ops = txn.ops if isinstance(txn, Transaction) else txn
    return tuple(op for op in ops if op_matches(op, interest))
