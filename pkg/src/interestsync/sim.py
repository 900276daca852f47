"""Deterministic scenario runner and data-island detection.

Scenarios are JSON documents::

    {
      "name": "...", "mode": "intersection-only", "seed": 0,
      "schema": {"inventory": {"type": "counter"}, ...},
      "nodes": [{"id": "Bob", "subscriptions": ["inventory"], "permissions": ["*"]}],
      "footprints": [{"name": "T1", "writes": ["s1"], "deps": ["s2"]}],
      "events": [
        {"type": "connect", "a": "Bob", "b": "Alice"},
        {"type": "txn", "node": "Bob", "label": "replace_bolt",
         "body": [{"path": "inventory.bolts.new", "kind": "add", "value": -1}]},
        {"type": "sync", "a": "Bob", "b": "Alice"},
        {"type": "sync_random", "count": 3},
        {"type": "change_interest", "node": "Bob", "subscriptions": ["landing_gear"]},
        {"type": "checkpoint", "label": "end"},
        {"type": "disconnect", "a": "Bob", "b": "Alice"}
      ]
    }

Events name nodes by their scenario id; after an interest change the name
keeps referring to the device, which is backed by a fresh node id.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import networkx as nx

from .crdt import COUNTER, REGISTER, CounterAdd, CrdtMutation, RegisterWrite, Schema
from .model import InterestSet, NodeId, ObjectPath, PathError, Region, region_intersection
from .node import NodeState, ReplicationError, change_interest, execute_local_txn, state_hash
from .sync import MetadataMode, SessionConfig, run_session
from .trace import FORMAT, Trace, dumps, op_to_json

_NODE_ID = re.compile(r"[A-Za-z0-9_-]+")


class ScenarioError(ValueError):
    pass


class ParseError(ScenarioError):
    pass


class ValidationError(ScenarioError):
    pass


class ProtocolError(RuntimeError):
    """A replication invariant failed mid-run; ``trace`` holds the events so far."""

    def __init__(self, cause: ReplicationError, trace: Trace):
        super().__init__(f"{type(cause).__name__}: {cause}")
        self.cause = cause
        self.trace = trace


@dataclass(frozen=True)
class Txn:
    node: str
    body: tuple[tuple[ObjectPath, CrdtMutation], ...]
    label: str = ""


@dataclass(frozen=True)
class Connect:
    a: str
    b: str


@dataclass(frozen=True)
class Disconnect:
    a: str
    b: str


@dataclass(frozen=True)
class Sync:
    a: str
    b: str


@dataclass(frozen=True)
class SyncRandom:
    count: int


@dataclass(frozen=True)
class ChangeInterest:
    node: str
    interest: InterestSet
    new_id: str | None = None


@dataclass(frozen=True)
class Checkpoint:
    label: str


ScenarioEvent = Union[Txn, Connect, Disconnect, Sync, SyncRandom, ChangeInterest, Checkpoint]


@dataclass(frozen=True)
class Footprint:
    """Regions a transaction class writes and causally depends on."""

    name: str
    writes: Region
    deps: Region = field(default_factory=Region.empty)

    @property
    def region(self) -> Region:
        return self.writes.union(self.deps)


@dataclass
class Scenario:
    name: str
    nodes: list[tuple[NodeId, InterestSet]]
    schema: Schema
    mode: MetadataMode
    events: list[ScenarioEvent]
    seed: int = 0
    footprints: list[Footprint] = field(default_factory=list)
    description: str = ""
    digest: str = ""


@dataclass(frozen=True)
class TopologySnapshot:
    nodes: frozenset[NodeId]
    edges: frozenset[frozenset[NodeId]]

    def __post_init__(self):
        for e in self.edges:
            if len(e) != 2:
                raise ValueError(f"bad edge {sorted(e)}: no self-edges")

    @classmethod
    def of(cls, nodes, edges) -> TopologySnapshot:
        edges = frozenset(frozenset(e) for e in edges)
        nodes = frozenset(nodes) | frozenset(n for e in edges for n in e)
        return cls(nodes, edges)

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(sorted(self.nodes))
        g.add_edges_from(sorted(tuple(sorted(e)) for e in self.edges))
        return g

    def edge_list(self) -> list[list[NodeId]]:
        return sorted(sorted(e) for e in self.edges)


# -- loading -----------------------------------------------------------------


def _require(obj, key, kind, where):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"{where}: missing field {key!r}")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise ParseError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}")
    return value


def _region(items, where) -> Region:
    if not isinstance(items, list) or not all(isinstance(x, str) for x in items):
        raise ParseError(f"{where}: expected a list of dotted paths")
    try:
        return Region.from_strings(items)
    except PathError as exc:
        raise ParseError(f"{where}: {exc}") from None


def _interest(obj, where) -> InterestSet:
    subs = _region(_require(obj, "subscriptions", list, where), f"{where}.subscriptions")
    perms = obj.get("permissions")
    perms = Region.everything() if perms is None else _region(perms, f"{where}.permissions")
    return InterestSet(subs, perms)


def _mutation(item, where) -> tuple[ObjectPath, CrdtMutation]:
    try:
        path = ObjectPath.parse(_require(item, "path", str, where))
    except PathError as exc:
        raise ParseError(f"{where}.path: {exc}") from None
    kind = _require(item, "kind", str, where)
    value = _require(item, "value", None, where)
    if kind == "add":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError(f"{where}.value: counter deltas are integers")
        return path, CounterAdd(value)
    if kind == "write":
        if not isinstance(value, (str, int, bool)):
            raise ParseError(f"{where}.value: registers hold strings, integers or booleans")
        return path, RegisterWrite(value)
    raise ParseError(f"{where}.kind: expected 'add' or 'write', got {kind!r}")


def _event(ev, where) -> ScenarioEvent:
    kind = _require(ev, "type", str, where)
    if kind == "txn":
        body = _require(ev, "body", list, where)
        return Txn(
            _require(ev, "node", str, where),
            tuple(_mutation(m, f"{where}.body[{j}]") for j, m in enumerate(body)),
            str(ev.get("label", "")),
        )
    if kind in ("connect", "disconnect", "sync"):
        cls = {"connect": Connect, "disconnect": Disconnect, "sync": Sync}[kind]
        return cls(_require(ev, "a", str, where), _require(ev, "b", str, where))
    if kind == "sync_random":
        count = _require(ev, "count", int, where)
        if count < 0:
            raise ParseError(f"{where}.count: must be non-negative")
        return SyncRandom(count)
    if kind == "change_interest":
        new_id = ev.get("new_id")
        return ChangeInterest(_require(ev, "node", str, where), _interest(ev, where), new_id)
    if kind == "checkpoint":
        return Checkpoint(str(_require(ev, "label", str, where)))
    raise ParseError(f"{where}.type: unknown event type {kind!r}")


def _validate(s: Scenario) -> None:
    ids = [nid for nid, _ in s.nodes]
    if len(set(ids)) != len(ids):
        raise ValidationError("node ids must be unique")
    for nid in ids:
        if not _NODE_ID.fullmatch(nid):
            raise ValidationError(f"bad node id {nid!r}")
    interest = dict(s.nodes)
    current = {nid: nid for nid in ids}
    taken = set(ids)
    edges: set[frozenset[str]] = set()

    def known(name, i):
        if name not in interest:
            raise ValidationError(f"events[{i}]: unknown node {name!r}")

    for i, ev in enumerate(s.events):
        if isinstance(ev, (Connect, Disconnect, Sync)):
            known(ev.a, i)
            known(ev.b, i)
            if ev.a == ev.b:
                raise ValidationError(f"events[{i}]: a node cannot pair with itself")
            edge = frozenset((ev.a, ev.b))
            if isinstance(ev, Connect):
                edges.add(edge)
            elif isinstance(ev, Disconnect):
                edges.discard(edge)
            elif edge not in edges:
                raise ValidationError(f"events[{i}]: sync between {ev.a} and {ev.b} without a connection")
        elif isinstance(ev, Txn):
            known(ev.node, i)
            if not ev.body:
                raise ValidationError(f"events[{i}]: empty transaction")
            for path, m in ev.body:
                entry = s.schema.lookup(path)
                if entry is None:
                    raise ValidationError(f"events[{i}]: undeclared object {path}")
                if entry.tag != m.tag:
                    raise ValidationError(f"events[{i}]: {path} is a {entry.tag}, not a {m.tag}")
                if not interest[ev.node].contains(path):
                    raise ValidationError(f"events[{i}]: {path} is outside {ev.node}'s interest")
        elif isinstance(ev, ChangeInterest):
            known(ev.node, i)
            interest[ev.node] = ev.interest
            new_id = ev.new_id or _successor_id(current[ev.node], taken)
            if new_id in taken or not _NODE_ID.fullmatch(new_id):
                raise ValidationError(f"events[{i}]: replacement id {new_id!r} is taken or invalid")
            taken.add(new_id)
            current[ev.node] = new_id


def _successor_id(old: str, taken: set[str]) -> str:
    stem = old
    k = 2
    while f"{stem}-{k}" in taken:
        k += 1
    return f"{stem}-{k}"


def scenario_from_dict(doc: Mapping) -> Scenario:
    if not isinstance(doc, dict):
        raise ParseError("scenario document must be a JSON object")
    nodes_raw = _require(doc, "nodes", list, "scenario")
    nodes = []
    for i, n in enumerate(nodes_raw):
        nodes.append((_require(n, "id", str, f"nodes[{i}]"), _interest(n, f"nodes[{i}]")))
    schema_raw = _require(doc, "schema", dict, "scenario")
    try:
        schema = Schema.from_json(schema_raw)
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"schema: {exc}") from None
    try:
        mode = MetadataMode.parse(doc.get("mode", "intersection-only"))
    except ValueError:
        raise ParseError(f"mode: unknown metadata mode {doc.get('mode')!r}") from None
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ParseError("seed: expected an unsigned integer")
    events = [_event(ev, f"events[{i}]") for i, ev in enumerate(_require(doc, "events", list, "scenario"))]
    footprints = []
    for i, fp in enumerate(doc.get("footprints", [])):
        where = f"footprints[{i}]"
        footprints.append(Footprint(
            str(fp.get("name", f"T{i + 1}")),
            _region(_require(fp, "writes", list, where), f"{where}.writes"),
            _region(fp.get("deps", []), f"{where}.deps"),
        ))
    s = Scenario(
        name=str(doc.get("name", "scenario")),
        nodes=nodes,
        schema=schema,
        mode=mode,
        events=events,
        seed=seed,
        footprints=footprints,
        description=str(doc.get("description", "")),
        digest=hashlib.sha256(dumps(doc).encode()).hexdigest(),
    )
    _validate(s)
    return s


def load_scenario(text: str | bytes, *, seed: int | None = None, mode: str | None = None) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if isinstance(doc, dict):
        if seed is not None:
            doc["seed"] = seed
        if mode is not None:
            doc["mode"] = mode
    return scenario_from_dict(doc)


# -- running -----------------------------------------------------------------


class Simulator:
    """Executes a scenario's events in order, recording a trace."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.cfg = SessionConfig(scenario.mode)
        self.rng = random.Random(scenario.seed)
        self.nodes: dict[NodeId, NodeState] = {
            nid: NodeState.fresh(nid, interest, scenario.schema) for nid, interest in scenario.nodes
        }
        self.current: dict[str, NodeId] = {nid: nid for nid, _ in scenario.nodes}
        self.taken = set(self.current)
        self.edges: set[frozenset[NodeId]] = set()
        self.sessions = 0
        self.trace = Trace({
            "type": "header",
            "format": FORMAT,
            "scenario": scenario.name,
            "digest": scenario.digest,
            "seed": scenario.seed,
            "mode": scenario.mode.value,
            "nodes": [{"id": nid, **interest.to_json()} for nid, interest in scenario.nodes],
            "schema": scenario.schema.to_json(),
        })

    def active(self) -> list[NodeId]:
        return sorted(self.current.values())

    def topology(self) -> TopologySnapshot:
        return TopologySnapshot.of(self.active(), self.edges)

    def run(self) -> Trace:
        try:
            for ev in self.scenario.events:
                self.step(ev)
        except ReplicationError as exc:
            raise ProtocolError(exc, self.trace) from exc
        return self.trace

    def step(self, ev: ScenarioEvent) -> None:
        emit = self.trace.append
        if isinstance(ev, Connect):
            a, b = self.current[ev.a], self.current[ev.b]
            self.edges.add(frozenset((a, b)))
            emit({"type": "Connect", "a": a, "b": b})
        elif isinstance(ev, Disconnect):
            a, b = self.current[ev.a], self.current[ev.b]
            self.edges.discard(frozenset((a, b)))
            emit({"type": "Disconnect", "a": a, "b": b})
        elif isinstance(ev, Txn):
            nid = self.current[ev.node]
            self.nodes[nid], txn = execute_local_txn(self.nodes[nid], ev.body)
            emit({
                "type": "LocalCommit",
                "node": nid,
                "txn": str(txn.id),
                "label": ev.label,
                "op_ids": [str(op.id) for op in txn.ops],
                "ops": [op_to_json(op) for op in txn.ops],
            })
        elif isinstance(ev, Sync):
            self.session(self.current[ev.a], self.current[ev.b])
        elif isinstance(ev, SyncRandom):
            for _ in range(ev.count):
                if not self.edges:
                    break
                a, b = self.rng.choice(sorted(sorted(e) for e in self.edges))
                self.session(a, b)
        elif isinstance(ev, ChangeInterest):
            old = self.current[ev.node]
            new_id = ev.new_id or _successor_id(old, self.taken)
            self.taken.add(new_id)
            self.nodes[new_id] = change_interest(self.nodes.pop(old), ev.interest, new_id)
            self.current[ev.node] = new_id
            self.edges = {
                frozenset(new_id if n == old else n for n in e) for e in self.edges
            }
            emit({"type": "NodeRetired", "old": old, "new": new_id, **ev.interest.to_json()})
        elif isinstance(ev, Checkpoint):
            emit({
                "type": "Checkpoint",
                "label": ev.label,
                "edges": self.topology().edge_list(),
                "hashes": {
                    nid: state_hash(self.nodes[nid], self.nodes[nid].interest.effective)
                    for nid in self.active()
                },
            })
        else:
            raise TypeError(f"unknown scenario event {ev!r}")

    def session(self, a: NodeId, b: NodeId) -> None:
        self.sessions += 1
        result = run_session(self.nodes[a], self.nodes[b], self.cfg, f"s{self.sessions}")
        # apply before emitting so a failing session leaves no half-recorded events
        self.nodes[a], self.nodes[b] = result.a, result.b
        for event in result.events:
            self.trace.append(event)


def run_scenario(s: Scenario) -> Trace:
    return Simulator(s).run()


def simulate(s: Scenario) -> Simulator:
    """Run a scenario and keep the simulator around for inspecting node states."""
    sim = Simulator(s)
    sim.run()
    return sim


# -- data islands ------------------------------------------------------------


@dataclass(frozen=True)
class IslandFinding:
    component_a: tuple[NodeId, ...]
    component_b: tuple[NodeId, ...]
    shared: Region

    def to_json(self) -> dict:
        return {
            "component_a": list(self.component_a),
            "component_b": list(self.component_b),
            "shared": self.shared.to_strings(),
        }


@dataclass(frozen=True)
class IslandReport:
    findings: tuple[IslandFinding, ...]
    singletons: tuple[NodeId, ...]  # informational only, never islands

    def to_json(self) -> dict:
        return {
            "findings": [f.to_json() for f in self.findings],
            "singletons": list(self.singletons),
        }


def detect_data_islands(topo: TopologySnapshot, interests: Mapping[NodeId, InterestSet]) -> IslandReport:
    missing = [n for n in topo.nodes if n not in interests]
    if missing:
        raise ValueError(f"no interest set for {sorted(missing)}")
    components = sorted(tuple(sorted(c)) for c in nx.connected_components(topo.graph()))
    groups = [c for c in components if len(c) >= 2]
    singletons = tuple(c[0] for c in components if len(c) == 1)

    def union_region(members: Sequence[NodeId]) -> Region:
        region = Region.empty()
        for n in members:
            region = region.union(interests[n].effective)
        return region

    regions = [union_region(c) for c in groups]
    findings = []
    for i in range(len(groups)):
        for j in range(i + 1, len(groups)):
            shared = region_intersection(regions[i], regions[j])
            if not shared.is_empty():
                findings.append(IslandFinding(groups[i], groups[j], shared))
    return IslandReport(tuple(findings), singletons)


def scenario_topology(s: Scenario, at: str | None = None) -> tuple[TopologySnapshot, dict[NodeId, InterestSet]]:
    """Static view of a scenario, keyed by scenario node names.

    Without ``at`` the topology is the union of every connect event and each
    node carries its last configured interest. With ``at`` it is the live
    topology and interests at the named checkpoint.
    """
    interests = dict(s.nodes)
    edges: set[frozenset[str]] = set()
    union: set[frozenset[str]] = set()
    for ev in s.events:
        if isinstance(ev, Connect):
            edges.add(frozenset((ev.a, ev.b)))
            union.add(frozenset((ev.a, ev.b)))
        elif isinstance(ev, Disconnect):
            edges.discard(frozenset((ev.a, ev.b)))
        elif isinstance(ev, ChangeInterest):
            interests[ev.node] = ev.interest
        elif isinstance(ev, Checkpoint) and at is not None and ev.label == at:
            return TopologySnapshot.of(interests, edges), dict(interests)
    if at is not None:
        raise ValidationError(f"no checkpoint labelled {at!r}")
    return TopologySnapshot.of(interests, union), interests
