"""Line-oriented JSON traces.

The first line is a header carrying everything needed to interpret the
rest without the scenario file: node interests, the object schema and the
metadata mode. Each following line is one event with a strictly increasing
logical time ``t``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .crdt import CounterAdd, RegisterWrite, Schema, Timestamp
from .model import InterestSet, NodeId, ObjectPath, OpId, Operation, TransactionId, VersionVector

FORMAT = "interestsync-trace/1"


class MalformedTrace(ValueError):
    pass


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def op_to_json(op: Operation) -> dict:
    m = op.mutation
    if isinstance(m, CounterAdd):
        mutation = {"kind": "add", "delta": m.delta}
    else:
        mutation = {"kind": "write", "value": m.value, "ts": [m.ts.lamport, m.ts.origin]}
    return {
        "id": str(op.id),
        "txn": str(op.txn),
        "target": str(op.target),
        "mutation": mutation,
        "deps": op.deps.as_dict(),
    }


def op_from_json(data: dict) -> Operation:
    m = data["mutation"]
    if m["kind"] == "add":
        mutation = CounterAdd(int(m["delta"]))
    elif m["kind"] == "write":
        mutation = RegisterWrite(m["value"], Timestamp(*m["ts"]))
    else:
        raise MalformedTrace(f"unknown mutation kind {m['kind']!r}")
    return Operation(
        OpId.parse(data["id"]),
        TransactionId.parse(data["txn"]),
        ObjectPath.parse(data["target"]),
        mutation,
        VersionVector.from_dict(data["deps"]),
    )


@dataclass
class Trace:
    header: dict
    events: list[dict] = field(default_factory=list)

    def append(self, event: dict) -> dict:
        t = self.events[-1]["t"] + 1 if self.events else 1
        stamped = {"t": t, **event}
        self.events.append(stamped)
        return stamped

    @property
    def mode(self) -> str:
        return self.header["mode"]

    @property
    def schema(self) -> Schema:
        return Schema.from_json(self.header["schema"])

    def interests(self) -> dict[NodeId, InterestSet]:
        """Interest of every node that ever existed, retired ones included."""
        out = {n["id"]: InterestSet.from_json(n) for n in self.header["nodes"]}
        for ev in self.events:
            if ev["type"] == "NodeRetired":
                out[ev["new"]] = InterestSet.from_json(ev)
        return out

    def of_type(self, *types: str) -> list[dict]:
        return [ev for ev in self.events if ev["type"] in types]

    def to_jsonl(self) -> str:
        lines = [dumps({"t": 0, **self.header})]
        lines += [dumps(ev) for ev in self.events]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> Trace:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise MalformedTrace("empty trace")
        try:
            records = [json.loads(ln) for ln in lines]
        except json.JSONDecodeError as exc:
            raise MalformedTrace(f"line {exc.lineno}: {exc.msg}") from exc
        header = records[0]
        if header.get("type") != "header" or header.get("format") != FORMAT:
            raise MalformedTrace("first line is not a trace header")
        header = {k: v for k, v in header.items() if k != "t"}
        last = 0
        for i, ev in enumerate(records[1:], start=2):
            t = ev.get("t")
            if not isinstance(t, int) or t <= last:
                raise MalformedTrace(f"line {i}: logical time must strictly increase")
            if "type" not in ev:
                raise MalformedTrace(f"line {i}: event without a type")
            last = t
        return cls(header, records[1:])

    @classmethod
    def read(cls, path: str | Path) -> Trace:
        return cls.from_jsonl(Path(path).read_text())
