"""Run reports derived from a trace alone, so regenerating them is exact."""

from __future__ import annotations

import json
from typing import Iterable

from .crdt import ObjectStore, scoped_values
from .model import NodeId
from .sim import TopologySnapshot, detect_data_islands
from .trace import Trace
from .verify import DEFAULT_CHECKS, final_stores, run_checks


def active_nodes(t: Trace) -> list[NodeId]:
    nodes = [n["id"] for n in t.header["nodes"]]
    for ev in t.of_type("NodeRetired"):
        nodes = [ev["new"] if n == ev["old"] else n for n in nodes]
    return sorted(nodes)


def final_states(t: Trace) -> dict[NodeId, dict[str, object]]:
    interests = t.interests()
    stores = final_stores(t)
    empty = ObjectStore({}, t.schema)
    return {
        nid: {path: value for path, _, value in scoped_values(stores.get(nid, empty), interests[nid].effective)}
        for nid in active_nodes(t)
    }


def islands_per_checkpoint(t: Trace) -> list[dict]:
    interests = t.interests()
    out = []
    for ev in t.of_type("Checkpoint"):
        topo = TopologySnapshot.of(ev["hashes"], ev["edges"])
        out.append({"checkpoint": ev["label"], "t": ev["t"], **detect_data_islands(topo, interests).to_json()})
    return out


def build_report(t: Trace, checks: Iterable[str] = DEFAULT_CHECKS) -> dict:
    results = run_checks(t, checks)
    counts = {name: len(v) for name, v in results.items()}
    return {
        "scenario": t.header["scenario"],
        "digest": t.header["digest"],
        "seed": t.header["seed"],
        "mode": t.mode,
        "trace_digest": t.digest(),
        "final_states": final_states(t),
        "checks": {name: [v.to_json() for v in vs] for name, vs in results.items()},
        "islands": islands_per_checkpoint(t),
        "summary": {"violations": counts, "total": sum(counts.values()), "clean": not any(counts.values())},
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _scalar(value) -> str:
    return json.dumps(value) if isinstance(value, str) or isinstance(value, bool) or value is None else str(value)


def state_table(states: dict[NodeId, dict[str, object]]) -> str:
    rows = [(node, path, _scalar(v)) for node, values in states.items() for path, v in values.items()]
    if not rows:
        return "(no state)\n"
    widths = [max(len(r[i]) for r in rows + [("node", "path", "value")]) for i in range(3)]
    fmt = "  ".join("{:<%d}" % w for w in widths)
    lines = [fmt.format("node", "path", "value"), fmt.format(*("-" * w for w in widths))]
    lines += [fmt.format(*r) for r in rows]
    return "\n".join(line.rstrip() for line in lines) + "\n"


def report_text(report: dict) -> str:
    lines = [
        f"scenario {report['scenario']}  seed {report['seed']}  mode {report['mode']}",
        f"trace    {report['trace_digest']}",
        "",
    ]
    for name, violations in report["checks"].items():
        lines.append(f"{name}: {len(violations)} violation{'s' if len(violations) != 1 else ''}")
        for v in violations:
            when = f"t={v['t']}" if "t" in v else ""
            lines.append(f"  [{when}] {v['node']}: {v['explanation']}")
    for entry in report["islands"]:
        found = entry["findings"]
        lines.append(f"islands at {entry['checkpoint']}: {len(found)}")
        for f in found:
            lines.append(f"  {{{', '.join(f['component_a'])}}} / {{{', '.join(f['component_b'])}}} share {{{', '.join(f['shared'])}}}")
    s = report["summary"]
    lines += ["", "clean" if s["clean"] else f"{s['total']} violation(s)"]
    return "\n".join(lines) + "\n"
