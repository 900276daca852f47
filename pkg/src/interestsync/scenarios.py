"""Built-in scenario documents.

``aircraft``
    Hangar maintenance crew. Bob replaces a bolt and patches the landing
    gear tube, Alice paints the new bolt, David follows the checklist only.
``n1n2n3``
    N1 and N3 share ``s1`` and ``s2`` but only talk through N2, which holds
    ``s2``. A transaction at N1 touching both reaches N3 cut in half.
``fig1-islands``
    Two well-connected groups with overlapping interests and no link
    between them, plus an isolated node.
"""

from __future__ import annotations

import copy
import json

from .sim import Scenario, scenario_from_dict


def _write(path, value):
    return {"path": path, "kind": "write", "value": value}


def _add(path, value):
    return {"path": path, "kind": "add", "value": value}


def _conn(a, b):
    return {"type": "connect", "a": a, "b": b}


def _sync(a, b):
    return {"type": "sync", "a": a, "b": b}


REPLACE_BOLT = [
    _add("inventory.bolts.new", -1),
    _write("landing_gear.bolt.replaced_on", "2024-02-16"),
    _add("inventory.bolts.old", 1),
    _write("checklist.landing_gear.bolt.health", True),
]

PAINT_BOLT = [
    _add("inventory.paint.white", -1),
    _write("landing_gear.bolt.painted_on", "2024-02-16"),
    _write("checklist.landing_gear.bolt.paint", True),
]

PAINT_TUBE = [
    _add("inventory.paint.white", -2),
    _write("landing_gear.tube.painted_on", "2024-02-16"),
    _write("checklist.landing_gear.tube.paint", True),
]

EVERYTHING = ["inventory", "landing_gear", "checklist", "fuselage"]

AIRCRAFT = {
    "name": "aircraft",
    "description": "Hangar crew: replace_bolt, paint_bolt, paint_tube; David sees checklist items only.",
    "mode": "intersection-only",
    "seed": 0,
    "schema": {
        "inventory": {"type": "counter"},
        "inventory.paint.white": {"type": "counter", "initial": 20},
        "landing_gear": {"type": "register"},
        "checklist": {"type": "register"},
        "fuselage": {"type": "register"},
    },
    "nodes": [
        {"id": "Sarah", "subscriptions": EVERYTHING},
        {"id": "Workstation", "subscriptions": EVERYTHING},
        {"id": "Alice", "subscriptions": ["inventory.paint", "landing_gear", "checklist.landing_gear", "fuselage"]},
        {"id": "Bob", "subscriptions": ["inventory", "landing_gear", "checklist.landing_gear"]},
        {"id": "David", "subscriptions": ["checklist"]},
    ],
    "footprints": [
        {"name": "replace_bolt", "writes": ["inventory.bolts", "landing_gear.bolt", "checklist.landing_gear.bolt"]},
        {"name": "paint_bolt", "writes": ["inventory.paint", "landing_gear.bolt", "checklist.landing_gear.bolt"],
         "deps": ["landing_gear.bolt", "checklist.landing_gear.bolt"]},
        {"name": "paint_tube", "writes": ["inventory.paint", "landing_gear.tube", "checklist.landing_gear.tube"]},
    ],
    "events": [
        _conn("Sarah", "Workstation"),
        _conn("Bob", "Workstation"),
        _conn("Alice", "Workstation"),
        _conn("Alice", "Bob"),
        _conn("Bob", "David"),
        {"type": "txn", "node": "Bob", "label": "replace_bolt", "body": REPLACE_BOLT},
        _sync("Bob", "Workstation"),
        _sync("Alice", "Workstation"),
        {"type": "txn", "node": "Alice", "label": "paint_bolt", "body": PAINT_BOLT},
        {"type": "txn", "node": "Bob", "label": "paint_tube", "body": PAINT_TUBE},
        _sync("Alice", "Bob"),
        _sync("Bob", "David"),
        _sync("Bob", "Workstation"),
        _sync("Alice", "Workstation"),
        _sync("Sarah", "Workstation"),
        {"type": "checkpoint", "label": "end"},
    ],
}

N1N2N3 = {
    "name": "n1n2n3",
    "description": "N1 -- N2 -- N3 chain where the middle node holds only s2.",
    "mode": "intersection-only",
    "seed": 0,
    "schema": {"s1": {"type": "counter"}, "s2": {"type": "counter"}},
    "nodes": [
        {"id": "N1", "subscriptions": ["s1", "s2"]},
        {"id": "N2", "subscriptions": ["s2"]},
        {"id": "N3", "subscriptions": ["s1", "s2"]},
    ],
    "footprints": [{"name": "both", "writes": ["s1", "s2"]}],
    "events": [
        _conn("N1", "N2"),
        _conn("N2", "N3"),
        {"type": "txn", "node": "N1", "label": "both", "body": [_add("s1.x", 1), _add("s2.y", 1)]},
        _sync("N1", "N2"),
        _sync("N2", "N3"),
        {"type": "checkpoint", "label": "end"},
    ],
}

FIG1_ISLANDS = {
    "name": "fig1-islands",
    "description": "Two connected groups with overlapping interests and no path between them.",
    "mode": "intersection-only",
    "seed": 0,
    "schema": {
        "circle": {"type": "counter"},
        "square": {"type": "counter"},
        "triangle": {"type": "counter"},
    },
    "nodes": [
        {"id": "A1", "subscriptions": ["circle", "square"]},
        {"id": "A2", "subscriptions": ["square"]},
        {"id": "A3", "subscriptions": ["circle"]},
        {"id": "B1", "subscriptions": ["circle", "triangle"]},
        {"id": "B2", "subscriptions": ["triangle"]},
        {"id": "Solo", "subscriptions": ["square"]},
    ],
    "events": [
        _conn("A1", "A2"),
        _conn("A1", "A3"),
        _conn("B1", "B2"),
        {"type": "txn", "node": "A3", "label": "a", "body": [_add("circle.count", 1)]},
        {"type": "txn", "node": "B1", "label": "b", "body": [_add("circle.count", 5), _add("triangle.count", 1)]},
        {"type": "sync_random", "count": 6},
        {"type": "checkpoint", "label": "islands"},
    ],
}

BUILTINS = {
    "aircraft": (AIRCRAFT, "maintenance crew walkthrough; expect inventory.paint.white = 17"),
    "n1n2n3": (N1N2N3, "narrow middle node; intersection-only mode breaks atomicity at N3"),
    "fig1-islands": (FIG1_ISLANDS, "two peer groups forming data islands, one isolated node"),
}


def builtin_document(name: str) -> dict:
    try:
        return copy.deepcopy(BUILTINS[name][0])
    except KeyError:
        raise KeyError(f"no built-in scenario named {name!r}") from None


def builtin_text(name: str) -> str:
    return json.dumps(builtin_document(name), indent=2)


def load_builtin(name: str, *, seed: int | None = None, mode: str | None = None) -> Scenario:
    doc = builtin_document(name)
    if seed is not None:
        doc["seed"] = seed
    if mode is not None:
        doc["mode"] = mode
    return scenario_from_dict(doc)


def listing() -> list[dict]:
    return [
        {"name": name, "description": doc["description"], "note": note}
        for name, (doc, note) in BUILTINS.items()
    ]
