"""Acceptance criteria 1 to 8, one test each, at their stated tolerances."""

import itertools
import random

from interestsync.crdt import LwwRegister, PnCounter, Timestamp, merge_state, state_leq, store_digest
from interestsync.families import partition_heal, random_small, relation_outcome, relation_scenario
from interestsync.model import Relation, region_intersection
from interestsync.report import build_report, report_json
from interestsync.scenarios import builtin_document, builtin_text, load_builtin
from interestsync.sim import detect_data_islands, load_scenario, run_scenario, scenario_from_dict, scenario_topology, simulate
from interestsync.verify import (
    build_execution,
    check_atomicity,
    check_cc,
    check_convergence,
    check_intersection_atomicity,
    check_intersection_cc,
    replay_stores,
    run_checks,
)

from oracle import analyse


def test_1_aircraft_worked_example(criterion):
    s = load_builtin("aircraft")
    sim = simulate(s)
    covering = [n for n, node in sim.nodes.items() if node.interest.effective.contains("inventory.paint.white")]
    values = {n: sim.nodes[n].read("inventory.paint.white") for n in covering}
    david = sim.nodes["David"]
    checklist = sorted(str(op.target) for op in david.log.values())
    ok = (
        sorted(covering) == ["Alice", "Bob", "Sarah", "Workstation"]
        and set(values.values()) == {17}
        and len(checklist) == 3
        and all(p.startswith("checklist.") for p in checklist)
        and len(david.store.objects) == 3
    )
    assert criterion(1, ok, f"paint.white={values}, David holds {checklist}"), values


def test_2_guarantees_per_relation(criterion):
    seeds = 100
    summary, ok = [], True
    for relation in (Relation.EQUAL, Relation.A_SUBSET_B, Relation.A_SUPERSET_B, Relation.OVERLAP):
        inside = outside = classic = 0
        for seed in range(seeds):
            out = relation_outcome(run_scenario(scenario_from_dict(relation_scenario(relation, seed))))
            inside += sum(out.inside.values())
            outside += sum(out.outside.values())
            classic += out.classic_atomicity_remote
        ok &= inside == 0
        if relation is Relation.A_SUBSET_B:
            ok &= classic >= 1
        summary.append(f"{relation.value}: in-scope={inside} out-of-scope={outside} classic-remote={classic}")
    assert criterion(2, ok, f"{seeds} seeds each; " + "; ".join(summary)), summary


def test_3_n1n2n3_counterexample(criterion):
    def found(doc):
        return run_checks(run_scenario(scenario_from_dict(doc)))

    doc = builtin_document("n1n2n3")
    io = found(dict(doc, mode="intersection-only"))
    me = found(dict(doc, mode="metadata-everywhere"))
    widened = dict(doc, mode="intersection-only", nodes=[
        dict(n, subscriptions=["s1", "s2"]) if n["id"] == "N2" else n for n in doc["nodes"]
    ])
    wide = found(widened)
    at_n3 = [v for v in io["intersection-atomicity"] if v.node == "N3"]
    total = lambda r: sum(len(v) for v in r.values())
    ok = len(at_n3) >= 1 and total(me) == 0 and total(wide) == 0
    assert criterion(3, ok, f"intersection-only IA at N3={len(at_n3)}, metadata-everywhere={total(me)}, "
                            f"N2 widened={total(wide)}")


def test_4_crdt_merge_laws(criterion):
    cases = 10_000
    rng = random.Random(4)
    origins = "ABCD"

    def counter():
        inc = {o: rng.randint(0, 30) for o in rng.sample(origins, rng.randint(0, 4))}
        dec = {o: rng.randint(0, 30) for o in rng.sample(origins, rng.randint(0, 4))}
        return PnCounter.of(inc, dec, 5)

    def register():
        ts = Timestamp(rng.randint(0, 15), rng.choice(origins))
        return LwwRegister(f"{ts.lamport}@{ts.origin}", ts)

    failures = {}
    for name, gen in (("counter", counter), ("register", register)):
        bad = 0
        for _ in range(cases):
            a, b, c = gen(), gen(), gen()
            j = merge_state(a, b)
            good = (
                merge_state(a, a) == a
                and j == merge_state(b, a)
                and merge_state(j, c) == merge_state(a, merge_state(b, c))
                and state_leq(a, j) and state_leq(b, j)
                and (not (state_leq(a, c) and state_leq(b, c)) or state_leq(j, c))
            )
            bad += not good
        failures[name] = bad
    ok = not any(failures.values())
    assert criterion(4, ok, f"{cases} cases per type, failures {failures}"), failures


def _checker_keys(t):
    e = build_execution(t)
    interests = t.interests()
    found = {
        "IntersectionAtomicity": check_intersection_atomicity(e, interests),
        "IntersectionCC": check_intersection_cc(e, interests),
        "Atomicity": check_atomicity(e),
        "CC": check_cc(e),
    }
    return {k: {v.key() for v in vs} for k, vs in found.items()}


def test_5_oracle_equivalence(criterion):
    runs, mismatches, nonempty, ops = 500, [], 0, 0
    for seed in range(runs):
        mode = "intersection-only" if seed % 2 == 0 else "metadata-everywhere"
        t = run_scenario(scenario_from_dict(random_small(seed, mode)))
        ours = _checker_keys(t)
        if ours != analyse(t.to_jsonl()):
            mismatches.append(seed)
        nonempty += any(ours.values())
        ops = max(ops, sum(len(ev["ops"]) for ev in t.of_type("LocalCommit")))
    ok = not mismatches and ops <= 30
    assert criterion(5, ok, f"{runs} executions, {len(mismatches)} mismatches, "
                            f"{nonempty} with violations, max ops {ops}"), mismatches


def test_6_partition_heal_convergence(criterion):
    runs, violations, unequal, pairs = 100, 0, 0, 0
    for seed in range(runs):
        t = run_scenario(scenario_from_dict(partition_heal(seed)))
        interests = t.interests()
        violations += len(check_convergence(t, interests))
        for ev, stores, _, _ in replay_stores(t):
            if ev["label"] != "healed":
                continue
            for a, b in itertools.combinations(sorted(ev["hashes"]), 2):
                shared = region_intersection(interests[a].effective, interests[b].effective)
                if shared.is_empty():
                    continue
                pairs += 1
                unequal += store_digest(stores[a], shared) != store_digest(stores[b], shared)
    ok = violations == 0 and unequal == 0 and pairs > 0
    assert criterion(6, ok, f"{runs} runs, {violations} convergence violations, "
                            f"{unequal} of {pairs} intersecting pairs with unequal hashes")


def test_7_island_detection(criterion):
    topo, interests = scenario_topology(load_builtin("fig1-islands"))
    report = detect_data_islands(topo, interests)
    found = [(f.component_a, f.component_b) for f in report.findings]
    ok = len(found) == 1 and all(min(len(a), len(b)) >= 2 for a, b in found) and bool(report.singletons)
    assert criterion(7, ok, f"findings {found}, singletons not reported {list(report.singletons)}")


def test_8_determinism(criterion):
    same = []
    for name, seed in itertools.product(("aircraft", "n1n2n3", "fig1-islands"), (0, 11)):
        text = builtin_text(name)
        traces = [run_scenario(load_scenario(text, seed=seed)) for _ in range(2)]
        reports = [report_json(build_report(t)) for t in traces]
        same.append(traces[0].to_jsonl() == traces[1].to_jsonl() and reports[0] == reports[1])
    for seed in range(20):
        doc = random_small(seed)
        a, b = (run_scenario(scenario_from_dict(doc)).to_jsonl() for _ in range(2))
        same.append(a == b)
    ok = all(same)
    assert criterion(8, ok, f"{sum(same)} of {len(same)} (scenario, seed) pairs byte-identical")
