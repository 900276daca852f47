import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from interestsync.families import random_small
from interestsync.model import InterestSet, OpId, Region
from interestsync.scenarios import builtin_document, load_builtin
from interestsync.sim import Footprint, TopologySnapshot, run_scenario, scenario_from_dict
from interestsync.trace import MalformedTrace, Trace
from interestsync.verify import (
    FULL,
    DisjointSession,
    Kind,
    Scoped,
    build_execution,
    check_atomicity,
    check_cc,
    check_convergence,
    check_hierarchy,
    check_interest_config,
    check_intersection_atomicity,
    check_intersection_cc,
    expected_guarantees,
    run_checks,
)

from oracle import analyse, happened_before


def checker_sets(t):
    e = build_execution(t)
    interests = t.interests()
    found = {
        "IntersectionAtomicity": check_intersection_atomicity(e, interests),
        "IntersectionCC": check_intersection_cc(e, interests),
        "Atomicity": check_atomicity(e),
        "CC": check_cc(e),
    }
    return {k: {v.key() for v in vs} for k, vs in found.items()}


def traced(doc):
    return run_scenario(scenario_from_dict(doc))


# -- agreement with the brute-force oracle -----------------------------------


@pytest.mark.parametrize("mode", ["intersection-only", "metadata-everywhere"])
def test_checkers_match_oracle(mode):
    nonempty = 0
    for seed in range(60):
        t = traced(random_small(seed, mode))
        text = t.to_jsonl()
        ours, ref = checker_sets(t), analyse(text)
        assert ours == ref, seed
        nonempty += any(ours.values())
    if mode == "intersection-only":
        assert nonempty > 0


def test_happened_before_matches_oracle():
    for seed in range(30):
        t = traced(random_small(seed))
        e = build_execution(t)
        ids = list(e.ops)
        ours = {(str(a), str(b)) for a in ids for b in ids if e.hb(a, b)}
        assert ours == happened_before(t.to_jsonl())


def test_classic_violations_imply_intersection_ones_are_a_subset():
    # every intersection violation is also a classic one with the same witnesses
    for seed in range(60):
        sets = checker_sets(traced(random_small(seed)))
        strip = lambda s: {k[1:] for k in s}
        assert strip(sets["IntersectionAtomicity"]) <= strip(sets["Atomicity"])
        assert strip(sets["IntersectionCC"]) <= strip(sets["CC"])


def test_full_interest_collapses_to_classic():
    for seed in range(40):
        doc = random_small(seed)
        for n in doc["nodes"]:
            n["subscriptions"] = ["*"]
        doc["events"] = [ev for ev in doc["events"] if ev["type"] != "change_interest"]
        sets = checker_sets(traced(doc))
        strip = lambda s: {k[1:] for k in s}
        assert strip(sets["IntersectionAtomicity"]) == strip(sets["Atomicity"])
        assert strip(sets["IntersectionCC"]) == strip(sets["CC"])


def test_n1n2n3_intersection_only_witnesses():
    t = run_scenario(load_builtin("n1n2n3", mode="intersection-only"))
    found = run_checks(t)
    ia, icc = found["intersection-atomicity"], found["intersection-cc"]
    assert [v.node for v in ia] == ["N3"] and [v.node for v in icc] == ["N3"]
    assert ia[0].kind is Kind.INTERSECTION_ATOMICITY
    assert ia[0].witnesses == ("N1/1", "N1:2", "N1:1")
    assert icc[0].witnesses == ("N1:1", "N1:2")
    assert "N1:1 -> N1:2" in icc[0].explanation
    assert found["convergence"] == []


def test_n1n2n3_metadata_everywhere_is_clean():
    t = run_scenario(load_builtin("n1n2n3", mode="metadata-everywhere"))
    assert not any(run_checks(t).values())


def test_malformed_execution_rejected():
    t = run_scenario(load_builtin("n1n2n3"))
    lines = t.to_jsonl().splitlines()
    commits = [i for i, line in enumerate(lines) if '"LocalCommit"' in line]
    doubled = lines[: commits[0] + 1] + [lines[commits[0]]] + lines[commits[0] + 1:]
    with pytest.raises(MalformedTrace):
        build_execution(Trace.from_jsonl("\n".join(doubled)))


def test_convergence_holds_on_aircraft():
    t = run_scenario(load_builtin("aircraft"))
    assert check_convergence(t, t.interests()) == []


# -- guarantees per relation -------------------------------------------------


def test_expected_guarantees_by_relation():
    p, pq, qr = InterestSet.of("p"), InterestSet.of("p", "q"), InterestSet.of("q", "r")
    assert set(vars(expected_guarantees(pq, pq)).values()) == {FULL}
    assert set(vars(expected_guarantees(pq, p)).values()) == {FULL}
    sub = expected_guarantees(p, pq)
    assert sub.ia_local_txn is FULL and sub.icc_single is FULL and sub.convergence is FULL
    assert sub.ia_remote_txn == sub.icc_multi == Scoped(Region.of("p"))
    over = expected_guarantees(pq, qr)
    assert over.ia_local_txn == over.ia_remote_txn == over.icc_multi == Scoped(Region.of("q"))
    assert over.icc_single is FULL and over.convergence is FULL
    with pytest.raises(DisjointSession):
        expected_guarantees(p, InterestSet.of("r"))


# -- hierarchy ---------------------------------------------------------------


def star(center, leaves):
    return TopologySnapshot.of([center, *leaves], [(center, leaf) for leaf in leaves])


def test_hierarchy_examples():
    i = {"A": InterestSet.of("*"), "B": InterestSet.of("p"), "C": InterestSet.of("q")}
    assert check_hierarchy(star("A", ["B", "C"]), i) == []
    bad = check_hierarchy(star("B", ["A", "C"]), i)
    assert {v.witnesses for v in bad} == {("B", "C")}
    cyc = check_hierarchy(TopologySnapshot.of(["A", "B", "C"], [("A", "B"), ("B", "C"), ("A", "C")]), i)
    assert len(cyc) == 1 and "cycle" in cyc[0].explanation
    # a narrow node between two wider ones
    j = {"A": InterestSet.of("p", "q"), "B": InterestSet.of("p"), "C": InterestSet.of("p", "q")}
    assert check_hierarchy(TopologySnapshot.of(["A", "B", "C"], [("A", "B"), ("B", "C")]), j)


def test_n1n2n3_topology_violates_hierarchy():
    s = load_builtin("n1n2n3")
    from interestsync.sim import scenario_topology

    topo, interests = scenario_topology(s)
    assert check_hierarchy(topo, interests)


def _rooted_ok(g, region):
    # brute force: some choice of root per tree makes every child a subset of its parent
    for comp in nx.connected_components(g):
        sub = g.subgraph(comp)
        if not any(
            all(region[c].issubset(region[p]) for p, c in nx.bfs_edges(sub, root)) for root in comp
        ):
            return False
    return True


def test_hierarchy_agrees_with_root_search():
    pool = ["*", "p", "q", "p.x", "p.y", "q.x"]
    for seed in range(400):
        rng = random.Random(seed)
        n = rng.randint(1, 7)
        names = [f"n{i}" for i in range(n)]
        tree = nx.random_labeled_tree(n, seed=seed) if n > 1 and hasattr(nx, "random_labeled_tree") else (
            nx.random_tree(n, seed=seed) if n > 1 else nx.empty_graph(1))
        edges = [(names[a], names[b]) for a, b in tree.edges]
        interests = {x: InterestSet.of(*rng.sample(pool, rng.randint(1, 2))) for x in names}
        topo = TopologySnapshot.of(names, edges)
        region = {x: interests[x].effective for x in names}
        assert (check_hierarchy(topo, interests) == []) == _rooted_ok(topo.graph(), region), seed


# -- interest configuration --------------------------------------------------


def fp(name, writes, deps=()):
    return Footprint(name, Region.of(*writes), Region.of(*deps) if deps else Region.empty())


def test_interest_config_examples():
    footprints = [fp("T1", ["s1"], ["s2"]), fp("T2", ["s2"]), fp("T3", ["s3"], ["s4"])]
    ok = {"N1": InterestSet.of("s1", "s2"), "N2": InterestSet.of("s3", "s4"), "N3": InterestSet.of("*")}
    assert check_interest_config(footprints, ok) == []
    bad = dict(ok, N1=InterestSet.of("s1"))
    found = check_interest_config(footprints, bad)
    assert [(v.node, v.witnesses) for v in found] == [("N1", ("T1", "s2"))]
    assert check_interest_config([], bad) == []


@settings(max_examples=100)
@given(st.lists(st.sampled_from(["a", "b", "c", "a.x"]), min_size=1, max_size=3))
def test_interest_config_full_interest_always_ok(writes):
    assert check_interest_config([fp("T", writes)], {"N": InterestSet.of("*")}) == []
