import pytest
from hypothesis import given, strategies as st

from interestsync.model import (
    InterestSet,
    ObjectPath,
    OpId,
    Operation,
    PathError,
    Region,
    Relation,
    Transaction,
    TransactionId,
    VersionVector,
    classify_session,
    op_matches,
    region_intersection,
    region_relation,
    txn_project,
    vv_covers,
    vv_increment,
    vv_leq,
    vv_merge,
)
from interestsync.crdt import CounterAdd

SEGS = st.sampled_from(["a", "b", "c", "x", "y"])
PATHS = st.lists(SEGS, min_size=1, max_size=3).map(lambda s: ObjectPath(tuple(s)))
REGIONS = st.one_of(
    st.just(Region.everything()),
    st.frozensets(PATHS, max_size=4).map(Region),
)
VECTORS = st.dictionaries(st.sampled_from(["A", "B", "C"]), st.integers(0, 5)).map(VersionVector.from_dict)


def member(region: Region, path: ObjectPath) -> bool:
    return region.contains(path)


# -- paths and regions -------------------------------------------------------


def test_path_text_round_trip():
    p = ObjectPath.parse("inventory.paint.white")
    assert p.segments == ("inventory", "paint", "white")
    assert str(p) == "inventory.paint.white"
    with pytest.raises(PathError):
        ObjectPath.parse("inventory..white")


def test_prefix_matches_itself_and_extensions():
    r = Region.of("landing_gear")
    assert r.contains("landing_gear")
    assert r.contains("landing_gear.bolt.painted_on")
    assert not r.contains("landing_gearbox")
    assert not r.contains("fuselage")


def test_region_normalizes_redundant_prefixes():
    assert Region.of("a", "a.b") == Region.of("a")
    assert Region.of("a.b", "a.c").to_strings() == ["a.b", "a.c"]


def test_universal_token():
    assert Region.of("*") == Region.everything()
    assert Region.everything().to_strings() == ["*"]


@given(REGIONS, REGIONS, PATHS)
def test_intersection_is_membership_and(a, b, path):
    assert member(region_intersection(a, b), path) == (member(a, path) and member(b, path))


@given(REGIONS, REGIONS, PATHS)
def test_union_is_membership_or(a, b, path):
    assert member(a.union(b), path) == (member(a, path) or member(b, path))


@given(REGIONS, REGIONS)
def test_intersection_commutes(a, b):
    assert region_intersection(a, b) == region_intersection(b, a)


@given(REGIONS, REGIONS)
def test_subset_agrees_with_intersection(a, b):
    assert a.issubset(b) == (region_intersection(a, b) == a)


@given(REGIONS, REGIONS)
def test_relation_mirrors(a, b):
    assert region_relation(b, a) == region_relation(a, b).mirrored()


def test_relations_from_examples():
    assert region_relation(Region.of("s1"), Region.of("s1", "s2")) is Relation.A_SUBSET_B
    assert region_relation(Region.of("s1", "s2"), Region.of("s2")) is Relation.A_SUPERSET_B
    assert region_relation(Region.of("s1", "s2"), Region.of("s2", "s1")) is Relation.EQUAL
    assert region_relation(Region.of("s1", "s2"), Region.of("s2", "s3")) is Relation.OVERLAP
    assert region_relation(Region.of("s1"), Region.of("s3")) is Relation.DISJOINT
    assert region_relation(Region.empty(), Region.empty()) is Relation.DISJOINT


# -- interest sets -----------------------------------------------------------


def test_effective_interest_is_subscriptions_narrowed_by_permissions():
    s = InterestSet.of("inventory", "checklist", permissions=["checklist.landing_gear"])
    assert s.effective == Region.of("checklist.landing_gear")
    assert s.contains("checklist.landing_gear.bolt")
    assert not s.contains("inventory.paint")


def test_interest_json_round_trip():
    s = InterestSet.of("a.b", "c", permissions=["a"])
    assert InterestSet.from_json(s.to_json()) == s
    assert InterestSet.from_json({"subscriptions": ["x"]}).permissions == Region.everything()


def test_classify_session_uses_effective_regions():
    alice = InterestSet.of("landing_gear", "inventory.paint")
    bob = InterestSet.of("landing_gear", "inventory")
    assert classify_session(alice, bob) is Relation.A_SUBSET_B
    assert classify_session(InterestSet.of("a", permissions=["b"]), InterestSet.of("a")) is Relation.DISJOINT


# -- ids and version vectors -------------------------------------------------


def test_id_text_forms():
    assert str(OpId("Bob", 3)) == "Bob:3"
    assert OpId.parse("Bob-2:14") == OpId("Bob-2", 14)
    assert TransactionId.parse(str(TransactionId("N1", 7))) == TransactionId("N1", 7)


def test_vector_is_canonical():
    assert VersionVector.from_dict({"A": 0, "B": 2}) == VersionVector.from_dict({"B": 2})
    assert VersionVector.from_dict({"B": 1, "A": 2}).entries == (("A", 2), ("B", 1))
    with pytest.raises(ValueError):
        VersionVector.from_dict({"A": -1})


@given(VECTORS, VECTORS, VECTORS)
def test_vector_merge_is_a_join(a, b, c):
    assert vv_merge(a, a) == a
    assert vv_merge(a, b) == vv_merge(b, a)
    assert vv_merge(vv_merge(a, b), c) == vv_merge(a, vv_merge(b, c))
    j = vv_merge(a, b)
    assert vv_leq(a, j) and vv_leq(b, j)
    if vv_leq(a, c) and vv_leq(b, c):
        assert vv_leq(j, c)


@given(VECTORS, st.sampled_from(["A", "B", "C"]))
def test_increment_covers_next_id(v, node):
    nxt = OpId(node, v.get(node) + 1)
    assert not vv_covers(v, nxt)
    assert vv_covers(vv_increment(v, node), nxt)
    assert vv_leq(v, vv_increment(v, node))


# -- operations and projection -----------------------------------------------


def _txn(paths, origin="N1"):
    tid = TransactionId(origin, 1)
    ops, known = [], VersionVector()
    for i, p in enumerate(paths, start=1):
        ops.append(Operation(OpId(origin, i), tid, ObjectPath.parse(p), CounterAdd(1), known))
        known = known.with_entry(origin, i)
    return Transaction(tid, tuple(ops), origin)


def test_operation_deps_must_cover_predecessor():
    with pytest.raises(ValueError):
        Operation(OpId("A", 2), TransactionId("A", 1), ObjectPath.parse("x"), CounterAdd(1), VersionVector())


def test_projection_keeps_transaction_identity():
    t = _txn(["s1.x", "s2.y", "s2.z"])
    proj = txn_project(t, InterestSet.of("s2"))
    assert [str(op.id) for op in proj] == ["N1:2", "N1:3"]
    assert {op.txn for op in proj} == {t.id}
    assert txn_project(t, InterestSet.of("s3")) == ()
    assert all(op_matches(op, InterestSet.of("s2")) for op in proj)


@given(st.lists(st.sampled_from(["a.x", "a.y", "b.x", "c"]), min_size=1, max_size=6), REGIONS, REGIONS)
def test_projection_is_idempotent_and_composes(paths, r1, r2):
    t = _txn(paths)
    i1, i2 = InterestSet(r1), InterestSet(r2)
    once = txn_project(t, i1)
    assert txn_project(once, i1) == once
    assert txn_project(once, i2) == txn_project(t, InterestSet(region_intersection(r1, r2)))
