import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semcache.plan import (AccessPattern, PlanError, PlanOperator, QueryPlanTree, assign_levels,
                           compute_effective_levels, compute_raw_levels, random_access_summary)


def op(id, kind="other", children=(), **kw):
    node = {"id": id, "kind": kind, "children": list(children)}
    node.update(kw)
    return node


def tree(root, qid="q"):
    return QueryPlanTree.from_dict(root, query_id=qid)


def test_example_plan_levels(example_plan):
    la = compute_raw_levels(example_plan)
    assert la.raw_level["join_top"] == 5
    assert la.raw_level["seq_b"] == 0 and la.raw_level["idx_a0"] == 0
    assert max(la.raw_level.values()) + 1 == 6

    eff = compute_effective_levels(example_plan, la)
    assert eff.raw_level["idx_c"] == 4
    assert eff.effective_level["idx_c"] == 0
    assert eff.effective_level["join_top"] == 1
    # inside the hash subtree nothing moves
    for oid in ("hash", "join_3", "join_2", "join_1", "idx_a1", "idx_b"):
        assert eff.effective_level[oid] == eff.raw_level[oid]


def test_single_operator_is_level_zero():
    la = compute_raw_levels(tree(op("only", "seq_scan", object="t")))
    assert la.raw_level == {"only": 0}


def test_shallow_leaf_gets_height_minus_depth():
    # branch depths 3 and 1; hand-evaluated: height 3, shallow leaf 3 - 1 = 2
    t = tree(op("r", "join", [op("a", "join", [op("b", "join", [op("c")])]), op("d")]))
    la = compute_raw_levels(t)
    assert la.raw_level == {"r": 3, "a": 2, "b": 1, "c": 0, "d": 2}


def test_no_blocking_means_effective_equals_raw():
    t = tree(op("r", "join", [op("a", "index_scan", object="x"), op("b", "seq_scan", object="y")]))
    la = assign_levels(t)
    assert la.effective_level == la.raw_level


def test_stacked_blockers_subtract_the_larger_level():
    # chain r(5) - h(hash,4) - j3(3) - s(sort,2) - j1(1) - leaf(0), plus sibling leaf under r
    t = tree(op("r", "join", [
        op("h", "hash", [op("j3", "join", [op("s", "sort", [op("j1", "join", [op("leaf")])])])]),
        op("sib"),
    ]))
    la = assign_levels(t)
    assert la.raw_level == {"r": 5, "h": 4, "j3": 3, "s": 2, "j1": 1, "leaf": 0, "sib": 4}
    assert la.effective_level == {"r": 1, "h": 2, "j3": 1, "s": 2, "j1": 1, "leaf": 0, "sib": 0}


def test_empty_plan_rejected():
    with pytest.raises(PlanError, match="empty plan"):
        compute_raw_levels(QueryPlanTree("q", None))


def test_summary_of_example_plan(example_plan):
    s = random_access_summary(example_plan)
    assert s.per_object_min_level == {
        "t.a": 0, "t.a_idx": 0, "t.b": 2, "t.b_idx": 2, "t.c": 0, "t.c_idx": 0,
    }
    assert (s.l_low, s.l_high) == (0, 2)


def test_summary_single_index_scan():
    s = random_access_summary(tree(op("i", "index_scan", object="t")))
    assert s.per_object_min_level == {"t": 0}
    assert (s.l_low, s.l_high) == (0, 0)


def test_summary_takes_minimum_over_operators():
    # index scans on t at raw levels 1 and 3
    t = tree(op("r", "join", [
        op("i3", "index_scan", object="t"),
        op("j2", "join", [op("j1", "join", [op("i1", "index_scan", object="t"), op("x", "join", [op("l")])])]),
    ]))
    la = assign_levels(t)
    assert la.effective_level["i3"] == 3 and la.effective_level["i1"] == 1
    assert random_access_summary(t).per_object_min_level == {"t": 1}


def test_summary_without_random_operators():
    s = random_access_summary(tree(op("s", "seq_scan", object="t")))
    assert s.per_object_min_level == {} and not s.has_random
    assert (s.l_low, s.l_high) == (0, 0)


def test_node_validation():
    with pytest.raises(PlanError):
        PlanOperator("x", "seq_scan", None, None, AccessPattern.SEQUENTIAL)
    with pytest.raises(PlanError):
        PlanOperator.from_dict(op("h", "hash", blocking=False))
    with pytest.raises(PlanError):
        PlanOperator.from_dict(op("j", "join", pattern="random", object="t"))
    with pytest.raises(PlanError):
        tree(op("r", "join", [op("a"), op("a")]))
    assert PlanOperator.from_dict(op("s", "sort")).blocking
    assert PlanOperator.from_dict(op("w", "window_agg")).kind.value == "other"


def test_json_round_trip(example_plan):
    again = QueryPlanTree.from_dict(example_plan.to_dict())
    assert again.to_dict() == example_plan.to_dict()


KINDS = ["seq_scan", "index_scan", "hash", "sort", "aggregate", "join", "other"]


@st.composite
def random_trees(draw):
    n = draw(st.integers(1, 50))
    parents = [None] + [draw(st.integers(0, i - 1)) for i in range(1, n)]
    kinds = draw(st.lists(st.sampled_from(KINDS), min_size=n, max_size=n))
    objs = draw(st.lists(st.sampled_from(["t1", "t2", "t3", "t4"]), min_size=n, max_size=n))
    nodes = []
    for i in range(n):
        node = {"id": f"n{i}", "kind": kinds[i], "children": []}
        if kinds[i] in ("seq_scan", "index_scan"):
            node["object"] = objs[i]
        nodes.append(node)
    for i in range(1, n):
        nodes[parents[i]]["children"].append(nodes[i])
    return QueryPlanTree.from_dict(nodes[0])


@settings(max_examples=200, deadline=None)
@given(random_trees())
def test_level_properties(t):
    la = assign_levels(t)
    ops = t.operators()
    assert min(la.raw_level.values()) == 0
    assert la.raw_level[t.root.id] == max(la.raw_level.values())
    for o in ops:
        assert 0 <= la.effective_level[o.id] <= la.raw_level[o.id]
    s = random_access_summary(t, la)
    randoms = [la.effective_level[o.id] for o in ops if o.access_pattern is AccessPattern.RANDOM]
    if randoms:
        assert s.l_low == min(s.per_object_min_level.values())
        assert s.l_high == max(randoms)
        assert all(s.l_low <= v <= s.l_high for v in s.per_object_min_level.values())
    else:
        assert s.per_object_min_level == {}


@settings(max_examples=100, deadline=None)
@given(random_trees())
def test_releveling_is_idempotent_without_blockers(t):
    for o in t.operators():
        if o.kind.value not in ("hash", "sort"):
            o.blocking = False
    if any(o.blocking for o in t.operators()):
        return
    la = assign_levels(t)
    again = compute_effective_levels(t, la)
    assert again.effective_level == la.effective_level == la.raw_level
