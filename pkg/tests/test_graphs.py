import pytest
from hypothesis import given, strategies as st

from paneldbn import (
    FoldedEdge,
    FoldedGraph,
    NodeRef,
    StaticDag,
    TwoSliceGraph,
    ValidationError,
    fold,
    folded_to_dot,
    unfold,
)

CONDITIONS = ("A", "B", "C", "D")


def g(*arcs):
    return TwoSliceGraph(conditions=CONDITIONS, arcs=frozenset(arcs))


def kinds(folded):
    return sorted((e.source, e.target, e.kind) for e in folded.edges)


def test_fold_feedback_pair():
    assert kinds(fold(g(("A", "B"), ("B", "A")))) == [("A", "B", "feedback")]


def test_fold_self_loop():
    assert kinds(fold(g(("A", "A")))) == [("A", "A", "self_loop")]


def test_fold_one_way():
    assert kinds(fold(g(("A", "B")))) == [("A", "B", "one_way")]


def test_unfold_inverse_examples():
    folded = FoldedGraph(
        conditions=CONDITIONS,
        edges=frozenset(
            [FoldedEdge("A", "B", "feedback"), FoldedEdge("C", "C", "self_loop")]
        ),
    )
    back = unfold(folded)
    assert back.arcs == frozenset({("A", "B"), ("B", "A"), ("C", "C")})
    assert unfold(FoldedGraph(conditions=CONDITIONS)).arcs == frozenset()


arc_sets = st.sets(
    st.tuples(st.sampled_from(CONDITIONS), st.sampled_from(CONDITIONS)), max_size=16
)


@given(arc_sets)
def test_fold_unfold_roundtrip(arcs):
    graph = TwoSliceGraph(conditions=CONDITIONS, arcs=frozenset(arcs))
    assert unfold(fold(graph)) == graph
    assert fold(unfold(fold(graph))) == fold(graph)


def test_two_slice_graph_rejects_unknown_condition():
    with pytest.raises(ValidationError):
        TwoSliceGraph(conditions=("A",), arcs=frozenset({("A", "Z")}))


def test_node_ref_slice_validated():
    with pytest.raises(ValidationError):
        NodeRef("A", 2)


def test_parents_in_canonical_order():
    graph = g(("D", "B"), ("A", "B"), ("C", "B"))
    assert graph.parents_of("B") == ("A", "C", "D")


def test_graph_json_roundtrip():
    graph = g(("A", "B"), ("B", "B"))
    data = graph.to_dict()
    assert data["arcs"][0]["from"]["slice"] == 0
    assert data["arcs"][0]["to"]["slice"] == 1
    assert TwoSliceGraph.from_dict(data) == graph


def test_graph_json_rejects_backward_arcs():
    bad = {
        "conditions": ["A", "B"],
        "arcs": [{"from": {"condition": "A", "slice": 1}, "to": {"condition": "B", "slice": 0}}],
    }
    with pytest.raises(ValidationError):
        TwoSliceGraph.from_dict(bad)


def test_static_dag_rejects_cycles_and_self_arcs():
    with pytest.raises(ValidationError):
        StaticDag(conditions=CONDITIONS, arcs=frozenset({("A", "B"), ("B", "A")}))
    with pytest.raises(ValidationError):
        StaticDag(conditions=CONDITIONS, arcs=frozenset({("A", "A")}))


def test_dot_export_styles():
    graph = g(("A", "B"), ("B", "A"), ("C", "D"), ("A", "A"))
    dot = folded_to_dot(fold(graph))
    assert dot.startswith("digraph")
    assert '"A" -> "B" [dir=both];' in dot
    assert '"C" -> "D" [penwidth=2.5];' in dot
    assert '"A" -> "A";' in dot
    for c in CONDITIONS:
        assert f'"{c}";' in dot


def test_dot_export_empty_graph_lists_isolated_nodes():
    conditions = tuple(f"N{i:02d}" for i in range(12))
    dot = folded_to_dot(fold(TwoSliceGraph(conditions=conditions)))
    assert all(f'"{c}";' in dot for c in conditions)
    assert "->" not in dot
