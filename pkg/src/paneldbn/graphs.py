"""Graph types: two-slice DAGs, folded cyclic graphs, static DAGs, exports."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import ValidationError

ONE_WAY = "one_way"
FEEDBACK = "feedback"
SELF_LOOP = "self_loop"
EDGE_KINDS = (ONE_WAY, FEEDBACK, SELF_LOOP)


@dataclass(frozen=True, order=True)
class NodeRef:
    """A condition at time slice 0 (previous week) or 1 (current week)."""

    condition: str
    slice: int

    def __post_init__(self) -> None:
        if self.slice not in (0, 1):
            raise ValidationError(f"slice must be 0 or 1, got {self.slice}")


@dataclass(frozen=True)
class TwoSliceGraph:
    """DAG over two time slices; every arc points from slice 0 to slice 1.

    Arcs are stored as (from_condition, to_condition) pairs; the slices are
    implied by the representation, so an illegal within-slice or backward arc
    cannot even be expressed. Self pairs (x, x) encode autocorrelation.
    """

    conditions: tuple[str, ...]
    arcs: frozenset[tuple[str, str]] = frozenset()

    def __post_init__(self) -> None:
        known = set(self.conditions)
        if len(known) != len(self.conditions):
            raise ValidationError("duplicate conditions")
        for a, b in self.arcs:
            if a not in known or b not in known:
                raise ValidationError(f"arc ({a}, {b}) references unknown condition")

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    def parents_of(self, condition: str) -> tuple[str, ...]:
        """Slice-0 parents of a slice-1 node, in canonical condition order."""
        return tuple(c for c in self.conditions if (c, condition) in self.arcs)

    def self_loops(self) -> frozenset[str]:
        return frozenset(a for a, b in self.arcs if a == b)

    def cross_arcs(self) -> frozenset[tuple[str, str]]:
        return frozenset((a, b) for a, b in self.arcs if a != b)

    def arc_refs(self) -> frozenset[tuple[NodeRef, NodeRef]]:
        return frozenset(
            (NodeRef(a, 0), NodeRef(b, 1)) for a, b in self.arcs
        )

    def to_dict(self) -> dict:
        return {
            "conditions": list(self.conditions),
            "arcs": [
                {
                    "from": {"condition": a, "slice": 0},
                    "to": {"condition": b, "slice": 1},
                }
                for a, b in sorted(self.arcs)
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TwoSliceGraph":
        arcs = set()
        for arc in data.get("arcs", []):
            src, dst = arc["from"], arc["to"]
            if src["slice"] != 0 or dst["slice"] != 1:
                raise ValidationError("arcs must point from slice 0 to slice 1")
            arcs.add((src["condition"], dst["condition"]))
        return cls(conditions=tuple(data["conditions"]), arcs=frozenset(arcs))


@dataclass(frozen=True)
class FoldedEdge:
    """One edge of the folded cyclic graph; feedback edges store source < target."""

    source: str
    target: str
    kind: str


@dataclass(frozen=True)
class FoldedGraph:
    """Cyclic condition graph obtained by collapsing the two slices."""

    conditions: tuple[str, ...]
    edges: frozenset[FoldedEdge] = frozenset()

    def __post_init__(self) -> None:
        known = set(self.conditions)
        for e in self.edges:
            if e.source not in known or e.target not in known:
                raise ValidationError(f"edge {e} references unknown condition")
            if e.kind not in EDGE_KINDS:
                raise ValidationError(f"unknown edge kind {e.kind!r}")
            if e.kind == SELF_LOOP and e.source != e.target:
                raise ValidationError("self_loop edge must have source == target")
            if e.kind == FEEDBACK and not e.source < e.target:
                raise ValidationError("feedback edge must store source < target")
            if e.kind == ONE_WAY and e.source == e.target:
                raise ValidationError("one_way edge cannot be a self loop")

    def feedback_pairs(self) -> frozenset[tuple[str, str]]:
        return frozenset(
            (e.source, e.target) for e in self.edges if e.kind == FEEDBACK
        )

    def to_dict(self) -> dict:
        return {
            "conditions": list(self.conditions),
            "edges": [
                {"from": e.source, "to": e.target, "kind": e.kind}
                for e in sorted(self.edges, key=lambda e: (e.source, e.target, e.kind))
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FoldedGraph":
        edges = frozenset(
            FoldedEdge(e["from"], e["to"], e["kind"]) for e in data.get("edges", [])
        )
        return cls(conditions=tuple(data["conditions"]), edges=edges)


@dataclass(frozen=True)
class StaticDag:
    """Classical single-slice DAG over conditions (no temporal replication)."""

    conditions: tuple[str, ...]
    arcs: frozenset[tuple[str, str]] = frozenset()

    def __post_init__(self) -> None:
        known = set(self.conditions)
        for a, b in self.arcs:
            if a not in known or b not in known:
                raise ValidationError(f"arc ({a}, {b}) references unknown condition")
            if a == b:
                raise ValidationError("static DAG cannot contain self arcs")
        for a, b in self.arcs:
            if has_path(self.arcs, b, a):
                raise ValidationError(f"arcs contain a cycle through ({a}, {b})")

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    def parents_of(self, condition: str) -> tuple[str, ...]:
        return tuple(c for c in self.conditions if (c, condition) in self.arcs)

    def to_dict(self) -> dict:
        return {
            "conditions": list(self.conditions),
            "arcs": [{"from": a, "to": b} for a, b in sorted(self.arcs)],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "StaticDag":
        return cls(
            conditions=tuple(data["conditions"]),
            arcs=frozenset((a["from"], a["to"]) for a in data.get("arcs", [])),
        )


def has_path(arcs: Iterable[tuple[str, str]], start: str, end: str) -> bool:
    """True when a directed path start -> ... -> end exists (length >= 0)."""
    if start == end:
        return True
    children: dict[str, list[str]] = {}
    for a, b in arcs:
        children.setdefault(a, []).append(b)
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for child in children.get(node, ()):
            if child == end:
                return True
            if child not in seen:
                seen.add(child)
                queue.append(child)
    return False


def fold(graph: TwoSliceGraph) -> FoldedGraph:
    """Collapse the two slices into one node per condition.

    A pair of opposite cross arcs becomes a feedback edge, a lone cross arc a
    one-way edge, and an x@0 -> x@1 arc a self loop.
    """
    edges: set[FoldedEdge] = set()
    cross = graph.cross_arcs()
    for a, b in cross:
        if a < b and (b, a) in cross:
            edges.add(FoldedEdge(a, b, FEEDBACK))
        elif (b, a) not in cross:
            edges.add(FoldedEdge(a, b, ONE_WAY))
    for c in graph.self_loops():
        edges.add(FoldedEdge(c, c, SELF_LOOP))
    return FoldedGraph(conditions=graph.conditions, edges=frozenset(edges))


def unfold(folded: FoldedGraph) -> TwoSliceGraph:
    """Inverse of :func:`fold`; ``fold(unfold(f)) == f`` for every valid f."""
    arcs: set[tuple[str, str]] = set()
    for e in folded.edges:
        if e.kind == ONE_WAY:
            arcs.add((e.source, e.target))
        elif e.kind == FEEDBACK:
            arcs.add((e.source, e.target))
            arcs.add((e.target, e.source))
        else:
            arcs.add((e.source, e.source))
    return TwoSliceGraph(conditions=folded.conditions, arcs=frozenset(arcs))


def folded_to_dot(folded: FoldedGraph) -> str:
    """Render a folded graph as DOT.

    Feedback loops are drawn as bidirectional edges, one-way effects with a
    heavier pen width for emphasis, and autocorrelation as node-to-self edges.
    """
    lines = ["digraph conditions {", "  node [shape=ellipse];"]
    for c in folded.conditions:
        lines.append(f'  "{c}";')
    for e in sorted(folded.edges, key=lambda e: (e.source, e.target, e.kind)):
        if e.kind == FEEDBACK:
            lines.append(f'  "{e.source}" -> "{e.target}" [dir=both];')
        elif e.kind == ONE_WAY:
            lines.append(f'  "{e.source}" -> "{e.target}" [penwidth=2.5];')
        else:
            lines.append(f'  "{e.source}" -> "{e.source}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_json(graph: TwoSliceGraph) -> str:
    return json.dumps(graph.to_dict(), indent=2, sort_keys=True)


def graph_from_json(text: str) -> TwoSliceGraph:
    return TwoSliceGraph.from_dict(json.loads(text))
