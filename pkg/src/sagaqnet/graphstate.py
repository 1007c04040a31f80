"""Graph-state calculus on labelled qubit references.

A graph state shared across a network is tracked purely by its graph: each
vertex is a qubit held in some node's memory slot, each edge an entanglement
correlation. The functions here are the structural rules used by the
multipartite tasks (vertex cutting, local complementation, merging, fission).
Outcome-dependent Pauli byproducts are not tracked; they do not change the
graph for these operations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple


class GraphError(ValueError):
    """Raised when a graph operation's precondition is violated."""


def node_key(node: str) -> tuple:
    """Sort key for node identifiers: numeric ids numerically, then the rest."""
    if node.isdigit():
        return (0, int(node), node)
    return (1, 0, node)


class VertexRef(NamedTuple):
    node: str
    slot: int

    def __str__(self) -> str:
        return f"{self.node}:{self.slot}"

    def sort_key(self) -> tuple:
        return (node_key(self.node), self.slot)

    @classmethod
    def parse(cls, text: str) -> "VertexRef":
        node, _, slot = text.rpartition(":")
        if not node:
            raise ValueError(f"bad vertex reference {text!r}")
        return cls(node, int(slot))


Edge = frozenset  # frozenset of exactly two VertexRefs


def edge(a: VertexRef, b: VertexRef) -> frozenset:
    return frozenset((a, b))


@dataclass(frozen=True)
class GraphState:
    vertices: frozenset = field(default_factory=frozenset)
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        for v in self.vertices:
            if not isinstance(v, VertexRef):
                raise GraphError(f"vertex {v!r} is not a VertexRef")
            if v.slot < 0:
                raise GraphError(f"negative slot in {v}")
        for e in self.edges:
            if len(e) != 2:
                raise GraphError(f"edge {set(e)} is a self-loop or malformed")
            if not e <= self.vertices:
                raise GraphError(f"edge {set(e)} has an endpoint outside the graph")

    @classmethod
    def from_edges(
        cls, vertices: Iterable[VertexRef], edges: Iterable[tuple[VertexRef, VertexRef]] = ()
    ) -> "GraphState":
        return cls(frozenset(vertices), frozenset(edge(a, b) for a, b in edges))

    def neighbors(self, v: VertexRef) -> frozenset:
        out = set()
        for e in self.edges:
            if v in e:
                (w,) = e - {v}
                out.add(w)
        return frozenset(out)

    def degree(self, v: VertexRef) -> int:
        return sum(1 for e in self.edges if v in e)

    def nodes(self) -> set[str]:
        return {v.node for v in self.vertices}

    def sorted_vertices(self) -> list[VertexRef]:
        return sorted(self.vertices, key=VertexRef.sort_key)

    def sorted_edges(self) -> list[tuple[VertexRef, VertexRef]]:
        pairs = [tuple(sorted(e, key=VertexRef.sort_key)) for e in self.edges]
        return sorted(pairs, key=lambda p: (p[0].sort_key(), p[1].sort_key()))

    def components(self) -> list[frozenset]:
        """Connected components, ordered by their smallest vertex."""
        adj: dict[VertexRef, set] = {v: set() for v in self.vertices}
        for e in self.edges:
            a, b = tuple(e)
            adj[a].add(b)
            adj[b].add(a)
        seen: set = set()
        comps = []
        for v in self.sorted_vertices():
            if v in seen:
                continue
            stack, comp = [v], set()
            while stack:
                u = stack.pop()
                if u in comp:
                    continue
                comp.add(u)
                stack.extend(adj[u] - comp)
            seen |= comp
            comps.append(frozenset(comp))
        return comps

    def induced(self, vertices: Iterable[VertexRef]) -> "GraphState":
        vs = frozenset(vertices)
        return GraphState(vs, frozenset(e for e in self.edges if e <= vs))

    def __str__(self) -> str:
        vs = ",".join(str(v) for v in self.sorted_vertices())
        es = ",".join(f"{a}-{b}" for a, b in self.sorted_edges())
        return f"V={{{vs}}} E={{{es}}}"


def _require(g: GraphState, v: VertexRef) -> None:
    if v not in g.vertices:
        raise GraphError(f"vertex {v} not in graph")


def bell_graph(a: VertexRef, b: VertexRef) -> GraphState:
    if a == b:
        raise GraphError("Bell pair endpoints must differ")
    return GraphState(frozenset((a, b)), frozenset((edge(a, b),)))


def local_complement(g: GraphState, v: VertexRef) -> GraphState:
    """Toggle every edge inside the neighbourhood of ``v``."""
    _require(g, v)
    nbrs = sorted(g.neighbors(v), key=VertexRef.sort_key)
    edges = set(g.edges)
    for i, a in enumerate(nbrs):
        for b in nbrs[i + 1:]:
            edges ^= {edge(a, b)}
    return GraphState(g.vertices, frozenset(edges))


def measure_z(g: GraphState, v: VertexRef) -> GraphState:
    """Pauli-Z measurement: delete ``v`` and its incident edges."""
    _require(g, v)
    return GraphState(g.vertices - {v}, frozenset(e for e in g.edges if v not in e))


def merge_vertices(
    g1: GraphState, v1: VertexRef, g2: GraphState, v2: VertexRef
) -> GraphState:
    """Fuse ``v1`` of ``g1`` and ``v2`` of ``g2`` into one vertex labelled ``v1``.

    The fused vertex is adjacent to N(v1) | N(v2).
    """
    if g1.vertices & g2.vertices:
        raise GraphError("graphs to merge must have disjoint vertex sets")
    _require(g1, v1)
    _require(g2, v2)
    relabel = {v2: v1}
    edges = set(g1.edges)
    for e in g2.edges:
        a, b = (relabel.get(x, x) for x in e)
        edges.add(edge(a, b))
    return GraphState((g1.vertices | g2.vertices) - {v2}, frozenset(edges))


def free_slot(node: str, used: Iterable[VertexRef]) -> int:
    taken = {v.slot for v in used if v.node == node}
    slot = 0
    while slot in taken:
        slot += 1
    return slot


def fission(
    g: GraphState,
    v: VertexRef,
    keep: Iterable[VertexRef],
    used: Iterable[VertexRef] = (),
) -> tuple[GraphState, GraphState]:
    """Split ``g`` at ``v``.

    ``v`` keeps its edges to ``keep``; a fresh vertex on the same node (lowest
    slot free in ``g`` and ``used``) takes the remaining neighbours. Returns
    ``(first, second)`` where ``second`` is the component holding the fresh
    vertex and ``first`` is everything else (so no vertex is dropped).
    """
    _require(g, v)
    keep = frozenset(keep)
    nbrs = g.neighbors(v)
    if not keep <= nbrs:
        raise GraphError(f"{sorted(map(str, keep - nbrs))} not in the neighbourhood of {v}")
    fresh = VertexRef(v.node, free_slot(v.node, list(g.vertices) + list(used)))
    edges = {e for e in g.edges if v not in e}
    edges |= {edge(v, w) for w in keep}
    edges |= {edge(fresh, w) for w in nbrs - keep}
    split = GraphState(g.vertices | {fresh}, frozenset(edges))
    comp = next(c for c in split.components() if fresh in c)
    if v in comp:
        raise GraphError(f"fission at {v} does not disconnect the graph")
    return split.induced(split.vertices - comp), split.induced(comp)
