import pytest
from hypothesis import given, settings

from sagaqnet.graphstate import (
    GraphError,
    GraphState,
    VertexRef,
    bell_graph,
    fission,
    local_complement,
    measure_z,
    merge_vertices,
)
from strategies import graph_and_vertex, graphs

a, b, c, d, v = (VertexRef(n, 0) for n in "abcdv")


def path(*vs):
    return GraphState.from_edges(vs, zip(vs, vs[1:]))


def test_bell_graph_between_nodes():
    g = bell_graph(VertexRef("n1", 0), VertexRef("n2", 0))
    assert g.vertices == {VertexRef("n1", 0), VertexRef("n2", 0)}
    assert g.edges == {frozenset(g.vertices)}


def test_bell_graph_two_slots_on_one_node():
    g = bell_graph(VertexRef("n1", 0), VertexRef("n1", 1))
    assert len(g.vertices) == 2 and len(g.edges) == 1


def test_bell_graph_rejects_identical_endpoints():
    with pytest.raises(GraphError):
        bell_graph(VertexRef("n1", 0), VertexRef("n1", 0))


def test_graph_rejects_dangling_edge():
    with pytest.raises(GraphError):
        GraphState(frozenset({a}), frozenset({frozenset({a, b})}))


def test_local_complement_isolated_vertex_is_noop():
    g = GraphState.from_edges([a, b, v], [(a, b)])
    assert local_complement(g, v) == g


def test_local_complement_path_adds_chord():
    g = local_complement(path(a, v, b), v)
    assert g == GraphState.from_edges([a, v, b], [(a, v), (v, b), (a, b)])


def test_local_complement_missing_vertex():
    with pytest.raises(GraphError):
        local_complement(path(a, b), c)


def test_measure_bell_leaves_isolated_vertex():
    g = measure_z(bell_graph(a, b), b)
    assert g == GraphState.from_edges([a])


def test_measure_triangle_keeps_opposite_edge():
    tri = GraphState.from_edges([a, b, c], [(a, b), (b, c), (a, c)])
    assert measure_z(tri, c) == bell_graph(a, b)


def test_measure_isolated_vertex():
    g = GraphState.from_edges([a, b, c], [(a, b)])
    assert measure_z(g, c) == bell_graph(a, b)


def test_merge_two_bell_pairs_gives_path():
    g = merge_vertices(bell_graph(a, b), b, bell_graph(c, d), c)
    assert g == path(a, b, d)


def test_merge_with_single_vertex():
    g1 = path(a, b, c)
    g = merge_vertices(g1, b, GraphState.from_edges([d]), d)
    assert g == g1


def test_merge_stars_unions_leaves():
    x1, x2 = VertexRef("x", 0), VertexRef("x", 1)
    l = [VertexRef("l", i) for i in range(5)]
    s1 = GraphState.from_edges([x1, *l[:2]], [(x1, l[0]), (x1, l[1])])
    s2 = GraphState.from_edges([x2, *l[2:]], [(x2, w) for w in l[2:]])
    g = merge_vertices(s1, x1, s2, x2)
    assert g.neighbors(x1) == set(l) and len(g.edges) == 5


def test_merge_rejects_overlap():
    with pytest.raises(GraphError):
        merge_vertices(bell_graph(a, b), a, bell_graph(b, c), c)


def test_fission_of_path():
    g1, g2 = fission(path(a, v, b), v, {a})
    v2 = VertexRef("v", 1)
    assert g1 == bell_graph(a, v)
    assert g2 == bell_graph(v2, b)


def test_fission_keep_everything():
    g = path(a, v, b)
    g1, g2 = fission(g, v, {a, b})
    assert g1 == g
    assert g2 == GraphState.from_edges([VertexRef("v", 1)])


def test_fission_of_star():
    g = GraphState.from_edges([v, a, b, c], [(v, a), (v, b), (v, c)])
    g1, g2 = fission(g, v, {a, b})
    assert g1 == GraphState.from_edges([v, a, b], [(v, a), (v, b)])
    assert g2 == bell_graph(VertexRef("v", 1), c)


def test_fission_rejects_non_neighbour():
    with pytest.raises(GraphError):
        fission(path(a, v, b), v, {c})


def test_fission_fresh_slot_avoids_used():
    _, g2 = fission(path(a, v, b), v, {a}, used=[VertexRef("v", 1)])
    assert VertexRef("v", 2) in g2.vertices


@settings(max_examples=1000)
@given(graph_and_vertex())
def test_local_complement_involution(gv):
    g, v = gv
    h = local_complement(g, v)
    assert isinstance(h, GraphState)
    assert local_complement(h, v) == g
    assert h.vertices == g.vertices


@settings(max_examples=1000)
@given(graph_and_vertex())
def test_measure_removes_one_vertex(gv):
    g, v = gv
    h = measure_z(g, v)
    assert len(h.vertices) == len(g.vertices) - 1
    assert all(v not in e for e in h.edges)


@settings(max_examples=1000)
@given(graph_and_vertex(max_vertices=3), graph_and_vertex(max_vertices=3))
def test_merge_vertex_count(gv1, gv2):
    g1, v1 = gv1
    g2, v2 = gv2
    # shift the second graph onto disjoint nodes
    ren = {u: VertexRef("m" + u.node, u.slot) for u in g2.vertices}
    g2 = GraphState.from_edges(ren.values(), [tuple(ren[x] for x in e) for e in g2.edges])
    h = merge_vertices(g1, v1, g2, ren[v2])
    assert len(h.vertices) == len(g1.vertices) + len(g2.vertices) - 1
    assert h.neighbors(v1) == g1.neighbors(v1) | g2.neighbors(ren[v2])


@settings(max_examples=1000)
@given(graphs(max_vertices=6), graphs(max_vertices=6).map(lambda g: None))
def test_fission_preserves_incident_edges(g, _):
    for v in g.sorted_vertices():
        nbrs = sorted(g.neighbors(v), key=VertexRef.sort_key)
        keep = set(nbrs[: len(nbrs) // 2])
        try:
            g1, g2 = fission(g, v, keep)
        except GraphError:
            continue  # the split would stay connected
        (fresh,) = [u for u in g2.vertices if u.node == v.node and u not in g.vertices]
        assert g1.degree(v) + g2.degree(fresh) == g.degree(v)
        assert not (g1.vertices & g2.vertices)
        assert g1.vertices | g2.vertices == g.vertices | {fresh}
