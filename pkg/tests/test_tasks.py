import json
import math
from pathlib import Path

import numpy as np
import pytest

from sagaqnet.graphstate import GraphState, VertexRef, bell_graph
from sagaqnet.kinds import ALL_KINDS, TaskKind
from sagaqnet.noisemodel import BellDiag, NoiseParams, depolarize, purify_map, swap_map, werner
from sagaqnet.resources import (
    AddChannel,
    AddRecord,
    CapabilitySet,
    ChannelEdge,
    EntanglementRecord,
    ResourceView,
    SetCapability,
    Update,
)
from sagaqnet.tasks import (
    Incapable,
    NoChannel,
    NoRecord,
    Outcome,
    TaskError,
    TaskInstance,
    Timing,
    apply_effect,
    decompose_midpoint,
    duration,
    instantiate,
    run_composite,
)

FIX = Path(__file__).parent / "fixtures"


def make_view(noise=None, kinds=ALL_KINDS, nodes=("1", "2", "3"), p_loss=0.0, q=0.0, lat=1e-3):
    noise = noise or {}
    v = ResourceView()
    for n in nodes:
        caps = CapabilitySet(n, kinds, noise.get(n, NoiseParams()), 8)
        v.apply(Update(n, 1, SetCapability(caps)))
    for i, (a, b) in enumerate(zip(nodes, nodes[1:])):
        v.apply(Update("init", i + 1, AddChannel(ChannelEdge(a, b, 1.0, p_loss, q, lat))))
    return v


def add(v, rec, seq=[100]):
    seq[0] += 1
    v.apply(Update("init", seq[0], AddRecord(rec)))


def bell(rid, a, b, q, lock=None, created=0.0, sa=0, sb=0):
    return EntanglementRecord(rid, bell_graph(VertexRef(a, sa), VertexRef(b, sb)), q, created, lock)


def midpoint(saga="s", sl=0, sr=0):
    return TaskInstance("m", TaskKind.Midpoint, ("1", "2", "3"), params={"slots": (sl, sr)},
                        outputs=("s/m/0",), saga_id=saga)


def test_instantiate_checks_capability():
    v = make_view(kinds=frozenset({TaskKind.Swap}))
    with pytest.raises(Incapable):
        instantiate(TaskKind.Midpoint, v, ("1", "2", "3"))


def test_instantiate_checks_channels():
    v = make_view(nodes=("1", "2", "3"))
    with pytest.raises(NoChannel):
        instantiate(TaskKind.SendQubit, v, ("1", "3"))


def test_instantiate_checks_records_and_locks():
    v = make_view()
    with pytest.raises(NoRecord):
        instantiate(TaskKind.Swap, v, ("1", "2", "3"), inputs=("a", "b"))
    add(v, bell("a", "1", "2", werner(0.9), lock="other"))
    add(v, bell("b", "2", "3", werner(0.9)))
    with pytest.raises(NoRecord):
        instantiate(TaskKind.Swap, v, ("1", "2", "3"), inputs=("a", "b"), saga_id="s")
    t = instantiate(TaskKind.Swap, v, ("1", "2", "3"), inputs=("x", "b"), saga_id="s",
                    produced={"x"})
    assert t.responsible == "2"


def test_instantiate_arity():
    v = make_view()
    with pytest.raises(TaskError):
        instantiate(TaskKind.Swap, v, ("1", "2"))


def test_swap_effect_matches_fixture():
    fx = json.loads((FIX / "swap_werner.json").read_text())
    v = make_view()
    add(v, bell("a", "1", "2", BellDiag(tuple(fx["a"])), lock="s"))
    add(v, bell("b", "2", "3", BellDiag(tuple(fx["b"])), lock="s"))
    t = TaskInstance("t", TaskKind.Swap, ("1", "2", "3"), ("a", "b"), outputs=("c",), saga_id="s")
    eff = apply_effect(t, v, 0.0)
    assert eff.outcome == Outcome.SUCCESS
    assert eff.consumed == ["a", "b"]
    v.emit("2", eff.changes)
    out = v.record("c")
    assert out.nodes() == {"1", "3"}
    assert out.lock == "s"
    np.testing.assert_allclose(out.quality.p, fx["out"], atol=1e-12)


def test_midpoint_heralded_failure_has_no_changes():
    v = make_view(p_loss=0.5)
    eff = apply_effect(midpoint(), v, 0.0, rand=0.9)
    assert eff.outcome == Outcome.HERALDED_FAILURE
    assert eff.changes == []
    assert apply_effect(midpoint(), v, 0.0, rand=0.2).outcome == Outcome.SUCCESS


def test_purify_consumes_inputs_either_way():
    v = make_view()
    add(v, bell("a", "1", "2", werner(0.7), lock="s"))
    add(v, bell("b", "1", "2", werner(0.7), lock="s", sa=1, sb=1))
    t = TaskInstance("p", TaskKind.Purify, ("1", "2"), ("a", "b"), outputs=("c",), saga_id="s")
    ok = apply_effect(t, v, 0.0, rand=0.0)
    bad = apply_effect(t, v, 0.0, rand=0.99)
    assert ok.outcome == Outcome.SUCCESS and bad.outcome == Outcome.FAILURE
    assert set(ok.consumed) == set(bad.consumed) == {"a", "b"}
    p, out = purify_map(werner(0.7), werner(0.7))
    assert ok.payload["p_succ"] == pytest.approx(p)
    assert ok.changes[-1].record.quality == out


def test_pump_replaces_kept_record():
    v = make_view()
    add(v, bell("k", "1", "2", werner(0.8), lock="s"))
    add(v, bell("f", "1", "2", werner(0.8), lock="s", sa=1, sb=1))
    t = TaskInstance("p", TaskKind.Pump, ("1", "2"), ("k", "f"), outputs=("k",), saga_id="s")
    eff = apply_effect(t, v, 0.0, force_success=True)
    v.emit("1", eff.changes)
    assert "f" not in v.entanglement
    assert v.record("k").version == 1
    assert v.record("k").fidelity() > 0.8


def test_send_loss_destroys_record():
    v = make_view(p_loss=0.3)
    add(v, bell("a", "1", "2", werner(0.9), lock="s"))
    t = TaskInstance("x", TaskKind.SendQubit, ("2", "3"), ("a",), params={"slot": 0},
                     outputs=("b",), saga_id="s")
    eff = apply_effect(t, v, 0.0, rand=0.1)
    assert eff.outcome == Outcome.FAILURE and eff.consumed == ["a"]
    eff = apply_effect(t, v, 0.0, rand=0.5)
    v.emit("2", eff.changes)
    assert v.record("b").nodes() == {"1", "3"}


def test_graph_merge_then_cut():
    v = make_view()
    add(v, bell("a", "1", "2", werner(0.9), lock="s"))
    add(v, bell("b", "2", "3", werner(0.9), lock="s", sa=1))
    merge = TaskInstance("g", TaskKind.GraphMerge, ("2",), ("a", "b"),
                         params={"v1": "2:0", "v2": "2:1"}, outputs=("ghz",), saga_id="s")
    v.emit("2", apply_effect(merge, v, 0.0).changes)
    ghz = v.record("ghz")
    assert len(ghz.graph.vertices) == 3
    assert ghz.quality == pytest.approx(0.81)
    cut = TaskInstance("c", TaskKind.GraphCut, ("2",), ("ghz",), params={"v": "2:0"},
                       outputs=("pair",), saga_id="s")
    v.emit("2", apply_effect(cut, v, 0.0).changes)
    # cutting the centre of a star leaves two isolated vertices
    assert v.record("pair").graph.edges == frozenset()


def test_durations():
    v = make_view(lat=2e-3)
    tm = Timing()
    assert duration(midpoint(), v, tm) == pytest.approx(1e-6 + 2e-3 + 2e-6)
    swap = TaskInstance("t", TaskKind.Swap, ("1", "2", "3"))
    assert duration(swap, v, tm) == pytest.approx(2e-6)


def test_decomposition_shape():
    subs = decompose_midpoint(midpoint())
    kinds = [s.task.kind for s in subs]
    assert kinds == [TaskKind.PrepareBell] * 2 + [TaskKind.SendQubit] * 2 + [TaskKind.Swap]
    assert subs[2].deps == subs[3].deps == ("m.prepL", "m.prepR")
    assert subs[-1].task.responsible == "2"
    assert subs[-1].task.outputs == ("s/m/0",)


def test_composite_equals_monolithic_random_noise():
    rng = np.random.default_rng(7)
    for _ in range(100):
        noise = {
            n: NoiseParams(p_gate=rng.uniform(0, 0.1), p_meas=rng.uniform(0, 0.1))
            for n in ("1", "2", "3")
        }
        v = make_view(noise=noise, q=rng.uniform(0, 0.2))
        sl, sr = map(int, rng.integers(0, 3, size=2))
        t = midpoint(sl=sl, sr=sr)
        mono = v.copy()
        mono.emit("2", apply_effect(t, v, 0.0, force_success=True).changes)
        comp, _ = run_composite(decompose_midpoint(t), v, 0.0)
        a, b = mono.record("s/m/0"), comp.record("s/m/0")
        assert a.graph == b.graph
        np.testing.assert_allclose(a.quality.p, b.quality.p, rtol=0, atol=1e-12)
        assert set(comp.entanglement) == {"s/m/0"}


def test_midpoint_quality_formula():
    noise = {"1": NoiseParams(p_gate=0.01), "2": NoiseParams(p_meas=0.02), "3": NoiseParams(p_gate=0.03)}
    v = make_view(noise=noise, q=0.05)
    v.emit("2", apply_effect(midpoint(), v, 0.0, force_success=True).changes)
    left = depolarize(depolarize(werner(1.0), 0.01), 0.05)
    right = depolarize(depolarize(werner(1.0), 0.03), 0.05)
    want = swap_map(left, right, noise["2"])
    np.testing.assert_allclose(v.record("s/m/0").quality.p, want.p, atol=1e-15)


def test_data_qubit_send_tracks_quality():
    v = make_view(q=0.1, noise={"2": NoiseParams(t_mem=1.0)})
    t = TaskInstance("d", TaskKind.SendQubit, ("2", "3"))
    eff = apply_effect(t, v, 2.0, carry={"quality": werner(1.0), "at": 1.0})
    want = depolarize(depolarize(werner(1.0), -math.expm1(-1.0)), 0.1)
    assert eff.payload["quality"] == want
    assert eff.changes == []


def test_apply_op_bumps_version():
    v = make_view(noise={"1": NoiseParams(p_gate=0.1)})
    add(v, bell("a", "1", "2", werner(0.9), lock="s"))
    t = TaskInstance("o", TaskKind.ApplyOp, ("1",), ("a",), params={"op": "gate"}, saga_id="s")
    v.emit("1", apply_effect(t, v, 0.0).changes)
    assert v.record("a").version == 1
    assert v.record("a").fidelity() == pytest.approx(0.9 * 0.9 + 0.025)


def test_fission_splits_record():
    v = make_view()
    g = GraphState.from_edges(
        [VertexRef("1", 0), VertexRef("2", 0), VertexRef("3", 0)],
        [(VertexRef("1", 0), VertexRef("2", 0)), (VertexRef("2", 0), VertexRef("3", 0))],
    )
    add(v, EntanglementRecord("ghz", g, 0.9, 0.0, "s"))
    t = TaskInstance("f", TaskKind.GraphFission, ("2",), ("ghz",),
                     params={"v": "2:0", "keep": ["1:0"]}, outputs=("x", "y"), saga_id="s")
    v.emit("2", apply_effect(t, v, 0.0).changes)
    sizes = sorted(len(v.record(r).graph.vertices) for r in ("x", "y"))
    assert sizes == [2, 2]
