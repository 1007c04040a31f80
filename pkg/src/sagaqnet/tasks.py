"""Task catalog: instantiation checks, resource effects and durations.

A task is single-shot. ``apply_effect`` turns one attempt into a list of
view changes (records created, consumed or replaced) plus an outcome; the
caller wraps the changes into updates and broadcasts them. Retrying is the
saga executor's business.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Any

from .graphstate import (
    GraphState,
    VertexRef,
    bell_graph,
    fission,
    local_complement,
    measure_z,
    merge_vertices,
)
from .kinds import TaskKind
from .noisemodel import (
    PERFECT,
    BellDiag,
    depolarize,
    memory_q,
    multi_fidelity_compose,
    pump_failure_map,
    purify_map,
    swap_map,
    werner,
)
from .resources import (
    AddRecord,
    EntanglementRecord,
    Quality,
    RemoveRecord,
    ReplaceRecord,
    ResourceView,
)


class TaskError(Exception):
    pass


class Incapable(TaskError):
    def __init__(self, node: str, kind: TaskKind):
        super().__init__(f"node {node} cannot run {kind}")
        self.node, self.kind = node, kind


class NoChannel(TaskError):
    def __init__(self, a: str, b: str):
        super().__init__(f"no quantum channel {a}-{b}")
        self.a, self.b = a, b


class NoRecord(TaskError):
    def __init__(self, rid: str, why: str = "missing"):
        super().__init__(f"record {rid} {why}")
        self.id = rid


class Outcome(str, enum.Enum):
    SUCCESS = "success"
    HERALDED_FAILURE = "heralded_failure"
    # destructive failure: inputs consumed, nothing to retry with
    FAILURE = "failure"

    def __str__(self) -> str:
        return self.value


ARITY = {
    TaskKind.Midpoint: 3,
    TaskKind.MidpointSource: 3,
    TaskKind.Swap: 3,
    TaskKind.SendQubit: 2,
    TaskKind.Teleport: 2,
    TaskKind.Purify: 2,
    TaskKind.Pump: 2,
    TaskKind.ClassicalSend: 2,
}

INPUT_COUNT = {
    TaskKind.Swap: 2,
    TaskKind.Purify: 2,
    TaskKind.Pump: 2,
    TaskKind.GraphMerge: 2,
    TaskKind.Teleport: 1,
    TaskKind.GraphCut: 1,
    TaskKind.GraphLC: 1,
    TaskKind.GraphFission: 1,
}


@dataclass(frozen=True)
class TaskInstance:
    id: str
    kind: TaskKind
    participants: tuple
    inputs: tuple = ()
    params: dict = field(default_factory=dict, hash=False)
    outputs: tuple = ()
    max_attempts: int = 10
    saga_id: str = ""

    @property
    def responsible(self) -> str:
        """Node whose runtime executes the task's effect."""
        if self.kind in (TaskKind.Midpoint, TaskKind.MidpointSource, TaskKind.Swap):
            return self.participants[1]
        return self.participants[0]

    def describe(self) -> str:
        parts = [f"{self.id} {self.kind.value}({','.join(self.participants)})"]
        if self.inputs:
            parts.append("in=" + ",".join(self.inputs))
        if self.outputs:
            parts.append("out=" + ",".join(self.outputs))
        for k in sorted(self.params):
            v = self.params[k]
            if isinstance(v, (list, tuple)):
                v = ",".join(str(x) for x in v)
            parts.append(f"{k}={v}")
        return " ".join(parts)


@dataclass(frozen=True)
class Timing:
    """Fixed durations of local quantum operations, in seconds."""

    t_gate: float = 1e-6
    t_meas: float = 1e-6
    t_prep: float = 1e-6


def _channel_for(view: ResourceView, a: str, b: str):
    ch = view.channel(a, b)
    if ch is None:
        raise NoChannel(a, b)
    return ch


def required_channels(kind: TaskKind, participants: tuple) -> list[tuple[str, str]]:
    if kind in (TaskKind.Midpoint, TaskKind.MidpointSource):
        left, center, right = participants
        return [(left, center), (center, right)]
    if kind == TaskKind.SendQubit:
        return [tuple(participants)]
    return []


def instantiate(
    kind: TaskKind,
    view: ResourceView,
    participants,
    inputs=(),
    outputs=(),
    params: dict | None = None,
    *,
    id: str = "t",
    saga_id: str = "",
    max_attempts: int = 10,
    produced=frozenset(),
) -> TaskInstance:
    """Build a task after checking capabilities, channels and input records.

    ``produced`` lists record ids that earlier tasks of the same saga will
    create; those need not exist yet.
    """
    kind = TaskKind(kind)
    participants = tuple(participants)
    want = ARITY.get(kind, 1)
    if kind == TaskKind.ClassicalBroadcast:
        want = 1
    if len(participants) != want:
        raise TaskError(f"{kind} takes {want} participants, got {len(participants)}")
    if kind in INPUT_COUNT and len(inputs) != INPUT_COUNT[kind]:
        raise TaskError(f"{kind} takes {INPUT_COUNT[kind]} input records, got {len(inputs)}")
    for node in participants:
        caps = view.capabilities.get(node)
        if caps is None or not caps.can(kind):
            raise Incapable(node, kind)
    for a, b in required_channels(kind, participants):
        _channel_for(view, a, b)
    for rid in inputs:
        if rid in produced:
            continue
        rec = view.entanglement.get(rid)
        if rec is None:
            raise NoRecord(rid)
        if rec.lock not in (None, saga_id):
            raise NoRecord(rid, f"locked by {rec.lock}")
    return TaskInstance(
        id=id,
        kind=kind,
        participants=participants,
        inputs=tuple(inputs),
        params=dict(params or {}),
        outputs=tuple(outputs),
        max_attempts=max_attempts,
        saga_id=saga_id,
    )


@dataclass
class Effect:
    outcome: Outcome
    changes: list = field(default_factory=list)
    payload: dict = field(default_factory=dict)

    @property
    def created(self) -> list[str]:
        return [c.record.id for c in self.changes if isinstance(c, AddRecord)]

    @property
    def consumed(self) -> list[str]:
        return [c.id for c in self.changes if isinstance(c, RemoveRecord)]


def quality_for(graph: GraphState, f: float) -> Quality:
    if len(graph.vertices) == 2:
        return werner(min(1.0, max(0.25, f)))
    return f


def _slot_pair(task: TaskInstance) -> tuple[int, int]:
    slots = task.params.get("slots", (0, 0))
    return int(slots[0]), int(slots[1])


def _inputs(task: TaskInstance, view: ResourceView) -> list[EntanglementRecord]:
    recs = []
    for rid in task.inputs:
        rec = view.entanglement.get(rid)
        if rec is None:
            raise NoRecord(rid)
        if task.saga_id and rec.lock != task.saga_id:
            raise NoRecord(rid, f"not locked by saga {task.saga_id}")
        recs.append(rec)
    return recs


def midpoint_success_probability(task: TaskInstance, view: ResourceView) -> float:
    left, center, right = task.participants
    pl = _channel_for(view, left, center).p_loss
    pr = _channel_for(view, center, right).p_loss
    return (1.0 - pl) * (1.0 - pr)


def success_probability(task: TaskInstance, view: ResourceView) -> float:
    """Per-attempt success probability of heralded kinds (1 for the rest)."""
    if task.kind in (TaskKind.Midpoint, TaskKind.MidpointSource):
        return midpoint_success_probability(task, view)
    if task.kind == TaskKind.SendQubit and not task.inputs:
        return 1.0 - _channel_for(view, *task.participants).p_loss
    return 1.0


def midpoint_quality(task: TaskInstance, view: ResourceView) -> BellDiag:
    left, center, right = task.participants
    cl = _channel_for(view, left, center)
    cr = _channel_for(view, center, right)
    if task.kind == TaskKind.Midpoint:
        prep_l = depolarize(PERFECT, view.noise(left).p_gate)
        prep_r = depolarize(PERFECT, view.noise(right).p_gate)
        return swap_map(
            depolarize(prep_l, cl.q_depol), depolarize(prep_r, cr.q_depol), view.noise(center)
        )
    prep_c = depolarize(PERFECT, view.noise(center).p_gate)
    return depolarize(depolarize(prep_c, cl.q_depol), cr.q_depol)


def _new_record(task, rid, graph, quality, now) -> EntanglementRecord:
    return EntanglementRecord(rid, graph, quality, now, task.saga_id or None)


def _degrade(q: Quality, p: float) -> Quality:
    if isinstance(q, BellDiag):
        return depolarize(q, p)
    return q * (1.0 - p)


def apply_effect(
    task: TaskInstance,
    view: ResourceView,
    now: float,
    rand: float = 0.0,
    *,
    force_success: bool = False,
    carry: dict | None = None,
) -> Effect:
    """Resource effect of one attempt of ``task`` at time ``now``.

    ``rand`` is a uniform sample in [0, 1) deciding stochastic outcomes;
    ``force_success`` takes the success branch regardless (used by the
    estimator). ``carry`` is the payload handed over from predecessors
    (the in-flight data qubit for chained sends).
    """
    k = task.kind
    fn = _EFFECTS.get(k)
    if fn is None:
        raise TaskError(f"no effect rule for {k}")
    return fn(task, view, now, rand, force_success, carry or {})


def _eff_prepare(task, view, now, rand, force, carry):
    (node,) = task.participants
    s1, s2 = _slot_pair(task)
    q = depolarize(PERFECT, view.noise(node).p_gate)
    g = bell_graph(VertexRef(node, s1), VertexRef(node, s2))
    return Effect(Outcome.SUCCESS, [AddRecord(_new_record(task, task.outputs[0], g, q, now))])


def _eff_midpoint(task, view, now, rand, force, carry):
    p = midpoint_success_probability(task, view)
    if not (force or rand < p):
        return Effect(Outcome.HERALDED_FAILURE)
    left, _, right = task.participants
    sl, sr = _slot_pair(task)
    g = bell_graph(VertexRef(left, sl), VertexRef(right, sr))
    rec = _new_record(task, task.outputs[0], g, midpoint_quality(task, view), now)
    return Effect(Outcome.SUCCESS, [AddRecord(rec)])


def _eff_send(task, view, now, rand, force, carry):
    src, dst = task.participants
    ch = _channel_for(view, src, dst)
    ok = force or rand >= ch.p_loss
    if task.inputs:
        (rec,) = _inputs(task, view)
        if not ok:
            # the travelling half is gone, and with it the entanglement
            return Effect(Outcome.FAILURE, [RemoveRecord(rec.id)])
        old = VertexRef.parse(task.params["vertex"]) if "vertex" in task.params else rec.vertex_at(src)
        new = VertexRef(dst, int(task.params.get("slot", 0)))
        g = GraphState.from_edges(
            [new if v == old else v for v in rec.graph.vertices],
            [tuple(new if x == old else x for x in e) for e in rec.graph.edges],
        )
        q = _degrade(view.quality_at(rec, now), ch.q_depol)
        out = _new_record(task, task.outputs[0], g, q, now)
        return Effect(Outcome.SUCCESS, [RemoveRecord(rec.id), AddRecord(out)])
    if not ok:
        return Effect(Outcome.HERALDED_FAILURE)
    if task.params.get("prepare"):
        s1, s2 = _slot_pair(task)
        q = depolarize(depolarize(PERFECT, view.noise(src).p_gate), ch.q_depol)
        g = bell_graph(VertexRef(src, s1), VertexRef(dst, s2))
        return Effect(Outcome.SUCCESS, [AddRecord(_new_record(task, task.outputs[0], g, q, now))])
    # data qubit: track the effective channel (Choi state) it has seen so far
    q = carry.get("quality", PERFECT)
    since = carry.get("at", now)
    q = depolarize(q, memory_q(now - since, view.t_mem(src)))
    q = depolarize(q, ch.q_depol)
    return Effect(Outcome.SUCCESS, payload={"quality": q, "at": now, "node": dst})


def _eff_swap(task, view, now, rand, force, carry):
    left, pivot, right = task.participants
    ra, rb = _inputs(task, view)
    q = swap_map(view.quality_at(ra, now), view.quality_at(rb, now), view.noise(pivot))
    g = bell_graph(ra.vertex_at(left), rb.vertex_at(right))
    out = _new_record(task, task.outputs[0], g, q, now)
    return Effect(Outcome.SUCCESS, [RemoveRecord(ra.id), RemoveRecord(rb.id), AddRecord(out)])


def _eff_teleport(task, view, now, rand, force, carry):
    (rec,) = _inputs(task, view)
    q = view.quality_at(rec, now)
    return Effect(
        Outcome.SUCCESS,
        [RemoveRecord(rec.id)],
        {"quality": q, "at": now, "node": task.participants[1]},
    )


def _pair_noise(task, view):
    a, b = task.participants
    return view.noise(a).combined(view.noise(b))


def _eff_purify(task, view, now, rand, force, carry):
    ra, rb = _inputs(task, view)
    noise = _pair_noise(task, view)
    qa, qb = view.quality_at(ra, now), view.quality_at(rb, now)
    p, out = purify_map(qa, qb, noise, mode="purify")
    if out is None or not (force or rand < p):
        return Effect(Outcome.FAILURE, [RemoveRecord(ra.id), RemoveRecord(rb.id)], {"p_succ": p})
    rec = _new_record(task, task.outputs[0], ra.graph, out, now)
    return Effect(
        Outcome.SUCCESS, [RemoveRecord(ra.id), RemoveRecord(rb.id), AddRecord(rec)], {"p_succ": p}
    )


def _eff_pump(task, view, now, rand, force, carry):
    kept, fresh = _inputs(task, view)
    noise = _pair_noise(task, view)
    qk, qf = view.quality_at(kept, now), view.quality_at(fresh, now)
    p, out = purify_map(qk, qf, noise, mode="pump")
    if out is not None and (force or rand < p):
        new = replace(kept, quality=out, created_at=now, version=kept.version + 1)
        return Effect(Outcome.SUCCESS, [RemoveRecord(fresh.id), ReplaceRecord(new)], {"p_succ": p})
    _, fail_q = pump_failure_map(qk, qf, noise)
    changes = [RemoveRecord(fresh.id)]
    if fail_q is not None:
        changes.append(ReplaceRecord(replace(kept, quality=fail_q, created_at=now, version=kept.version + 1)))
    return Effect(Outcome.FAILURE, changes, {"p_succ": p})


GRAPH_OPS = {TaskKind.GraphMerge: 1, TaskKind.GraphCut: 1, TaskKind.GraphLC: 1, TaskKind.GraphFission: 2}


def _eff_graph(task, view, now, rand, force, carry):
    recs = _inputs(task, view)
    (node,) = task.participants
    noise = view.noise(node)
    k = GRAPH_OPS[task.kind]
    fs = [view.fidelity_at(r, now) for r in recs]
    f = multi_fidelity_compose(fs[0], fs[1] if len(fs) > 1 else 1.0, k, noise)
    v = VertexRef.parse(task.params["v"]) if "v" in task.params else None
    if task.kind == TaskKind.GraphMerge:
        v1, v2 = VertexRef.parse(task.params["v1"]), VertexRef.parse(task.params["v2"])
        graphs = [merge_vertices(recs[0].graph, v1, recs[1].graph, v2)]
    elif task.kind == TaskKind.GraphCut:
        graphs = [measure_z(recs[0].graph, v)]
    elif task.kind == TaskKind.GraphLC:
        graphs = [local_complement(recs[0].graph, v)]
    else:
        keep = [VertexRef.parse(x) for x in task.params.get("keep", ())]
        used = [VertexRef.parse(x) for x in task.params.get("used", ())]
        graphs = list(fission(recs[0].graph, v, keep, used=used + sorted(view.used_slots())))
    changes = [RemoveRecord(r.id) for r in recs]
    for rid, g in zip(task.outputs, graphs):
        changes.append(AddRecord(_new_record(task, rid, g, quality_for(g, f), now)))
    return Effect(Outcome.SUCCESS, changes, {"fidelity_estimate": f})


def _eff_apply_op(task, view, now, rand, force, carry):
    (node,) = task.participants
    noise = view.noise(node)
    p = noise.p_meas if task.params.get("op") == "measure" else noise.p_gate
    changes = []
    for rec in _inputs(task, view):
        q = _degrade(view.quality_at(rec, now), p)
        changes.append(ReplaceRecord(replace(rec, quality=q, created_at=now, version=rec.version + 1)))
    return Effect(Outcome.SUCCESS, changes)


def _eff_classical(task, view, now, rand, force, carry):
    return Effect(Outcome.SUCCESS, payload={"message": task.params.get("payload", "")})


_EFFECTS = {
    TaskKind.PrepareBell: _eff_prepare,
    TaskKind.Midpoint: _eff_midpoint,
    TaskKind.MidpointSource: _eff_midpoint,
    TaskKind.SendQubit: _eff_send,
    TaskKind.Swap: _eff_swap,
    TaskKind.Teleport: _eff_teleport,
    TaskKind.Purify: _eff_purify,
    TaskKind.Pump: _eff_pump,
    TaskKind.GraphMerge: _eff_graph,
    TaskKind.GraphCut: _eff_graph,
    TaskKind.GraphLC: _eff_graph,
    TaskKind.GraphFission: _eff_graph,
    TaskKind.ApplyOp: _eff_apply_op,
    TaskKind.ClassicalSend: _eff_classical,
    TaskKind.ClassicalBroadcast: _eff_classical,
}


def duration(task: TaskInstance, view: ResourceView, timing: Timing = Timing()) -> float:
    """Time the responsible node is busy with one attempt."""
    k = task.kind
    if k == TaskKind.PrepareBell:
        return timing.t_prep
    if k in (TaskKind.Midpoint, TaskKind.MidpointSource):
        left, center, right = task.participants
        reach = max(_channel_for(view, left, center).latency, _channel_for(view, center, right).latency)
        if k == TaskKind.Midpoint:
            # same critical path as prepare -> send -> swap
            return timing.t_prep + reach + timing.t_gate + timing.t_meas
        return timing.t_prep + reach
    if k == TaskKind.SendQubit:
        lat = _channel_for(view, *task.participants).latency
        return lat + (timing.t_prep if task.params.get("prepare") else 0.0)
    if k == TaskKind.Swap:
        return timing.t_gate + timing.t_meas
    if k == TaskKind.Teleport:
        # the qubit is usable once the correction bits arrive
        return timing.t_gate + timing.t_meas + view.latency(*task.participants)
    if k in (TaskKind.Purify, TaskKind.Pump):
        return timing.t_gate + timing.t_meas + view.latency(*task.participants)
    if k == TaskKind.GraphMerge:
        return timing.t_gate + timing.t_meas
    if k == TaskKind.GraphCut:
        return timing.t_meas
    if k == TaskKind.GraphLC:
        return timing.t_gate
    if k == TaskKind.GraphFission:
        return 2 * timing.t_gate
    if k == TaskKind.ApplyOp:
        return timing.t_meas if task.params.get("op") == "measure" else timing.t_gate
    return 0.0


# ---------------------------------------------------------------------------
# Midpoint decomposition

@dataclass(frozen=True)
class SubTask:
    task: TaskInstance
    deps: tuple = ()


def decompose_midpoint(t: TaskInstance) -> list[SubTask]:
    """Two Bell preparations, two synchronised sends, one swap at the centre.

    The final swap writes the Midpoint's own output id and end-node slots, so
    the composite leaves the same record as the monolithic task.
    """
    if t.kind != TaskKind.Midpoint:
        raise TaskError(f"cannot decompose {t.kind} as a Midpoint")
    left, center, right = t.participants
    sl, sr = _slot_pair(t)
    common = dict(saga_id=t.saga_id, max_attempts=t.max_attempts)
    prep_l = TaskInstance(
        f"{t.id}.prepL", TaskKind.PrepareBell, (left,), params={"slots": (sl, sl + 1)},
        outputs=(f"{t.id}.bL",), **common,
    )
    prep_r = TaskInstance(
        f"{t.id}.prepR", TaskKind.PrepareBell, (right,), params={"slots": (sr, sr + 1)},
        outputs=(f"{t.id}.bR",), **common,
    )
    send_l = TaskInstance(
        f"{t.id}.sendL", TaskKind.SendQubit, (left, center), inputs=(f"{t.id}.bL",),
        params={"vertex": f"{left}:{sl + 1}", "slot": 0}, outputs=(f"{t.id}.cL",), **common,
    )
    send_r = TaskInstance(
        f"{t.id}.sendR", TaskKind.SendQubit, (right, center), inputs=(f"{t.id}.bR",),
        params={"vertex": f"{right}:{sr + 1}", "slot": 1}, outputs=(f"{t.id}.cR",), **common,
    )
    swap = TaskInstance(
        f"{t.id}.swap", TaskKind.Swap, (left, center, right), inputs=(f"{t.id}.cL", f"{t.id}.cR"),
        outputs=t.outputs, **common,
    )
    preps = (prep_l.id, prep_r.id)
    return [
        SubTask(prep_l),
        SubTask(prep_r),
        SubTask(send_l, preps),
        SubTask(send_r, preps),
        SubTask(swap, (send_l.id, send_r.id)),
    ]


def run_composite(
    subtasks: list[SubTask], view: ResourceView, now: float, origin: str = "composite"
) -> tuple[ResourceView, list[Effect]]:
    """Apply a sub-DAG's effects in order (all succeed) on a copy of ``view``."""
    v = view.copy()
    effects = []
    for sub in subtasks:
        eff = apply_effect(sub.task, v, now, force_success=True)
        v.emit(origin, eff.changes)
        effects.append(eff)
    return v, effects


def quality_of(effect_view: ResourceView, rid: str) -> Any:
    return effect_view.record(rid).quality
