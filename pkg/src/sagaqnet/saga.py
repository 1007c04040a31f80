"""Objectives, saga DAGs, the planner, the estimator and the resource monitor."""
from __future__ import annotations

import enum
import heapq
import json
import math
from dataclasses import dataclass, field

from .graphstate import GraphState, VertexRef, bell_graph, local_complement, node_key
from .kinds import TaskKind
from .noisemodel import BellDiag
from .resources import ResourceView, lockable
from .tasks import TaskError, TaskInstance, Timing, instantiate


class PlanError(Exception):
    pass


class NoRoute(PlanError):
    pass


class Incapable(PlanError):
    pass


class Infeasible(PlanError):
    pass


class ObjectiveKind(str, enum.Enum):
    EstablishBell = "EstablishBell"
    EstablishGraphState = "EstablishGraphState"
    SendQubit = "SendQubit"
    SendClassical = "SendClassical"

    def __str__(self) -> str:
        return self.value


MODES = ("orchestration", "choreography")


@dataclass(frozen=True)
class Objective:
    id: str
    kind: ObjectiveKind
    targets: tuple
    min_fidelity: float = 0.0
    priority: int = 0
    arrival: float = 0.0
    mode: str | None = None
    # EstablishGraphState: edges between target nodes
    graph: tuple = ()
    payload: str = ""
    initiator: str | None = None

    def __post_init__(self) -> None:
        if not self.targets:
            raise ValueError(f"objective {self.id}: no targets")
        if not 0.0 <= self.min_fidelity <= 1.0:
            raise ValueError(f"objective {self.id}: min_fidelity {self.min_fidelity} outside [0, 1]")
        if self.priority < 0:
            raise ValueError(f"objective {self.id}: negative priority")
        if self.arrival < 0:
            raise ValueError(f"objective {self.id}: negative arrival time")
        if self.mode is not None and self.mode not in MODES:
            raise ValueError(f"objective {self.id}: unknown mode {self.mode}")
        if self.kind != ObjectiveKind.EstablishGraphState and len(self.targets) != 2:
            raise ValueError(f"objective {self.id}: {self.kind} takes two targets")

    @property
    def origin(self) -> str:
        return self.initiator or self.targets[0]


@dataclass(frozen=True)
class PlannerPolicy:
    prefer_preshared: bool = True
    purify_target_rounds: int = 2
    retry_cap: int = 3
    epsilon: float = 1e-3
    max_attempts: int = 10
    expected_retries: bool = True
    timing: Timing = Timing()

    def __post_init__(self) -> None:
        if self.retry_cap < 1:
            raise ValueError("retry_cap must be at least 1")
        if self.purify_target_rounds < 0:
            raise ValueError("purify_target_rounds must be non-negative")


@dataclass(frozen=True)
class Saga:
    id: str
    objective: str
    tasks: tuple
    deps: dict
    mode: str = "orchestration"
    priority: int = 0
    initiator: str = ""
    # ("record", rid) | ("payload", task id) | ("none", "")
    deliver: tuple = ("none", "")
    f_pred: float | None = None
    t_pred: float | None = None

    def __post_init__(self) -> None:
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ValueError(f"saga {self.id}: duplicate task ids")
        seen: set = set()
        for t in self.tasks:
            for d in self.deps.get(t.id, ()):
                if d not in seen:
                    raise ValueError(f"saga {self.id}: {t.id} depends on {d}, not an earlier task")
            seen.add(t.id)

    def task(self, tid: str) -> TaskInstance:
        return self._index[tid]

    @property
    def _index(self) -> dict:
        return {t.id: t for t in self.tasks}

    def dependents(self) -> dict:
        out = {t.id: [] for t in self.tasks}
        for t in self.tasks:
            for d in self.deps.get(t.id, ()):
                out[d].append(t.id)
        return out

    def roots(self) -> list[str]:
        return [t.id for t in self.tasks if not self.deps.get(t.id)]

    def sinks(self) -> list[str]:
        dep = self.dependents()
        return [t.id for t in self.tasks if not dep[t.id]]

    def produced(self) -> set:
        return {rid for t in self.tasks for rid in t.outputs}

    def external_inputs(self) -> list[str]:
        """Pre-existing records the saga must lock before it runs."""
        made = self.produced()
        out = [rid for t in self.tasks for rid in t.inputs if rid not in made]
        if self.deliver[0] == "record" and self.deliver[1] not in made:
            out.append(self.deliver[1])
        return sorted(set(out))

    def responsible_nodes(self) -> list[str]:
        return sorted({t.responsible for t in self.tasks}, key=node_key)

    def participants(self) -> list[str]:
        return sorted({n for t in self.tasks for n in t.participants}, key=node_key)

    def kinds(self) -> list[TaskKind]:
        return [t.kind for t in self.tasks]

    def to_dict(self) -> dict:
        def plain(v):
            if isinstance(v, (list, tuple)):
                return [plain(x) for x in v]
            if isinstance(v, enum.Enum):
                return v.value
            return v

        return {
            "id": self.id,
            "objective": self.objective,
            "mode": self.mode,
            "priority": self.priority,
            "initiator": self.initiator,
            "deliver": list(self.deliver),
            "f_pred": self.f_pred,
            "t_pred": self.t_pred,
            "tasks": [
                {
                    "id": t.id,
                    "kind": t.kind.value,
                    "participants": list(t.participants),
                    "inputs": list(t.inputs),
                    "outputs": list(t.outputs),
                    "params": {k: plain(v) for k, v in t.params.items()},
                    "max_attempts": t.max_attempts,
                    "deps": list(self.deps.get(t.id, ())),
                }
                for t in self.tasks
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def describe(self) -> str:
        lines = [
            f"saga {self.id} objective={self.objective} mode={self.mode} "
            f"priority={self.priority} initiator={self.initiator} "
            f"deliver={self.deliver[0]}:{self.deliver[1]}"
        ]
        if self.f_pred is not None:
            lines.append(f"  estimate fidelity={self.f_pred:.6f} duration={self.t_pred:.9f}")
        for t in self.tasks:
            deps = self.deps.get(t.id, ())
            lines.append("  " + t.describe() + (f" after={','.join(deps)}" if deps else ""))
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# saga construction

class _Builder:
    def __init__(self, view: ResourceView, saga_id: str, policy: PlannerPolicy):
        self.view = view
        self.saga_id = saga_id
        self.policy = policy
        self.tasks: list[TaskInstance] = []
        self.deps: dict = {}
        self.made: dict = {}  # record id -> producing task id
        self.ends: dict = {}  # record id -> (node, node) or vertices
        self.used: set = set()

    def slot(self, node: str) -> int:
        s = self.view.free_slot(node, self.used)
        self.used.add(VertexRef(node, s))
        return s

    def add(self, kind, participants, inputs=(), params=None, n_out=1, after=(), outputs=None):
        tid = f"t{len(self.tasks)}"
        if outputs is None:
            outputs = tuple(f"{self.saga_id}/{tid}/{k}" for k in range(n_out))
        try:
            t = instantiate(
                kind, self.view, participants, inputs, outputs, params,
                id=tid, saga_id=self.saga_id, max_attempts=self.policy.max_attempts,
                produced=frozenset(self.made),
            )
        except TaskError as e:
            raise Incapable(str(e)) from e
        deps = {self.made[r] for r in inputs if r in self.made} | set(after)
        self.deps[tid] = tuple(sorted(deps, key=lambda d: int(d[1:])))
        self.tasks.append(t)
        for r in outputs:
            self.made[r] = tid
        return t

    def saga(self, objective: Objective, deliver: tuple, mode: str) -> Saga:
        return Saga(
            id=self.saga_id,
            objective=objective.id,
            tasks=tuple(self.tasks),
            deps=dict(self.deps),
            mode=mode,
            priority=objective.priority,
            initiator=objective.origin,
            deliver=deliver,
        )


def _can(view: ResourceView, kind: TaskKind, *nodes) -> bool:
    for n in nodes:
        caps = view.capabilities.get(n)
        if caps is None or not caps.can(kind):
            return False
    return True


def channel_path(view: ResourceView, a: str, b: str, now: float, policy: PlannerPolicy) -> list[str]:
    """Lowest-cost channel path; ties go to the lexicographically smaller node sequence."""
    adj: dict = {}
    for ch in view.channels.values():
        if not ch.available(now):
            continue
        f = 1.0 - 0.75 * ch.q_depol
        w = (-math.log(f) if f > 0 else math.inf) + policy.epsilon * ch.latency
        adj.setdefault(ch.a, []).append((ch.b, w))
        adj.setdefault(ch.b, []).append((ch.a, w))
    return _dijkstra(adj, a, b)


def _dijkstra(adj: dict, a: str, b: str) -> list[str]:
    if a == b:
        return [a]
    heap = [(0.0, (node_key(a),), (a,))]
    best: dict = {}
    while heap:
        d, keys, path = heapq.heappop(heap)
        u = path[-1]
        if u in best:
            continue
        best[u] = d
        if u == b:
            return list(path)
        for v, w in adj.get(u, ()):
            if v not in best and math.isfinite(w):
                heapq.heappush(heap, (d + w, keys + (node_key(v),), path + (v,)))
    raise NoRoute(f"no route {a} -> {b}")


def _segment(b: _Builder, left: str, center: str, right: str):
    """One Midpoint-style segment between ``left`` and ``right`` via ``center``."""
    v = b.view
    for kind in (TaskKind.Midpoint, TaskKind.MidpointSource):
        if _can(v, kind, left, center, right):
            sl, sr = b.slot(left), b.slot(right)
            t = b.add(kind, (left, center, right), params={"slots": (sl, sr)})
            rid = t.outputs[0]
            b.ends[rid] = (left, right)
            return [(rid, left, right)]
    # no midpoint capability: two direct hops
    return _hop(b, left, center) + _hop(b, center, right)


def _hop(b: _Builder, src: str, dst: str):
    if not _can(b.view, TaskKind.SendQubit, src, dst):
        raise Incapable(f"no entangling task across {src}-{dst}")
    s1, s2 = b.slot(src), b.slot(dst)
    t = b.add(TaskKind.SendQubit, (src, dst), params={"prepare": True, "slots": (s1, s2)})
    rid = t.outputs[0]
    b.ends[rid] = (src, dst)
    return [(rid, src, dst)]


def _swap_tree(b: _Builder, segs: list) -> tuple:
    """Join consecutive segments with a balanced tree of swaps."""
    if len(segs) == 1:
        return segs[0]
    mid = len(segs) // 2
    left = _swap_tree(b, segs[:mid])
    right = _swap_tree(b, segs[mid:])
    lr, la, lb = left
    rr, ra, rb = right
    assert lb == ra
    if not _can(b.view, TaskKind.Swap, lb):
        raise Incapable(f"node {lb} cannot swap")
    t = b.add(TaskKind.Swap, (la, lb, rb), inputs=(lr, rr))
    rid = t.outputs[0]
    b.ends[rid] = (la, rb)
    return rid, la, rb


def _purify_tree(b: _Builder, recs: list, a: str, z: str) -> str:
    """Symmetric rounds: pair up equal-depth copies until one remains."""
    level = list(recs)
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level), 2):
            t = b.add(TaskKind.Purify, (a, z), inputs=(level[i], level[i + 1]))
            b.ends[t.outputs[0]] = (a, z)
            nxt.append(t.outputs[0])
        level = nxt
    return level[0]


def _chain(b: _Builder, path: list[str]):
    segs = []
    i = 0
    n = len(path) - 1
    while i < n:
        if i + 2 <= n:
            segs += _segment(b, path[i], path[i + 1], path[i + 2])
            i += 2
        else:
            segs += _hop(b, path[i], path[i + 1])
            i += 1
    return _swap_tree(b, segs)


def _bell_from_channels(b: _Builder, path: list[str], rounds: int) -> str:
    copies = [_chain(b, path)[0] for _ in range(2 ** rounds)]
    if rounds and not _can(b.view, TaskKind.Purify, path[0], path[-1]):
        raise Incapable(f"nodes {path[0]},{path[-1]} cannot purify")
    return _purify_tree(b, copies, path[0], path[-1])


def preshared_route(view: ResourceView, a: str, z: str, now: float, saga_id: str = "") -> tuple:
    """Path through the entanglement graph and the candidate records per hop."""
    per: dict = {}
    for rec in view.entanglement.values():
        if not rec.bipartite or not lockable(view, rec.id, saga_id) or rec.lock is not None:
            continue
        u, w = sorted(rec.nodes(), key=node_key)
        f = view.fidelity_at(rec, now)
        if f <= 0.25:
            continue
        per.setdefault((u, w), []).append((-f, rec.id))
    adj: dict = {}
    for (u, w), lst in per.items():
        lst.sort()
        cost = -math.log(-lst[0][0])
        adj.setdefault(u, []).append((w, cost))
        adj.setdefault(w, []).append((u, cost))
    path = _dijkstra(adj, a, z)
    hops = [per[tuple(sorted((p, q), key=node_key))] for p, q in zip(path, path[1:])]
    return path, [[rid for _, rid in lst] for lst in hops]


def _bell_from_preshared(b: _Builder, path: list[str], hops: list, rounds: int) -> str:
    k = 2 ** rounds
    segs = []
    for (u, w), cands in zip(zip(path, path[1:]), hops):
        if len(cands) < k:
            raise Infeasible(f"only {len(cands)} records on {u}-{w}")
        chosen = cands[:k]
        for rid in chosen:
            b.ends[rid] = (u, w)
        if rounds and not _can(b.view, TaskKind.Purify, u, w):
            raise Incapable(f"nodes {u},{w} cannot purify")
        segs.append((_purify_tree(b, chosen, u, w), u, w))
    return _swap_tree(b, segs)[0]


def _choose(candidates, view, now, policy, min_f):
    """First candidate saga whose estimate meets ``min_f``."""
    last = None
    for make in candidates:
        try:
            s = make()
        except (Infeasible, Incapable) as e:
            last = e
            continue
        f, t = estimate(s, view, now, policy)
        s = _with_estimate(s, f, t)
        if f >= min_f - 1e-12:
            return s
        last = Infeasible(f"predicted fidelity {f:.6f} below {min_f}")
    raise last or Infeasible("no candidate")


def _with_estimate(s: Saga, f: float, t: float) -> Saga:
    from dataclasses import replace

    return replace(s, f_pred=f, t_pred=t)


def plan(
    o: Objective,
    view: ResourceView,
    policy: PlannerPolicy = PlannerPolicy(),
    now: float = 0.0,
    saga_id: str | None = None,
    mode: str | None = None,
) -> Saga:
    """Turn an objective into a saga using only the planner's view."""
    sid = saga_id or f"{o.id}#1"
    mode = mode or o.mode or "orchestration"
    for n in o.targets:
        if n not in view.capabilities:
            raise NoRoute(f"unknown node {n}")
    if o.kind == ObjectiveKind.SendClassical:
        a, z = o.targets
        view.latency(a, z) if a != z else None
        b = _Builder(view, sid, policy)
        b.add(TaskKind.ClassicalSend, (a, z), params={"payload": o.payload or "msg"})
        s = b.saga(o, ("none", ""), mode)
        f, t = estimate(s, view, now, policy)
        return _with_estimate(s, f, t)
    if o.kind == ObjectiveKind.EstablishBell:
        return _plan_bell(o, view, policy, now, sid, mode)
    if o.kind == ObjectiveKind.SendQubit:
        return _plan_send(o, view, policy, now, sid, mode)
    return _plan_graph(o, view, policy, now, sid, mode)


def _bell_candidates(o, view, policy, now, sid, mode, a, z, tail=None):
    """Saga factories for a Bell pair a-z, most preferred first."""
    R = policy.purify_target_rounds
    out = []
    if policy.prefer_preshared:
        try:
            path, hops = preshared_route(view, a, z, now, sid)
        except NoRoute:
            path = None
        if path:
            for r in range(R + 1):
                def make(r=r):
                    b = _Builder(view, sid, policy)
                    rid = _bell_from_preshared(b, path, hops, r)
                    return _finish(b, o, rid, mode, tail)
                out.append(make)
    try:
        cpath = channel_path(view, a, z, now, policy)
    except NoRoute:
        cpath = None
    if cpath:
        for r in range(R + 1):
            def make(r=r):
                b = _Builder(view, sid, policy)
                rid = _bell_from_channels(b, cpath, r)
                return _finish(b, o, rid, mode, tail)
            out.append(make)
    if not out:
        raise NoRoute(f"no route {a} -> {z}")
    return out


def _finish(b: _Builder, o, rid, mode, tail):
    if tail is None:
        return b.saga(o, ("record", rid), mode)
    return tail(b, rid)


def _plan_bell(o, view, policy, now, sid, mode):
    a, z = o.targets
    if a == z:
        raise NoRoute("Bell pair needs two distinct nodes")
    return _choose(_bell_candidates(o, view, policy, now, sid, mode, a, z), view, now, policy, o.min_fidelity)


def _plan_send(o, view, policy, now, sid, mode):
    a, z = o.targets
    options = []
    if policy.prefer_preshared:
        def teleport_tail(b, rid):
            if not _can(view, TaskKind.Teleport, a, z):
                raise Incapable(f"teleport {a}->{z} not offered")
            t = b.add(TaskKind.Teleport, (a, z), inputs=(rid,))
            return b.saga(o, ("payload", t.id), mode)

        try:
            path, hops = preshared_route(view, a, z, now, sid)
        except NoRoute:
            path = None
        if path:
            def make_tp():
                b = _Builder(view, sid, policy)
                rid = _bell_from_preshared(b, path, hops, 0)
                return teleport_tail(b, rid)
            options.append(make_tp)

    try:
        cpath = channel_path(view, a, z, now, policy)
    except NoRoute:
        cpath = None
    if cpath:
        def make_chain():
            b = _Builder(view, sid, policy)
            prev = ()
            t = None
            for u, w in zip(cpath, cpath[1:]):
                t = b.add(TaskKind.SendQubit, (u, w), params={"data": True}, after=prev)
                prev = (t.id,)
            return b.saga(o, ("payload", t.id), mode)
        options.append(make_chain)
    if not options:
        raise NoRoute(f"no route {a} -> {z}")
    best = None
    err = None
    for make in options:
        try:
            s = make()
        except (Infeasible, Incapable) as e:
            err = e
            continue
        f, t = estimate(s, view, now, policy)
        s = _with_estimate(s, f, t)
        if best is None or f > best.f_pred:
            best = s
    if best is None:
        raise err
    if best.f_pred < o.min_fidelity - 1e-12:
        raise Infeasible(f"predicted fidelity {best.f_pred:.6f} below {o.min_fidelity}")
    return best


def _is_forest(g: GraphState) -> bool:
    comps = g.components()
    return len(g.edges) == len(g.vertices) - len(comps)


def _plan_graph(o, view, policy, now, sid, mode):
    nodes = list(o.targets)
    if len(set(nodes)) != len(nodes) or len(nodes) < 2:
        raise Infeasible("graph state needs distinct target nodes")
    vs = {n: VertexRef(n, 0) for n in nodes}
    target = GraphState.from_edges(vs.values(), [(vs[u], vs[w]) for u, w in o.graph])
    if len(target.components()) != 1:
        raise Infeasible("target graph must be connected")
    lc_at = None
    build = target
    if not _is_forest(target):
        for v in target.sorted_vertices():
            if _is_forest(local_complement(target, v)):
                lc_at, build = v, local_complement(target, v)
                break
        else:
            raise Infeasible("target graph is not a tree up to one local complementation")
    # BFS from the smallest node so each new edge hangs off the built part
    root = min(nodes, key=node_key)
    order = []
    seen = {root}
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            for w in sorted((x.node for x in build.neighbors(vs[u])), key=node_key):
                if w not in seen:
                    seen.add(w)
                    order.append((u, w))
                    nxt.append(w)
        frontier = nxt

    def make():
        b = _Builder(view, sid, policy)
        label: dict = {}  # node -> its vertex in the growing record
        current = None
        for u, w in order:
            rid = _sub_bell(b, u, w, now)
            vu, vw = _pair_vertices(b, view, rid, u, w)
            if current is None:
                current = rid
                label[u], label[w] = vu, vw
                continue
            t = b.add(TaskKind.GraphMerge, (u,), inputs=(current, rid),
                      params={"v1": str_vertex(label[u]), "v2": str_vertex(vu)})
            current = t.outputs[0]
            label[w] = vw
        if lc_at is not None:
            n = lc_at.node
            t = b.add(TaskKind.GraphLC, (n,), inputs=(current,), params={"v": str_vertex(label[n])})
            current = t.outputs[0]
        return b.saga(o, ("record", current), mode)

    return _choose([make], view, now, policy, o.min_fidelity)


def str_vertex(v: VertexRef) -> str:
    return f"{v.node}:{v.slot}"


def _sub_bell(b: _Builder, u: str, w: str, now: float) -> str:
    """One unpurified Bell pair u-w inside an existing builder."""
    if b.policy.prefer_preshared:
        try:
            path, hops = preshared_route(b.view, u, w, now, b.saga_id)
        except NoRoute:
            path = None
        if path:
            # records already claimed by this saga are not candidates again
            hops = [[r for r in h if r not in b.ends] for h in hops]
            if all(hops):
                return _bell_from_preshared(b, path, hops, 0)
    return _bell_from_channels(b, channel_path(b.view, u, w, now, b.policy), 0)


def _pair_vertices(b: _Builder, view, rid, u, w):
    """Vertices of the Bell pair ``rid`` at ``u`` and ``w``."""
    if rid in view.entanglement:
        rec = view.entanglement[rid]
        return rec.vertex_at(u), rec.vertex_at(w)
    g = _planned_graph(b, view, rid)
    by_node = {v.node: v for v in g.vertices}
    return by_node[u], by_node[w]


def _planned_graph(b: _Builder, view, rid) -> GraphState:
    """Graph a planned record will have, replaying the builder's tasks."""
    if rid in view.entanglement:
        return view.entanglement[rid].graph
    t = next(t for t in b.tasks if rid in t.outputs)
    k = t.kind
    if k in (TaskKind.Midpoint, TaskKind.MidpointSource):
        left, _, right = t.participants
        sl, sr = t.params["slots"]
        return bell_graph(VertexRef(left, sl), VertexRef(right, sr))
    if k == TaskKind.SendQubit:
        s1, s2 = t.params["slots"]
        return bell_graph(VertexRef(t.participants[0], s1), VertexRef(t.participants[1], s2))
    if k == TaskKind.Swap:
        left, _, right = t.participants
        ga = _planned_graph(b, view, t.inputs[0])
        gb = _planned_graph(b, view, t.inputs[1])
        va = next(v for v in ga.vertices if v.node == left)
        vb = next(v for v in gb.vertices if v.node == right)
        return bell_graph(va, vb)
    if k == TaskKind.Purify:
        return _planned_graph(b, view, t.inputs[0])
    raise PlanError(f"cannot infer graph of {rid}")


# ---------------------------------------------------------------------------
# estimation

def estimate(s: Saga, view: ResourceView, now: float = 0.0, policy: PlannerPolicy = PlannerPolicy()):
    """Predicted (delivered fidelity, duration) of ``s`` run alone from ``now``.

    Walks the DAG with forced successes through the same timing model the
    engine uses; heralded tasks are stretched by their expected number of
    attempts unless ``policy.expected_retries`` is off.
    """
    if not s.tasks:
        if s.deliver[0] == "record":
            rec = view.record(s.deliver[1])
            return view.fidelity_at(rec, now), 0.0
        return 1.0, 0.0
    from .engine import simulate_saga

    return simulate_saga(s, view, now, policy)


# ---------------------------------------------------------------------------
# resource monitor

@dataclass(frozen=True)
class MaintainedPair:
    a: str
    b: str
    low: int = 1
    high: int = 2
    min_fidelity: float = 0.0
    period: float = 1.0

    def __post_init__(self) -> None:
        if self.low < 0 or self.high < self.low:
            raise ValueError(f"maintained pair {self.a}-{self.b}: need 0 <= low <= high")
        if not self.period > 0:
            raise ValueError(f"maintained pair {self.a}-{self.b}: period must be positive")


MONITOR_PRIORITY = 0


def usable_records(view: ResourceView, pair: MaintainedPair, now: float) -> list[str]:
    want = {pair.a, pair.b}
    out = []
    for rec in view.entanglement.values():
        if rec.lock is None and rec.bipartite and rec.nodes() == want:
            if view.fidelity_at(rec, now) >= pair.min_fidelity:
                out.append(rec.id)
    return sorted(out)


def monitor_tick(
    view: ResourceView,
    pairs,
    now: float,
    in_flight: dict | None = None,
    tag: str = "0",
) -> list[Objective]:
    """Replenishment objectives for maintained pairs that ran low."""
    in_flight = in_flight or {}
    out = []
    for pair in pairs:
        have = len(usable_records(view, pair, now))
        if have >= pair.low:
            continue
        key = (pair.a, pair.b)
        need = pair.high - have - in_flight.get(key, 0)
        for k in range(max(0, need)):
            out.append(
                Objective(
                    id=f"mon-{pair.a}-{pair.b}-{tag}-{k}",
                    kind=ObjectiveKind.EstablishBell,
                    targets=(pair.a, pair.b),
                    min_fidelity=pair.min_fidelity,
                    priority=MONITOR_PRIORITY,
                    arrival=now,
                )
            )
    return out


def fidelity_of(q) -> float:
    return q.fidelity if isinstance(q, BellDiag) else float(q)
