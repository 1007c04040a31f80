"""Deterministic discrete-event engine.

Every node owns a replica of the resource view, a single-server task queue
and, when it initiates, the executors of its sagas. Classical messages take
the shortest-path latency of the classical topology; update broadcasts reach
each node at its shortest-path distance from the sender.

Events are processed strictly in (time, seq) order. Randomness is a keyed
hash of (seed, node, saga, task, attempt), so one saga's draws do not depend
on what else happens in the network.
"""
from __future__ import annotations

import hashlib
import heapq
import math
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal

from .graphstate import node_key
from .kinds import HERALDED_KINDS, TaskKind
from .noisemodel import BellDiag, depolarize, memory_q
from .resources import (
    AddRecord,
    Lock,
    ReplaceRecord,
    ResourceError,
    ResourceView,
    Unlock,
    Update,
    advertise_capabilities,
    AddChannel,
    AddLink,
)
from .saga import (
    MaintainedPair,
    Objective,
    ObjectiveKind,
    PlanError,
    PlannerPolicy,
    Saga,
    monitor_tick,
    plan,
)
from .tasks import Outcome, TaskError, apply_effect, duration, success_probability


class EngineError(RuntimeError):
    pass


def fmt(x) -> str:
    """Locale-independent positional decimal, exact to the float's repr."""
    t = type(x)
    if t is str:
        return x
    if t is float:
        r = repr(x)
        if "e" not in r or math.isinf(x) or math.isnan(x):
            return r
        return format(Decimal(r), "f")
    if t is bool:
        return "1" if x else "0"
    return str(x)


_SPLIT = re.compile(r"(\d+)")


def natural_key(s: str) -> tuple:
    return tuple(int(p) if p.isdigit() else p for p in _SPLIT.split(s))


def unit_draw(seed: int, *parts) -> float:
    key = "|".join(str(p) for p in (seed,) + parts).encode()
    h = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(h, "big") / 2.0**64


def expected_attempts(p: float, m: int) -> float:
    if p >= 1.0:
        return 1.0
    if p <= 0.0:
        return float(m)
    return (1.0 - (1.0 - p) ** m) / p


@dataclass
class Msg:
    kind: str
    src: str
    sent: float
    saga: str | None = None
    data: dict = field(default_factory=dict)


@dataclass
class ObjectiveState:
    obj: Objective
    node: str
    sagas: int = 0
    failures: int = 0
    task_attempts: int = 0
    status: str = "pending"
    completed_at: float | None = None
    fidelity: float | None = None
    parked_on: str | None = None
    monitor_key: tuple | None = None


@dataclass
class Execution:
    """Initiator-side state of one saga."""

    saga: Saga
    ostate: ObjectiveState
    phase: str = "locking"
    lock_plan: list = field(default_factory=list)
    lock_idx: int = 0
    held: list = field(default_factory=list)
    done: set = field(default_factory=set)
    sent: set = field(default_factory=set)
    attempts: dict = field(default_factory=dict)
    payloads: dict = field(default_factory=dict)
    acks: set = field(default_factory=set)
    started_at: float = 0.0


@dataclass
class Participation:
    """Choreography state of a saga at one responsible node."""

    saga: Saga
    done: set = field(default_factory=set)
    queued: set = field(default_factory=set)
    payloads: dict = field(default_factory=dict)


@dataclass
class NodeRuntime:
    id: str
    view: ResourceView
    queue: list = field(default_factory=list)
    busy: tuple | None = None
    dispatch_pending: bool = False
    finished: set = field(default_factory=set)
    aborted: set = field(default_factory=set)
    deferred: dict = field(default_factory=dict)
    part: dict = field(default_factory=dict)
    pending_acks: dict = field(default_factory=dict)


@dataclass
class RunResult:
    trace: list
    views: dict
    metrics: dict
    objectives: dict

    def trace_text(self) -> str:
        return "".join(line + "\n" for line in self.trace)

    def metrics_text(self) -> str:
        return "".join(f"metric={k} value={fmt(v)}\n" for k, v in self.metrics.items())


class Engine:
    def __init__(
        self,
        views: dict,
        policy: PlannerPolicy = PlannerPolicy(),
        seed: int = 0,
        mode: str | None = None,
        horizon: float = math.inf,
        monitor: tuple = (),
        *,
        estimate: bool = False,
        tracing: bool = True,
    ):
        self.policy = policy
        self.seed = seed
        self.mode = mode
        self.horizon = horizon
        self.monitor = tuple(monitor)
        self.estimating = estimate
        self.tracing = tracing
        self.nodes = {n: NodeRuntime(n, v) for n, v in views.items()}
        self.order = sorted(self.nodes, key=node_key)
        self._lat_view = next(iter(views.values())) if views else ResourceView()
        self.now = 0.0
        self.heap: list = []
        self.seq = 0
        self.trace: list[str] = []
        self.messages: dict = {}
        self.events = 0
        self.execs: dict = {}
        self.objectives: dict = {}
        self.saga_of_obj: dict = {}
        self.monitor_flight: dict = {}
        self.parked: dict = {}
        self.last_done = None
        self._handlers = {
            "LockRequest": self._lock_request,
            "LockReply": self._on_lock_reply,
            "LockRelease": self._on_lock_release,
            "TaskStart": self._on_task_start,
            "TaskComplete": self._on_task_complete,
            "SagaStart": self._on_saga_start,
            "ClassicalDeliver": self._on_classical,
            "Abort": self._on_abort,
            "AbortAck": self._on_abort_ack,
        }

    # -- plumbing -----------------------------------------------------------

    def latency(self, a: str, b: str) -> float:
        try:
            return self._lat_view.latency(a, b)
        except ResourceError as e:
            raise EngineError(str(e)) from None

    def push(self, t: float, handler: str, node: str, data) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (t, self.seq, handler, node, data))

    def log(self, node: str, event: str, saga: str | None, /, **detail) -> None:
        if not self.tracing:
            return
        d = ",".join([f"{k}={v}" if type(v) is str else f"{k}={fmt(v)}" for k, v in detail.items()])
        self.trace.append(f"t={fmt(self.now)} node={node} kind={event} saga={saga or '-'} detail={d}")

    def send(self, src: str, dst: str, kind: str, saga: str | None = None, **data) -> None:
        self.messages[kind] = self.messages.get(kind, 0) + 1
        self.push(self.now + self.latency(src, dst), "msg", dst, Msg(kind, src, self.now, saga, data))

    def publish(self, node: str, changes) -> None:
        if not changes:
            return
        rt = self.nodes[node]
        ups = rt.view.emit(node, changes)
        self._after_updates(rt, ups)
        if self.estimating:
            return
        msg = Msg("BroadcastUpdate", node, self.now, None, {"updates": ups})
        for other in self.order:
            if other == node:
                continue
            self.messages["BroadcastUpdate"] = self.messages.get("BroadcastUpdate", 0) + 1
            self.push(self.now + self.latency(node, other), "msg", other, msg)

    # -- main loop ----------------------------------------------------------

    def submit(self, obj: Objective) -> None:
        node = obj.origin
        if node not in self.nodes:
            raise EngineError(f"objective {obj.id}: unknown initiator {node}")
        self.push(obj.arrival, "submit", node, obj)

    def run(self) -> None:
        for pair in self.monitor:
            self.push(0.0, "monitor", pair.a, (pair, 0))
        while self.heap:
            t, _, handler, node, data = self.heap[0]
            if t > self.horizon:
                break
            heapq.heappop(self.heap)
            self.now = t
            self.events += 1
            getattr(self, "_on_" + handler)(node, data)

    # -- objectives and planning ------------------------------------------

    def _on_submit(self, node: str, obj: Objective, monitor_key=None) -> None:
        st = ObjectiveState(obj, node, monitor_key=monitor_key)
        self.objectives[obj.id] = st
        self.log(node, "ObjectiveSubmit", None, objective=obj.id, kind=obj.kind.value,
                 targets="+".join(obj.targets), priority=obj.priority)
        self._plan(st)

    def _plan(self, st: ObjectiveState) -> None:
        st.sagas += 1
        sid = f"{st.obj.id}#{st.sagas}"
        rt = self.nodes[st.node]
        try:
            s = plan(st.obj, rt.view, self.policy, self.now, saga_id=sid, mode=self.mode)
        except PlanError as e:
            self.log(st.node, "PlanFailed", sid, reason=type(e).__name__)
            self._finish_objective(st, "failed")
            return
        self.log(st.node, "Plan", sid, tasks=len(s.tasks), mode=s.mode,
                 f_pred=s.f_pred, t_pred=s.t_pred)
        self.start_saga(s, st)

    def start_saga(self, s: Saga, st: ObjectiveState) -> None:
        ex = Execution(s, st, started_at=self.now)
        self.execs[s.id] = ex
        rt = self.nodes[st.node]
        by_home: dict = {}
        for rid in s.external_inputs():
            by_home.setdefault(rt.view.record(rid).home, []).append(rid)
        ex.lock_plan = [(h, by_home[h]) for h in sorted(by_home, key=node_key)]
        self._next_lock(ex)

    def _next_lock(self, ex: Execution) -> None:
        if ex.lock_idx < len(ex.lock_plan):
            home, ids = ex.lock_plan[ex.lock_idx]
            self.send(ex.ostate.node, home, "LockRequest", ex.saga.id, ids=tuple(ids))
            return
        ex.phase = "running"
        s = ex.saga
        init = ex.ostate.node
        self.log(init, "SagaStart", s.id, mode=s.mode, tasks=len(s.tasks), priority=s.priority)
        if not s.tasks:
            self._complete(ex)
        elif s.mode == "orchestration":
            self._orchestrate(ex)
        else:
            for n in s.responsible_nodes():
                self.send(init, n, "SagaStart", s.id)

    # -- locks ----------------------------------------------------------------

    def _lock_request(self, rt: NodeRuntime, m: Msg) -> None:
        for rid in m.data["ids"]:
            rec = rt.view.entanglement.get(rid)
            if rec is None:
                if rid in rt.view.tombstones:
                    return self._lock_reply(rt, m, False, rid)
                # not seen yet: hold the request until the record arrives
                rt.deferred.setdefault(rid, []).append(m)
                return
            if rec.lock not in (None, m.saga):
                return self._lock_reply(rt, m, False, rid)
        changes = [
            Lock(rid, m.saga) for rid in m.data["ids"] if rt.view.entanglement[rid].lock != m.saga
        ]
        self.log(rt.id, "LockGrant", m.saga, ids="+".join(m.data["ids"]))
        self.publish(rt.id, changes)
        self._lock_reply(rt, m, True, "")

    def _lock_reply(self, rt: NodeRuntime, m: Msg, ok: bool, blocking: str) -> None:
        if not ok:
            self.log(rt.id, "LockDeny", m.saga, blocking=blocking)
        self.send(rt.id, m.src, "LockReply", m.saga, granted=ok, blocking=blocking, ids=m.data["ids"])

    def _on_lock_reply(self, rt: NodeRuntime, m: Msg) -> None:
        ex = self.execs.get(m.saga)
        if ex is None or ex.phase != "locking":
            return
        if m.data["granted"]:
            ex.held += list(m.data["ids"])
            ex.lock_idx += 1
            self._next_lock(ex)
            return
        ex.phase = "denied"
        self._release(ex)
        st = ex.ostate
        st.parked_on = m.data["blocking"]
        self.log(rt.id, "SagaDeferred", ex.saga.id, blocking=st.parked_on)
        self.parked.setdefault(rt.id, []).append(st)
        self._check_parked(rt)

    def _check_parked(self, rt: NodeRuntime) -> None:
        waiting = self.parked.get(rt.id)
        if not waiting:
            return
        for st in list(waiting):
            rec = rt.view.entanglement.get(st.parked_on)
            if rec is None or rec.lock is None:
                waiting.remove(st)
                st.parked_on = None
                self._plan(st)

    def _release(self, ex: Execution) -> None:
        s = ex.saga
        init = ex.ostate.node
        homes = {h for h, _ in ex.lock_plan}
        targets = sorted(set(s.participants()) | homes, key=node_key)
        for n in targets:
            self.send(init, n, "LockRelease", s.id)

    def _on_lock_release(self, rt: NodeRuntime, m: Msg) -> None:
        rt.finished.add(m.saga)
        rt.aborted.add(m.saga)
        ent = rt.view.entanglement
        self._unlock_finished(rt, [ent[r] for r in rt.view.held_by(m.saga)])

    def _unlock_finished(self, rt: NodeRuntime, recs) -> None:
        changes = [
            Unlock(r.id) for r in recs
            if r.lock is not None and r.lock in rt.finished and r.home == rt.id
            and rt.view.entanglement.get(r.id) is r
        ]
        if changes:
            self.log(rt.id, "Unlock", None, ids="+".join(c.id for c in changes))
            self.publish(rt.id, changes)

    def _after_updates(self, rt: NodeRuntime, ups) -> None:
        touched = []
        for u in ups:
            c = u.change
            if isinstance(c, (AddRecord, ReplaceRecord)):
                touched.append(c.record.id)
        if not touched or self.estimating:
            return
        recs = [rt.view.entanglement[r] for r in touched if r in rt.view.entanglement]
        if rt.finished:
            self._unlock_finished(rt, recs)
        for rid in touched:
            for m in rt.deferred.pop(rid, ()):
                self._lock_request(rt, m)

    # -- messages -----------------------------------------------------------

    def _on_msg(self, node: str, m: Msg) -> None:
        rt = self.nodes[node]
        if m.kind == "BroadcastUpdate":
            ups = m.data["updates"]
            for u in ups:
                rt.view.apply(u)
            self.log(node, "BroadcastUpdate", None, src=m.src, sent=m.sent, n=len(ups))
            self._after_updates(rt, ups)
            self._check_parked(rt)
            return
        self.log(node, m.kind, m.saga, src=m.src, sent=m.sent, **_brief(m.data))
        self._handlers[m.kind](rt, m)

    # -- node task queue ----------------------------------------------------

    def enqueue(self, rt: NodeRuntime, s: Saga, tid: str, attempt: int, carry: dict) -> None:
        idx = int(tid[1:]) if tid[1:].isdigit() else 0
        key = (-s.priority, self.now, natural_key(s.id), idx)
        heapq.heappush(rt.queue, (key, s.id, tid, attempt, carry))
        self._wake(rt)

    def _wake(self, rt: NodeRuntime) -> None:
        if rt.busy is None and rt.queue and not rt.dispatch_pending:
            rt.dispatch_pending = True
            self.push(self.now, "dispatch", rt.id, None)

    def _saga(self, rt: NodeRuntime, sid: str) -> Saga | None:
        if sid in self.execs:
            return self.execs[sid].saga
        p = rt.part.get(sid)
        return p.saga if p else None

    def _on_dispatch(self, node: str, _) -> None:
        rt = self.nodes[node]
        rt.dispatch_pending = False
        while rt.busy is None and rt.queue:
            _, sid, tid, attempt, carry = heapq.heappop(rt.queue)
            if sid in rt.aborted:
                continue
            s = self._saga(rt, sid)
            t = s.task(tid)
            dur = duration(t, rt.view, self.policy.timing)
            if self.estimating and self.policy.expected_retries and t.kind in HERALDED_KINDS:
                if not t.inputs:
                    dur *= expected_attempts(success_probability(t, rt.view), t.max_attempts)
            rt.busy = (sid, tid)
            self.log(node, "TaskBegin", sid, task=tid, kind=t.kind.value, attempt=attempt, duration=dur)
            self.push(self.now + dur, "finish", node, (sid, tid, attempt, carry))

    def _on_finish(self, node: str, data) -> None:
        sid, tid, attempt, carry = data
        rt = self.nodes[node]
        rt.busy = None
        s = self._saga(rt, sid)
        t = s.task(tid)
        st = self.execs[sid].ostate if sid in self.execs else None
        if st is not None:
            st.task_attempts += 1
        rand = unit_draw(self.seed, node, sid, tid, attempt)
        try:
            eff = apply_effect(t, rt.view, self.now, rand, force_success=self.estimating, carry=carry)
        except (TaskError, ResourceError) as e:
            self.log(node, "TaskError", sid, task=tid, reason=type(e).__name__)
            eff = None
        if eff is not None:
            self.log(
                node, "TaskEffect", sid, task=tid, kind=t.kind.value, attempt=attempt,
                outcome=eff.outcome.value, created="+".join(eff.created),
                consumed="+".join(eff.consumed),
            )
            self.publish(node, eff.changes)
        outcome = eff.outcome if eff is not None else Outcome.FAILURE
        payload = eff.payload if eff is not None else {}
        if sid in rt.pending_acks:
            init = rt.pending_acks.pop(sid)
            self.send(node, init, "AbortAck", sid)
        elif sid not in rt.aborted:
            if t.kind in (TaskKind.ClassicalSend,) and outcome == Outcome.SUCCESS:
                dst = t.participants[1]
                self.send(node, dst, "ClassicalDeliver", sid, task=tid, attempt=attempt)
            else:
                self._report(rt, s, tid, attempt, outcome, payload)
        self._wake(rt)

    def _on_classical(self, rt: NodeRuntime, m: Msg) -> None:
        s = self._saga(rt, m.saga)
        if s is None:
            # the destination need not take part in the saga
            s = self._saga_anywhere(m.saga)
        if s is None or m.saga in rt.aborted:
            return
        self._report(rt, s, m.data["task"], m.data["attempt"], Outcome.SUCCESS, {})

    def _saga_anywhere(self, sid: str) -> Saga | None:
        if sid in self.execs:
            return self.execs[sid].saga
        for rt in self.nodes.values():
            if sid in rt.part:
                return rt.part[sid].saga
        return None

    def _report(self, rt: NodeRuntime, s: Saga, tid: str, attempt: int, outcome: Outcome, payload) -> None:
        """Tell whoever needs to know that an attempt of ``tid`` ended."""
        if s.mode == "orchestration":
            self.send(rt.id, s.initiator, "TaskComplete", s.id, task=tid, attempt=attempt,
                      outcome=outcome.value, payload=payload)
            return
        t = s.task(tid)
        if outcome == Outcome.HERALDED_FAILURE and attempt < t.max_attempts:
            self.log(rt.id, "TaskRetry", s.id, task=tid, attempt=attempt + 1)
            self.enqueue(rt, s, tid, attempt + 1, self._carry_for(rt, s, tid))
            return
        if outcome != Outcome.SUCCESS:
            self.send(rt.id, s.initiator, "TaskComplete", s.id, task=tid, attempt=attempt,
                      outcome=Outcome.FAILURE.value, payload=payload)
            return
        dests = {s.task(d).responsible for d in s.dependents()[tid]}
        if tid in s.sinks():
            dests.add(s.initiator)
        for n in sorted(dests, key=node_key):
            self.send(rt.id, n, "TaskComplete", s.id, task=tid, attempt=attempt,
                      outcome=outcome.value, payload=payload)

    def _carry_for(self, rt: NodeRuntime, s: Saga, tid: str) -> dict:
        p = rt.part.get(s.id)
        carry: dict = {}
        for d in s.deps.get(tid, ()):
            carry.update((p.payloads if p else {}).get(d, {}))
        return carry

    # -- orchestration ------------------------------------------------------

    def _orchestrate(self, ex: Execution) -> None:
        s = ex.saga
        for t in s.tasks:
            if t.id in ex.sent:
                continue
            deps = s.deps.get(t.id, ())
            if all(d in ex.done for d in deps):
                carry: dict = {}
                for d in deps:
                    carry.update(ex.payloads.get(d, {}))
                ex.sent.add(t.id)
                ex.attempts[t.id] = 1
                self.send(ex.ostate.node, t.responsible, "TaskStart", s.id, task=t.id,
                          attempt=1, carry=carry)

    def _on_task_start(self, rt: NodeRuntime, m: Msg) -> None:
        if m.saga in rt.aborted:
            return
        s = self._saga_anywhere(m.saga)
        self.enqueue(rt, s, m.data["task"], m.data["attempt"], m.data["carry"])

    def _on_task_complete(self, rt: NodeRuntime, m: Msg) -> None:
        sid = m.saga
        tid = m.data["task"]
        outcome = Outcome(m.data["outcome"])
        ex = self.execs.get(sid)
        if ex is not None and ex.ostate.node == rt.id:
            self._initiator_complete(ex, tid, m.data["attempt"], outcome, m.data["payload"])
        p = rt.part.get(sid)
        if p is not None and sid not in rt.aborted and outcome == Outcome.SUCCESS:
            p.done.add(tid)
            p.payloads[tid] = m.data["payload"]
            self._chor_ready(rt, p)

    def _initiator_complete(self, ex: Execution, tid: str, attempt: int, outcome: Outcome, payload) -> None:
        if ex.phase != "running":
            return
        s = ex.saga
        if outcome == Outcome.SUCCESS:
            ex.done.add(tid)
            ex.payloads[tid] = payload
            if s.mode == "choreography":
                # only sinks report here; every sink done means the DAG is done
                if all(x in ex.done for x in s.sinks()):
                    self._complete(ex)
                return
            if len(ex.done) == len(s.tasks):
                self._complete(ex)
            else:
                self._orchestrate(ex)
            return
        t = s.task(tid)
        if outcome == Outcome.HERALDED_FAILURE and attempt < t.max_attempts:
            ex.attempts[tid] = attempt + 1
            carry: dict = {}
            for d in s.deps.get(tid, ()):
                carry.update(ex.payloads.get(d, {}))
            self.send(ex.ostate.node, t.responsible, "TaskStart", s.id, task=tid,
                      attempt=attempt + 1, carry=carry)
            return
        self._fail(ex, tid)

    # -- choreography -------------------------------------------------------

    def _on_saga_start(self, rt: NodeRuntime, m: Msg) -> None:
        s = self.execs[m.saga].saga
        p = rt.part.setdefault(m.saga, Participation(s))
        self._chor_ready(rt, p)

    def _chor_ready(self, rt: NodeRuntime, p: Participation) -> None:
        s = p.saga
        for t in s.tasks:
            if t.responsible != rt.id or t.id in p.queued:
                continue
            if all(d in p.done for d in s.deps.get(t.id, ())):
                p.queued.add(t.id)
                self.enqueue(rt, s, t.id, 1, self._carry_for(rt, s, t.id))

    # -- saga end -----------------------------------------------------------

    def _delivered_fidelity(self, ex: Execution) -> float | None:
        s = ex.saga
        view = self.nodes[ex.ostate.node].view
        kind, ref = s.deliver
        if kind == "record":
            rec = view.entanglement.get(ref)
            return None if rec is None else view.fidelity_at(rec, self.now)
        if kind == "payload":
            p = ex.payloads.get(ref, {})
            q = p.get("quality")
            if not isinstance(q, BellDiag):
                return None
            q = depolarize(q, memory_q(max(0.0, self.now - p["at"]), view.t_mem(p["node"])))
            return q.fidelity
        return 1.0

    def _complete(self, ex: Execution) -> None:
        ex.phase = "done"
        st = ex.ostate
        f = self._delivered_fidelity(ex)
        self.log(st.node, "SagaComplete", ex.saga.id, status="success",
                 fidelity=f if f is not None else "none", elapsed=self.now - st.obj.arrival)
        st.fidelity = f
        self.last_done = (self.now, f)
        self._release(ex)
        self._finish_objective(st, "success")

    def _fail(self, ex: Execution, tid: str) -> None:
        ex.phase = "aborting"
        init = ex.ostate.node
        self.log(init, "SagaAbort", ex.saga.id, task=tid)
        ex.acks = set(ex.saga.responsible_nodes())
        for n in sorted(ex.acks, key=node_key):
            self.send(init, n, "Abort", ex.saga.id)

    def _on_abort(self, rt: NodeRuntime, m: Msg) -> None:
        rt.aborted.add(m.saga)
        if rt.busy is not None and rt.busy[0] == m.saga:
            rt.pending_acks[m.saga] = m.src
        else:
            self.send(rt.id, m.src, "AbortAck", m.saga)

    def _on_abort_ack(self, rt: NodeRuntime, m: Msg) -> None:
        ex = self.execs[m.saga]
        ex.acks.discard(m.src)
        if ex.acks:
            return
        st = ex.ostate
        self.log(st.node, "SagaComplete", ex.saga.id, status="failure")
        self._release(ex)
        st.failures += 1
        if st.failures < self.policy.retry_cap:
            self._plan(st)
        else:
            self._finish_objective(st, "failed")

    def _finish_objective(self, st: ObjectiveState, status: str) -> None:
        st.status = status
        st.completed_at = self.now
        if st.monitor_key is not None:
            self.monitor_flight[st.monitor_key] -= 1

    # -- monitor ------------------------------------------------------------

    def _on_monitor(self, node: str, data) -> None:
        pair, tick = data
        rt = self.nodes[node]
        key = (pair.a, pair.b)
        objs = monitor_tick(rt.view, [pair], self.now, self.monitor_flight, tag=str(tick))
        for o in objs:
            self.monitor_flight[key] = self.monitor_flight.get(key, 0) + 1
            self.push(self.now, "monitor_submit", node, o)
        nxt = self.now + pair.period
        if nxt <= self.horizon:
            self.push(nxt, "monitor", node, (pair, tick + 1))

    def _on_monitor_submit(self, node: str, obj: Objective) -> None:
        self._on_submit(node, obj, monitor_key=(obj.targets[0], obj.targets[1]))

    # -- results ------------------------------------------------------------

    def metrics(self) -> dict:
        out: dict = {}
        sts = list(self.objectives.values())
        out["objectives.total"] = len(sts)
        out["objectives.completed"] = sum(1 for s in sts if s.status == "success")
        out["objectives.failed"] = sum(1 for s in sts if s.status == "failed")
        out["messages.total"] = sum(self.messages.values())
        for k in sorted(self.messages):
            out[f"messages.{k}"] = self.messages[k]
        out["events.total"] = self.events
        out["time.end"] = self.now
        for s in sorted(sts, key=lambda s: natural_key(s.obj.id)):
            p = f"objective.{s.obj.id}"
            out[f"{p}.success"] = 1 if s.status == "success" else 0
            out[f"{p}.sagas"] = s.sagas
            out[f"{p}.task_attempts"] = s.task_attempts
            if s.completed_at is not None:
                out[f"{p}.completion_time"] = s.completed_at - s.obj.arrival
            if s.fidelity is not None:
                out[f"{p}.fidelity"] = s.fidelity
        return out


def _brief(data: dict) -> dict:
    out = {}
    for k, v in data.items():
        if k in ("payload", "carry"):
            continue
        if isinstance(v, (tuple, list)):
            v = "+".join(map(str, v))
        out[k] = v
    return out


# ---------------------------------------------------------------------------

def bootstrap_view(scenario) -> ResourceView:
    """The view every node starts from: capabilities, topology, initial records."""
    v = ResourceView()
    for spec in scenario.nodes:
        v.apply(advertise_capabilities(spec.id, spec.caps()))
    seq = 0
    for ch in scenario.channels:
        seq += 1
        v.apply(Update("bootstrap", seq, AddChannel(ch)))
    for link in scenario.classical_links():
        seq += 1
        v.apply(Update("bootstrap", seq, AddLink(link)))
    for rec in scenario.entanglement:
        seq += 1
        v.apply(Update("bootstrap", seq, AddRecord(rec)))
    return v


def run(scenario, seed: int = 0, mode: str | None = None, *, tracing: bool = True) -> RunResult:
    """Simulate ``scenario`` and return trace, final views and metrics."""
    base = bootstrap_view(scenario)
    views = {spec.id: base.copy() for spec in scenario.nodes}
    eng = Engine(
        views, scenario.policy, seed, mode, scenario.horizon, scenario.monitor, tracing=tracing
    )
    for o in scenario.objectives:
        eng.submit(o)
    eng.run()
    return RunResult(eng.trace, {n: rt.view for n, rt in eng.nodes.items()}, eng.metrics(), eng.objectives)


def simulate_saga(s: Saga, view: ResourceView, now: float, policy: PlannerPolicy):
    """Run ``s`` alone on a scratch copy of ``view`` with forced successes.

    All nodes share the scratch view, so broadcasts are not simulated; their
    arrival never delays a task because control messages travel no faster.
    """
    scratch = view.copy()
    nodes = sorted(set(scratch.capabilities) | set(s.participants()) | {s.initiator}, key=node_key)
    eng = Engine({n: scratch for n in nodes}, policy, 0, s.mode, estimate=True, tracing=False)
    eng.now = now
    # stand-in objective; only its id and arrival are read
    obj = Objective(s.objective, ObjectiveKind.SendClassical, ("_", "_"), arrival=now)
    st = ObjectiveState(obj, s.initiator)
    eng.objectives[obj.id] = st
    eng.start_saga(s, st)
    eng.run()
    if eng.last_done is None:
        return 0.0, math.inf
    t_done, f = eng.last_done
    return (f if f is not None else 0.0), t_done - now
