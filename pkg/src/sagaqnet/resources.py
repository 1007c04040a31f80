"""Replicated resource views.

Every node keeps its own ``ResourceView``: the channel topology, classical
links, shared entanglement records and the advertised capabilities of all
nodes. Views change only by applying ``Update`` messages; each update carries
its origin node and a per-origin sequence number so duplicates and stale
copies are dropped.

Lock and unlock changes for a record are only ever issued by the record's
home node (lowest node id among its vertices), so a single arbiter decides
every grant. Lock state is kept in a table that tolerates a lock arriving
before its record, and removed record ids are tombstoned; with these two
rules the final view depends only on the set of updates, not on how updates
from different origins interleave.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Union

from .graphstate import GraphState, VertexRef, node_key
from .kinds import STORAGE_KINDS, TaskKind
from .noisemodel import BellDiag, NoiseParams, decay, scalar_decay


class ResourceError(KeyError):
    pass


def link_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if node_key(a) <= node_key(b) else (b, a)


@dataclass(frozen=True)
class ChannelEdge:
    a: str
    b: str
    length: float = 0.0
    p_loss: float = 0.0
    q_depol: float = 0.0
    latency: float = 0.0
    windows: tuple = ()

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValueError(f"channel endpoints must differ ({self.a})")
        for name in ("p_loss", "q_depol"):
            q = getattr(self, name)
            if not 0.0 <= q <= 1.0:
                raise ValueError(f"{name}={q} outside [0, 1]")
        if self.latency < 0:
            raise ValueError("negative channel latency")

    @property
    def key(self) -> tuple[str, str]:
        return link_key(self.a, self.b)

    def available(self, now: float) -> bool:
        if not self.windows:
            return True
        return any(start <= now <= end for start, end in self.windows)

    def other(self, node: str) -> str:
        return self.b if node == self.a else self.a


@dataclass(frozen=True)
class ClassicalLink:
    a: str
    b: str
    latency: float = 0.0

    def __post_init__(self) -> None:
        if self.latency < 0:
            raise ValueError("negative link latency")

    @property
    def key(self) -> tuple[str, str]:
        return link_key(self.a, self.b)


Quality = Union[BellDiag, float]


@dataclass(frozen=True)
class EntanglementRecord:
    id: str
    graph: GraphState
    quality: Quality
    created_at: float = 0.0
    lock: str | None = None
    version: int = 0

    def __post_init__(self) -> None:
        bipartite = len(self.graph.vertices) == 2
        if bipartite != isinstance(self.quality, BellDiag):
            raise ValueError(
                f"record {self.id}: Bell-diagonal quality is required exactly for 2-vertex graphs"
            )

    @property
    def bipartite(self) -> bool:
        return len(self.graph.vertices) == 2

    @property
    def vertices(self) -> list[VertexRef]:
        return self.graph.sorted_vertices()

    def nodes(self) -> set[str]:
        return self.graph.nodes()

    @property
    def home(self) -> str:
        return min(self.nodes(), key=node_key)

    def vertex_at(self, node: str) -> VertexRef:
        for v in self.vertices:
            if v.node == node:
                return v
        raise ResourceError(f"record {self.id} has no qubit at node {node}")

    def fidelity(self) -> float:
        return self.quality.fidelity if isinstance(self.quality, BellDiag) else self.quality


@dataclass(frozen=True)
class CapabilitySet:
    node: str
    tasks: frozenset = frozenset()
    noise: NoiseParams = NoiseParams()
    memory_slots: int = 0

    def __post_init__(self) -> None:
        if self.memory_slots < 0:
            raise ValueError("memory_slots must be non-negative")

    def can(self, kind: TaskKind) -> bool:
        return kind in self.tasks


# ---------------------------------------------------------------------------
# changes and updates

@dataclass(frozen=True)
class AddChannel:
    edge: ChannelEdge


@dataclass(frozen=True)
class RemoveChannel:
    a: str
    b: str


@dataclass(frozen=True)
class AddLink:
    link: ClassicalLink


@dataclass(frozen=True)
class RemoveLink:
    a: str
    b: str


@dataclass(frozen=True)
class AddRecord:
    record: EntanglementRecord


@dataclass(frozen=True)
class RemoveRecord:
    id: str


@dataclass(frozen=True)
class ReplaceRecord:
    record: EntanglementRecord


@dataclass(frozen=True)
class SetCapability:
    caps: CapabilitySet


@dataclass(frozen=True)
class Lock:
    id: str
    saga: str


@dataclass(frozen=True)
class Unlock:
    id: str


Change = Union[
    AddChannel, RemoveChannel, AddLink, RemoveLink, AddRecord, RemoveRecord,
    ReplaceRecord, SetCapability, Lock, Unlock,
]


@dataclass(frozen=True)
class Update:
    origin: str
    seq: int
    change: Change


APPLIED, STALE, CONFLICT = "applied", "stale", "conflict"


@dataclass
class ResourceView:
    channels: dict = field(default_factory=dict)
    classical: dict = field(default_factory=dict)
    entanglement: dict = field(default_factory=dict)
    capabilities: dict = field(default_factory=dict)
    seq: dict = field(default_factory=dict)
    locks: dict = field(default_factory=dict)
    tombstones: set = field(default_factory=set)
    pending: dict = field(default_factory=dict)
    conflicts: list = field(default_factory=list, compare=False, repr=False)
    _dist_cache: dict = field(default_factory=dict, compare=False, repr=False)
    # derived indexes: saga -> ids it holds, vertex -> number of records using it
    _held: dict = field(default_factory=dict, compare=False, repr=False)
    _slots: dict = field(default_factory=dict, compare=False, repr=False)
    _low: dict = field(default_factory=dict, compare=False, repr=False)  # node -> all below used

    def __post_init__(self) -> None:
        if not self._slots:
            for rec in self.entanglement.values():
                self._index(rec, +1)

    def copy(self) -> "ResourceView":
        return ResourceView(
            channels=dict(self.channels),
            classical=dict(self.classical),
            entanglement=dict(self.entanglement),
            capabilities=dict(self.capabilities),
            seq=dict(self.seq),
            locks=dict(self.locks),
            tombstones=set(self.tombstones),
            pending=dict(self.pending),
            # link changes rebind the cache, so sharing it is safe
            _dist_cache=self._dist_cache,
            _held={k: set(v) for k, v in self._held.items()},
            _slots=dict(self._slots),
            _low=dict(self._low),
        )

    def _index(self, rec: EntanglementRecord, sign: int, slots: bool = True) -> None:
        if rec.lock is not None:
            held = self._held.setdefault(rec.lock, set())
            if sign > 0:
                held.add(rec.id)
            else:
                held.discard(rec.id)
                if not held:
                    del self._held[rec.lock]
        if not slots:
            return
        slots = self._slots
        for v in rec.graph.vertices:
            n = slots.get(v, 0) + sign
            if n:
                slots[v] = n
            else:
                del slots[v]
                if self._low.get(v.node, 0) > v.slot:
                    self._low[v.node] = v.slot

    def _put(self, rec: EntanglementRecord) -> None:
        old = self.entanglement.get(rec.id)
        same = old is not None and old.graph is rec.graph
        if old is not None:
            self._index(old, -1, not same)
        self.entanglement[rec.id] = rec
        self._index(rec, +1, not same)

    def _pop(self, rid: str) -> EntanglementRecord | None:
        old = self.entanglement.pop(rid, None)
        if old is not None:
            self._index(old, -1)
        return old

    # -- update application -------------------------------------------------

    def apply(self, u: Update) -> str:
        """Apply ``u`` in place; returns ``applied``, ``stale`` or ``conflict``."""
        if u.seq <= self.seq.get(u.origin, 0):
            return STALE
        self.seq[u.origin] = u.seq
        ok = self._apply_change(u.change)
        if not ok:
            self.conflicts.append(u)
            return CONFLICT
        return APPLIED

    def _apply_change(self, c: Change) -> bool:
        # record traffic dominates, so test those first
        if isinstance(c, AddRecord):
            return self._add_record(c.record)
        if isinstance(c, ReplaceRecord):
            return self._replace_record(c.record)
        if isinstance(c, RemoveRecord):
            known = self._pop(c.id) is not None
            self.tombstones.add(c.id)
            self.locks.pop(c.id, None)
            self.pending.pop(c.id, None)
            return known
        if isinstance(c, (Lock, Unlock)):
            if c.id in self.tombstones:
                return False
            holder = c.saga if isinstance(c, Lock) else None
            self.locks[c.id] = holder
            rec = self.entanglement.get(c.id)
            if rec is None:
                return False
            self._put(replace(rec, lock=holder))
            return True
        if isinstance(c, AddChannel):
            self.channels[c.edge.key] = c.edge
            return True
        if isinstance(c, RemoveChannel):
            return self.channels.pop(link_key(c.a, c.b), None) is not None
        if isinstance(c, AddLink):
            self.classical[c.link.key] = c.link
            self._dist_cache = {}
            return True
        if isinstance(c, RemoveLink):
            self._dist_cache = {}
            return self.classical.pop(link_key(c.a, c.b), None) is not None
        if isinstance(c, SetCapability):
            self.capabilities[c.caps.node] = c.caps
            return True
        raise TypeError(f"unknown change {c!r}")

    def _add_record(self, r: EntanglementRecord) -> bool:
        if r.id in self.tombstones or r.id in self.entanglement:
            return False
        early = self.pending.pop(r.id, None)
        if early is not None and early.version > r.version:
            r = early
        lock = self.locks[r.id] if r.id in self.locks else r.lock
        self.locks[r.id] = lock
        self._put(r if r.lock == lock else replace(r, lock=lock))
        return True

    def _replace_record(self, r: EntanglementRecord) -> bool:
        if r.id in self.tombstones:
            return False
        cur = self.entanglement.get(r.id)
        if cur is None:
            early = self.pending.get(r.id)
            if early is None or r.version > early.version:
                self.pending[r.id] = r
            return False
        if r.version <= cur.version:
            return False
        lock = self.locks.get(r.id, cur.lock)
        self._put(r if r.lock == lock else replace(r, lock=lock))
        return True

    def emit(self, origin: str, changes: Iterable[Change]) -> list[Update]:
        """Wrap local changes as updates from ``origin``, apply them, return them."""
        out = []
        for c in changes:
            u = Update(origin, self.seq.get(origin, 0) + 1, c)
            self.apply(u)
            out.append(u)
        return out

    # -- queries ------------------------------------------------------------

    def nodes(self) -> list[str]:
        return sorted(self.capabilities, key=node_key)

    def noise(self, node: str) -> NoiseParams:
        caps = self.capabilities.get(node)
        return caps.noise if caps else NoiseParams()

    def t_mem(self, node: str) -> float:
        caps = self.capabilities.get(node)
        return caps.noise.t_mem if caps else math.inf

    def channel(self, a: str, b: str) -> ChannelEdge | None:
        return self.channels.get(link_key(a, b))

    def record(self, rid: str) -> EntanglementRecord:
        try:
            return self.entanglement[rid]
        except KeyError:
            raise ResourceError(f"unknown record {rid}") from None

    def quality_at(self, rec: EntanglementRecord, now: float) -> Quality:
        """Record quality after storage from its creation until ``now``."""
        dt = max(0.0, now - rec.created_at)
        t_mems = [self.t_mem(v.node) for v in rec.vertices]
        if isinstance(rec.quality, BellDiag):
            return decay(rec.quality, dt, t_mems)
        return scalar_decay(rec.quality, dt, t_mems)

    def fidelity_at(self, rec: EntanglementRecord, now: float) -> float:
        q = self.quality_at(rec, now)
        return q.fidelity if isinstance(q, BellDiag) else q

    def used_slots(self) -> set[VertexRef]:
        return set(self._slots)

    def free_slot(self, node: str, taken=frozenset()) -> int:
        """Lowest slot at ``node`` used by no record and not in ``taken``."""
        s = self._low.get(node, 0)
        while VertexRef(node, s) in self._slots:
            s += 1
        self._low[node] = s
        while VertexRef(node, s) in self._slots or VertexRef(node, s) in taken:
            s += 1
        return s

    def held_by(self, saga_id: str) -> list[str]:
        """Ids of records currently locked by ``saga_id``, sorted."""
        return sorted(self._held.get(saga_id, ()))

    def classical_distances(self, source: str) -> dict[str, float]:
        """Shortest classical latency from ``source`` to every reachable node."""
        cached = self._dist_cache.get(source)
        if cached is not None:
            return cached
        adj: dict[str, list] = {}
        for link in self.classical.values():
            adj.setdefault(link.a, []).append((link.b, link.latency))
            adj.setdefault(link.b, []).append((link.a, link.latency))
        dist = {source: 0.0}
        heap = [(0.0, node_key(source), source)]
        done = set()
        while heap:
            d, _, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            for v, w in adj.get(u, ()):
                nd = d + w
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    heapq.heappush(heap, (nd, node_key(v), v))
        self._dist_cache[source] = dist
        return dist

    def latency(self, a: str, b: str) -> float:
        if a == b:
            return 0.0
        d = self.classical_distances(a).get(b)
        if d is None:
            raise ResourceError(f"no classical route {a} -> {b}")
        return d

    def check(self) -> None:
        """Raise if a record references a node without advertised capabilities."""
        for rec in self.entanglement.values():
            missing = rec.nodes() - set(self.capabilities)
            if missing:
                raise ResourceError(f"record {rec.id} touches unknown nodes {sorted(missing)}")


def apply_update(view: ResourceView, u: Update) -> ResourceView:
    """Value-semantics wrapper: a new view with ``u`` applied."""
    out = view.copy()
    out.apply(u)
    return out


def advertise_capabilities(node: str, caps: CapabilitySet, last_seq: int = 0) -> Update:
    """Start-up advertisement; memoryless nodes cannot offer storage tasks."""
    tasks = frozenset(caps.tasks)
    if caps.memory_slots == 0:
        tasks -= STORAGE_KINDS
    return Update(node, last_seq + 1, SetCapability(replace(caps, node=node, tasks=tasks)))


def acquire_lock(view: ResourceView, record_id: str, saga_id: str) -> tuple[ResourceView, bool]:
    rec = view.record(record_id)
    if rec.lock not in (None, saga_id):
        return view, False
    out = view.copy()
    out.locks[record_id] = saga_id
    out._put(replace(rec, lock=saga_id))
    return out, True


def lockable(view: ResourceView, record_id: str, saga_id: str) -> bool:
    rec = view.entanglement.get(record_id)
    return rec is not None and rec.lock in (None, saga_id)


def find_entanglement(
    view: ResourceView, endpoints: tuple[str, str], now: float, min_f: float = 0.0
) -> list[str]:
    """Unlocked Bell records between ``endpoints``, best decayed fidelity first."""
    want = set(endpoints)
    if len(want) != 2:
        return []
    hits = []
    for rec in view.entanglement.values():
        if rec.lock is not None or not rec.bipartite or rec.nodes() != want:
            continue
        f = view.fidelity_at(rec, now)
        if f >= min_f:
            hits.append((-f, rec.id))
    hits.sort()
    return [rid for _, rid in hits]


# ---------------------------------------------------------------------------
# wire format: a JSON array  [origin, seq, kind, *payload]

def _enc_vertex(v: VertexRef) -> list:
    return [v.node, v.slot]


def _enc_quality(q: Quality):
    return list(q.p) if isinstance(q, BellDiag) else q


def encode_record(r: EntanglementRecord) -> list:
    return [
        r.id,
        [_enc_vertex(v) for v in r.graph.sorted_vertices()],
        [[_enc_vertex(a), _enc_vertex(b)] for a, b in r.graph.sorted_edges()],
        _enc_quality(r.quality),
        r.created_at,
        r.lock,
        r.version,
    ]


def decode_record(x: list) -> EntanglementRecord:
    rid, vs, es, q, created, lock, version = x
    graph = GraphState.from_edges(
        [VertexRef(n, s) for n, s in vs],
        [(VertexRef(*a), VertexRef(*b)) for a, b in es],
    )
    quality = BellDiag(tuple(q)) if isinstance(q, list) else q
    return EntanglementRecord(rid, graph, quality, created, lock, version)


def _enc_caps(c: CapabilitySet) -> list:
    n = c.noise
    return [c.node, sorted(k.value for k in c.tasks), [n.p_gate, n.p_meas, n.t_mem], c.memory_slots]


def _dec_caps(x: list) -> CapabilitySet:
    node, tasks, (pg, pm, tm), slots = x
    return CapabilitySet(node, frozenset(TaskKind(t) for t in tasks), NoiseParams(pg, pm, tm), slots)


def _enc_change(c: Change) -> tuple[str, list]:
    if isinstance(c, AddChannel):
        e = c.edge
        return "add_channel", [e.a, e.b, e.length, e.p_loss, e.q_depol, e.latency, [list(w) for w in e.windows]]
    if isinstance(c, RemoveChannel):
        return "remove_channel", [c.a, c.b]
    if isinstance(c, AddLink):
        return "add_link", [c.link.a, c.link.b, c.link.latency]
    if isinstance(c, RemoveLink):
        return "remove_link", [c.a, c.b]
    if isinstance(c, AddRecord):
        return "add_record", encode_record(c.record)
    if isinstance(c, ReplaceRecord):
        return "replace_record", encode_record(c.record)
    if isinstance(c, RemoveRecord):
        return "remove_record", [c.id]
    if isinstance(c, SetCapability):
        return "set_capability", _enc_caps(c.caps)
    if isinstance(c, Lock):
        return "lock", [c.id, c.saga]
    if isinstance(c, Unlock):
        return "unlock", [c.id]
    raise TypeError(f"unknown change {c!r}")


def _dec_change(kind: str, p: list) -> Change:
    if kind == "add_channel":
        a, b, length, loss, q, lat, windows = p
        return AddChannel(ChannelEdge(a, b, length, loss, q, lat, tuple(tuple(w) for w in windows)))
    if kind == "remove_channel":
        return RemoveChannel(*p)
    if kind == "add_link":
        return AddLink(ClassicalLink(*p))
    if kind == "remove_link":
        return RemoveLink(*p)
    if kind == "add_record":
        return AddRecord(decode_record(p))
    if kind == "replace_record":
        return ReplaceRecord(decode_record(p))
    if kind == "remove_record":
        return RemoveRecord(*p)
    if kind == "set_capability":
        return SetCapability(_dec_caps(p))
    if kind == "lock":
        return Lock(*p)
    if kind == "unlock":
        return Unlock(*p)
    raise ValueError(f"unknown change kind {kind!r}")


def encode_update(u: Update) -> str:
    kind, payload = _enc_change(u.change)
    return json.dumps([u.origin, u.seq, kind, *payload], separators=(",", ":"))


def decode_update(text: str) -> Update:
    origin, seq, kind, *payload = json.loads(text)
    return Update(origin, seq, _dec_change(kind, payload))
