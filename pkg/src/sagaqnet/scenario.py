"""Line-oriented scenario files.

Sections ``[nodes] [channels] [classical] [entanglement] [objectives]
[policy] [monitor]`` hold one record per line as space-separated
``key=value`` pairs; ``#`` starts a comment. Example::

    [nodes]
    id=1 tasks=all p_gate=0.01 p_meas=0.01 t_mem=1 slots=4
    [channels]
    a=1 b=2 p_loss=0 q=0.02 latency=0.0001
    [objectives]
    id=o1 kind=EstablishBell targets=1,2 min_fidelity=0.8 priority=1 arrival=0

Without a ``[classical]`` section every channel doubles as a classical link
with the channel's latency.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .graphstate import GraphState, VertexRef, bell_graph
from .kinds import ALL_KINDS, format_kinds, parse_kinds
from .noisemodel import BellDiag, NoiseError, NoiseParams, werner
from .resources import CapabilitySet, ChannelEdge, ClassicalLink, EntanglementRecord
from .saga import MODES, MaintainedPair, Objective, ObjectiveKind, PlannerPolicy
from .tasks import Timing

SECTIONS = ("nodes", "channels", "classical", "entanglement", "objectives", "policy", "monitor")
_ID = re.compile(r"^[A-Za-z0-9_.:-]+$")


@dataclass(frozen=True)
class Diagnostic:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


class ScenarioError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("\n".join(map(str, diagnostics)))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class NodeSpec:
    id: str
    tasks: frozenset = ALL_KINDS
    noise: NoiseParams = NoiseParams()
    memory_slots: int = 4

    def caps(self) -> CapabilitySet:
        return CapabilitySet(self.id, self.tasks, self.noise, self.memory_slots)


@dataclass
class Scenario:
    nodes: list = field(default_factory=list)
    channels: list = field(default_factory=list)
    # None: mirror the channels
    classical: list | None = None
    entanglement: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    policy: PlannerPolicy = PlannerPolicy()
    horizon: float = math.inf
    monitor: list = field(default_factory=list)

    def classical_links(self) -> list[ClassicalLink]:
        if self.classical is not None:
            return list(self.classical)
        return [ClassicalLink(c.a, c.b, c.latency) for c in self.channels]

    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    def objective(self, oid: str) -> Objective:
        for o in self.objectives:
            if o.id == oid:
                return o
        raise KeyError(oid)


# ---------------------------------------------------------------------------
# parsing

class _Line:
    def __init__(self, no: int, pairs: dict, diags: list):
        self.no = no
        self.pairs = pairs
        self.diags = diags
        self.used: set = set()

    def err(self, msg: str) -> None:
        self.diags.append(Diagnostic(self.no, msg))

    def raw(self, key: str, default=None, required=False):
        self.used.add(key)
        if key not in self.pairs:
            if required:
                self.err(f"missing {key}=")
            return default
        return self.pairs[key]

    def str(self, key, default=None, required=False):
        v = self.raw(key, default, required)
        if v is not None and v is not default and not _ID.match(v):
            self.err(f"{key}={v!r} is not a valid identifier")
        return v

    def float(self, key, default=None, required=False, lo=None, hi=None):
        v = self.raw(key, None, required)
        if v is None:
            return default
        try:
            x = float(v)
        except ValueError:
            self.err(f"{key}={v!r} is not a number")
            return default
        if math.isnan(x) or (lo is not None and x < lo) or (hi is not None and x > hi):
            rng = f"[{lo if lo is not None else '-inf'}, {hi if hi is not None else 'inf'}]"
            self.err(f"{key}={v} outside {rng}")
            return default
        return x

    def prob(self, key, default=0.0, required=False):
        return self.float(key, default, required, 0.0, 1.0)

    def int(self, key, default=None, lo=None):
        v = self.raw(key, None)
        if v is None:
            return default
        try:
            x = int(v)
        except ValueError:
            self.err(f"{key}={v!r} is not an integer")
            return default
        if lo is not None and x < lo:
            self.err(f"{key}={x} below {lo}")
            return default
        return x

    def bool(self, key, default):
        v = self.raw(key, None)
        if v is None:
            return default
        if v.lower() in ("true", "1", "yes"):
            return True
        if v.lower() in ("false", "0", "no"):
            return False
        self.err(f"{key}={v!r} is not a boolean")
        return default

    def finish(self) -> None:
        for k in sorted(set(self.pairs) - self.used):
            self.err(f"unknown key {k}")


def _split_pairs(text: str, no: int, diags: list) -> dict | None:
    out = {}
    for tok in text.split():
        if "=" not in tok:
            diags.append(Diagnostic(no, f"expected key=value, got {tok!r}"))
            return None
        k, v = tok.split("=", 1)
        if k in out:
            diags.append(Diagnostic(no, f"duplicate key {k}"))
        out[k] = v
    return out


def parse_scenario(text: str) -> Scenario:
    """Parse and validate; raises ScenarioError with line-numbered diagnostics."""
    diags: list[Diagnostic] = []
    section = None
    seen_sections: set = set()
    lines: dict = {s: [] for s in SECTIONS}
    for no, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        m = re.fullmatch(r"\[(\w+)\]", body)
        if m:
            section = m.group(1)
            if section not in SECTIONS:
                diags.append(Diagnostic(no, f"unknown section [{section}]"))
                section = None
            seen_sections.add(section)
            continue
        if section is None:
            diags.append(Diagnostic(no, "record outside a known section"))
            continue
        pairs = _split_pairs(body, no, diags)
        if pairs is not None:
            lines[section].append(_Line(no, pairs, diags))

    sc = Scenario()
    declared: dict = {}
    for ln in lines["nodes"]:
        nid = ln.str("id", required=True)
        tasks_txt = ln.raw("tasks", "all")
        try:
            tasks = parse_kinds(tasks_txt)
        except ValueError:
            ln.err(f"unknown task kind in tasks={tasks_txt}")
            tasks = ALL_KINDS
        noise = _noise(ln)
        slots = ln.int("slots", 4, lo=0)
        ln.finish()
        if nid is None:
            continue
        if nid in declared:
            ln.err(f"node {nid} declared twice")
            continue
        declared[nid] = ln.no
        sc.nodes.append(NodeSpec(nid, tasks, noise, slots))

    def node_ref(ln, key, required=True):
        v = ln.str(key, required=required)
        if v is not None and v not in declared:
            ln.err(f"undeclared node {v}")
            return None
        return v

    for ln in lines["channels"]:
        a, b = node_ref(ln, "a"), node_ref(ln, "b")
        length = ln.float("length", 0.0, lo=0.0)
        p_loss = ln.prob("p_loss")
        q = ln.prob("q")
        lat = ln.float("latency", 0.0, lo=0.0)
        windows = _windows(ln)
        ln.finish()
        if a and b:
            if a == b:
                ln.err("channel endpoints must differ")
                continue
            sc.channels.append(ChannelEdge(a, b, length, p_loss, q, lat, windows))

    if "classical" in seen_sections:
        sc.classical = []
        for ln in lines["classical"]:
            a, b = node_ref(ln, "a"), node_ref(ln, "b")
            lat = ln.float("latency", 0.0, lo=0.0)
            ln.finish()
            if a and b:
                if a == b:
                    ln.err("link endpoints must differ")
                    continue
                sc.classical.append(ClassicalLink(a, b, lat))

    rec_ids: set = set()
    used_vertices: set = set()
    for ln in lines["entanglement"]:
        rec = _record(ln, node_ref, declared)
        ln.finish()
        if rec is None:
            continue
        if rec.id in rec_ids:
            ln.err(f"record {rec.id} declared twice")
            continue
        clash = rec.graph.vertices & used_vertices
        if clash:
            ln.err(f"qubit {sorted(clash)[0].node}:{sorted(clash)[0].slot} already holds a record")
            continue
        rec_ids.add(rec.id)
        used_vertices |= rec.graph.vertices
        sc.entanglement.append(rec)

    oids: set = set()
    for ln in lines["objectives"]:
        o = _objective(ln, node_ref, declared)
        ln.finish()
        if o is None:
            continue
        if o.id in oids:
            ln.err(f"objective {o.id} declared twice")
            continue
        oids.add(o.id)
        sc.objectives.append(o)

    if len(lines["policy"]) > 1:
        diags.append(Diagnostic(lines["policy"][1].no, "only one [policy] record is allowed"))
    for ln in lines["policy"][:1]:
        sc.policy, sc.horizon = _policy(ln)
        ln.finish()

    for ln in lines["monitor"]:
        a, b = node_ref(ln, "a"), node_ref(ln, "b")
        low = ln.int("low", 1, lo=0)
        high = ln.int("high", 2, lo=0)
        mf = ln.prob("min_fidelity", 0.0)
        period = ln.float("period", 1.0, lo=0.0)
        ln.finish()
        if a and b:
            try:
                sc.monitor.append(MaintainedPair(a, b, low, high, mf, period))
            except ValueError as e:
                ln.err(str(e))
    if sc.monitor and math.isinf(sc.horizon):
        diags.append(Diagnostic(lines["monitor"][0].no, "a [monitor] section needs a finite horizon"))

    if diags:
        raise ScenarioError(sorted(diags, key=lambda d: d.line))
    return sc


def _noise(ln: _Line) -> NoiseParams:
    p_gate = ln.prob("p_gate")
    p_meas = ln.prob("p_meas")
    t_mem = ln.float("t_mem", math.inf)
    if t_mem is not None and not t_mem > 0:
        ln.err(f"t_mem={t_mem} must be positive")
        t_mem = math.inf
    return NoiseParams(p_gate, p_meas, t_mem)


def _windows(ln: _Line) -> tuple:
    txt = ln.raw("windows", "")
    out = []
    for part in filter(None, txt.split(";")):
        try:
            s, e = (float(x) for x in part.split(":"))
        except ValueError:
            ln.err(f"bad window {part!r}, expected start:end")
            continue
        if s < 0 or e < s:
            ln.err(f"window {part} must satisfy 0 <= start <= end")
            continue
        out.append((s, e))
    return tuple(out)


def _parse_vertex(ln, txt, declared):
    try:
        v = VertexRef.parse(txt)
    except (ValueError, TypeError):
        ln.err(f"bad qubit {txt!r}, expected node:slot")
        return None
    if v.node not in declared:
        ln.err(f"undeclared node {v.node}")
        return None
    return v


def _record(ln: _Line, node_ref, declared) -> EntanglementRecord | None:
    rid = ln.str("id", required=True)
    created = ln.float("created", 0.0, lo=0.0)
    p_txt = ln.raw("p")
    f = ln.float("fidelity", None, lo=0.0, hi=1.0)
    vert_txt = ln.raw("vertices")
    edges_txt = ln.raw("edges", "")
    if vert_txt is None:
        a, b = node_ref(ln, "a"), node_ref(ln, "b")
        sa = ln.int("slot_a", 0, lo=0)
        sb = ln.int("slot_b", 0, lo=0)
        if not (a and b):
            return None
        if a == b and sa == sb:
            ln.err("a Bell pair needs two distinct qubits")
            return None
        graph = bell_graph(VertexRef(a, sa), VertexRef(b, sb))
    else:
        vs = []
        for tok in vert_txt.split(","):
            v = _parse_vertex(ln, tok, declared)
            if v is None:
                return None
            vs.append(v)
        es = []
        for tok in filter(None, edges_txt.split(",")):
            try:
                x, y = tok.split("-")
                es.append((VertexRef.parse(x), VertexRef.parse(y)))
            except (ValueError, TypeError):
                ln.err(f"bad edge {tok!r}, expected n:s-n:s")
                return None
        try:
            graph = GraphState.from_edges(vs, es)
        except ValueError as e:
            ln.err(str(e))
            return None
    if rid is None:
        return None
    if len(graph.vertices) == 2:
        try:
            if p_txt is not None:
                quality = BellDiag(tuple(float(x) for x in p_txt.split(",")))
            elif f is not None:
                quality = werner(f)
            else:
                ln.err("a Bell record needs p= or fidelity=")
                return None
        except (ValueError, NoiseError) as e:
            ln.err(str(e))
            return None
    else:
        if f is None:
            ln.err("a multipartite record needs fidelity=")
            return None
        quality = f
    return EntanglementRecord(rid, graph, quality, created)


def _objective(ln: _Line, node_ref, declared) -> Objective | None:
    oid = ln.str("id", required=True)
    kind_txt = ln.raw("kind", required=True)
    targets_txt = ln.raw("targets", required=True)
    mf = ln.prob("min_fidelity", 0.0)
    pr = ln.int("priority", 0, lo=0)
    arrival = ln.float("arrival", 0.0, lo=0.0)
    mode = ln.raw("mode")
    graph_txt = ln.raw("graph", "")
    payload = ln.str("payload", "")
    initiator = node_ref(ln, "initiator", required=False)
    if kind_txt is None or targets_txt is None or oid is None:
        return None
    try:
        kind = ObjectiveKind(kind_txt)
    except ValueError:
        ln.err(f"unknown objective kind {kind_txt}")
        return None
    if mode is not None and mode not in MODES:
        ln.err(f"unknown mode {mode}")
        return None
    targets = tuple(targets_txt.split(","))
    for t in targets:
        if t not in declared:
            ln.err(f"undeclared node {t}")
            return None
    graph = []
    for tok in filter(None, graph_txt.split(",")):
        parts = tok.split("-")
        if len(parts) != 2 or any(p not in targets for p in parts):
            ln.err(f"graph edge {tok!r} must join two targets")
            return None
        graph.append(tuple(parts))
    try:
        return Objective(oid, kind, targets, mf, pr, arrival, mode, tuple(graph), payload, initiator)
    except ValueError as e:
        ln.err(str(e))
        return None


def _policy(ln: _Line) -> tuple[PlannerPolicy, float]:
    d = PlannerPolicy()
    t = Timing()
    timing = Timing(
        ln.float("t_gate", t.t_gate, lo=0.0),
        ln.float("t_meas", t.t_meas, lo=0.0),
        ln.float("t_prep", t.t_prep, lo=0.0),
    )
    pol = PlannerPolicy(
        prefer_preshared=ln.bool("prefer_preshared", d.prefer_preshared),
        purify_target_rounds=ln.int("purify_target_rounds", d.purify_target_rounds, lo=0),
        retry_cap=ln.int("retry_cap", d.retry_cap, lo=1),
        epsilon=ln.float("epsilon", d.epsilon, lo=0.0),
        max_attempts=ln.int("max_attempts", d.max_attempts, lo=1),
        expected_retries=ln.bool("expected_retries", d.expected_retries),
        timing=timing,
    )
    horizon = ln.float("horizon", math.inf, lo=0.0)
    return pol, horizon


# ---------------------------------------------------------------------------
# printing

def _f(x: float) -> str:
    return repr(float(x))


def print_scenario(sc: Scenario) -> str:
    out = ["[nodes]"]
    for n in sc.nodes:
        out.append(
            f"id={n.id} tasks={format_kinds(n.tasks)} p_gate={_f(n.noise.p_gate)} "
            f"p_meas={_f(n.noise.p_meas)} t_mem={_f(n.noise.t_mem)} slots={n.memory_slots}"
        )
    out.append("[channels]")
    for c in sc.channels:
        line = (f"a={c.a} b={c.b} length={_f(c.length)} p_loss={_f(c.p_loss)} "
                f"q={_f(c.q_depol)} latency={_f(c.latency)}")
        if c.windows:
            line += " windows=" + ";".join(f"{_f(s)}:{_f(e)}" for s, e in c.windows)
        out.append(line)
    if sc.classical is not None:
        out.append("[classical]")
        for link in sc.classical:
            out.append(f"a={link.a} b={link.b} latency={_f(link.latency)}")
    out.append("[entanglement]")
    for r in sc.entanglement:
        vs = r.graph.sorted_vertices()
        if len(vs) == 2:
            a, b = vs
            q = ",".join(_f(x) for x in r.quality.p)
            out.append(f"id={r.id} a={a.node} slot_a={a.slot} b={b.node} slot_b={b.slot} "
                       f"p={q} created={_f(r.created_at)}")
        else:
            verts = ",".join(f"{v.node}:{v.slot}" for v in vs)
            edges = ",".join(
                "-".join(f"{v.node}:{v.slot}" for v in sorted(e, key=lambda v: v.sort_key()))
                for e in r.graph.sorted_edges()
            )
            line = f"id={r.id} vertices={verts} fidelity={_f(r.quality)} created={_f(r.created_at)}"
            if edges:
                line += f" edges={edges}"
            out.append(line)
    out.append("[objectives]")
    for o in sc.objectives:
        line = (f"id={o.id} kind={o.kind.value} targets={','.join(o.targets)} "
                f"min_fidelity={_f(o.min_fidelity)} priority={o.priority} arrival={_f(o.arrival)}")
        if o.mode:
            line += f" mode={o.mode}"
        if o.graph:
            line += " graph=" + ",".join(f"{u}-{w}" for u, w in o.graph)
        if o.payload:
            line += f" payload={o.payload}"
        if o.initiator:
            line += f" initiator={o.initiator}"
        out.append(line)
    p = sc.policy
    out.append("[policy]")
    out.append(
        f"prefer_preshared={str(p.prefer_preshared).lower()} "
        f"purify_target_rounds={p.purify_target_rounds} retry_cap={p.retry_cap} "
        f"epsilon={_f(p.epsilon)} max_attempts={p.max_attempts} "
        f"expected_retries={str(p.expected_retries).lower()} "
        f"t_gate={_f(p.timing.t_gate)} t_meas={_f(p.timing.t_meas)} t_prep={_f(p.timing.t_prep)} "
        f"horizon={_f(sc.horizon)}"
    )
    out.append("[monitor]")
    for m in sc.monitor:
        out.append(f"a={m.a} b={m.b} low={m.low} high={m.high} "
                   f"min_fidelity={_f(m.min_fidelity)} period={_f(m.period)}")
    return "\n".join(out) + "\n"


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
