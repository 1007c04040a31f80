"""Trace parsing and post-hoc safety checks."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field


@dataclass(frozen=True)
class TraceEvent:
    t: float
    node: str
    kind: str
    saga: str | None
    detail: dict = field(default_factory=dict)

    def ids(self, key: str) -> list[str]:
        return [x for x in self.detail.get(key, "").split("+") if x]


def parse_line(line: str) -> TraceEvent:
    t, node, kind, saga, detail = line.split(" ", 4)
    body = detail[len("detail="):]
    d = dict(kv.split("=", 1) for kv in body.split(",")) if body else {}
    s = saga[len("saga="):]
    return TraceEvent(float(t[2:]), node[5:], kind[5:], None if s == "-" else s, d)


def parse_trace(lines) -> list[TraceEvent]:
    if isinstance(lines, str):
        lines = lines.splitlines()
    return [parse_line(x) for x in lines if x and not x.startswith("metric=")]


@dataclass
class Violation:
    rule: str
    record: str
    saga: str | None
    t: float


def lock_audit(events: list[TraceEvent]) -> list[Violation]:
    """Records consumed twice, or consumed by a saga that neither locked nor made them."""
    granted = defaultdict(set)
    made: dict = {}
    gone: dict = {}
    bad = []
    for e in events:
        if e.kind == "LockGrant":
            for r in e.ids("ids"):
                granted[r].add(e.saga)
        elif e.kind == "TaskEffect":
            for r in e.ids("consumed"):
                if r in gone:
                    bad.append(Violation("double-consume", r, e.saga, e.t))
                gone[r] = e.saga
                if e.saga not in granted[r] and made.get(r) != e.saga:
                    bad.append(Violation("no-grant", r, e.saga, e.t))
            for r in e.ids("created"):
                made[r] = e.saga
    return bad


def causality_audit(events: list[TraceEvent], latency) -> list[TraceEvent]:
    """Message receptions earlier than send time plus ``latency(src, dst)``."""
    bad = []
    for e in events:
        if "src" in e.detail and "sent" in e.detail:
            due = float(e.detail["sent"]) + latency(e.detail["src"], e.node)
            if e.t < due - 1e-12:
                bad.append(e)
    return bad
