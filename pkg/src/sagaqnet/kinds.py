from enum import Enum


class TaskKind(str, Enum):
    SendQubit = "SendQubit"
    PrepareBell = "PrepareBell"
    ApplyOp = "ApplyOp"
    Midpoint = "Midpoint"
    MidpointSource = "MidpointSource"
    Swap = "Swap"
    Teleport = "Teleport"
    Purify = "Purify"
    Pump = "Pump"
    GraphMerge = "GraphMerge"
    GraphCut = "GraphCut"
    GraphLC = "GraphLC"
    GraphFission = "GraphFission"
    ClassicalSend = "ClassicalSend"
    ClassicalBroadcast = "ClassicalBroadcast"

    def __str__(self) -> str:
        return self.value


ALL_KINDS = frozenset(TaskKind)

# Kinds that hold qubits in memory while waiting on another party or pair.
STORAGE_KINDS = frozenset(
    {
        TaskKind.Swap,
        TaskKind.Teleport,
        TaskKind.Purify,
        TaskKind.Pump,
        TaskKind.GraphMerge,
        TaskKind.GraphCut,
        TaskKind.GraphLC,
        TaskKind.GraphFission,
    }
)

# Entanglement-generation kinds whose failures are heralded and retryable.
HERALDED_KINDS = frozenset({TaskKind.Midpoint, TaskKind.MidpointSource, TaskKind.SendQubit})


def parse_kinds(text: str) -> frozenset:
    text = text.strip()
    if text in ("", "none"):
        return frozenset()
    if text == "all":
        return ALL_KINDS
    return frozenset(TaskKind(t.strip()) for t in text.split(",") if t.strip())


def format_kinds(kinds) -> str:
    if not kinds:
        return "none"
    if frozenset(kinds) == ALL_KINDS:
        return "all"
    return ",".join(sorted(k.value for k in kinds))
