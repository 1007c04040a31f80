"""Synthetic scenarios: repeater lines and random small networks."""
from __future__ import annotations

import math
import random

from .graphstate import VertexRef, bell_graph
from .kinds import ALL_KINDS, TaskKind
from .noisemodel import NoiseParams, werner
from .resources import ChannelEdge, EntanglementRecord
from .saga import Objective, ObjectiveKind, PlannerPolicy
from .scenario import NodeSpec, Scenario


def line_scenario(
    n: int,
    objectives: int = 1,
    spacing: float = 0.01,
    q: float = 0.02,
    p_loss: float = 0.0,
    latency: float = 1e-4,
    noise: NoiseParams = NoiseParams(0.002, 0.002, 1.0),
    min_fidelity: float = 0.0,
    policy: PlannerPolicy = PlannerPolicy(prefer_preshared=False),
) -> Scenario:
    """``n``-node line with ``objectives`` end-to-end Bell requests in sequence."""
    ids = [str(i) for i in range(1, n + 1)]
    return Scenario(
        nodes=[NodeSpec(i, ALL_KINDS, noise, 8) for i in ids],
        channels=[ChannelEdge(a, b, 10.0, p_loss, q, latency) for a, b in zip(ids, ids[1:])],
        objectives=[
            Objective(f"o{k}", ObjectiveKind.EstablishBell, (ids[0], ids[-1]), min_fidelity,
                      1, k * spacing)
            for k in range(objectives)
        ],
        policy=policy,
    )


def random_scenario(rng: random.Random, deterministic: bool, max_nodes: int = 8,
                    max_objectives: int = 10) -> Scenario:
    """Random connected network with a mix of objectives.

    ``deterministic`` scenarios have lossless channels, ideal memories and
    objectives spaced far enough apart that each runs alone; the others are
    lossy, decohering and contended.
    """
    n = rng.randint(3, max_nodes)
    ids = [str(i) for i in range(1, n + 1)]
    nodes = []
    for i in ids:
        tasks = set(ALL_KINDS)
        if rng.random() < 0.2:
            tasks.discard(TaskKind.Midpoint)
        noise = NoiseParams(
            p_gate=round(rng.uniform(0, 0.01), 4),
            p_meas=round(rng.uniform(0, 0.01), 4),
            t_mem=math.inf if deterministic else round(rng.uniform(0.05, 5.0), 3),
        )
        nodes.append(NodeSpec(i, frozenset(tasks), noise, 8))

    def chan(a, b):
        return ChannelEdge(
            a, b, 10.0,
            0.0 if deterministic else round(rng.uniform(0.0, 0.4), 3),
            round(rng.uniform(0.0, 0.12), 4),
            round(rng.uniform(1e-5, 1e-3), 6),
        )

    channels = [chan(ids[k], ids[rng.randrange(k)]) for k in range(1, n)]
    have = {frozenset((c.a, c.b)) for c in channels}
    for _ in range(rng.randint(0, n // 2)):
        a, b = rng.sample(ids, 2)
        if frozenset((a, b)) not in have:
            have.add(frozenset((a, b)))
            channels.append(chan(a, b))

    records = []
    slots: dict = {}

    def take(node):
        s = slots.get(node, 0)
        slots[node] = s + 1
        return s

    for k in range(rng.randint(0, 2 * n)):
        a, b = rng.sample(ids, 2)
        g = bell_graph(VertexRef(a, take(a)), VertexRef(b, take(b)))
        records.append(EntanglementRecord(f"r{k}", g, werner(round(rng.uniform(0.7, 0.99), 3))))

    objectives = []
    t = 0.0
    for k in range(rng.randint(1, max_objectives)):
        t = (t + 1.0) if deterministic else round(rng.uniform(0.0, 0.005), 6)
        roll = rng.random()
        a, b = rng.sample(ids, 2)
        pr = rng.randint(0, 5)
        if roll < 0.6:
            o = Objective(f"o{k}", ObjectiveKind.EstablishBell, (a, b),
                          round(rng.uniform(0.0, 0.95), 3), pr, t)
        elif roll < 0.75:
            o = Objective(f"o{k}", ObjectiveKind.SendQubit, (a, b), 0.0, pr, t)
        elif roll < 0.85:
            o = Objective(f"o{k}", ObjectiveKind.SendClassical, (a, b), 0.0, pr, t, payload=f"m{k}")
        else:
            c = rng.choice([x for x in ids if x not in (a, b)])
            o = Objective(f"o{k}", ObjectiveKind.EstablishGraphState, (a, b, c), 0.0, pr, t,
                          graph=((a, b), (b, c)))
        objectives.append(o)
    policy = PlannerPolicy(
        prefer_preshared=rng.random() < 0.7,
        purify_target_rounds=rng.randint(0, 2),
        retry_cap=3,
    )
    return Scenario(nodes=nodes, channels=channels, entanglement=records,
                    objectives=objectives, policy=policy)
