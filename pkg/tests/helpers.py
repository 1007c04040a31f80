"""Scenario loading and tweaking shared by engine-level tests."""
import dataclasses
import math
from pathlib import Path

from sagaqnet.engine import bootstrap_view
from sagaqnet.saga import plan
from sagaqnet.scenario import load_scenario
from sagaqnet.tasks import instantiate

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
FIXTURES = Path(__file__).parent / "fixtures"

# acceptance number -> PASS/FAIL line, filled by test_acceptance
ACCEPTANCE: dict[int, str] = {}


def scenario(name):
    return load_scenario(SCENARIOS / f"{name}.scn")


def with_noise(sc, **kw):
    nodes = [dataclasses.replace(n, noise=dataclasses.replace(n.noise, **kw)) for n in sc.nodes]
    return dataclasses.replace(sc, nodes=nodes)


def ideal_memories(sc):
    return with_noise(sc, t_mem=math.inf)


def plan_first(sc, **kw):
    o = sc.objectives[0]
    return plan(o, bootstrap_view(sc), sc.policy, o.arrival, **kw)


def shape(s):
    """Task kinds with participants and dependency sets, saga-id free."""
    return [(t.kind.value, t.participants, tuple(s.deps.get(t.id, ()))) for t in s.tasks]


def reinstantiate(s, view):
    """Re-run instantiate on every task in DAG order; raises on the first failure."""
    made = set()
    for t in s.tasks:
        instantiate(t.kind, view, t.participants, t.inputs, t.outputs, t.params,
                    id=t.id, saga_id=s.id, max_attempts=t.max_attempts, produced=frozenset(made))
        made.update(t.outputs)
