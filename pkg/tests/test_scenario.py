import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import SCENARIOS, scenario
from sagaqnet.generate import line_scenario, random_scenario
from sagaqnet.kinds import ALL_KINDS, TaskKind
from sagaqnet.saga import ObjectiveKind
from sagaqnet.scenario import ScenarioError, parse_scenario, print_scenario

MINIMAL = """\
[nodes]
id=a
id=b
[channels]
a=a b=b latency=0.001
[objectives]
id=o kind=EstablishBell targets=a,b
"""


def diags(text):
    with pytest.raises(ScenarioError) as ei:
        parse_scenario(text)
    return [(d.line, d.message) for d in ei.value.diagnostics]


def test_minimal_two_node():
    sc = parse_scenario(MINIMAL)
    assert sc.node_ids() == ["a", "b"]
    assert sc.nodes[0].tasks == ALL_KINDS
    (o,) = sc.objectives
    assert o.kind == ObjectiveKind.EstablishBell and o.targets == ("a", "b")
    # classical links mirror the channels when not given
    (link,) = sc.classical_links()
    assert link.latency == 0.001


def test_undeclared_node_has_line_number():
    text = MINIMAL.replace("targets=a,b", "targets=a,9")
    ((line, msg),) = diags(text)
    assert line == 7 and "9" in msg


def test_probability_range():
    ((line, msg),) = diags(MINIMAL.replace("latency=0.001", "p_loss=1.5"))
    assert line == 5 and "p_loss" in msg


@pytest.mark.parametrize("edit, needle", [
    (("id=b", "id=b colour=red"), "colour"),
    (("[channels]", "[wires]"), "wires"),
    (("id=b", "id=a"), "twice"),
    (("a=a b=b", "a=a b=a"), "differ"),
    (("kind=EstablishBell", "kind=Teleport"), "kind"),
    (("id=a\n", "id=a tasks=Swap,Hover\n"), "task kind"),
    (("targets=a,b", "targets=a,b min_fidelity=2"), "min_fidelity"),
])
def test_diagnostics(edit, needle):
    found = diags(MINIMAL.replace(*edit, 1))
    assert any(needle in msg for _, msg in found), found


def test_diagnostics_are_collected_and_sorted():
    text = MINIMAL.replace("latency=0.001", "q=7") + "id=o2 kind=SendQubit targets=a,z\n"
    found = diags(text)
    assert [ln for ln, _ in found] == [5, 8]


def test_monitor_needs_horizon():
    text = MINIMAL + "[monitor]\na=a b=b\n"
    assert any("horizon" in m for _, m in diags(text))
    assert parse_scenario(text + "[policy]\nhorizon=1.0\n").horizon == 1.0


def test_capability_list_and_noise():
    sc = parse_scenario(MINIMAL.replace("id=a\n", "id=a tasks=Swap,Purify p_gate=0.01 t_mem=2\n"))
    a = sc.nodes[0]
    assert a.tasks == frozenset({TaskKind.Swap, TaskKind.Purify})
    assert a.noise.p_gate == 0.01 and a.noise.t_mem == 2.0
    assert math.isinf(sc.nodes[1].noise.t_mem)


def test_comments_and_blank_lines():
    sc = parse_scenario("# header\n\n" + MINIMAL.replace("id=b", "id=b   # second"))
    assert sc.node_ids() == ["a", "b"]


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.scn")), ids=lambda p: p.stem)
def test_shipped_scenarios_round_trip(path):
    sc = scenario(path.stem)
    assert parse_scenario(print_scenario(sc)) == sc


def test_round_trip_of_generated_line():
    sc = line_scenario(6, 4)
    assert parse_scenario(print_scenario(sc)) == sc


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.booleans())
def test_round_trip_random(seed, det):
    sc = random_scenario(random.Random(seed), det)
    text = print_scenario(sc)
    back = parse_scenario(text)
    assert back == sc
    assert print_scenario(back) == text
