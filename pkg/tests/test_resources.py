import math
import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sagaqnet.graphstate import VertexRef, bell_graph
from sagaqnet.kinds import ALL_KINDS, STORAGE_KINDS, TaskKind
from sagaqnet.noisemodel import NoiseParams, decay, werner
from sagaqnet.resources import (
    CONFLICT,
    STALE,
    AddChannel,
    AddLink,
    AddRecord,
    CapabilitySet,
    ChannelEdge,
    ClassicalLink,
    EntanglementRecord,
    Lock,
    RemoveChannel,
    RemoveRecord,
    ReplaceRecord,
    ResourceError,
    ResourceView,
    SetCapability,
    Unlock,
    Update,
    acquire_lock,
    advertise_capabilities,
    apply_update,
    decode_update,
    encode_update,
    find_entanglement,
)


def bell_record(rid, a, b, f=0.9, created=0.0, lock=None, slot=0):
    g = bell_graph(VertexRef(a, slot), VertexRef(b, slot))
    return EntanglementRecord(rid, g, werner(f), created, lock)


def view_with(*records, t_mem=math.inf, nodes=("1", "2", "3")):
    v = ResourceView()
    for n in nodes:
        v.apply(Update(n, 1, SetCapability(CapabilitySet(n, ALL_KINDS, NoiseParams(t_mem=t_mem), 4))))
    for i, r in enumerate(records):
        v.apply(Update("init", i + 1, AddRecord(r)))
    return v


def test_duplicate_update_is_noop():
    v = ResourceView()
    u = Update("1", 1, AddRecord(bell_record("r1", "1", "2")))
    assert v.apply(u) == "applied"
    snap = v.copy()
    assert v.apply(u) == STALE
    assert v == snap


def test_added_record_is_retrievable():
    r = bell_record("r1", "1", "2")
    v = apply_update(ResourceView(), Update("1", 1, AddRecord(r)))
    assert v.record("r1") == r


def test_remove_unknown_record_is_conflict():
    v = view_with()
    before = dict(v.entanglement)
    assert v.apply(Update("2", 5, RemoveRecord("nope"))) == CONFLICT
    assert v.entanglement == before
    assert v.conflicts


def test_apply_update_does_not_mutate_input():
    v = ResourceView()
    apply_update(v, Update("1", 1, AddRecord(bell_record("r1", "1", "2"))))
    assert v.entanglement == {}


def test_advertise_full_capabilities():
    caps = CapabilitySet("1", ALL_KINDS, NoiseParams(), 8)
    u = advertise_capabilities("1", caps, last_seq=3)
    assert u.seq == 4 and u.change.caps.tasks == ALL_KINDS


def test_advertise_memoryless_drops_storage_kinds():
    caps = CapabilitySet("1", ALL_KINDS, NoiseParams(), 0)
    tasks = advertise_capabilities("1", caps).change.caps.tasks
    assert TaskKind.Purify not in tasks and TaskKind.GraphMerge not in tasks
    assert tasks == ALL_KINDS - STORAGE_KINDS


def test_advertise_classical_only_node():
    u = advertise_capabilities("7", CapabilitySet("7"))
    assert u.change.caps.tasks == frozenset()


def test_lock_unlocked_record():
    v = view_with(bell_record("r1", "1", "2"))
    v2, ok = acquire_lock(v, "r1", "s1")
    assert ok and v2.record("r1").lock == "s1"
    assert v.record("r1").lock is None


def test_lock_held_by_other_saga_denied():
    v = view_with(bell_record("r1", "1", "2", lock="s1"))
    v2, ok = acquire_lock(v, "r1", "s2")
    assert not ok and v2 == v


def test_lock_is_reentrant():
    v = view_with(bell_record("r1", "1", "2", lock="s1"))
    _, ok = acquire_lock(v, "r1", "s1")
    assert ok


def test_lock_unknown_record():
    with pytest.raises(ResourceError):
        acquire_lock(ResourceView(), "x", "s")


def test_find_entanglement_empty():
    assert find_entanglement(view_with(), ("1", "2"), 0.0) == []


def test_find_entanglement_sorted_by_fidelity():
    v = view_with(bell_record("a", "1", "2", 0.8), bell_record("b", "1", "2", 0.9, slot=1))
    assert find_entanglement(v, ("1", "2"), 0.0) == ["b", "a"]


def test_find_entanglement_ties_by_id():
    v = view_with(bell_record("b", "1", "2", 0.9), bell_record("a", "1", "2", 0.9, slot=1))
    assert find_entanglement(v, ("2", "1"), 0.0) == ["a", "b"]


def test_find_entanglement_skips_locked_and_aged():
    v = view_with(
        bell_record("old", "1", "2", 0.9, created=0.0),
        bell_record("locked", "1", "2", 0.99, created=10.0, lock="s", slot=1),
        bell_record("fresh", "1", "2", 0.9, created=10.0, slot=2),
        t_mem=1.0,
    )
    assert find_entanglement(v, ("1", "2"), 10.0, min_f=0.85) == ["fresh"]
    f_old = decay(werner(0.9), 10.0, 1.0).fidelity
    assert f_old < 0.85


def test_latency_uses_shortest_classical_path():
    v = ResourceView()
    for a, b, lat in [("1", "2", 1.0), ("2", "3", 1.0), ("1", "3", 5.0)]:
        v.apply(Update("x", v.seq.get("x", 0) + 1, AddLink(ClassicalLink(a, b, lat))))
    assert v.latency("1", "3") == 2.0
    assert v.latency("3", "3") == 0.0


# -- wire format -----------------------------------------------------------

def sample_updates():
    r = bell_record("r1", "1", "2", lock="s")
    caps = CapabilitySet("1", frozenset({TaskKind.Swap}), NoiseParams(0.01, 0.02, 1.5), 3)
    return [
        Update("1", 1, AddChannel(ChannelEdge("1", "2", 10.0, 0.1, 0.02, 5e-5, ((0.0, 1.0),)))),
        Update("1", 2, RemoveChannel("1", "2")),
        Update("1", 3, AddLink(ClassicalLink("1", "2", 5e-5))),
        Update("1", 4, AddRecord(r)),
        Update("1", 5, ReplaceRecord(replace(r, version=1, created_at=0.25))),
        Update("1", 6, RemoveRecord("r1")),
        Update("1", 7, SetCapability(caps)),
        Update("1", 8, Lock("r1", "s")),
        Update("1", 9, Unlock("r1")),
    ]


@pytest.mark.parametrize("u", sample_updates(), ids=lambda u: type(u.change).__name__)
def test_update_wire_round_trip(u):
    text = encode_update(u)
    assert text.startswith(f'["{u.origin}",{u.seq},')
    assert decode_update(text) == u


# -- convergence ----------------------------------------------------------

ORIGINS = ["1", "2", "3", "4"]


def causal_history(rng: random.Random, n_ops: int) -> dict[str, list[Update]]:
    """A plausible update history: each origin's list is in its own send order."""
    truth = view_with(nodes=ORIGINS)
    per_origin = {o: [] for o in ORIGINS}
    counter = 0

    def send(origin, change):
        (u,) = truth.emit(origin, [change])
        per_origin[origin].append(u)

    for _ in range(n_ops):
        live = sorted(truth.entanglement)
        op = rng.choice(["add", "add", "lock", "unlock", "remove", "replace", "channel", "caps"])
        if op == "add" or not live:
            counter += 1
            a, b = rng.sample(ORIGINS, 2)
            rec = bell_record(f"r{counter}", a, b, rng.uniform(0.5, 1), lock=rng.choice([None, "sX"]))
            send(rng.choice(ORIGINS), AddRecord(rec))
        elif op == "lock":
            rec = truth.entanglement[rng.choice(live)]
            send(rec.home, Lock(rec.id, rng.choice(["s1", "s2"])))
        elif op == "unlock":
            rec = truth.entanglement[rng.choice(live)]
            send(rec.home, Unlock(rec.id))
        elif op == "remove":
            send(rng.choice(ORIGINS), RemoveRecord(rng.choice(live)))
        elif op == "replace":
            rec = truth.entanglement[rng.choice(live)]
            new = replace(rec, quality=werner(rng.uniform(0.5, 1)), version=rec.version + 1)
            send(rng.choice(ORIGINS), ReplaceRecord(new))
        elif op == "channel":
            a, b = sorted(rng.sample(ORIGINS, 2))
            if truth.channel(a, b) and rng.random() < 0.5:
                send(a, RemoveChannel(a, b))
            else:
                send(a, AddChannel(ChannelEdge(a, b, latency=rng.random())))
        else:
            o = rng.choice(ORIGINS)
            send(o, SetCapability(CapabilitySet(o, frozenset(rng.sample(sorted(ALL_KINDS), 3)), NoiseParams(), 2)))
    return per_origin


def interleave(rng: random.Random, per_origin: dict[str, list[Update]]) -> list[Update]:
    queues = {o: list(us) for o, us in per_origin.items() if us}
    out = []
    while queues:
        o = rng.choice(sorted(queues))
        out.append(queues[o].pop(0))
        if not queues[o]:
            del queues[o]
    return out


@settings(max_examples=500, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_views_converge_under_any_interleaving(seed):
    rng = random.Random(seed)
    hist = causal_history(rng, rng.randint(1, 30))
    base = view_with(nodes=ORIGINS)
    views = []
    for _ in range(3):
        v = base.copy()
        seqs = []
        for u in interleave(rng, hist):
            before = dict(v.seq)
            v.apply(u)
            # duplicates are harmless
            if rng.random() < 0.2:
                v.apply(u)
            assert all(v.seq[o] >= before.get(o, 0) for o in v.seq)
        views.append(v)
    assert views[0] == views[1] == views[2]


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_single_lock_holder_on_every_prefix(seed):
    rng = random.Random(seed)
    hist = causal_history(rng, 25)
    v = view_with(nodes=ORIGINS)
    for u in interleave(rng, hist):
        v.apply(u)
        for rec in v.entanglement.values():
            assert rec.lock is None or isinstance(rec.lock, str)
            assert rec.lock == v.locks.get(rec.id, rec.lock)
