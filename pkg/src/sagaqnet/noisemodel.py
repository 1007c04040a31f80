"""Fidelity bookkeeping for shared entanglement.

Bipartite records carry the four Bell-diagonal weights in the order
(Phi+, Phi-, Psi+, Psi-); the fidelity is the Phi+ weight. Index i also
encodes the Pauli error (x, z) = (i >> 1, i & 1) relative to Phi+, so
composing errors is XOR on indices.

Multipartite records only carry a scalar fidelity estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

TOL = 1e-12


class NoiseError(ValueError):
    pass


def _check_prob(name: str, q: float) -> None:
    if not 0.0 <= q <= 1.0:
        raise NoiseError(f"{name}={q} outside [0, 1]")


@dataclass(frozen=True)
class BellDiag:
    p: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        if len(self.p) != 4:
            raise NoiseError("a Bell-diagonal vector has four components")
        if min(self.p) < -TOL:
            raise NoiseError(f"negative Bell-diagonal weight in {self.p}")
        if abs(sum(self.p) - 1.0) > TOL:
            raise NoiseError(f"Bell-diagonal weights sum to {sum(self.p)!r}")

    @classmethod
    def normalized(cls, weights: Sequence[float]) -> "BellDiag":
        w = [x if x > 0.0 else 0.0 for x in map(float, weights)]
        total = sum(w)
        # valid by construction, so skip the checks in __post_init__
        out = object.__new__(cls)
        object.__setattr__(out, "p", tuple(x / total for x in w))
        return out

    @property
    def fidelity(self) -> float:
        return self.p[0]

    def __iter__(self):
        return iter(self.p)

    def __getitem__(self, i: int) -> float:
        return self.p[i]


PERFECT = BellDiag((1.0, 0.0, 0.0, 0.0))
MIXED = BellDiag((0.25, 0.25, 0.25, 0.25))


@dataclass(frozen=True)
class NoiseParams:
    """Per-node noise: depolarizing charges per local two-qubit operation and
    per measurement, and the memory time constant in seconds."""

    p_gate: float = 0.0
    p_meas: float = 0.0
    t_mem: float = math.inf

    def __post_init__(self) -> None:
        _check_prob("p_gate", self.p_gate)
        _check_prob("p_meas", self.p_meas)
        if not self.t_mem > 0:
            raise NoiseError(f"t_mem={self.t_mem} must be positive")

    def combined(self, other: "NoiseParams") -> "NoiseParams":
        """Charges of two parties acting on the same pairs, composed."""
        return NoiseParams(
            p_gate=compose_prob(self.p_gate, other.p_gate),
            p_meas=compose_prob(self.p_meas, other.p_meas),
            t_mem=min(self.t_mem, other.t_mem),
        )


NOISELESS = NoiseParams()


def compose_prob(q1: float, q2: float) -> float:
    """Strength of two depolarizing channels applied in sequence."""
    return q1 + q2 - q1 * q2


def werner(f: float) -> BellDiag:
    if not 0.25 <= f <= 1.0:
        raise NoiseError(f"Werner fidelity {f} outside [1/4, 1]")
    r = (1.0 - f) / 3.0
    return BellDiag((f, r, r, r))


def depolarize(bd: BellDiag, q: float) -> BellDiag:
    """Depolarize one qubit of the pair with probability ``q``."""
    _check_prob("q", q)
    if q == 0.0:
        return bd
    keep = 1.0 - q
    mix = q * 0.25
    return BellDiag.normalized([keep * x + mix for x in bd.p])


def memory_q(dt: float, t_mem: float) -> float:
    if dt < 0:
        raise NoiseError(f"negative storage time {dt}")
    if dt == 0 or math.isinf(t_mem):
        return 0.0
    return -math.expm1(-dt / t_mem)


def decay(bd: BellDiag, dt: float, t_mem: float | Sequence[float]) -> BellDiag:
    """Memory decoherence of both stored qubits over ``dt`` seconds.

    ``t_mem`` is either one time constant for both sides or one per side.
    """
    sides = (t_mem, t_mem) if isinstance(t_mem, (int, float)) else tuple(t_mem)
    for tm in sides:
        bd = depolarize(bd, memory_q(dt, tm))
    return bd


def scalar_decay(f: float, dt: float, t_mems: Sequence[float]) -> float:
    """Lower-bound fidelity estimate of a multipartite record after storage."""
    for tm in t_mems:
        f *= 1.0 - memory_q(dt, tm)
    return f


def _xor_conv(a: Sequence[float], b: Sequence[float]) -> list[float]:
    return [sum(a[i] * b[i ^ k] for i in range(4)) for k in range(4)]


def swap_map(a: BellDiag, b: BellDiag, noise: NoiseParams = NOISELESS) -> BellDiag:
    """Pair produced by a Bell measurement joining pairs ``a`` and ``b``."""
    out = BellDiag.normalized(_xor_conv(a.p, b.p))
    return depolarize(out, noise.p_meas)


# DEJMPS local rotations exchange the Phi- and Psi- weights.
_ROT = (0, 3, 2, 1)


def _dejmps_branches(a: BellDiag, b: BellDiag) -> tuple[list[float], list[float]]:
    r1 = [a.p[i] for i in _ROT]
    r2 = [b.p[i] for i in _ROT]
    keep = [0.0] * 4
    fail = [0.0] * 4
    for i in range(4):
        x1, z1 = i >> 1, i & 1
        for j in range(4):
            x2, z2 = j >> 1, j & 1
            w = r1[i] * r2[j]
            out = (x1 << 1) | (z1 ^ z2)
            if x1 == x2:
                keep[out] += w
            else:
                fail[out] += w
    return keep, fail


def purify_map(
    a: BellDiag, b: BellDiag, noise: NoiseParams = NOISELESS, mode: str = "purify"
) -> tuple[float, BellDiag | None]:
    """One DEJMPS round on two pairs.

    Returns the success probability and the surviving pair (``a``'s slot).
    In ``pump`` mode ``a`` is the kept pair and ``b`` the fresh one; the map is
    the same. Gate noise hits each pair before the round, measurement noise
    depolarizes the output. A zero success probability returns ``None``.
    """
    if mode not in ("purify", "pump"):
        raise NoiseError(f"unknown purification mode {mode!r}")
    a = depolarize(a, noise.p_gate)
    b = depolarize(b, noise.p_gate)
    keep, _ = _dejmps_branches(a, b)
    p_succ = sum(keep)
    if p_succ <= 0.0:
        return 0.0, None
    out = BellDiag.normalized(keep)
    return p_succ, depolarize(out, noise.p_meas)


def pump_failure_map(
    kept: BellDiag, fresh: BellDiag, noise: NoiseParams = NOISELESS
) -> tuple[float, BellDiag | None]:
    """State of the kept pair when the parity check fails."""
    kept = depolarize(kept, noise.p_gate)
    fresh = depolarize(fresh, noise.p_gate)
    _, fail = _dejmps_branches(kept, fresh)
    p_fail = sum(fail)
    if p_fail <= 0.0:
        return 0.0, None
    return p_fail, depolarize(BellDiag.normalized(fail), noise.p_meas)


def multi_fidelity_compose(f1: float, f2: float, k_ops: int, noise: NoiseParams) -> float:
    f = f1 * f2 * (1.0 - noise.p_gate) ** k_ops
    return min(1.0, max(0.0, f))
