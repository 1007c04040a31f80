"""Small dense quantum simulator used as ground truth in the test-suite.

Qubit 0 is the most significant tensor factor. Pure states hold an amplitude
vector, mixed states a density matrix. Nothing here is used by the control
plane itself; it only checks the graph rules and the Bell-diagonal maps.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .graphstate import GraphState, VertexRef

MAX_PURE = 10
MAX_MIXED = 5

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULIS = (I2, X, Y, Z)

# Bell basis in (Phi+, Phi-, Psi+, Psi-) order.
BELL = np.array(
    [
        [1, 0, 0, 1],
        [1, 0, 0, -1],
        [0, 1, 1, 0],
        [0, 1, -1, 0],
    ],
    dtype=complex,
) / np.sqrt(2)
# Pauli taking Phi+ to each Bell state when applied to the second qubit.
BELL_PAULI = (I2, Z, X, X @ Z)


class OracleError(ValueError):
    pass


@dataclass
class DenseState:
    n: int
    data: np.ndarray
    mixed: bool = False

    def __post_init__(self) -> None:
        limit = MAX_MIXED if self.mixed else MAX_PURE
        if self.n > limit:
            raise OracleError(f"{self.n} qubits exceeds the {limit}-qubit limit")
        dim = 2**self.n
        want = (dim, dim) if self.mixed else (dim,)
        if self.data.shape != want:
            raise OracleError(f"data shape {self.data.shape} does not match {want}")

    def density(self) -> np.ndarray:
        if self.mixed:
            return self.data
        return np.outer(self.data, self.data.conj())

    def to_mixed(self) -> "DenseState":
        return DenseState(self.n, self.density(), mixed=True)

    def check(self, tol: float = 1e-9) -> None:
        if self.mixed:
            rho = self.data
            if abs(np.trace(rho) - 1) > tol:
                raise OracleError("trace is not 1")
            if np.max(np.abs(rho - rho.conj().T)) > tol:
                raise OracleError("density matrix is not Hermitian")
            if np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2)) < -tol:
                raise OracleError("density matrix is not positive semidefinite")
        elif abs(np.linalg.norm(self.data) - 1) > tol:
            raise OracleError("state vector is not normalised")


def kron(*ops: np.ndarray) -> np.ndarray:
    return reduce(np.kron, ops)


def embed(op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Lift a k-qubit operator acting on ``qubits`` to the full n-qubit space."""
    k = len(qubits)
    op = op.reshape((2,) * (2 * k))
    full = np.eye(2**n, dtype=complex).reshape((2,) * (2 * n))
    # contract op's input legs with the identity's output legs on ``qubits``
    out = np.tensordot(op, full, axes=(list(range(k, 2 * k)), list(qubits)))
    # tensordot puts op's output legs first; move them back into place
    rest = [q for q in range(n) if q not in qubits]
    order = list(qubits) + rest
    perm = np.argsort(order).tolist() + list(range(n, 2 * n))
    return out.transpose(perm).reshape(2**n, 2**n)


def apply_unitary(s: DenseState, u: np.ndarray, qubits: Sequence[int]) -> DenseState:
    full = embed(u, qubits, s.n)
    if s.mixed:
        return DenseState(s.n, full @ s.data @ full.conj().T, mixed=True)
    return DenseState(s.n, full @ s.data)


def plus_state(n: int) -> DenseState:
    return DenseState(n, np.full(2**n, 2 ** (-n / 2), dtype=complex))


def cz_diagonal(n: int, a: int, b: int) -> np.ndarray:
    idx = np.arange(2**n)
    bit_a = (idx >> (n - 1 - a)) & 1
    bit_b = (idx >> (n - 1 - b)) & 1
    return np.where(bit_a & bit_b, -1.0, 1.0)


def graph_to_state(
    g: GraphState, order: Sequence[VertexRef] | None = None
) -> tuple[DenseState, list[VertexRef]]:
    """|+>^n followed by CZ on every edge. Returns the state and its qubit order."""
    order = list(order) if order is not None else g.sorted_vertices()
    if set(order) != set(g.vertices):
        raise OracleError("qubit order must list exactly the graph's vertices")
    n = len(order)
    if n > MAX_PURE:
        raise OracleError(f"graph has {n} vertices, limit is {MAX_PURE}")
    pos = {v: i for i, v in enumerate(order)}
    psi = plus_state(n).data.copy()
    for e in g.edges:
        a, b = (pos[v] for v in e)
        psi *= cz_diagonal(n, a, b)
    return DenseState(n, psi), order


def depolarizing_kraus(q: float) -> list[np.ndarray]:
    """rho -> (1-q) rho + q I/2 (trace-preserving)."""
    return [np.sqrt(1 - 3 * q / 4) * I2] + [np.sqrt(q / 4) * p for p in (X, Y, Z)]


def two_qubit_depolarizing_kraus(q: float) -> list[np.ndarray]:
    """rho -> (1-q) rho + q I/4 on a qubit pair."""
    ops = []
    for i, pa in enumerate(PAULIS):
        for j, pb in enumerate(PAULIS):
            w = 1 - 15 * q / 16 if (i, j) == (0, 0) else q / 16
            ops.append(np.sqrt(w) * np.kron(pa, pb))
    return ops


def bitflip_kraus(q: float) -> list[np.ndarray]:
    return [np.sqrt(1 - q) * I2, np.sqrt(q) * X]


def apply_kraus(s: DenseState, kraus: Sequence[np.ndarray], qubits: Sequence[int]) -> DenseState:
    if not s.mixed:
        raise OracleError("non-unitary channels need a mixed state")
    rho = np.zeros_like(s.data)
    for k in kraus:
        full = embed(k, qubits, s.n)
        rho += full @ s.data @ full.conj().T
    return DenseState(s.n, rho, mixed=True)


def apply_channel(s: DenseState, kind: str, qubits: Sequence[int], q: float) -> DenseState:
    """Apply a noise channel with strength ``q``.

    kind: ``depolarizing`` (single-qubit, on each listed qubit), ``gate``
    (two-qubit depolarizing on the listed pair) or ``measurement`` (bit flip
    before readout, on each listed qubit).
    """
    if not 0 <= q <= 1:
        raise OracleError(f"channel strength {q} outside [0, 1]")
    if kind == "depolarizing":
        for qb in qubits:
            s = apply_kraus(s, depolarizing_kraus(q), [qb])
        return s
    if kind == "gate":
        if len(qubits) != 2:
            raise OracleError("gate noise acts on a qubit pair")
        return apply_kraus(s, two_qubit_depolarizing_kraus(q), qubits)
    if kind == "measurement":
        for qb in qubits:
            s = apply_kraus(s, bitflip_kraus(q), [qb])
        return s
    raise OracleError(f"unknown channel kind {kind!r}")


def partial_trace(rho: np.ndarray, n: int, keep: Sequence[int]) -> np.ndarray:
    keep = list(keep)
    traced = [q for q in range(n) if q not in keep]
    t = rho.reshape((2,) * (2 * n))
    # trace out from the highest index down so earlier indices stay valid
    for q in sorted(traced, reverse=True):
        cur = t.ndim // 2
        t = np.trace(t, axis1=q, axis2=q + cur)
    # the remaining legs are in ascending qubit order; reorder to ``keep``
    k = len(keep)
    asc = sorted(keep)
    perm = [asc.index(q) for q in keep]
    t = t.transpose(perm + [p + k for p in perm])
    return t.reshape(2**k, 2**k)


def bell_project(
    s: DenseState, qubits: tuple[int, int], outcome: int
) -> tuple[float, DenseState | None]:
    """Project ``qubits`` onto Bell state ``outcome`` and trace them out.

    Returns the outcome probability and the normalised post-measurement state
    of the remaining qubits (None when the probability vanishes).
    """
    if len(set(qubits)) != 2 or not all(0 <= q < s.n for q in qubits):
        raise OracleError(f"invalid qubit pair {qubits}")
    bra = BELL[outcome].conj()
    rest = [q for q in range(s.n) if q not in qubits]
    order = list(qubits) + rest
    m = len(rest)
    if s.mixed:
        t = s.data.reshape((2,) * (2 * s.n))
        t = t.transpose(order + [q + s.n for q in order]).reshape(4, 2**m, 4, 2**m)
        reduced = np.einsum("a,aibj,b->ij", bra, t, bra.conj())
        p = float(np.real(np.trace(reduced)))
        if p <= 1e-15:
            return 0.0, None
        return p, DenseState(m, reduced / p, mixed=True)
    t = s.data.reshape((2,) * s.n).transpose(order).reshape(4, 2**m)
    post = bra @ t
    p = float(np.real(np.vdot(post, post)))
    if p <= 1e-15:
        return 0.0, None
    return p, DenseState(m, post / np.sqrt(p))


def measure_qubit_z(
    s: DenseState, qubit: int, outcome: int
) -> tuple[float, DenseState | None]:
    """Z-measure ``qubit``, keep branch ``outcome``, and remove the qubit."""
    rest = [q for q in range(s.n) if q != qubit]
    proj = np.zeros(2, dtype=complex)
    proj[outcome] = 1
    m = len(rest)
    if s.mixed:
        t = s.data.reshape((2,) * (2 * s.n))
        order = [qubit] + rest
        t = t.transpose(order + [q + s.n for q in order]).reshape(2, 2**m, 2, 2**m)
        reduced = t[outcome, :, outcome, :]
        p = float(np.real(np.trace(reduced)))
        if p <= 1e-15:
            return 0.0, None
        return p, DenseState(m, reduced / p, mixed=True)
    t = s.data.reshape((2,) * s.n).transpose([qubit] + rest).reshape(2, 2**m)
    post = t[outcome]
    p = float(np.real(np.vdot(post, post)))
    if p <= 1e-15:
        return 0.0, None
    return p, DenseState(m, post / np.sqrt(p))


def bell_diag_state(p: Sequence[float]) -> DenseState:
    rho = sum(w * np.outer(b, b.conj()) for w, b in zip(p, BELL))
    return DenseState(2, np.asarray(rho, dtype=complex), mixed=True)


def bell_diag_of(
    s: DenseState, pair: tuple[int, int] = (0, 1)
) -> tuple[np.ndarray, float]:
    """Bell-basis diagonal of the reduced state on ``pair``.

    Returns the (clamped, renormalised) 4-vector and the largest magnitude of
    the discarded off-diagonal entries.
    """
    rho = s.density()
    if s.n != 2 or tuple(pair) != (0, 1):
        rho = partial_trace(rho, s.n, pair)
    in_bell = BELL.conj() @ rho @ BELL.T
    diag = np.clip(np.real(np.diag(in_bell)), 0.0, None)
    off = np.max(np.abs(in_bell - np.diag(np.diag(in_bell))))
    return diag / diag.sum(), float(off)


def states_equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    overlap = np.vdot(a, b)
    if abs(overlap) < 1e-12:
        return False
    phase = overlap / abs(overlap)
    return bool(np.max(np.abs(a * phase - b)) <= tol)


# ---------------------------------------------------------------------------
# circuits backing the Bell-diagonal maps

def two_pair_state(a: Sequence[float], b: Sequence[float]) -> DenseState:
    """Pairs (0,1) and (2,3) in Bell-diagonal states ``a`` and ``b``."""
    return DenseState(4, np.kron(bell_diag_state(a).data, bell_diag_state(b).data), mixed=True)


def swap_circuit(a: Sequence[float], b: Sequence[float], p_meas: float = 0.0) -> np.ndarray:
    """Entanglement swap of pairs (0,1) and (2,3) via a Bell measurement on 1,2.

    Each outcome is followed by its Pauli correction on qubit 3; the returned
    vector is the Bell diagonal of the averaged outer pair (0,3), then
    depolarized on one side by ``p_meas``.
    """
    s = two_pair_state(a, b)
    rho = np.zeros((4, 4), dtype=complex)
    for m in range(4):
        p, post = bell_project(s, (1, 2), m)
        if post is None:
            continue
        fixed = apply_unitary(post, BELL_PAULI[m].conj().T, [1])
        rho += p * fixed.data
    out = DenseState(2, rho, mixed=True)
    out = apply_channel(out, "depolarizing", [1], p_meas)
    return bell_diag_of(out)[0]


def _rx(theta: float) -> np.ndarray:
    return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * X


CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def dejmps_circuit(
    a: Sequence[float],
    b: Sequence[float],
    p_gate: float = 0.0,
    p_meas: float = 0.0,
    keep_success: bool = True,
) -> tuple[float, np.ndarray]:
    """DEJMPS round on pair a = (0,1) and pair b = (2,3); qubits 0,2 at one node.

    Gate noise depolarizes one side of each pair before the circuit; the kept
    pair is depolarized by ``p_meas`` afterwards. Returns the probability of
    the requested branch (coincident or anti-coincident parities) and the
    kept pair's Bell diagonal in that branch.
    """
    s = two_pair_state(a, b)
    s = apply_channel(s, "depolarizing", [1, 3], p_gate)
    s = apply_unitary(s, _rx(np.pi / 2), [0])
    s = apply_unitary(s, _rx(np.pi / 2), [2])
    s = apply_unitary(s, _rx(-np.pi / 2), [1])
    s = apply_unitary(s, _rx(-np.pi / 2), [3])
    s = apply_unitary(s, CNOT, [0, 2])
    s = apply_unitary(s, CNOT, [1, 3])
    rho = np.zeros((4, 4), dtype=complex)
    total = 0.0
    for o2 in (0, 1):
        for o3 in (0, 1):
            if (o2 == o3) != keep_success:
                continue
            p2, post = measure_qubit_z(s, 3, o3)
            if post is None:
                continue
            p1, post = measure_qubit_z(post, 2, o2)
            if post is None:
                continue
            rho += p2 * p1 * post.data
            total += p2 * p1
    if total <= 1e-15:
        return 0.0, np.full(4, 0.25)
    out = DenseState(2, rho / total, mixed=True)
    out = apply_channel(out, "depolarizing", [1], p_meas)
    return total, bell_diag_of(out)[0]


def depolarize_circuit(p: Sequence[float], q: float) -> np.ndarray:
    out = apply_channel(bell_diag_state(p), "depolarizing", [1], q)
    return bell_diag_of(out)[0]


def lc_unitary_state(g: GraphState, v: VertexRef, order: Sequence[VertexRef]) -> np.ndarray:
    """Apply the local Clifford realising local complementation at ``v``.

    U = exp(-i pi/4 X_v) * prod_{w in N(v)} exp(i pi/4 Z_w).
    """
    s, order = graph_to_state(g, order)
    pos = {u: i for i, u in enumerate(order)}
    sx = (I2 - 1j * X) / np.sqrt(2)
    sz = (I2 + 1j * Z) / np.sqrt(2)
    for w in g.neighbors(v):
        s = apply_unitary(s, sz, [pos[w]])
    s = apply_unitary(s, sx, [pos[v]])
    return s.data
