"""Dense state-vector and unitary simulation with qubit 0 most significant."""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import Circuit, Gate, GateKind
from .errors import DimensionMismatch, NonLinearGate, QubitCountMismatch, TooManyQubits
from .rng import derive_rng

MAX_QUBITS = int(os.environ.get("QROUTE_MAX_QUBITS", "14"))

_SQ2 = 1 / np.sqrt(2)
_FIXED = {
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.Z: np.diag([1, -1]).astype(complex),
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2,
    GateKind.S: np.diag([1, 1j]),
    GateKind.SDG: np.diag([1, -1j]),
    GateKind.T: np.diag([1, np.exp(1j * np.pi / 4)]),
    GateKind.TDG: np.diag([1, np.exp(-1j * np.pi / 4)]),
    GateKind.SX: 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]]),
    GateKind.SXDG: 0.5 * np.array([[1 - 1j, 1 + 1j], [1 + 1j, 1 - 1j]]),
    GateKind.CX: np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    GateKind.SWAP: np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


def _ccx_matrix():
    m = np.eye(8, dtype=complex)
    m[[6, 7]] = m[[7, 6]]
    return m


def _cswap_matrix():
    m = np.eye(8, dtype=complex)
    m[[5, 6]] = m[[6, 5]]
    return m


_FIXED[GateKind.CCX] = _ccx_matrix()
_FIXED[GateKind.CSWAP] = _cswap_matrix()
for _m in _FIXED.values():
    _m.setflags(write=False)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s_ = np.cos(theta / 2), np.sin(theta / 2)
    return np.array(
        [[c, -np.exp(1j * lam) * s_], [np.exp(1j * phi) * s_, np.exp(1j * (phi + lam)) * c]],
        dtype=complex,
    )


def gate_matrix(g: Gate) -> np.ndarray:
    k = g.kind
    if k in _FIXED:
        return _FIXED[k]
    if k is GateKind.RZ:
        a = g.params[0] / 2
        return np.diag([np.exp(-1j * a), np.exp(1j * a)])
    if k is GateKind.RX:
        a = g.params[0] / 2
        return np.array([[np.cos(a), -1j * np.sin(a)], [-1j * np.sin(a), np.cos(a)]])
    if k is GateKind.U3:
        return u3_matrix(*g.params)
    raise NonLinearGate(f"no matrix for {k}")  # pragma: no cover


def apply_matrix(tensor: np.ndarray, mat: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Apply a 2^k x 2^k matrix to axes ``qubits`` of a (2,)*n + rest tensor."""
    k = len(qubits)
    g = mat.reshape((2,) * (2 * k))
    out = np.tensordot(g, tensor, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(out, list(range(k)), list(qubits))


def _check_width(n: int) -> None:
    if n > MAX_QUBITS:
        raise TooManyQubits(f"{n} qubits exceeds the dense-simulation cap of {MAX_QUBITS}")


def _evolve(tensor: np.ndarray, gates, matrices=None) -> np.ndarray:
    for i, g in enumerate(gates):
        m = gate_matrix(g) if matrices is None else matrices(i, g)
        tensor = apply_matrix(tensor, m, g.qubits)
    return tensor


def unitary_of(c: Circuit, gate_override=None) -> np.ndarray:
    """Product of gate matrices in circuit order.

    ``gate_override(index, gate)`` may return a replacement matrix; the noise
    module uses it to substitute faulty CNOTs.
    """
    n = c.num_qubits
    _check_width(n)
    dim = 2**n
    tensor = np.eye(dim, dtype=complex).reshape((2,) * n + (dim,))
    tensor = _evolve(tensor, c.gates, gate_override)
    return tensor.reshape(dim, dim)


def apply_to_state(c: Circuit, psi: np.ndarray, gate_override=None) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    n = c.num_qubits
    if psi.shape != (2**n,):
        raise QubitCountMismatch(f"state of length {psi.shape} does not fit {n} qubits")
    _check_width(n)
    out = _evolve(psi.reshape((2,) * n), c.gates, gate_override)
    return out.reshape(-1)


def basis_state(bits: str | Sequence[int]) -> np.ndarray:
    bits = [int(b) for b in bits]
    psi = np.zeros(2 ** len(bits), dtype=complex)
    psi[int("".join(map(str, bits)), 2) if bits else 0] = 1
    return psi


def equivalent_up_to_global_phase(U: np.ndarray, V: np.ndarray, tol: float = 1e-8) -> bool:
    U = np.asarray(U)
    V = np.asarray(V)
    if U.shape != V.shape:
        raise DimensionMismatch(f"{U.shape} vs {V.shape}")
    idx = np.unravel_index(np.argmax(np.abs(V)), V.shape)
    if abs(V[idx]) < 1e-14:
        return bool(np.linalg.norm(U) <= tol * U.shape[0])
    ratio = U[idx] / V[idx]
    if abs(ratio) < 1e-14:
        return False
    phase = ratio / abs(ratio)
    return bool(np.linalg.norm(U - phase * V) <= tol * U.shape[0])


def phase_aligned_error(U: np.ndarray, V: np.ndarray) -> float:
    """min over phi of ||U - e^{i phi} V||_F."""
    ov = np.vdot(V, U)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.linalg.norm(U - phase * V))


# -- sampling ---------------------------------------------------------------


@dataclass
class ShotTable:
    counts: dict[str, int] = field(default_factory=dict)
    shots: int = 0
    seed: object = None

    def __post_init__(self):
        total = sum(self.counts.values())
        if self.shots == 0:
            self.shots = total
        if total != self.shots:
            raise ValueError(f"counts sum to {total}, expected {self.shots}")

    def frequencies(self) -> dict[str, float]:
        return {k: v / self.shots for k, v in self.counts.items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bitstring", "count"])
        for k in sorted(self.counts):
            w.writerow([k, self.counts[k]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, seed=None) -> "ShotTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        counts = {r["bitstring"]: int(r["count"]) for r in rows}
        return cls(counts, sum(counts.values()), seed)

    def merged(self, other: "ShotTable") -> "ShotTable":
        c = dict(self.counts)
        for k, v in other.counts.items():
            c[k] = c.get(k, 0) + v
        return ShotTable(c, self.shots + other.shots, self.seed)


def marginal_probabilities(psi: np.ndarray, measured_qubits: Sequence[int]) -> np.ndarray:
    n = int(np.log2(psi.size))
    probs = (np.abs(psi) ** 2).reshape((2,) * n)
    keep = list(measured_qubits)
    rest = tuple(q for q in range(n) if q not in keep)
    marg = probs.sum(axis=rest) if rest else probs
    # sum() keeps the remaining axes in increasing order; reorder to `keep`
    order = sorted(keep)
    marg = np.transpose(marg, [order.index(q) for q in keep])
    p = marg.reshape(-1)
    return p / p.sum()


def sample_counts(psi: np.ndarray, measured_qubits: Sequence[int], shots: int, seed) -> ShotTable:
    if shots < 1:
        raise ValueError("shots must be positive")
    k = len(measured_qubits)
    p = marginal_probabilities(np.asarray(psi), measured_qubits)
    rng = derive_rng(seed)
    draws = rng.multinomial(shots, p)
    counts = {format(i, f"0{k}b"): int(c) for i, c in enumerate(draws) if c}
    return ShotTable(counts, shots, seed)


# -- F2 linear maps -----------------------------------------------------------


@dataclass(frozen=True)
class BitMatrix:
    """n x n matrix over F2 acting on column bit-vectors (bit 0 = qubit 0)."""

    data: np.ndarray

    def __post_init__(self):
        arr = (np.asarray(self.data, dtype=np.uint8) & 1).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls(np.eye(n, dtype=np.uint8))

    def __eq__(self, other) -> bool:
        return isinstance(other, BitMatrix) and np.array_equal(self.data, other.data)

    def __hash__(self) -> int:
        return hash(self.data.tobytes())

    def __matmul__(self, other: "BitMatrix") -> "BitMatrix":
        return BitMatrix((self.data.astype(int) @ other.data.astype(int)) % 2)

    def apply(self, bits: Sequence[int]) -> np.ndarray:
        return (self.data.astype(int) @ np.asarray(bits, dtype=int)) % 2

    def rank(self) -> int:
        m = self.data.copy()
        r = 0
        rows, cols = m.shape
        for c in range(cols):
            piv = next((i for i in range(r, rows) if m[i, c]), None)
            if piv is None:
                continue
            m[[r, piv]] = m[[piv, r]]
            for i in range(rows):
                if i != r and m[i, c]:
                    m[i] ^= m[r]
            r += 1
        return r

    def is_invertible(self) -> bool:
        return self.rank() == self.n

    def permutation_matrix(self) -> np.ndarray:
        n = self.n
        dim = 2**n
        P = np.zeros((dim, dim))
        for idx in range(dim):
            bits = [(idx >> (n - 1 - q)) & 1 for q in range(n)]
            out = self.apply(bits)
            j = int("".join(str(b) for b in out), 2)
            P[j, idx] = 1
        return P


def f2_matrix(c: Circuit) -> BitMatrix:
    m = np.eye(c.num_qubits, dtype=np.uint8)
    for i, g in enumerate(c.gates):
        if not g.is_cx:
            raise NonLinearGate(f"gate {i} ({g.kind.name}) is not a CX")
        ctl, tgt = g.qubits
        m[tgt] ^= m[ctl]
    return BitMatrix(m)


def embed_gate_matrix(mat: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Full 2^n matrix of ``mat`` acting on ``qubits`` of an n-qubit register."""
    dim = 2**n
    tensor = np.eye(dim, dtype=complex).reshape((2,) * n + (dim,))
    return apply_matrix(tensor, mat, qubits).reshape(dim, dim)


def ideal_matrix(kind: GateKind, qubits: Sequence[int], n: int) -> np.ndarray:
    return embed_gate_matrix(_FIXED[kind], qubits, n)


def pauli_matrix(label: str) -> np.ndarray:
    mats = {
        "I": np.eye(2, dtype=complex),
        "X": _FIXED[GateKind.X],
        "Y": np.array([[0, -1j], [1j, 0]]),
        "Z": _FIXED[GateKind.Z],
    }
    out = np.ones((1, 1), dtype=complex)
    for ch in label:
        out = np.kron(out, mats[ch])
    return out


def expectation_from_counts(counts: Mapping[str, int], positions: Sequence[int]) -> float:
    """Parity expectation <Z...Z> on the listed bit positions of the bitstrings."""
    total = 0
    acc = 0
    for bits, c in counts.items():
        par = sum(int(bits[p]) for p in positions) & 1
        acc += -c if par else c
        total += c
    return acc / total
