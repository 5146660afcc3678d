"""Biased-CNOT coherent errors, readout errors and measurement-error mitigation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import Circuit, CouplingMap, GateKind
from .errors import MissingPair, MultiQubitPrimitivePresent, SingularConfusion, ValidationError
from .rng import derive_rng
from .sim import ShotTable, apply_to_state, gate_matrix, pauli_matrix, unitary_of

BIAS_TERMS = ("IY", "IZ", "IX", "ZY", "ZZ")


@dataclass(frozen=True)
class BiasVector:
    values: tuple[float, float, float, float, float] = (0.0, 0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) != 5:
            raise ValidationError("a bias vector has five components")
        if not all(np.isfinite(vals)) or any(abs(v) > 1 for v in vals):
            raise ValidationError(f"bias ratios must be finite with |beta| <= 1, got {vals}")
        object.__setattr__(self, "values", vals)

    def __iter__(self):
        return iter(self.values)


_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def _expm_hermitian(H: np.ndarray, scale: complex) -> np.ndarray:
    w, V = np.linalg.eigh(H)
    return (V * np.exp(scale * w)) @ V.conj().T


_ZX = pauli_matrix("ZX")
_DRESSING = _CNOT @ _expm_hermitian(_ZX, 1j * np.pi / 4)


@lru_cache(maxsize=4096)
def _bcnot_cached(values: tuple) -> np.ndarray:
    H = _ZX.copy()
    for b, label in zip(values, BIAS_TERMS):
        if b:
            H = H + b * pauli_matrix(label)
    U = _DRESSING @ _expm_hermitian(H, -1j * np.pi / 4)
    U.setflags(write=False)
    return U


def bcnot_unitary(beta: BiasVector | Sequence[float]) -> np.ndarray:
    """Faulty CNOT; the first Pauli factor acts on the control."""
    if not isinstance(beta, BiasVector):
        beta = BiasVector(tuple(beta))
    if not any(beta.values):
        return _CNOT.copy()
    return _bcnot_cached(beta.values).copy()


@dataclass
class BcnotModel:
    pairs: dict[tuple[int, int], BiasVector] = field(default_factory=dict)
    beta_max: float = 0.0
    seed: object = None

    def bias(self, a: int, b: int) -> BiasVector:
        try:
            return self.pairs[(a, b)]
        except KeyError:
            raise MissingPair(f"no bias vector for CX({a},{b})") from None

    def to_json(self) -> str:
        doc = {
            "beta_max": self.beta_max,
            "seed": self.seed,
            "pairs": [{"a": a, "b": b, "beta": list(v.values)} for (a, b), v in sorted(self.pairs.items())],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "BcnotModel":
        doc = json.loads(text)
        pairs = {(int(p["a"]), int(p["b"])): BiasVector(tuple(p["beta"])) for p in doc["pairs"]}
        return cls(pairs, float(doc["beta_max"]), doc.get("seed"))

    @classmethod
    def zero(cls, coupling: CouplingMap) -> "BcnotModel":
        return cls({p: BiasVector() for p in coupling.directed_pairs()}, 0.0, None)


def sample_model(coupling: CouplingMap, beta_max: float, seed) -> BcnotModel:
    """Uniform bias ratios in [-beta_max, beta_max] for every ordered coupled pair.

    The draws are a fixed stream of unit-interval variates scaled by
    ``beta_max``, so one seed gives proportional models across beta_max.
    """
    if beta_max < 0:
        raise ValidationError("beta_max must be non-negative")
    rng = derive_rng(seed, "bcnot-model")
    pairs = {}
    for pair in coupling.directed_pairs():
        u = rng.uniform(-1.0, 1.0, 5)
        pairs[pair] = BiasVector(tuple(beta_max * u))
    return BcnotModel(pairs, float(beta_max), seed)


def _override(c: Circuit, m: BcnotModel | None):
    if m is None:
        return None
    for i, g in enumerate(c.gates):
        if g.kind in (GateKind.SWAP, GateKind.CCX, GateKind.CSWAP):
            raise MultiQubitPrimitivePresent(f"gate {i} is {g.kind.name}; decompose it first")
    cache: dict[tuple[int, int], np.ndarray] = {}

    def override(_i, g):
        if g.kind is GateKind.CX:
            if g.qubits not in cache:
                cache[g.qubits] = bcnot_unitary(m.bias(*g.qubits))
            return cache[g.qubits]
        return gate_matrix(g)

    return override


def noisy_unitary(c: Circuit, m: BcnotModel | None) -> np.ndarray:
    return unitary_of(c, _override(c, m))


def noisy_state(c: Circuit, m: BcnotModel | None, psi: np.ndarray) -> np.ndarray:
    return apply_to_state(c, psi, _override(c, m))


# -- readout -------------------------------------------------------------------


@dataclass(frozen=True)
class ReadoutModel:
    """Per-qubit column-stochastic confusion matrices M[read, prepared]."""

    confusion: tuple

    def __post_init__(self):
        mats = tuple(np.asarray(m, dtype=float) for m in self.confusion)
        for m in mats:
            if m.shape != (2, 2) or np.any(m < -1e-12) or np.any(m > 1 + 1e-12):
                raise ValidationError("confusion entries must lie in [0, 1]")
            if not np.allclose(m.sum(axis=0), 1.0, atol=1e-12):
                raise ValidationError("confusion columns must sum to 1")
        object.__setattr__(self, "confusion", mats)

    @classmethod
    def symmetric(cls, n: int, p: float) -> "ReadoutModel":
        m = np.array([[1 - p, p], [p, 1 - p]])
        return cls(tuple(m for _ in range(n)))

    @classmethod
    def identity(cls, n: int) -> "ReadoutModel":
        return cls.symmetric(n, 0.0)


def simulate_readout(t: ShotTable, r: ReadoutModel, seed) -> ShotTable:
    rng = derive_rng(seed, "readout")
    k = len(r.confusion)
    flip0 = np.array([m[1, 0] for m in r.confusion])  # P(read 1 | 0)
    flip1 = np.array([m[0, 1] for m in r.confusion])  # P(read 0 | 1)
    out: dict[str, int] = {}
    weights = 1 << np.arange(k - 1, -1, -1)
    for bits in sorted(t.counts):
        c = t.counts[bits]
        if len(bits) != k:
            raise ValidationError(f"bitstring {bits!r} does not match {k} readout channels")
        b = np.array([int(ch) for ch in bits])
        p = np.where(b == 1, flip1, flip0)
        flips = rng.random((c, k)) < p
        vals = (np.bitwise_xor(b, flips.astype(int)) * weights).sum(axis=1)
        for v, n in zip(*np.unique(vals, return_counts=True)):
            key = format(int(v), f"0{k}b")
            out[key] = out.get(key, 0) + int(n)
    return ShotTable(out, t.shots, seed)


@dataclass
class QuasiDistribution:
    probabilities: dict[str, float]
    has_negative: bool

    def expectation_parity(self, positions: Sequence[int]) -> float:
        return sum(p * (-1) ** (sum(int(b[i]) for i in positions) & 1) for b, p in self.probabilities.items())


def _marginal_one(t: ShotTable, q: int) -> float:
    return sum(c for b, c in t.counts.items() if b[q] == "1") / t.shots


def calibrated_confusion(zeros: ShotTable, ones: ShotTable) -> list[np.ndarray]:
    k = len(next(iter(zeros.counts)))
    mats = []
    for q in range(k):
        e0 = _marginal_one(zeros, q)
        e1 = 1 - _marginal_one(ones, q)
        mats.append(np.array([[1 - e0, e1], [e0, 1 - e1]]))
    return mats


def mem_correct(t: ShotTable, calibration: tuple[ShotTable, ShotTable]) -> QuasiDistribution:
    """Invert the tensored per-qubit confusion model calibrated on |0..0> and |1..1>."""
    mats = calibrated_confusion(*calibration)
    k = len(mats)
    vec = np.zeros((2,) * k)
    for b, c in t.counts.items():
        vec[tuple(int(ch) for ch in b)] += c / t.shots
    for q, m in enumerate(mats):
        if abs(np.linalg.det(m)) < 1e-9:
            raise SingularConfusion(f"confusion matrix of qubit {q} is not invertible")
        vec = np.moveaxis(np.tensordot(np.linalg.inv(m), vec, axes=([1], [q])), 0, q)
    flat = vec.reshape(-1)
    probs = {format(i, f"0{k}b"): float(v) for i, v in enumerate(flat) if abs(v) > 1e-15}
    return QuasiDistribution(probs, bool(np.any(flat < -1e-12)))
