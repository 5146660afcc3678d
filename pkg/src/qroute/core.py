"""Circuit IR, coupling maps, metrics and the entangling-structure signature.

Qubit 0 is the most significant wire everywhere in the package.
"""
from __future__ import annotations

import heapq
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import (
    InvalidCoupling,
    InvalidPermutation,
    MultiQubitPrimitivePresent,
    ValidationError,
)


class GateKind(Enum):
    X = "x"
    Z = "z"
    H = "h"
    S = "s"
    SDG = "sdg"
    T = "t"
    TDG = "tdg"
    SX = "sx"
    SXDG = "sxdg"
    RZ = "rz"
    RX = "rx"
    U3 = "u3"
    CX = "cx"
    SWAP = "swap"
    CCX = "ccx"
    CSWAP = "cswap"

    @property
    def arity(self) -> int:
        return _ARITY.get(self, 1)

    @property
    def num_params(self) -> int:
        return _NPARAMS.get(self, 0)


_ARITY = {GateKind.CX: 2, GateKind.SWAP: 2, GateKind.CCX: 3, GateKind.CSWAP: 3}
_NPARAMS = {GateKind.RZ: 1, GateKind.RX: 1, GateKind.U3: 3}
_INVERSE_KIND = {
    GateKind.S: GateKind.SDG,
    GateKind.SDG: GateKind.S,
    GateKind.T: GateKind.TDG,
    GateKind.TDG: GateKind.T,
    GateKind.SX: GateKind.SXDG,
    GateKind.SXDG: GateKind.SX,
}
MULTI_QUBIT_PRIMITIVES = frozenset({GateKind.SWAP, GateKind.CCX, GateKind.CSWAP})


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        qs = tuple(int(q) for q in self.qubits)
        ps = tuple(float(p) for p in self.params)
        object.__setattr__(self, "qubits", qs)
        object.__setattr__(self, "params", ps)
        if len(qs) != self.kind.arity:
            raise ValidationError(f"{self.kind.value} expects {self.kind.arity} qubits, got {len(qs)}")
        if len(set(qs)) != len(qs):
            raise ValidationError(f"repeated qubit in {self.kind.value}{qs}")
        if any(q < 0 for q in qs):
            raise ValidationError(f"negative qubit index in {self.kind.value}{qs}")
        if len(ps) != self.kind.num_params:
            raise ValidationError(f"{self.kind.value} expects {self.kind.num_params} parameters")
        if not all(math.isfinite(p) for p in ps):
            raise ValidationError(f"non-finite angle in {self.kind.value}{ps}")

    @property
    def is_cx(self) -> bool:
        return self.kind is GateKind.CX

    def inverse(self) -> "Gate":
        k = self.kind
        if k in _INVERSE_KIND:
            return Gate(_INVERSE_KIND[k], self.qubits)
        if k in (GateKind.RZ, GateKind.RX):
            return Gate(k, self.qubits, (-self.params[0],))
        if k is GateKind.U3:
            theta, phi, lam = self.params
            return Gate(k, self.qubits, (-theta, -lam, -phi))
        return self

    def remap(self, mapping: Sequence[int]) -> "Gate":
        return Gate(self.kind, tuple(mapping[q] for q in self.qubits), self.params)

    def __repr__(self) -> str:
        args = ",".join(str(q) for q in self.qubits)
        if self.params:
            ps = ",".join(f"{p:.6g}" for p in self.params)
            return f"{self.kind.name}({ps})[{args}]"
        return f"{self.kind.name}({args})"


def _one(kind):
    def make(q: int) -> Gate:
        return Gate(kind, (q,))

    make.__name__ = kind.value
    return make


x = _one(GateKind.X)
z = _one(GateKind.Z)
h = _one(GateKind.H)
s = _one(GateKind.S)
sdg = _one(GateKind.SDG)
t = _one(GateKind.T)
tdg = _one(GateKind.TDG)
sx = _one(GateKind.SX)
sxdg = _one(GateKind.SXDG)


def rz(theta: float, q: int) -> Gate:
    return Gate(GateKind.RZ, (q,), (theta,))


def rx(theta: float, q: int) -> Gate:
    return Gate(GateKind.RX, (q,), (theta,))


def u3(theta: float, phi: float, lam: float, q: int) -> Gate:
    return Gate(GateKind.U3, (q,), (theta, phi, lam))


def ry(theta: float, q: int) -> Gate:
    """Ry is not a primitive; it is U3(theta, 0, 0)."""
    return u3(theta, 0.0, 0.0, q)


def cx(control: int, target: int) -> Gate:
    return Gate(GateKind.CX, (control, target))


def swap(a: int, b: int) -> Gate:
    return Gate(GateKind.SWAP, (a, b))


def ccx(c1: int, c2: int, target: int) -> Gate:
    return Gate(GateKind.CCX, (c1, c2, target))


def cswap(control: int, t1: int, t2: int) -> Gate:
    return Gate(GateKind.CSWAP, (control, t1, t2))


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...] = ()
    name: str = ""
    # terminal measurements as (qubit, classical bit) pairs
    measurements: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValidationError("a circuit needs at least one qubit")
        gates = tuple(self.gates)
        object.__setattr__(self, "gates", gates)
        object.__setattr__(self, "measurements", tuple((int(a), int(b)) for a, b in self.measurements))
        for i, g in enumerate(gates):
            if max(g.qubits) >= self.num_qubits:
                raise ValidationError(f"gate {i} {g!r} exceeds {self.num_qubits} qubits")
        for q, _ in self.measurements:
            if not 0 <= q < self.num_qubits:
                raise ValidationError(f"measurement on invalid qubit {q}")

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.num_qubits != self.num_qubits:
            raise ValidationError("cannot concatenate circuits of different widths")
        return Circuit(self.num_qubits, self.gates + other.gates, self.name, self.measurements + other.measurements)

    def with_gates(self, gates: Iterable[Gate], name: str | None = None) -> "Circuit":
        return Circuit(self.num_qubits, tuple(gates), self.name if name is None else name, self.measurements)

    def widened(self, num_qubits: int) -> "Circuit":
        if num_qubits < self.num_qubits:
            raise ValidationError("cannot shrink a circuit")
        return Circuit(num_qubits, self.gates, self.name, self.measurements)

    @property
    def cx_pairs(self) -> list[tuple[int, int]]:
        return [g.qubits for g in self.gates if g.is_cx]


@dataclass(frozen=True)
class CouplingMap:
    num_qubits: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        norm = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise InvalidCoupling(f"self-loop on qubit {a}")
            if not (0 <= a < self.num_qubits and 0 <= b < self.num_qubits):
                raise InvalidCoupling(f"edge ({a},{b}) outside {self.num_qubits} qubits")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def line(cls, n: int) -> "CouplingMap":
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))

    @classmethod
    def all_to_all(cls, n: int) -> "CouplingMap":
        return cls(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))

    @classmethod
    def parse(cls, text: str) -> "CouplingMap":
        """Build from 'line:N' or 'full:N'."""
        kind, _, num = text.partition(":")
        try:
            n = int(num)
        except ValueError:
            raise InvalidCoupling(f"bad coupling spec {text!r}") from None
        if n < 1:
            raise InvalidCoupling(f"bad coupling spec {text!r}")
        if kind == "line":
            return cls.line(n)
        if kind in ("full", "all"):
            return cls.all_to_all(n)
        raise InvalidCoupling(f"unknown coupling kind {kind!r}")

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def neighbors(self, q: int) -> list[int]:
        return sorted({b if a == q else a for a, b in self.edges if q in (a, b)})

    @property
    def is_line(self) -> bool:
        return self.edges == CouplingMap.line(self.num_qubits).edges

    @property
    def is_complete(self) -> bool:
        return len(self.edges) == self.num_qubits * (self.num_qubits - 1) // 2

    def directed_pairs(self) -> list[tuple[int, int]]:
        out = []
        for a, b in sorted(self.edges):
            out += [(a, b), (b, a)]
        return out


@dataclass(frozen=True)
class CircuitMetrics:
    cnot_count: int
    depth: int
    pair_histogram: Mapping[tuple[int, int], int]


@dataclass(frozen=True)
class Violation:
    gate_index: int
    pair: tuple[int, int]


StructureSignature = tuple  # canonical tuple of (control, target) pairs


def _require_decomposed(c: Circuit) -> None:
    for i, g in enumerate(c.gates):
        if g.kind in MULTI_QUBIT_PRIMITIVES:
            raise MultiQubitPrimitivePresent(f"gate {i} is {g.kind.name}; decompose it first")


def depth_of(gates: Iterable[Gate], num_qubits: int) -> int:
    level = [0] * num_qubits
    for g in gates:
        d = max(level[q] for q in g.qubits) + 1
        for q in g.qubits:
            level[q] = d
    return max(level, default=0)


def metrics(c: Circuit) -> CircuitMetrics:
    _require_decomposed(c)
    hist = Counter(g.qubits for g in c.gates if g.is_cx)
    return CircuitMetrics(sum(hist.values()), depth_of(c.gates, c.num_qubits), dict(hist))


def validate_connectivity(c: Circuit, m: CouplingMap) -> list[Violation]:
    out = []
    for i, g in enumerate(c.gates):
        if len(g.qubits) < 2:
            continue
        qs = g.qubits
        for a in range(len(qs)):
            for b in range(a + 1, len(qs)):
                if max(qs[a], qs[b]) >= m.num_qubits or not m.has_edge(qs[a], qs[b]):
                    out.append(Violation(i, (qs[a], qs[b])))
    return out


def structure_signature(c: Circuit) -> StructureSignature:
    _require_decomposed(c)
    cxs = [g.qubits for g in c.gates if g.is_cx]
    n = len(cxs)
    succ: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n
    for i in range(n):
        ci, ti = cxs[i]
        for j in range(i + 1, n):
            cj, tj = cxs[j]
            if ci == tj or ti == cj:
                succ[i].append(j)
                indeg[j] += 1
    heap = [(cxs[i][0], cxs[i][1], i) for i in range(n) if indeg[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        ctl, tgt, i = heapq.heappop(heap)
        order.append((ctl, tgt))
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(heap, (cxs[j][0], cxs[j][1], j))
    return tuple(order)


def invert(c: Circuit) -> Circuit:
    return c.with_gates(g.inverse() for g in reversed(c.gates))


def remap_qubits(c: Circuit, perm: Sequence[int] | Mapping[int, int], num_qubits: int | None = None) -> Circuit:
    """Relabel qubit q as perm[q].

    With ``num_qubits`` larger than the circuit width the map may be an
    injective embedding into a wider register.
    """
    n = c.num_qubits
    width = n if num_qubits is None else num_qubits
    if isinstance(perm, Mapping):
        mapping = [perm.get(q, q) for q in range(n)]
    else:
        mapping = [int(p) for p in perm]
    if len(mapping) != n:
        raise InvalidPermutation(f"expected {n} entries, got {len(mapping)}")
    if len(set(mapping)) != n or any(not 0 <= p < width for p in mapping):
        raise InvalidPermutation(f"{mapping} is not injective into range({width})")
    if width == n and sorted(mapping) != list(range(n)):
        raise InvalidPermutation(f"{mapping} is not a permutation")
    meas = tuple((mapping[q], b) for q, b in c.measurements)
    return Circuit(width, tuple(g.remap(mapping) for g in c.gates), c.name, meas)


def count_cx(c: Circuit) -> int:
    return sum(1 for g in c.gates if g.is_cx)
