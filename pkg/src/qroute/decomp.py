"""Toffoli/Fredkin decomposition library and equivalent-family generation."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import core
from .core import Circuit, CouplingMap, Gate, GateKind, invert, remap_qubits, structure_signature
from .errors import (
    QasmError,
    QubitCountMismatch,
    TargetNotFound,
    UnsupportedControlledW,
    ValidationError,
)
from .qasmio import emit_qasm, parse_qasm
from .sim import equivalent_up_to_global_phase, gate_matrix, ideal_matrix, unitary_of


class Which(Enum):
    TOFFOLI = "Toffoli"
    FREDKIN = "Fredkin"


class Connectivity(Enum):
    ALL_TO_ALL = "AllToAll"
    LINEAR = "Linear"


class Placement(Enum):
    ANYWHERE = "Anywhere"
    ENDS = "Ends"
    CENTER = "Center"


@dataclass(frozen=True)
class GateSpec:
    which: Which
    connectivity: Connectivity
    odd_qubit_placement: Placement = Placement.ANYWHERE

    def __post_init__(self):
        for name, enum in (("which", Which), ("connectivity", Connectivity), ("odd_qubit_placement", Placement)):
            val = getattr(self, name)
            if not isinstance(val, enum):
                object.__setattr__(self, name, enum(val))
        if self.connectivity is Connectivity.ALL_TO_ALL and self.odd_qubit_placement is not Placement.ANYWHERE:
            raise ValidationError("Ends/Center placements only apply to linear connectivity")
        if self.which is Which.TOFFOLI and self.odd_qubit_placement is not Placement.ANYWHERE:
            raise ValidationError("Toffoli target placement is immaterial; use Anywhere")
        if (
            self.which is Which.FREDKIN
            and self.connectivity is Connectivity.LINEAR
            and self.odd_qubit_placement is Placement.ANYWHERE
        ):
            raise ValidationError("linear Fredkin needs an Ends or Center control placement")

    @property
    def key(self) -> str:
        parts = [self.which.value.lower(), "all_to_all" if self.connectivity is Connectivity.ALL_TO_ALL else "linear"]
        if self.connectivity is Connectivity.LINEAR and self.which is Which.FREDKIN:
            parts.append(self.odd_qubit_placement.value.lower())
        return "_".join(parts)

    @property
    def coupling(self) -> CouplingMap:
        if self.connectivity is Connectivity.LINEAR:
            return CouplingMap.line(3)
        return CouplingMap.all_to_all(3)

    @property
    def roles(self) -> tuple[int, int, int]:
        """Canonical qubit roles: (c1, c2, target) for Toffoli, (control, t1, t2) for Fredkin."""
        if self.which is Which.TOFFOLI:
            return (0, 2, 1) if self.connectivity is Connectivity.LINEAR else (0, 1, 2)
        if self.odd_qubit_placement is Placement.CENTER:
            return (1, 0, 2)
        return (0, 1, 2)

    @property
    def gate_kind(self) -> GateKind:
        return GateKind.CCX if self.which is Which.TOFFOLI else GateKind.CSWAP

    def target_unitary(self) -> np.ndarray:
        return ideal_matrix(self.gate_kind, self.roles, 3)

    def to_json(self) -> dict:
        return {
            "gate": self.which.value,
            "connectivity": self.connectivity.value,
            "odd_qubit_placement": self.odd_qubit_placement.value,
        }


TOFFOLI_ALL = GateSpec(Which.TOFFOLI, Connectivity.ALL_TO_ALL)
TOFFOLI_LINEAR = GateSpec(Which.TOFFOLI, Connectivity.LINEAR)
FREDKIN_ALL = GateSpec(Which.FREDKIN, Connectivity.ALL_TO_ALL)
FREDKIN_ENDS = GateSpec(Which.FREDKIN, Connectivity.LINEAR, Placement.ENDS)
FREDKIN_CENTER = GateSpec(Which.FREDKIN, Connectivity.LINEAR, Placement.CENTER)
ALL_SPECS = (TOFFOLI_ALL, TOFFOLI_LINEAR, FREDKIN_ALL, FREDKIN_ENDS, FREDKIN_CENTER)

# Optimal CNOT counts per scenario.
CNOT_BUDGET = {TOFFOLI_ALL: 6, TOFFOLI_LINEAR: 8, FREDKIN_ALL: 7, FREDKIN_ENDS: 8, FREDKIN_CENTER: 10}


def spec_from_json(d: dict) -> GateSpec:
    return GateSpec(Which(d["gate"]), Connectivity(d["connectivity"]), Placement(d.get("odd_qubit_placement", "Anywhere")))


def seed_circuit(spec: GateSpec) -> Circuit:
    text = resources.files("qroute.data.seeds").joinpath(f"{spec.key}.qasm").read_text()
    c = parse_qasm(text)
    return Circuit(c.num_qubits, c.gates, spec.key)


def textbook_fredkin() -> Circuit:
    """Eight-CNOT Fredkin: the blue-box Toffoli between two CX(2,1)."""
    tof = seed_circuit(TOFFOLI_ALL)
    return Circuit(3, (core.cx(2, 1),) + tof.gates + (core.cx(2, 1),), "fredkin_textbook")


def implements(c: Circuit, spec: GateSpec, tol: float = 1e-8) -> bool:
    return c.num_qubits == 3 and equivalent_up_to_global_phase(unitary_of(c), spec.target_unitary(), tol)


# -- controlled constructions ---------------------------------------------------


def _zyz(U: np.ndarray) -> tuple[float, float, float, float]:
    """U = e^{i alpha} Rz(beta) Ry(gamma) Rz(delta)."""
    alpha = np.angle(np.linalg.det(U)) / 2
    V = U * np.exp(-1j * alpha)
    a, b = V[0, 0], V[1, 0]
    gamma = 2 * np.arctan2(abs(b), abs(a))
    if abs(a) < 1e-12:
        plus, minus = 0.0, 2 * np.angle(b)
    elif abs(b) < 1e-12:
        plus, minus = -2 * np.angle(a), 0.0
    else:
        plus, minus = -2 * np.angle(a), 2 * np.angle(b)
    beta = (plus + minus) / 2
    delta = (plus - minus) / 2
    return float(alpha), float(beta), float(gamma), float(delta)


def controlled_single_qubit(U: np.ndarray, control: int, target: int) -> list[Gate]:
    """Two-CX controlled-U, exact up to global phase."""
    alpha, beta, gamma, delta = _zyz(U)
    return [
        core.rz((delta - beta) / 2, target),
        core.cx(control, target),
        core.rz(-(delta + beta) / 2, target),
        core.ry(-gamma / 2, target),
        core.cx(control, target),
        core.ry(gamma / 2, target),
        core.rz(beta, target),
        core.rz(alpha, control),
    ]


def _controlled_gate(g: Gate, control: int) -> list[Gate]:
    if g.kind is GateKind.CX:
        a, b = g.qubits
        seed = seed_circuit(TOFFOLI_ALL)
        return list(remap_qubits(seed, [control, a, b], max(control, a, b) + 1).gates)
    if g.kind.arity == 1:
        return controlled_single_qubit(gate_matrix(g), control, g.qubits[0])
    raise UnsupportedControlledW(f"cannot control {g.kind.name}")


def controlled_from_symmetric(V: Circuit, W: Circuit, control: int) -> Circuit:
    """V, controlled-W, V^dagger on V's qubits plus one control wire.

    ``control`` is the index of the control in the widened register; the
    remaining wires carry V's qubits in order.
    """
    if V.num_qubits != W.num_qubits:
        raise QubitCountMismatch("V and W must act on the same qubits")
    n = V.num_qubits
    if not 0 <= control <= n:
        raise ValidationError(f"control index {control} outside 0..{n}")
    for g in W.gates:
        if g.kind is not GateKind.CX and g.kind.arity != 1:
            raise UnsupportedControlledW(f"W contains {g.kind.name}")
    wires = [q if q < control else q + 1 for q in range(n)]
    Vw = remap_qubits(V, wires, n + 1)
    Ww = remap_qubits(W, wires, n + 1)
    gates = list(Vw.gates)
    for g in Ww.gates:
        gates += _controlled_gate(g, control)
    gates += invert(Vw).gates
    return Circuit(n + 1, tuple(gates), "controlled")


def retarget_toffoli(c: Circuit, old_target: int, new_target: int) -> Circuit:
    """Move the Hadamard pair that turns CCZ into a Toffoli onto ``new_target``."""
    n = c.num_qubits
    if not (0 <= old_target < n and 0 <= new_target < n):
        raise TargetNotFound(f"target outside the {n}-qubit register")
    touched = [i for i, g in enumerate(c.gates) if old_target in g.qubits]
    if not touched:
        raise TargetNotFound(f"no gate acts on qubit {old_target}")
    if old_target == new_target:
        return c
    first, last = touched[0], touched[-1]
    gates = list(c.gates)
    hh = GateKind.H
    if first != last and gates[first].kind is hh and gates[last].kind is hh:
        middle = [g for i, g in enumerate(gates) if i not in (first, last)]
        out = [core.h(new_target)] + middle + [core.h(new_target)]
    else:
        wrap = [core.h(old_target), core.h(new_target)]
        out = wrap + gates + wrap
    return c.with_gates(out)


# -- families -----------------------------------------------------------------


@dataclass
class CorpusFailure:
    source: str
    reason: str


@dataclass
class EquivalentFamily:
    spec: GateSpec
    circuits: list[Circuit] = field(default_factory=list)
    signatures: list[tuple] = field(default_factory=list)
    failures: list[CorpusFailure] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.circuits)

    def add(self, c: Circuit) -> bool:
        sig = structure_signature(c)
        if sig in self.signatures:
            return False
        self.circuits.append(c)
        self.signatures.append(sig)
        return True

    @property
    def structures(self) -> int:
        return len(set(self.signatures))


def _transforms(spec: GateSpec):
    yield "invert", invert
    r = spec.roles
    if spec.which is Which.FREDKIN:
        perm = list(range(3))
        perm[r[1]], perm[r[2]] = r[2], r[1]
        yield "swap_targets", lambda c, p=tuple(perm): remap_qubits(c, p)
    else:
        tgt = r[2]
        for perm in itertools.permutations(range(3)):
            if perm == (0, 1, 2):
                continue

            def permute(c, p=perm):
                moved = remap_qubits(c, p)
                return retarget_toffoli(moved, p[tgt], tgt)

            yield f"permute{perm}", permute


def _reverse_cx(c: Circuit, index: int) -> Circuit:
    """Rewrite the index-th CX as H.H CX(reversed) H.H."""
    gates = list(c.gates)
    a, b = gates[index].qubits
    gates[index : index + 1] = [core.h(a), core.h(b), core.cx(b, a), core.h(a), core.h(b)]
    return c.with_gates(gates)


def symmetry_family(seed: Circuit, spec: GateSpec, reverse_cx: bool = False) -> EquivalentFamily:
    """Closure of ``seed`` under the gate's symmetries, one circuit per structure.

    With ``reverse_cx`` the closure also flips individual CNOTs through
    Hadamard conjugation, which keeps the CNOT count and connectivity.
    """
    coupling = spec.coupling
    fam = EquivalentFamily(spec)
    fam.add(seed)
    frontier = [seed]
    transforms = list(_transforms(spec))
    while frontier:
        nxt = []
        for c in frontier:
            cands = [f(c) for _, f in transforms]
            if reverse_cx:
                cands += [_reverse_cx(c, i) for i, g in enumerate(c.gates) if g.is_cx]
            for cand in cands:
                if core.validate_connectivity(cand, coupling):
                    continue
                if fam.add(cand):
                    nxt.append(cand)
        frontier = nxt
    for i, c in enumerate(fam.circuits):
        fam.circuits[i] = Circuit(c.num_qubits, c.gates, f"{spec.key}_{i}")
    return fam


def default_family(spec: GateSpec, reverse_cx: bool = False) -> EquivalentFamily:
    return symmetry_family(seed_circuit(spec), spec, reverse_cx)


# -- corpus I/O -------------------------------------------------------------------


def _role_assignments(spec: GateSpec) -> list[tuple[int, int, int]]:
    if spec.which is Which.TOFFOLI:
        return [(a, b, t) for t in range(3) for a, b in [tuple(q for q in range(3) if q != t)]]
    if spec.connectivity is Connectivity.ALL_TO_ALL:
        return [(c, *[q for q in range(3) if q != c]) for c in range(3)]
    if spec.odd_qubit_placement is Placement.CENTER:
        return [(1, 0, 2)]
    return [(0, 1, 2), (2, 0, 1)]


def normalize(c: Circuit, spec: GateSpec) -> Circuit | None:
    """Relabel/retarget a valid implementation onto the spec's canonical roles."""
    U = unitary_of(c)
    canon = spec.roles
    for roles in _role_assignments(spec):
        if not equivalent_up_to_global_phase(U, ideal_matrix(spec.gate_kind, roles, 3)):
            continue
        if tuple(roles) == canon:
            return c
        if spec.which is Which.TOFFOLI:
            if spec.connectivity is Connectivity.ALL_TO_ALL:
                perm = [0] * 3
                for src, dst in zip(roles, canon):
                    perm[src] = dst
                return remap_qubits(c, perm)
            return retarget_toffoli(c, roles[2], canon[2])
        if spec.connectivity is Connectivity.LINEAR:
            return remap_qubits(c, [2, 1, 0])
        perm = [0] * 3
        for src, dst in zip(roles, canon):
            perm[src] = dst
        return remap_qubits(c, perm)
    return None


def validate_circuit(c: Circuit, spec: GateSpec, allow_plus_one: bool = False, declared: int | None = None) -> str | None:
    if c.num_qubits != 3:
        return f"expected 3 qubits, found {c.num_qubits}"
    if any(g.kind in core.MULTI_QUBIT_PRIMITIVES for g in c.gates):
        return "contains undecomposed multi-qubit primitives"
    base = CNOT_BUDGET[spec] if declared is None else min(int(declared), CNOT_BUDGET[spec])
    budget = base + (1 if allow_plus_one else 0)
    n_cx = core.count_cx(c)
    if n_cx > budget:
        return f"{n_cx} CNOTs exceeds budget {budget}"
    viol = core.validate_connectivity(c, spec.coupling)
    if viol:
        return f"CNOT on unconnected pair {viol[0].pair} at gate {viol[0].gate_index}"
    if normalize(c, spec) is None:
        return "unitary does not match the gate"
    return None


def _sidecar(path: Path) -> dict | None:
    own = path.with_suffix(".json")
    if own.exists():
        return json.loads(own.read_text())
    shared = path.parent / "family.json"
    if shared.exists():
        return json.loads(shared.read_text())
    return None


def load_corpus_all(directory, allow_plus_one: bool = False) -> tuple[dict[GateSpec, EquivalentFamily], list[CorpusFailure]]:
    """Load every QASM file, grouping valid entries by their sidecar spec."""
    directory = Path(directory)
    families: dict[GateSpec, EquivalentFamily] = {}
    failures: list[CorpusFailure] = []
    for path in sorted(directory.glob("*.qasm")):
        try:
            meta = _sidecar(path)
            if meta is None:
                raise ValidationError("no sidecar metadata")
            spec = spec_from_json(meta)
            c = parse_qasm(path.read_text())
        except (QasmError, ValidationError, KeyError, ValueError) as e:
            failures.append(CorpusFailure(path.name, f"{type(e).__name__}: {e}"))
            continue
        reason = validate_circuit(c, spec, allow_plus_one, meta.get("cnot_count"))
        if reason:
            failures.append(CorpusFailure(path.name, reason))
            continue
        fam = families.setdefault(spec, EquivalentFamily(spec))
        norm = normalize(c, spec)
        if not fam.add(Circuit(3, norm.gates, path.stem)):
            failures.append(CorpusFailure(path.name, "duplicate entangling structure"))
    return families, failures


def load_corpus(directory, spec: GateSpec, allow_plus_one: bool = False) -> EquivalentFamily:
    families, failures = load_corpus_all(directory, allow_plus_one)
    fam = families.get(spec, EquivalentFamily(spec))
    for other, f in families.items():
        if other != spec:
            failures += [CorpusFailure(c.name, f"spec {other.key} does not match {spec.key}") for c in f.circuits]
    fam.failures = failures
    return fam


def write_corpus(directory, family: EquivalentFamily) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for i, c in enumerate(family.circuits):
        p = directory / f"{family.spec.key}_{i:03d}.qasm"
        p.write_text(emit_qasm(c))
        out.append(p)
    meta = family.spec.to_json()
    meta["cnot_count"] = CNOT_BUDGET[family.spec]
    (directory / "family.json").write_text(json.dumps(meta, indent=2) + "\n")
    return out


def slot_mapping(spec: GateSpec, gate: Gate) -> list[int]:
    """Map the canonical family qubits onto the wires of a CCX/CSWAP slot."""
    r = spec.roles
    mapping = [0, 0, 0]
    for canon, actual in zip(r, gate.qubits):
        mapping[canon] = actual
    return mapping


def substitute(template: Circuit, choices: Sequence[Circuit], spec: GateSpec) -> Circuit:
    """Replace each slot gate of the template with the chosen decomposition."""
    gates: list[Gate] = []
    it = iter(choices)
    for g in template.gates:
        if g.kind is spec.gate_kind:
            c = next(it)
            gates += remap_qubits(c, slot_mapping(spec, g), template.num_qubits).gates
        else:
            gates.append(g)
    return Circuit(template.num_qubits, tuple(gates), template.name, template.measurements)


def slots(template: Circuit, spec: GateSpec) -> list[int]:
    return [i for i, g in enumerate(template.gates) if g.kind is spec.gate_kind]


def family_unitaries_agree(circuits: Iterable[Circuit], tol: float = 1e-8) -> bool:
    mats = [unitary_of(c) for c in circuits]
    return all(equivalent_up_to_global_phase(mats[0], m, tol) for m in mats[1:])
