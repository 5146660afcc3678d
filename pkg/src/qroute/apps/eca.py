"""Equivalent circuit averaging: plans, instantiation and the simulated SWAP test."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .. import core
from ..core import Circuit, GateKind
from ..decomp import EquivalentFamily, GateSpec, substitute
from ..errors import EmptyFamily, IncompatibleSlot, ValidationError
from ..noise import BcnotModel, ReadoutModel, mem_correct, noisy_state, sample_model, simulate_readout
from ..rng import derive_rng
from ..sim import ShotTable, basis_state, sample_counts


class SamplingMode(Enum):
    UNIFORM_OVER_CIRCUITS = "uniform"
    PER_STRUCTURE = "per_structure"


class Protocol(Enum):
    SCE = "sce"
    ECA = "eca"


@dataclass(frozen=True)
class EcaPlan:
    """M variants sharing S shots.

    When M does not divide S the remainder goes round-robin to the
    lowest-index variants.
    """

    M: int
    S: int
    mode: SamplingMode = SamplingMode.UNIFORM_OVER_CIRCUITS
    seed: object = 0

    def __post_init__(self):
        if self.M < 1:
            raise ValidationError("M must be at least 1")
        if self.S < self.M:
            raise ValidationError(f"{self.S} shots cannot cover {self.M} variants")

    def shot_split(self) -> list[int]:
        base, extra = divmod(self.S, self.M)
        return [base + (1 if i < extra else 0) for i in range(self.M)]


def single_family(spec: GateSpec, circuit: Circuit) -> EquivalentFamily:
    fam = EquivalentFamily(spec)
    fam.add(circuit)
    return fam


def _check_template(template: Circuit, spec: GateSpec) -> list[int]:
    found = []
    for i, g in enumerate(template.gates):
        if g.kind in (GateKind.CCX, GateKind.CSWAP):
            if g.kind is not spec.gate_kind:
                raise IncompatibleSlot(f"gate {i} is {g.kind.name}, family implements {spec.gate_kind.name}")
            found.append(i)
        elif g.kind is GateKind.SWAP:
            raise IncompatibleSlot(f"gate {i} is a SWAP; decompose it first")
    return found


def eca_instantiate(template: Circuit, family: EquivalentFamily, plan: EcaPlan) -> list[tuple[Circuit, int]]:
    if len(family) == 0:
        raise EmptyFamily(f"family {family.spec.key} has no circuits")
    slot_idx = _check_template(template, family.spec)
    rng = derive_rng(plan.seed, "eca-instantiate")
    n = len(family)
    choices = np.empty((plan.M, len(slot_idx)), dtype=int)
    if plan.mode is SamplingMode.UNIFORM_OVER_CIRCUITS:
        choices[:] = rng.integers(0, n, size=choices.shape)
    else:
        groups: dict[tuple, list[int]] = {}
        for i, sig in enumerate(family.signatures):
            groups.setdefault(sig, []).append(i)
        members = list(groups.values())
        if plan.M > len(members):
            raise ValidationError(f"plan asks for {plan.M} structures, family has {len(members)}")
        for j in range(len(slot_idx)):
            picked = rng.permutation(len(members))[: plan.M]
            for i, s in enumerate(picked):
                grp = members[s]
                choices[i, j] = grp[int(rng.integers(len(grp)))]
    out = []
    for i, shots in enumerate(plan.shot_split()):
        circ = substitute(template, [family.circuits[k] for k in choices[i]], family.spec)
        out.append((circ, shots))
    return out


def run_variants(variants, model: BcnotModel | None, measured: Sequence[int], seed) -> ShotTable:
    """Simulate each variant under the model and pool the measurement counts."""
    total: ShotTable | None = None
    for i, (c, shots) in enumerate(variants):
        psi = noisy_state(c, model, basis_state("0" * c.num_qubits))
        t = sample_counts(psi, measured, shots, (seed, "shots", i))
        total = t if total is None else total.merged(t)
    return total


# -- SWAP test -------------------------------------------------------------------


@dataclass(frozen=True)
class SwapTestResult:
    F: float
    F_hat: float
    epsilon: float
    protocol: Protocol
    shots: int


def state_angles(psi: np.ndarray) -> tuple[float, float]:
    """(theta, phi) with U3(theta, phi, 0)|0> equal to psi up to phase."""
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    if abs(psi[0]) > 1e-15:
        psi = psi * np.exp(-1j * np.angle(psi[0]))
    theta = 2 * np.arctan2(abs(psi[1]), abs(psi[0]))
    phi = float(np.angle(psi[1])) if abs(psi[1]) > 1e-15 else 0.0
    return float(theta), phi


def haar_state(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


def swap_test_circuit(psi1: np.ndarray, psi2: np.ndarray) -> Circuit:
    """Ancilla on wire 0, the two states on wires 1 and 2."""
    t1, p1 = state_angles(psi1)
    t2, p2 = state_angles(psi2)
    gates = (
        core.u3(t1, p1, 0.0, 1),
        core.u3(t2, p2, 0.0, 2),
        core.h(0),
        core.cswap(0, 1, 2),
        core.h(0),
    )
    return Circuit(3, gates, "swap_test", ((0, 0),))


def swap_test_experiment(
    psi1,
    psi2,
    protocol: Protocol,
    family: EquivalentFamily,
    model: BcnotModel | None,
    S: int,
    seed,
    structures: int = 8,
    readout: ReadoutModel | None = None,
    calibration_shots: int = 20000,
) -> SwapTestResult:
    """Estimate |<psi1|psi2>|^2 as p(0) - p(1) of the ancilla.

    SCE draws one decomposition for all S shots; ECA spreads S over
    ``structures`` distinct entangling structures.  With a readout model the
    counts are corrupted and then corrected by MEM.
    """
    psi1 = np.asarray(psi1, dtype=complex)
    psi2 = np.asarray(psi2, dtype=complex)
    F = float(abs(np.vdot(psi1 / np.linalg.norm(psi1), psi2 / np.linalg.norm(psi2))) ** 2)
    if protocol is Protocol.SCE:
        plan = EcaPlan(1, S, SamplingMode.UNIFORM_OVER_CIRCUITS, (seed, "plan"))
    else:
        m = min(structures, family.structures)
        plan = EcaPlan(m, S, SamplingMode.PER_STRUCTURE, (seed, "plan"))
    variants = eca_instantiate(swap_test_circuit(psi1, psi2), family, plan)
    table = run_variants(variants, model, [0], seed)
    if readout is None:
        freq = table.frequencies()
        f_hat = freq.get("0", 0.0) - freq.get("1", 0.0)
    else:
        noisy = simulate_readout(table, readout, (seed, "readout"))
        zeros = simulate_readout(ShotTable({"0": calibration_shots}), readout, (seed, "cal0"))
        ones = simulate_readout(ShotTable({"1": calibration_shots}), readout, (seed, "cal1"))
        q = mem_correct(noisy, (zeros, ones))
        f_hat = q.probabilities.get("0", 0.0) - q.probabilities.get("1", 0.0)
    f_hat = float(np.clip(f_hat, -1.0, 1.0))
    if F > 0:
        eps = abs(f_hat - F) / F
    else:
        # relative error is undefined for orthogonal inputs
        eps = 0.0 if f_hat == 0 else math.inf
    return SwapTestResult(F, f_hat, eps, protocol, S)


@dataclass(frozen=True)
class SwapStudyRow:
    pair: int
    F: float
    sce: SwapTestResult
    eca: SwapTestResult


def haar_pairs(n: int, seed, min_fidelity: float = 0.01):
    out = []
    k = 0
    while len(out) < n:
        rng = derive_rng(seed, "haar-pair", k)
        a, b = haar_state(rng), haar_state(rng)
        k += 1
        if abs(np.vdot(a, b)) ** 2 > min_fidelity:
            out.append((a, b))
    return out


def swap_test_study(
    family: EquivalentFamily,
    beta_max: float,
    pairs: int = 200,
    S: int = 980_000,
    seed=0,
    structures: int = 8,
    readout: ReadoutModel | None = None,
) -> list[SwapStudyRow]:
    """Paired SCE/ECA SWAP tests on Haar-random pairs under one sampled model."""
    model = sample_model(family.spec.coupling, beta_max, (seed, "model"))
    rows = []
    for i, (a, b) in enumerate(haar_pairs(pairs, seed)):
        sce = swap_test_experiment(a, b, Protocol.SCE, family, model, S, (seed, "sce", i), readout=readout)
        eca = swap_test_experiment(a, b, Protocol.ECA, family, model, S, (seed, "eca", i), structures, readout)
        rows.append(SwapStudyRow(i, sce.F, sce, eca))
    return rows


def summarize_epsilons(rows: Sequence[SwapStudyRow]) -> dict[str, float]:
    e_sce = np.array([r.sce.epsilon for r in rows])
    e_eca = np.array([r.eca.epsilon for r in rows])
    return {
        "sce_mean": float(e_sce.mean()),
        "sce_std": float(e_sce.std()),
        "eca_mean": float(e_eca.mean()),
        "eca_std": float(e_eca.std()),
    }
