"""Fermi-Hubbard dimer ground state via the Gutzwiller circuit.

Wires: 0 = site 1 up, 1 = site 2 up, 2 = site 1 down, 3 = site 2 down,
4 = ancilla of site 1, 5 = ancilla of site 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import core
from ..core import Circuit, CouplingMap
from ..decomp import TOFFOLI_ALL, EquivalentFamily, seed_circuit
from ..errors import AllShotsRejected, ValidationError
from ..noise import BcnotModel, noisy_state, sample_model
from ..sim import apply_to_state, basis_state, pauli_matrix, sample_counts
from .eca import EcaPlan, Protocol, SamplingMode, eca_instantiate, single_family

N_QUBITS = 6
ANCILLAS = (4, 5)
MAIN = (0, 1, 2, 3)


@dataclass(frozen=True)
class HubbardParams:
    t: float
    U: float
    g: float
    theta: float


def gutzwiller_g(t: float, U: float) -> float:
    return 1 - 4 * t / (U + math.sqrt(U * U + 16 * t * t))


def gutzwiller_theta(g: float) -> float:
    if g <= 0:
        return 0.0
    if g >= 1:
        return math.pi
    return 2 * math.atan(math.sqrt(2 * g - g * g) / (1 - g))


def hubbard_params(t: float, U: float) -> HubbardParams:
    if not t > 0:
        raise ValidationError("hopping t must be positive")
    if U < 0:
        raise ValidationError("interaction U must be non-negative")
    g = gutzwiller_g(t, U)
    return HubbardParams(t, U, g, gutzwiller_theta(g))


def _prep_block() -> list[core.Gate]:
    """Slater determinant of the non-interacting dimer.

    The rotation network acts on the reference occupation with one electron
    of each spin on site 1, hence the two leading X gates.
    """
    pi = math.pi
    u = core.u3
    return [
        core.x(0),
        core.x(2),
        u(pi / 2, -pi, 5 * pi / 8, 0),
        u(0, 0, 5 * pi / 8, 1),
        u(pi / 2, -pi, pi / 2, 2),
        u(0, 3 * pi / 8, 3 * pi / 8, 3),
        core.cx(0, 1),
        core.cx(2, 3),
        u(5 * pi / 4, 0, 0, 0),
        u(-pi / 4, 0, 0, 1),
        u(5 * pi / 4, 0, 0, 2),
        u(-pi / 4, 0, 0, 3),
        core.cx(0, 1),
        core.cx(2, 3),
        u(pi / 2, -5 * pi / 8, -pi, 0),
        u(pi, 0, -3 * pi / 8, 1),
        u(pi / 2, -5 * pi / 8, -pi, 2),
        u(pi, 0, -3 * pi / 8, 3),
    ]


def hubbard_template(p: HubbardParams) -> Circuit:
    """Circuit with the four Toffoli gates left as CCX slots."""
    half = p.theta / 2
    gates = _prep_block() + [
        core.ry(half, 5),
        core.ry(half, 4),
        core.ccx(0, 2, 4),
        core.ccx(1, 3, 5),
        core.ry(-half, 4),
        core.ry(-half, 5),
        core.ccx(0, 2, 4),
        core.ccx(1, 3, 5),
    ]
    return Circuit(N_QUBITS, tuple(gates), "hubbard_dimer")


def hubbard_circuit(p: HubbardParams, family: EquivalentFamily | None = None, seed=0) -> Circuit:
    """Fully decomposed circuit; without a family every slot gets the default Toffoli."""
    if family is None:
        family = single_family(TOFFOLI_ALL, seed_circuit(TOFFOLI_ALL))
    ((c, _),) = eca_instantiate(hubbard_template(p), family, EcaPlan(1, 1, seed=seed))
    return c


# -- exact reference -------------------------------------------------------------

_TERMS = None


def _terms():
    global _TERMS
    if _TERMS is None:
        _TERMS = {lab: pauli_matrix(lab) for lab in ("XXII", "IIXX", "YYII", "IIYY", "ZIII", "IZII", "IIZI", "IIIZ", "ZIZI", "IZIZ")}
    return _TERMS


def hamiltonian(t: float, U: float) -> np.ndarray:
    T = _terms()
    hop = T["XXII"] + T["IIXX"] + T["YYII"] + T["IIYY"]
    inter = 2 * np.eye(16) - T["ZIII"] - T["IZII"] - T["IIZI"] - T["IIIZ"] + T["ZIZI"] + T["IZIZ"]
    return -t / 2 * hop + U / 4 * inter


def half_filled_sector() -> list[int]:
    """Basis indices with one up and one down electron (wire 0 is the top bit)."""
    out = []
    for i in range(16):
        b = format(i, "04b")
        if int(b[0]) + int(b[1]) == 1 and int(b[2]) + int(b[3]) == 1:
            out.append(i)
    return out


def exact_ground_state(t: float, U: float) -> tuple[float, np.ndarray]:
    """Lowest eigenpair inside the half-filled, zero-magnetization sector."""
    idx = half_filled_sector()
    H = hamiltonian(t, U)[np.ix_(idx, idx)]
    w, V = np.linalg.eigh(H)
    psi = np.zeros(16, dtype=complex)
    psi[idx] = V[:, 0]
    return float(w[0]), psi


def exact_energy(t: float, U: float) -> float:
    return (U - math.sqrt(U * U + 16 * t * t)) / 2


def postselected_state(c: Circuit, model: BcnotModel | None = None) -> tuple[float, np.ndarray]:
    """(success probability, normalized main-register state with ancillas in |00>)."""
    psi = noisy_state(c, model, basis_state("0" * N_QUBITS)).reshape(16, 4)
    kept = psi[:, 0]
    prob = float(np.vdot(kept, kept).real)
    return prob, kept / math.sqrt(prob)


# -- sampling estimator ----------------------------------------------------------

_BASIS_GATES = {
    "X": lambda q: [core.h(q)],
    "Y": lambda q: [core.sdg(q), core.h(q)],
    "Z": lambda q: [],
}


def _parity(counts: dict[str, int], positions, total: int) -> float:
    s = 0
    for b, n in counts.items():
        s += n if sum(int(b[i]) for i in positions) % 2 == 0 else -n
    return s / total


def _basis_estimates(psi: np.ndarray, shots: int, seed) -> tuple[dict[str, float], int]:
    """Post-selected Pauli term estimates and the number of retained shots."""
    est: dict[str, float] = {}
    kept_total = 0
    for basis in "XYZ":
        rot = [g for q in MAIN for g in _BASIS_GATES[basis](q)]
        phi = apply_to_state(Circuit(N_QUBITS, tuple(rot)), psi) if rot else psi
        table = sample_counts(phi, list(range(N_QUBITS)), shots, (seed, "basis", basis))
        kept = {b[:4]: n for b, n in table.counts.items() if b[4:] == "00"}
        total = sum(kept.values())
        if total == 0:
            raise AllShotsRejected(f"no {basis}-basis shot passed post-selection")
        kept_total += total
        if basis == "Z":
            for i in range(4):
                est[f"Z{i}"] = _parity(kept, [i], total)
            est["Z0Z2"] = _parity(kept, [0, 2], total)
            est["Z1Z3"] = _parity(kept, [1, 3], total)
        else:
            est[f"{basis}0{basis}1"] = _parity(kept, [0, 1], total)
            est[f"{basis}2{basis}3"] = _parity(kept, [2, 3], total)
    return est, kept_total


def energy_from_terms(est: dict[str, float], t: float, U: float) -> float:
    hop = est["X0X1"] + est["X2X3"] + est["Y0Y1"] + est["Y2Y3"]
    inter = 2 - est["Z0"] - est["Z1"] - est["Z2"] - est["Z3"] + est["Z0Z2"] + est["Z1Z3"]
    return -t / 2 * hop + U / 4 * inter


@dataclass(frozen=True)
class EnergyEstimate:
    mean: float
    std: float
    trial_energies: tuple[float, ...]
    retained_shots: tuple[int, ...]


def estimate_energy(
    p: HubbardParams,
    protocol: Protocol,
    family: EquivalentFamily,
    model: BcnotModel | None,
    shots: int,
    trials: int,
    seed,
) -> EnergyEstimate:
    """Mean and spread of the sampled energy over independent trials.

    ``shots`` is the per-trial budget, split evenly over the X, Y and Z
    settings.  ECA draws fresh Toffoli decompositions every trial; SCE uses
    the default decomposition throughout.
    """
    if shots % 3:
        raise ValidationError("shots must split evenly over the three basis settings")
    per_basis = shots // 3
    template = hubbard_template(p)
    fixed = None
    if protocol is Protocol.SCE:
        fixed = hubbard_circuit(p)
        psi_fixed = noisy_state(fixed, model, basis_state("0" * N_QUBITS))
    energies, kept = [], []
    for k in range(trials):
        if fixed is None:
            plan = EcaPlan(1, 1, SamplingMode.UNIFORM_OVER_CIRCUITS, (seed, "trial-circuit", k))
            ((c, _),) = eca_instantiate(template, family, plan)
            psi = noisy_state(c, model, basis_state("0" * N_QUBITS))
        else:
            psi = psi_fixed
        est, n_kept = _basis_estimates(psi, per_basis, (seed, "trial", k))
        energies.append(energy_from_terms(est, p.t, p.U))
        kept.append(n_kept)
    e = np.array(energies)
    return EnergyEstimate(float(e.mean()), float(e.std(ddof=1)) if trials > 1 else 0.0, tuple(energies), tuple(kept))


@dataclass(frozen=True)
class HubbardRow:
    u_over_t: float
    model_seed: int
    exact: float
    sce_mean: float
    sce_std: float
    eca_mean: float
    eca_std: float
    sce_retained: int
    eca_retained: int


def hubbard_study(
    family: EquivalentFamily,
    u_grid,
    beta_max: float,
    model_seeds,
    shots: int = 3000,
    trials: int = 100,
    seed=0,
    t: float = 1.0,
) -> list[HubbardRow]:
    coupling = CouplingMap.all_to_all(N_QUBITS)
    rows = []
    for ms in model_seeds:
        model = sample_model(coupling, beta_max, (seed, "hubbard-model", ms))
        for u in u_grid:
            p = hubbard_params(t, u * t)
            run_seed = (seed, "hubbard", ms, int(round(u * 1000)))
            sce = estimate_energy(p, Protocol.SCE, family, model, shots, trials, (run_seed, "sce"))
            eca = estimate_energy(p, Protocol.ECA, family, model, shots, trials, (run_seed, "eca"))
            rows.append(
                HubbardRow(u, ms, exact_energy(t, u * t), sce.mean, sce.std, eca.mean, eca.std, sum(sce.retained_shots), sum(eca.retained_shots))
            )
    return rows


def ground_state_fidelity(p: HubbardParams) -> float:
    _, psi = postselected_state(hubbard_circuit(p))
    _, exact = exact_ground_state(p.t, p.U)
    return float(abs(np.vdot(exact, psi)) ** 2)
