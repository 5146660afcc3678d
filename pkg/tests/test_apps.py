import csv
import io
import math

import numpy as np
import pytest

from qroute import core
from qroute.apps import (
    EcaPlan,
    Protocol,
    SamplingMode,
    cli,
    eca_instantiate,
    estimate_energy,
    hubbard_circuit,
    hubbard_params,
    swap_test_experiment,
)
from qroute.apps.eca import run_variants, single_family, swap_test_circuit
from qroute.apps.hubbard import (
    exact_energy,
    exact_ground_state,
    ground_state_fidelity,
    gutzwiller_theta,
    hubbard_template,
    postselected_state,
)
from qroute.core import Circuit, metrics
from qroute.decomp import FREDKIN_ALL, FREDKIN_ENDS, TOFFOLI_ALL, EquivalentFamily, default_family, seed_circuit
from qroute.errors import EmptyFamily, IncompatibleSlot, SolverDidNotConverge, ValidationError
from qroute.sim import equivalent_up_to_global_phase, unitary_of

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)


class TestEcaPlan:
    def test_even_split(self):
        assert EcaPlan(8, 800).shot_split() == [100] * 8

    def test_remainder_round_robin(self):
        assert EcaPlan(3, 11).shot_split() == [4, 4, 3]

    def test_invalid(self):
        with pytest.raises(ValidationError):
            EcaPlan(0, 10)
        with pytest.raises(ValidationError):
            EcaPlan(5, 3)


class TestInstantiate:
    def template(self):
        return Circuit(3, (core.h(0), core.cswap(0, 1, 2), core.h(0), core.cswap(0, 1, 2)))

    def test_variants_equivalent(self):
        fam = default_family(FREDKIN_ALL)
        ref = unitary_of(self.template())
        for c, _ in eca_instantiate(self.template(), fam, EcaPlan(6, 60, seed=2)):
            assert metrics(c).cnot_count == 14
            assert equivalent_up_to_global_phase(unitary_of(c), ref)

    def test_deterministic(self):
        fam = default_family(FREDKIN_ALL)
        a = eca_instantiate(self.template(), fam, EcaPlan(4, 40, seed=9))
        b = eca_instantiate(self.template(), fam, EcaPlan(4, 40, seed=9))
        assert a == b

    def test_slots_sampled_independently(self):
        fam = default_family(FREDKIN_ALL)
        variants = eca_instantiate(self.template(), fam, EcaPlan(40, 40, seed=1))
        assert len({c.gates for c, _ in variants}) > 1

    def test_per_structure_shares(self):
        fam = default_family(FREDKIN_ENDS, reverse_cx=True)
        m = fam.structures
        out = eca_instantiate(swap_test_circuit(KET0, KET1), fam, EcaPlan(m, 100 * m, SamplingMode.PER_STRUCTURE, 3))
        assert [s for _, s in out] == [100] * m
        sigs = set()
        for c, _ in out:
            cx = tuple(g.qubits for g in c.gates if g.kind is core.GateKind.CX)
            sigs.add(cx)
        assert len(sigs) == m

    def test_per_structure_too_many(self):
        fam = default_family(FREDKIN_ENDS)
        with pytest.raises(ValidationError):
            eca_instantiate(swap_test_circuit(KET0, KET1), fam, EcaPlan(fam.structures + 1, 100, SamplingMode.PER_STRUCTURE))

    def test_empty_family(self):
        with pytest.raises(EmptyFamily):
            eca_instantiate(self.template(), EquivalentFamily(FREDKIN_ALL), EcaPlan(1, 1))

    def test_incompatible_slot(self):
        with pytest.raises(IncompatibleSlot):
            eca_instantiate(self.template(), default_family(TOFFOLI_ALL), EcaPlan(1, 1))
        with pytest.raises(IncompatibleSlot):
            eca_instantiate(Circuit(2, (core.swap(0, 1),)), default_family(TOFFOLI_ALL), EcaPlan(1, 1))

    def test_m1_matches_sce(self):
        fam = default_family(FREDKIN_ALL)
        psi1, psi2 = np.array([0.6, 0.8j]), np.array([1, 1]) / math.sqrt(2)
        sce = swap_test_experiment(psi1, psi2, Protocol.SCE, fam, None, 5000, 4)
        variants = eca_instantiate(swap_test_circuit(psi1, psi2), fam, EcaPlan(1, 5000, seed=(4, "plan")))
        freq = run_variants(variants, None, [0], 4).frequencies()
        assert sce.F_hat == pytest.approx(freq.get("0", 0) - freq.get("1", 0), abs=0)


class TestSwapTest:
    @pytest.mark.parametrize("protocol", list(Protocol))
    def test_identical_states(self, protocol):
        r = swap_test_experiment(KET0, KET0, protocol, default_family(FREDKIN_ENDS), None, 10_000, 0)
        assert r.F == 1.0 and abs(r.F_hat - 1) <= 5 * 0.01

    def test_orthogonal_states(self):
        r = swap_test_experiment(KET0, KET1, Protocol.ECA, default_family(FREDKIN_ENDS), None, 10_000, 0)
        assert abs(r.F_hat) <= 5 / math.sqrt(10_000)
        assert r.F == 0 and r.epsilon >= 0

    def test_estimate_range(self):
        a = np.array([0.3, 0.95j])
        r = swap_test_experiment(a, KET0, Protocol.SCE, default_family(FREDKIN_ENDS), None, 1000, 1)
        assert -1 <= r.F_hat <= 1 and r.epsilon >= 0

    def test_reproducible(self):
        fam = default_family(FREDKIN_ENDS)
        a = swap_test_experiment(KET0, np.array([0.6, 0.8]), Protocol.ECA, fam, None, 2000, 7)
        b = swap_test_experiment(KET0, np.array([0.6, 0.8]), Protocol.ECA, fam, None, 2000, 7)
        assert a == b


class TestHubbardParams:
    def test_zero_interaction(self):
        p = hubbard_params(1.0, 0.0)
        assert p.g == 0 and p.theta == 0

    def test_formula(self):
        p = hubbard_params(1.0, 4.0)
        assert abs(p.g - (1 - 4 / (4 + math.sqrt(32)))) < 1e-12

    def test_theta_monotone(self):
        gs = np.linspace(1e-4, 1 - 1e-4, 400)
        th = [gutzwiller_theta(g) for g in gs]
        assert all(b > a for a, b in zip(th, th[1:]))
        assert abs(th[-1] - math.pi) < 0.05
        assert gutzwiller_theta(1.0) == math.pi

    def test_invalid(self):
        with pytest.raises(ValidationError):
            hubbard_params(0.0, 1.0)
        with pytest.raises(ValidationError):
            hubbard_params(1.0, -1.0)


class TestHubbardCircuit:
    def test_cnot_count(self):
        assert metrics(hubbard_circuit(hubbard_params(1, 3))).cnot_count == 28

    def test_template_slots(self):
        kinds = [g.kind for g in hubbard_template(hubbard_params(1, 3)).gates]
        assert kinds.count(core.GateKind.CCX) == 4

    @pytest.mark.parametrize("u", range(11))
    def test_ground_state(self, u):
        assert ground_state_fidelity(hubbard_params(1.0, float(u))) > 1 - 1e-9

    @pytest.mark.parametrize("u", [0.0, 2.5, 7.0])
    def test_exact_energy_oracle(self, u):
        assert abs(exact_ground_state(1.0, u)[0] - exact_energy(1.0, u)) < 1e-12

    def test_success_probability(self):
        probs = [postselected_state(hubbard_circuit(hubbard_params(1.0, float(u))))[0] for u in range(21)]
        assert abs(probs[0] - 1) < 1e-12
        assert all(b <= a + 1e-12 for a, b in zip(probs, probs[1:]))
        assert min(probs) >= 0.25

    def test_alternative_decompositions_agree(self):
        p = hubbard_params(1.0, 5.0)
        fam = default_family(TOFFOLI_ALL)
        _, ref = postselected_state(hubbard_circuit(p))
        for k in range(3):
            _, psi = postselected_state(hubbard_circuit(p, fam, seed=k))
            assert abs(abs(np.vdot(ref, psi)) - 1) < 1e-9


class TestEnergy:
    @pytest.mark.parametrize("u", [0.0, 4.0])
    def test_noiseless_energy(self, u):
        p = hubbard_params(1.0, u)
        fam = single_family(TOFFOLI_ALL, seed_circuit(TOFFOLI_ALL))
        est = estimate_energy(p, Protocol.SCE, fam, None, 99_999, 1, 5)
        # shot-noise scale from the per-trial spread of a cheaper run
        spread = estimate_energy(p, Protocol.SCE, fam, None, 999, 30, 6).std / math.sqrt(100)
        assert abs(est.mean - exact_energy(1.0, u)) <= 5 * spread

    def test_unbiased(self):
        p = hubbard_params(1.0, 3.0)
        est = estimate_energy(p, Protocol.ECA, default_family(TOFFOLI_ALL), None, 3000, 100, 8)
        assert abs(est.mean - exact_energy(1.0, 3.0)) < 4 * est.std / 10

    def test_shot_split(self):
        with pytest.raises(ValidationError):
            estimate_energy(hubbard_params(1, 1), Protocol.SCE, default_family(TOFFOLI_ALL), None, 100, 1, 0)

    def test_reproducible(self):
        p = hubbard_params(1.0, 2.0)
        fam = default_family(TOFFOLI_ALL)
        a = estimate_energy(p, Protocol.ECA, fam, None, 300, 3, 1)
        assert a == estimate_energy(p, Protocol.ECA, fam, None, 300, 3, 1)


class TestCli:
    def test_verify_counts(self, capsys):
        assert cli.main(["verify", "counts"]) == cli.EXIT_OK
        assert "fredkin_all_to_all" in capsys.readouterr().out

    def test_family_round_trip(self, tmp_path):
        d = tmp_path / "corpus"
        assert cli.main(["family", "gen", "--gate", "toffoli_linear", "--out", str(d)]) == 0
        assert cli.main(["family", "validate", str(d)]) == 0
        assert cli.main(["family", "load", str(d)]) == 0

    def test_validate_empty(self, tmp_path):
        assert cli.main(["family", "validate", str(tmp_path)]) == cli.EXIT_INVALID

    def test_route_longcnot(self, tmp_path, capsys):
        out = tmp_path / "c.qasm"
        assert cli.main(["route", "longcnot", "--idle", "3", "--out", str(out)]) == 0
        assert "OPENQASM 2.0" in out.read_text()

    def test_route_invalid(self):
        assert cli.main(["route", "toffoli", "--line", "4", "--controls", "0,0", "--target", "3"]) == cli.EXIT_INVALID
        assert cli.main(["route", "pauliexp", "--pauli", "III"]) == cli.EXIT_INVALID

    def test_argparse_error(self):
        with pytest.raises(SystemExit) as e:
            cli.main(["route", "longcnot"])
        assert e.value.code == 2

    def test_sweep_csv(self, tmp_path):
        out = tmp_path / "sweep.csv"
        args = ["sweep", "eca-gap", "--gates", "toffoli_linear", "--beta-grid", "0.1", "--models", "1", "--out", str(out)]
        assert cli.main(args) == 0
        rows = list(csv.DictReader(io.StringIO(out.read_text())))
        assert len(rows) == 1 and float(rows[0]["eca_dd"]) <= float(rows[0]["mean_single_circuit_dd"]) + 1e-6

    def test_solver_failure(self, monkeypatch):
        from qroute import chan

        def boom(self, tol, max_iter=200):
            raise SolverDidNotConverge(7, 1e-3)

        monkeypatch.setattr(chan._PrimalDualSolver, "solve", boom)
        args = ["sweep", "eca-gap", "--gates", "toffoli_linear", "--beta-grid", "0.1", "--models", "1"]
        assert cli.main(args) == cli.EXIT_SOLVER

    def test_swaptest_small(self, tmp_path):
        out = tmp_path / "swap.csv"
        args = ["exp", "swaptest", "--pairs", "2", "--shots", "800", "--out", str(out)]
        assert cli.main(args) == 0
        assert len(out.read_text().strip().splitlines()) == 3

    def test_hubbard_small(self, tmp_path):
        out = tmp_path / "h.csv"
        args = ["exp", "hubbard", "--u-grid", "0,2", "--models", "1", "--shots", "300", "--trials", "2", "--out", str(out)]
        assert cli.main(args) == 0
        assert len(out.read_text().strip().splitlines()) == 3
