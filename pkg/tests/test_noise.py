import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qroute import core
from qroute.core import Circuit, CouplingMap
from qroute.errors import MissingPair, MultiQubitPrimitivePresent, SingularConfusion, ValidationError
from qroute.noise import (
    BcnotModel,
    BiasVector,
    ReadoutModel,
    bcnot_unitary,
    mem_correct,
    noisy_state,
    noisy_unitary,
    sample_model,
    simulate_readout,
)
from qroute.sim import ShotTable, basis_state, unitary_of

CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)

betas = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 5)


def infidelity(U, V):
    return 1 - abs(np.trace(U.conj().T @ V)) / U.shape[0]


class TestBcnot:
    def test_zero_bias_is_cnot(self):
        assert np.max(np.abs(bcnot_unitary((0, 0, 0, 0, 0)) - CNOT)) < 1e-12

    def test_tiny_bias_is_close(self):
        U = bcnot_unitary((1e-9, 0, 0, 0, 0))
        assert np.max(np.abs(U - CNOT)) < 1e-8

    @settings(max_examples=100, deadline=None)
    @given(betas)
    def test_unitary(self, b):
        U = bcnot_unitary(b)
        assert np.allclose(U.conj().T @ U, np.eye(4), atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(betas.filter(lambda b: max(map(abs, b)) > 1e-3))
    def test_deviation_grows_along_ray(self, b):
        direction = np.array(b) / max(map(abs, b))
        prev = 0.0
        for s in np.linspace(0, 0.3, 7)[1:]:
            d = infidelity(CNOT, bcnot_unitary(tuple(s * direction)))
            assert d >= prev - 1e-12
            prev = d

    def test_first_factor_on_control(self):
        # a pure IZ bias leaves the control populations untouched
        U = bcnot_unitary((0, 0.4, 0, 0, 0))
        for i in range(4):
            out = U @ np.eye(4)[i]
            control = i >> 1
            assert np.isclose(np.sum(np.abs(out[2 * control : 2 * control + 2]) ** 2), 1.0)

    def test_validation(self):
        with pytest.raises(ValidationError):
            BiasVector((0, 0, 0, 0))
        with pytest.raises(ValidationError):
            BiasVector((1.5, 0, 0, 0, 0))
        with pytest.raises(ValidationError):
            BiasVector((float("nan"), 0, 0, 0, 0))


class TestModel:
    def test_deterministic(self):
        line = CouplingMap.line(4)
        assert sample_model(line, 0.2, 7).pairs == sample_model(line, 0.2, 7).pairs
        assert sample_model(line, 0.2, 7).pairs != sample_model(line, 0.2, 8).pairs

    def test_covers_both_directions(self):
        m = sample_model(CouplingMap.line(3), 0.1, 0)
        assert set(m.pairs) == {(0, 1), (1, 0), (1, 2), (2, 1)}

    def test_proportional_across_beta(self):
        a = sample_model(CouplingMap.line(3), 0.1, 5)
        b = sample_model(CouplingMap.line(3), 0.3, 5)
        for p in a.pairs:
            assert np.allclose(3 * np.array(a.pairs[p].values), b.pairs[p].values)

    def test_json_round_trip(self):
        m = sample_model(CouplingMap.all_to_all(3), 0.25, 11)
        back = BcnotModel.from_json(m.to_json())
        assert back.pairs == m.pairs and back.beta_max == m.beta_max and back.seed == m.seed

    def test_statistics(self):
        m = sample_model(CouplingMap.all_to_all(8), 0.3, 3)
        vals = np.array([v.values for v in m.pairs.values()]).ravel()
        assert np.all(np.abs(vals) <= 0.3)
        assert abs(vals.mean()) < 0.03
        assert abs(vals.var() - 0.3**2 / 3) < 0.006

    def test_negative_beta_max(self):
        with pytest.raises(ValidationError):
            sample_model(CouplingMap.line(2), -0.1, 0)

    def test_missing_pair(self):
        m = sample_model(CouplingMap.line(3), 0.1, 0)
        with pytest.raises(MissingPair):
            noisy_unitary(Circuit(3, (core.cx(0, 2),)), m)

    def test_rejects_multiqubit_primitives(self):
        with pytest.raises(MultiQubitPrimitivePresent):
            noisy_unitary(Circuit(3, (core.ccx(0, 1, 2),)), BcnotModel.zero(CouplingMap.line(3)))

    def test_zero_model_is_ideal(self):
        c = Circuit(3, (core.h(0), core.cx(0, 1), core.t(1), core.cx(1, 2), core.cx(1, 0)))
        assert np.allclose(noisy_unitary(c, BcnotModel.zero(CouplingMap.line(3))), unitary_of(c))
        assert np.allclose(noisy_unitary(c, None), unitary_of(c))

    def test_state_matches_unitary(self):
        c = Circuit(3, (core.h(0), core.cx(0, 1), core.cx(2, 1), core.rz(0.3, 1), core.cx(1, 2)))
        m = sample_model(CouplingMap.line(3), 0.2, 4)
        psi = basis_state("010")
        assert np.allclose(noisy_state(c, m, psi), noisy_unitary(c, m) @ psi)

    def test_model_changes_result(self):
        c = Circuit(2, (core.cx(0, 1),))
        m = sample_model(CouplingMap.line(2), 0.2, 4)
        assert not np.allclose(noisy_unitary(c, m), CNOT)


class TestReadout:
    def test_identity(self):
        t = ShotTable({"01": 300, "10": 700})
        assert simulate_readout(t, ReadoutModel.identity(2), 0).counts == t.counts

    def test_flip_rate(self):
        out = simulate_readout(ShotTable({"0": 100_000}), ReadoutModel.symmetric(1, 0.02), 1)
        assert abs(out.counts.get("1", 0) / 100_000 - 0.02) < 0.003

    def test_deterministic(self):
        t = ShotTable({"00": 5000, "11": 5000})
        r = ReadoutModel.symmetric(2, 0.05)
        assert simulate_readout(t, r, 3).counts == simulate_readout(t, r, 3).counts

    def test_bad_confusion(self):
        with pytest.raises(ValidationError):
            ReadoutModel((np.array([[0.9, 0.2], [0.2, 0.9]]),))

    def test_mem_round_trip(self):
        r = ReadoutModel((np.array([[0.97, 0.05], [0.03, 0.95]]), np.array([[0.99, 0.02], [0.01, 0.98]])))
        n = 200_000
        true = ShotTable({"00": n // 4, "01": n // 4, "10": n // 2})
        noisy = simulate_readout(true, r, 1)
        cal = (simulate_readout(ShotTable({"00": n}), r, 2), simulate_readout(ShotTable({"11": n}), r, 3))
        q = mem_correct(noisy, cal)
        assert abs(q.probabilities.get("00", 0) - 0.25) < 0.01
        assert abs(q.probabilities.get("10", 0) - 0.5) < 0.01
        assert abs(q.probabilities.get("11", 0)) < 0.01
        assert abs(sum(q.probabilities.values()) - 1) < 1e-9

    def test_parity(self):
        r = ReadoutModel.symmetric(1, 0.1)
        n = 100_000
        noisy = simulate_readout(ShotTable({"1": n}), r, 0)
        cal = (simulate_readout(ShotTable({"0": n}), r, 1), simulate_readout(ShotTable({"1": n}), r, 2))
        assert abs(mem_correct(noisy, cal).expectation_parity([0]) + 1) < 0.02

    def test_singular(self):
        half = ShotTable({"0": 50, "1": 50})
        with pytest.raises(SingularConfusion):
            mem_correct(half, (half, half))
