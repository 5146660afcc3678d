import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from qroute.chan import (
    SWEEP_COLUMNS,
    DiamondMethod,
    QuantumChannel,
    diamond_distance,
    diamond_distance_unitaries,
    diamond_lower_bound,
    dual_value,
    eca_gap_sweep,
    mixed_unitary,
    origin_hull_distance,
    partial_trace_out,
    sampled_lower_bound,
    summarize_sweep,
    sweep_to_csv,
    trace_norm,
)
from qroute.decomp import TOFFOLI_LINEAR, default_family
from qroute.errors import DimensionMismatch, EmptyFamily, NotUnitary, ValidationError
from qroute.decomp import EquivalentFamily

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)


def rz(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def haar(d, seed):
    return unitary_group.rvs(d, random_state=seed)


def dd(A, B, tol=1e-6):
    return diamond_distance(A, B, tol).value


class TestChannel:
    def test_choi_kraus_round_trip(self):
        ch = mixed_unitary([haar(4, 1), haar(4, 2), haar(4, 3)])
        back = QuantumChannel(kraus=ch.kraus_from_choi())
        assert np.allclose(back.choi, ch.choi, atol=1e-10)

    def test_choi_convention(self):
        J = QuantumChannel.from_unitary(X).choi
        # input index first: |0><0| maps to |1><1|
        assert np.isclose(J[1, 1], 1) and np.isclose(J[0, 0], 0)

    def test_choi_only_channel(self):
        ch = mixed_unitary([I2, Z])
        c2 = QuantumChannel(choi_matrix=ch.choi)
        rho = np.array([[0.5, 0.5], [0.5, 0.5]])
        assert np.allclose(c2.apply(rho), np.diag([0.5, 0.5]))
        assert c2.is_cptp()

    def test_cptp(self):
        assert mixed_unitary([haar(2, 0), haar(2, 1)]).is_cptp()
        assert not QuantumChannel(kraus=[2 * I2]).is_cptp()

    def test_partial_trace(self):
        J = QuantumChannel.from_unitary(haar(3, 5)).choi
        assert np.allclose(partial_trace_out(J, 3, 3), np.eye(3))

    def test_trace_norm(self):
        assert np.isclose(trace_norm(np.diag([1.0, -2.0, 0.5])), 3.5)

    def test_validation(self):
        with pytest.raises(ValidationError):
            QuantumChannel()
        with pytest.raises(ValidationError):
            mixed_unitary([])
        with pytest.raises(NotUnitary):
            mixed_unitary([2 * I2])
        with pytest.raises(DimensionMismatch):
            mixed_unitary([I2, np.eye(4)])


class TestClosedForm:
    def test_identity_vs_z(self):
        assert np.isclose(diamond_distance_unitaries(I2, Z).value, 2.0)

    @pytest.mark.parametrize("theta", np.linspace(0, np.pi, 9))
    def test_rz(self, theta):
        assert np.isclose(diamond_distance_unitaries(I2, rz(theta)).value, 2 * np.sin(theta / 2), atol=1e-12)

    def test_global_phase_invisible(self):
        U = haar(4, 9)
        assert diamond_distance_unitaries(U, np.exp(0.7j) * U).value < 1e-6

    def test_hull_contains_origin(self):
        assert origin_hull_distance([1, -1]) == 0.0
        assert origin_hull_distance([1, 1j, -1, -1j]) == 0.0
        assert np.isclose(origin_hull_distance([1, 1j]), np.sqrt(0.5))
        assert np.isclose(origin_hull_distance([1, 1, 1]), 1.0)

    def test_dimension_checks(self):
        with pytest.raises(DimensionMismatch):
            diamond_distance_unitaries(I2, np.eye(4))
        with pytest.raises(NotUnitary):
            diamond_distance_unitaries(I2, 2 * I2)


class TestSdp:
    def test_dephasing(self):
        r = diamond_distance(mixed_unitary([I2, Z]), QuantumChannel.from_unitary(I2))
        assert abs(r.value - 1.0) < 1e-6
        assert r.method is DiamondMethod.SDP

    @pytest.mark.parametrize("p", [0.05, 0.2, 0.35])
    def test_partial_dephasing(self, p):
        A = QuantumChannel(kraus=[np.sqrt(1 - p) * I2, np.sqrt(p) * Z])
        assert abs(dd(A, QuantumChannel.from_unitary(I2)) - 2 * p) < 1e-6

    def test_same_channel(self):
        ch = mixed_unitary([haar(2, 1), haar(2, 2)])
        assert dd(ch, ch) == 0.0

    @pytest.mark.parametrize("seed", range(25))
    def test_matches_closed_form(self, seed):
        d = [2, 4, 8][seed % 3]
        U, V = haar(d, 2 * seed), haar(d, 2 * seed + 1)
        r = diamond_distance(QuantumChannel.from_unitary(U), QuantumChannel.from_unitary(V), 1e-6)
        assert r.gap <= 1e-6
        assert r.lower - 1e-9 <= diamond_distance_unitaries(U, V).value <= r.upper + 1e-9

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10**6))
    def test_metric_axioms(self, seed):
        chans = [mixed_unitary([haar(2, seed + 3 * k + j) for j in range(2)]) for k in range(3)]
        A, B, C = chans
        ab, bc, ac = dd(A, B), dd(B, C), dd(A, C)
        assert 0 <= ab <= 2
        assert abs(ab - dd(B, A)) < 2e-6
        assert ac <= ab + bc + 3e-6

    def test_lower_bounds_below_value(self):
        A = mixed_unitary([haar(4, 0), haar(4, 1)])
        B = QuantumChannel.from_unitary(haar(4, 2))
        r = diamond_distance(A, B)
        lo = diamond_lower_bound(A, B, restarts=3, seed=1)
        samp = sampled_lower_bound(A, B, 4000, seed=2)
        assert lo <= r.upper + 1e-9 and samp <= r.upper + 1e-9
        assert lo >= r.value - 1e-4
        assert samp >= 0.5 * r.value

    def test_dual_value_is_lower_bound(self):
        A = mixed_unitary([haar(2, 4), haar(2, 5)])
        B = QuantumChannel.from_unitary(I2)
        J = A.choi - B.choi
        val = dd(A, B)
        for rho in (np.eye(2) / 2, np.diag([1.0, 0.0])):
            assert dual_value(J, rho, 2, 2) <= val + 1e-6

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6))
    def test_convexity(self, seed):
        U, V, W = haar(2, seed), haar(2, seed + 1), haar(2, seed + 2)
        target = QuantumChannel.from_unitary(W)
        mix = dd(mixed_unitary([U, V]), target)
        singles = [diamond_distance_unitaries(M, W).value for M in (U, V)]
        assert mix <= np.mean(singles) + 1e-6

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            diamond_distance(QuantumChannel.from_unitary(I2), QuantumChannel.from_unitary(np.eye(4)))


@pytest.fixture(scope="module")
def rows():
    fam = default_family(TOFFOLI_LINEAR)
    return eca_gap_sweep(TOFFOLI_LINEAR, fam, [0.0, 0.2], 2, master_seed=3)


class TestSweep:
    def test_rows(self, rows):
        assert len(rows) == 4
        for r in rows:
            assert r.eca_dd <= r.mean_single_circuit_dd + 1e-6
        zero = [r for r in rows if r.beta_max == 0.0]
        assert all(r.eca_dd < 1e-5 and r.mean_single_circuit_dd < 1e-5 for r in zero)

    def test_csv(self, rows):
        text = sweep_to_csv(rows)
        parsed = list(csv.DictReader(io.StringIO(text)))
        assert tuple(parsed[0].keys()) == SWEEP_COLUMNS
        assert [float(p["eca_dd"]) for p in parsed] == [r.eca_dd for r in rows]

    def test_summary(self, rows):
        s = summarize_sweep(rows)
        assert [x.beta_max for x in s] == [0.0, 0.2]
        assert s[1].eca_mean <= s[1].single_mean

    def test_empty_family(self):
        with pytest.raises(EmptyFamily):
            eca_gap_sweep(TOFFOLI_LINEAR, EquivalentFamily(TOFFOLI_LINEAR), [0.1], 1)
