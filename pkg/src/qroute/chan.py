"""Quantum channels, Choi matrices and diamond distances.

Choi convention: J(Phi) = sum_ij |i><j| (input) tensor Phi(|i><j|) (output).
"""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from .errors import DimensionMismatch, EmptyFamily, NotUnitary, SolverDidNotConverge, ValidationError
from .noise import noisy_unitary, sample_model
from .rng import derive_rng


@dataclass
class QuantumChannel:
    """CPTP map stored by Kraus operators, Choi matrix, or both."""

    kraus: list[np.ndarray] | None = None
    choi_matrix: np.ndarray | None = None
    d_in: int = 0
    d_out: int = 0

    def __post_init__(self):
        if self.kraus is None and self.choi_matrix is None:
            raise ValidationError("a channel needs Kraus operators or a Choi matrix")
        if self.kraus is not None:
            self.kraus = [np.asarray(k, dtype=complex) for k in self.kraus]
            shapes = {k.shape for k in self.kraus}
            if len(shapes) != 1:
                raise DimensionMismatch("Kraus operators differ in shape")
            self.d_out, self.d_in = shapes.pop()
        else:
            self.choi_matrix = np.asarray(self.choi_matrix, dtype=complex)
            if not self.d_in:
                d = int(round(np.sqrt(self.choi_matrix.shape[0])))
                self.d_in = self.d_out = d

    @classmethod
    def from_unitary(cls, U: np.ndarray) -> "QuantumChannel":
        return cls(kraus=[np.asarray(U, dtype=complex)])

    @property
    def choi(self) -> np.ndarray:
        if self.choi_matrix is None:
            vecs = np.stack([k.T.reshape(-1) for k in self.kraus], axis=1)
            self.choi_matrix = vecs @ vecs.conj().T
        return self.choi_matrix

    def kraus_from_choi(self, floor: float = 1e-12) -> list[np.ndarray]:
        w, V = np.linalg.eigh(self.choi)
        out = []
        for lam, v in zip(w, V.T):
            if lam > floor:
                out.append(np.sqrt(lam) * v.reshape(self.d_in, self.d_out).T)
        return out

    def operators(self) -> list[np.ndarray]:
        return self.kraus if self.kraus is not None else self.kraus_from_choi()

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.operators())

    def is_cptp(self, tol: float = 1e-9) -> bool:
        J = self.choi
        if np.min(np.linalg.eigvalsh((J + J.conj().T) / 2)) < -tol:
            return False
        return np.allclose(partial_trace_out(J, self.d_in, self.d_out), np.eye(self.d_in), atol=tol)


def mixed_unitary(unitaries: Sequence[np.ndarray]) -> QuantumChannel:
    """Uniform mixture of unitary conjugations, Kraus operators C_i / sqrt(M)."""
    mats = [np.asarray(u, dtype=complex) for u in unitaries]
    if not mats:
        raise ValidationError("need at least one unitary")
    shape = mats[0].shape
    for u in mats:
        if u.shape != shape:
            raise DimensionMismatch("unitaries differ in dimension")
        if not np.allclose(u @ u.conj().T, np.eye(shape[0]), atol=1e-9):
            raise NotUnitary("mixture element is not unitary")
    w = 1 / np.sqrt(len(mats))
    return QuantumChannel(kraus=[w * u for u in mats])


def partial_trace_out(M: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    return np.trace(M.reshape(d_in, d_out, d_in, d_out), axis1=1, axis2=3)


def trace_norm(A: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(A, compute_uv=False)))


class DiamondMethod(Enum):
    CLOSED_FORM_UNITARY = "closed_form_unitary"
    SDP = "sdp"


@dataclass(frozen=True)
class DiamondResult:
    value: float
    method: DiamondMethod
    gap: float = 0.0
    upper: float | None = None
    lower: float | None = None
    iterations: int = 0

    def __float__(self) -> float:
        return self.value


# -- closed form for unitary pairs --------------------------------------------


def _cross(o, a, b) -> float:
    return (a.real - o.real) * (b.imag - o.imag) - (a.imag - o.imag) * (b.real - o.real)


def _convex_hull(points: np.ndarray) -> list[complex]:
    pts = sorted({(round(p.real, 15), round(p.imag, 15)) for p in points})
    pts = [complex(x, y) for x, y in pts]
    if len(pts) <= 2:
        return pts
    lower: list[complex] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[complex] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _segment_distance(a: complex, b: complex) -> float:
    d = b - a
    if abs(d) == 0:
        return abs(a)
    s = -(a.real * d.real + a.imag * d.imag) / abs(d) ** 2
    s = min(1.0, max(0.0, s))
    return abs(a + s * d)


def origin_hull_distance(points: Sequence[complex]) -> float:
    """Euclidean distance from 0 to the convex hull of complex points."""
    hull = _convex_hull(np.asarray(points, dtype=complex))
    if len(hull) == 1:
        return abs(hull[0])
    if len(hull) == 2:
        return _segment_distance(hull[0], hull[1])
    # signed distance of the origin to each edge line, so tiny hulls stay robust
    edges = [(hull[i], hull[(i + 1) % len(hull)]) for i in range(len(hull))]
    inside = all(_cross(a, b, 0j) >= -1e-12 * abs(b - a) for a, b in edges)
    if inside:
        return 0.0
    return min(_segment_distance(hull[i], hull[(i + 1) % len(hull)]) for i in range(len(hull)))


def diamond_distance_unitaries(U: np.ndarray, V: np.ndarray) -> DiamondResult:
    U = np.asarray(U, dtype=complex)
    V = np.asarray(V, dtype=complex)
    if U.shape != V.shape:
        raise DimensionMismatch(f"{U.shape} vs {V.shape}")
    eye = np.eye(U.shape[0])
    for M in (U, V):
        if not np.allclose(M @ M.conj().T, eye, atol=1e-9):
            raise NotUnitary("closed form needs unitary inputs")
    lam = np.linalg.eigvals(U.conj().T @ V)
    nu = min(1.0, origin_hull_distance(lam))
    val = float(2 * np.sqrt(max(0.0, 1 - nu * nu)))
    return DiamondResult(val, DiamondMethod.CLOSED_FORM_UNITARY, 0.0, val, val)


# -- SDP -----------------------------------------------------------------------


def _herm(M: np.ndarray) -> np.ndarray:
    return (M + M.conj().T) / 2


def dual_value(J: np.ndarray, rho: np.ndarray, d_in: int, d_out: int) -> float:
    """|| (sqrt(rho) x I) J (sqrt(rho) x I) ||_1, a lower bound for any density rho."""
    w, V = np.linalg.eigh(_herm(rho))
    root = (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T
    R = np.kron(root, np.eye(d_out))
    return float(np.sum(np.abs(np.linalg.eigvalsh(_herm(R @ J @ R)))))


_STEP = 0.95
_SIGMA_MIN = 0.01  # keeps the last iterates away from the boundary


class _PrimalDualSolver:
    """min t  s.t.  t I - Tr_out Y >= 0,  Y - J >= 0,  Y + J >= 0.

    For Hermitian-preserving differences this equals the diamond norm.  The
    dual variables are (Z0, Z1, Z2) with tr Z0 = 1 and Z1 + Z2 = Z0 x I; the
    starting dual point is feasible and every step keeps it so.

    Path following with Nesterov-Todd scaling.  The scaled Newton operator
    has the same shape as a log-det Hessian, so the two big blocks are
    diagonalized together by one congruence and the rest collapses to a
    small Schur system on the input space.
    """

    def __init__(self, J: np.ndarray, d_in: int, d_out: int):
        self.J = _herm(J)
        self.d_in, self.d_out = d_in, d_out
        self.n = d_in * d_out
        self.nu = d_in + 2 * self.n

    def blocks(self, Y, t):
        return [t * np.eye(self.d_in) - partial_trace_out(Y, self.d_in, self.d_out), Y - self.J, Y + self.J]

    @staticmethod
    def _nt(S, Z):
        """(W, W^-1) with W Z W = S."""
        Ls = np.linalg.cholesky(S)
        Lz = np.linalg.cholesky(Z)
        U, sig, Vh = np.linalg.svd(Lz.conj().T @ Ls)
        r = 1 / np.sqrt(sig)
        G = (Ls @ Vh.conj().T) * r
        F = (Lz @ U) * r
        return _herm(G @ G.conj().T), _herm(F @ F.conj().T)

    @staticmethod
    def _max_step(X, dX) -> float:
        Linv = np.linalg.inv(np.linalg.cholesky(X))
        e = np.linalg.eigvalsh(_herm(Linv @ dX @ Linv.conj().T))
        return np.inf if e[0] >= 0 else -1 / float(e[0])

    def _factor(self, W):
        """Solver for the scaled Newton system at NT points W = (W0, W1, W2)."""
        di, do, n = self.d_in, self.d_out, self.n
        W0, W1, W2 = W
        m1, Wc = sla.eigh(W1, W1 + W2)
        m1 = np.clip(m1, 1e-300, 1.0)
        m2 = np.clip(1 - m1, 1e-300, None)
        V = (W1 + W2) @ Wc
        D = 1 / np.outer(m1, m1) + 1 / np.outer(m2, m2)
        Vr = V.reshape(di, do, n)

        def kinv(R):
            return V @ ((V.conj().T @ R @ V) / D) @ V.conj().T

        # L(E_ab) = Tr_out K^{-1}(E_ab x I) for all basis matrices at once
        X = Vr.transpose(1, 0, 2).reshape(do, di * n)
        T = (X.conj().T @ X).reshape(di, n, di, n).transpose(0, 2, 1, 3) / D
        Q = V @ T.transpose(2, 0, 1, 3).reshape(n, di * di * n)
        Q = Q.reshape(di, do, di * di, n).transpose(2, 0, 1, 3).reshape(di * di * di, do * n)
        L = (Q @ Vr.reshape(di, do * n).conj().T).reshape(di, di, di, di)
        m = di * di
        M = np.zeros((m + 1, m + 1), dtype=complex)
        M[:m, :m] = (np.einsum("ia,bj->abij", W0, W0) + L).reshape(m, m).T
        eye_vec = np.eye(di).reshape(-1)
        M[:m, m] = -eye_vec
        M[m, :m] = eye_vec
        lu = sla.lu_factor(M)

        def solve(RY, Rt):
            h = partial_trace_out(kinv(RY), di, do)
            sol = sla.lu_solve(lu, np.concatenate([-h.reshape(-1), [Rt]]))
            P = _herm(sol[:m].reshape(di, di))
            dt = float(np.real(sol[m]))
            dY = _herm(kinv(RY + np.kron(P, np.eye(do))))
            return dY, dt

        return solve

    def _direction(self, solve, S, Z, Winv, Sinv, target):
        di, do = self.d_in, self.d_out
        RY = target * (Sinv[1] + Sinv[2] - np.kron(Sinv[0], np.eye(do)))
        Rt = target * float(np.real(np.trace(Sinv[0]))) - 1
        dY, dt = solve(RY, Rt)
        dS = [dt * np.eye(di) - partial_trace_out(dY, di, do), dY, dY]
        dZ = [_herm(target * Si - Zi - Wi @ dSi @ Wi) for Si, Zi, Wi, dSi in zip(Sinv, Z, Winv, dS)]
        a_p = min(self._max_step(X, dX) for X, dX in zip(S, dS))
        a_d = min(self._max_step(X, dX) for X, dX in zip(Z, dZ))
        return dY, dt, dS, dZ, a_p, a_d

    def solve(self, tol: float, max_iter: int = 200):
        J, di, do = self.J, self.d_in, self.d_out
        w, V = np.linalg.eigh(J)
        delta = max(0.5 * float(np.max(np.abs(w))), 1e-3)
        Y = (V * np.abs(w)) @ V.conj().T + delta * np.eye(self.n)
        t = float(np.max(np.linalg.eigvalsh(partial_trace_out(Y, di, do)))) * 1.5 + delta
        Z0 = np.eye(di) / di
        Z = [Z0, np.kron(Z0, np.eye(do)) / 2, np.kron(Z0, np.eye(do)) / 2]
        best_upper, best_lower = np.inf, -np.inf
        for it in range(1, max_iter + 1):
            S = self.blocks(Y, t)
            mu = sum(float(np.real(np.vdot(Si, Zi))) for Si, Zi in zip(S, Z)) / self.nu
            try:
                W, Winv = zip(*(self._nt(Si, Zi) for Si, Zi in zip(S, Z)))
                Sinv = [_herm(np.linalg.inv(Si)) for Si in S]
                solve = self._factor(W)
                # predictor picks the centering weight, corrector takes the step
                _, _, dS, dZ, a_p, a_d = self._direction(solve, S, Z, Winv, Sinv, 0.0)
                a_p, a_d = min(1.0, a_p), min(1.0, a_d)
                mu_aff = sum(
                    float(np.real(np.vdot(Si + a_p * dSi, Zi + a_d * dZi))) for Si, Zi, dSi, dZi in zip(S, Z, dS, dZ)
                ) / self.nu
                sigma = min(1.0, max(_SIGMA_MIN, (mu_aff / mu) ** 3))
                dY, dt, dS, dZ, a_p, a_d = self._direction(solve, S, Z, Winv, Sinv, sigma * mu)
            except np.linalg.LinAlgError:
                break
            a_p, a_d = min(1.0, _STEP * a_p), min(1.0, _STEP * a_d)
            Y, t = _herm(Y + a_p * dY), t + a_p * dt
            Z = [_herm(Zi + a_d * dZi) for Zi, dZi in zip(Z, dZ)]
            rho = _herm(Z[0]) / float(np.real(np.trace(Z[0])))
            best_upper = min(best_upper, t)
            best_lower = max(best_lower, dual_value(J, rho, di, do))
            if best_upper - best_lower <= tol:
                return best_upper, best_lower, it
        raise SolverDidNotConverge(it, best_upper - best_lower)


def diamond_distance(A: QuantumChannel, B: QuantumChannel, tol: float = 1e-6) -> DiamondResult:
    """Diamond norm of A - B with a certified primal-dual gap <= tol."""
    if (A.d_in, A.d_out) != (B.d_in, B.d_out):
        raise DimensionMismatch("channels differ in dimensions")
    J = A.choi - B.choi
    if np.max(np.abs(J)) < 1e-13:
        return DiamondResult(0.0, DiamondMethod.SDP, 0.0, 0.0, 0.0)
    upper, lower, it = _PrimalDualSolver(J, A.d_in, A.d_out).solve(tol)
    upper = min(upper, 2.0)
    lower = max(lower, 0.0)
    val = min(2.0, max(0.0, (upper + lower) / 2))
    return DiamondResult(val, DiamondMethod.SDP, upper - lower, upper, lower, it)


def diamond_lower_bound(A: QuantumChannel, B: QuantumChannel, restarts: int = 4, seed=0) -> float:
    """Local maximization of the output trace distance over inputs on the doubled space."""
    J = _herm(A.choi - B.choi)
    d = A.d_in
    rng = derive_rng(seed, "diamond-lower-bound")

    def neg(x):
        M = (x[: d * d] + 1j * x[d * d :]).reshape(d, d)
        rho = M @ M.conj().T
        tr = np.real(np.trace(rho))
        if tr < 1e-12:
            return 0.0
        return -dual_value(J, rho / tr, d, A.d_out)

    best = 0.0
    for _ in range(restarts):
        x0 = rng.normal(size=2 * d * d)
        res = minimize(neg, x0, method="L-BFGS-B")
        best = max(best, -res.fun, -neg(x0))
    return best


def sampled_lower_bound(A: QuantumChannel, B: QuantumChannel, samples: int, seed=0, batch: int = 2048) -> float:
    """Best output trace distance over random pure states on the doubled space."""
    d_in, d_out = A.d_in, A.d_out
    rng = derive_rng(seed, "diamond-sampling")
    KA, KB = A.operators(), B.operators()
    best = 0.0
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        psi = rng.normal(size=(m, d_in, d_in)) + 1j * rng.normal(size=(m, d_in, d_in))
        psi /= np.linalg.norm(psi.reshape(m, -1), axis=1)[:, None, None]
        # psi[s, i, a]: system index i, ancilla index a
        def out(ks):
            vecs = [np.einsum("oi,sia->soa", k, psi) for k in ks]
            return sum(np.einsum("soa,spb->soapb", v, v.conj()) for v in vecs)

        diff = (out(KA) - out(KB)).reshape(m, d_out * d_in, d_out * d_in)
        vals = np.abs(np.linalg.eigvalsh(diff)).sum(axis=1)
        best = max(best, float(vals.max()))
        done += m
    return best


# -- ECA gap sweep -------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    gate: str
    beta_max: float
    model_index: int
    mean_single_circuit_dd: float
    eca_dd: float


SWEEP_COLUMNS = ("gate", "beta_max", "model_index", "mean_single_circuit_dd", "eca_dd")


def _sweep_point(spec, circuits, beta_max: float, model_index: int, master_seed, tol: float) -> SweepRow:
    # the model depends on the model index only, so every beta_max and gate
    # sees the same bias directions scaled by beta_max
    model = sample_model(spec.coupling, beta_max, (master_seed, "sweep-model", model_index))
    T = spec.target_unitary()
    unitaries = [noisy_unitary(c, model) for c in circuits]
    singles = [diamond_distance_unitaries(U, T).value for U in unitaries]
    try:
        eca = diamond_distance(mixed_unitary(unitaries), QuantumChannel.from_unitary(T), tol).value
    except SolverDidNotConverge as e:
        raise SolverDidNotConverge(e.iterations, e.gap, f"beta_max={beta_max}, model {model_index}") from None
    return SweepRow(spec.key, float(beta_max), model_index, float(np.mean(singles)), eca)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("QROUTE_THREADS", "1")))
    except ValueError:
        return 1


def eca_gap_sweep(spec, family, beta_grid: Sequence[float], B: int, master_seed=0, tol: float = 1e-6) -> list[SweepRow]:
    """Single-circuit versus mixed-channel diamond distance to the ideal gate.

    One row per (beta_max, model).  Points are independent; QROUTE_THREADS
    sets how many run concurrently.
    """
    if len(family) == 0:
        raise EmptyFamily(f"family {spec.key} has no circuits")
    circuits = list(family.circuits)
    tasks = [(b, k) for b in beta_grid for k in range(B)]
    workers = _threads()
    if workers == 1:
        return [_sweep_point(spec, circuits, b, k, master_seed, tol) for b, k in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(_sweep_point, spec, circuits, b, k, master_seed, tol) for b, k in tasks]
        return [f.result() for f in futs]


@dataclass(frozen=True)
class SweepSummary:
    gate: str
    beta_max: float
    single_mean: float
    single_std: float
    eca_mean: float
    eca_std: float


def summarize_sweep(rows: Sequence[SweepRow]) -> list[SweepSummary]:
    groups: dict[tuple[str, float], list[SweepRow]] = {}
    for r in rows:
        groups.setdefault((r.gate, r.beta_max), []).append(r)
    out = []
    for (gate, beta), rs in sorted(groups.items()):
        s = np.array([r.mean_single_circuit_dd for r in rs])
        e = np.array([r.eca_dd for r in rs])
        out.append(SweepSummary(gate, beta, float(s.mean()), float(s.std()), float(e.mean()), float(e.std())))
    return out


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([r.gate, repr(r.beta_max), r.model_index, repr(r.mean_single_circuit_dd), repr(r.eca_dd)])
    return buf.getvalue()
