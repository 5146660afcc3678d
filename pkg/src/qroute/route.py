"""CNOT-SWAP rerouting on linear connectivity.

A CNOT-SWAP is two CNOTs that move one qubit's state onto a neighbour
without dirt while leaving the neighbour's old content XOR-ed into the
source wire.  Moving a control uses the orientation that keeps the mover
clean; moving a multi-controlled-NOT target uses the reverse orientation,
which keeps the idle wire clean instead.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from . import core
from .core import Circuit, CouplingMap, Gate, GateKind, depth_of, remap_qubits
from .decomp import FREDKIN_CENTER, FREDKIN_ENDS, TOFFOLI_LINEAR, retarget_toffoli, seed_circuit
from .errors import IdentityString, InvalidCoupling, InvalidPlacement, RoleUnsupported, Unreachable
from .sim import BitMatrix, pauli_matrix, unitary_of


class Orientation(Enum):
    FORWARD = "forward"  # CX(a,b) then CX(b,a): a ends clean with b's old state
    REVERSE = "reverse"  # CX(b,a) then CX(a,b): b ends clean with a's old state


class Role(Enum):
    CONTROL = "control"
    MCX_TARGET = "mcx_target"


class LongRangeMethod(Enum):
    CNOT_SWAP = "cnot_swap"
    SWAP_BASELINE = "swap_baseline"


class RerouteStrategy(Enum):
    CONTROL_ONLY = "control_only"
    SIMULTANEOUS = "simultaneous"


class PauliMethod(Enum):
    ALL_TO_ALL = "all_to_all"
    SWAP_BASELINE = "swap_baseline"
    CNOT_SWAP = "cnot_swap"


@dataclass(frozen=True)
class LinePlacement:
    num_qubits: int
    controls: tuple[int, ...]
    targets: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(int(q) for q in self.controls))
        object.__setattr__(self, "targets", tuple(int(q) for q in self.targets))
        act = self.active
        if len(set(act)) != len(act):
            raise InvalidPlacement(f"positions {act} are not distinct")
        if any(not 0 <= q < self.num_qubits for q in act):
            raise InvalidPlacement(f"positions {act} fall outside a line of {self.num_qubits}")

    @property
    def active(self) -> tuple[int, ...]:
        return self.controls + self.targets

    @property
    def idle_hops(self) -> int:
        act = self.active
        return max(act) - min(act) + 1 - len(act)

    def mirrored(self) -> "LinePlacement":
        f = self.num_qubits - 1
        return LinePlacement(self.num_qubits, tuple(f - q for q in self.controls), tuple(f - q for q in self.targets))


def _circ(n: int, gates, name: str = "") -> Circuit:
    return Circuit(n, tuple(gates), name)


def cnot_swap(a: int, b: int, orientation: Orientation = Orientation.FORWARD) -> Circuit:
    """|i_a, i_b> -> |i_b, i_a xor i_b> for FORWARD; roles exchanged for REVERSE."""
    if a == b:
        raise InvalidPlacement("cnot_swap needs two distinct qubits")
    if orientation is Orientation.REVERSE:
        a, b = b, a
    return _circ(max(a, b) + 1, [core.cx(a, b), core.cx(b, a)], "cnot_swap")


def _hop(role: Role, src: int, dst: int) -> tuple[Gate, Gate]:
    if role is Role.CONTROL:
        return core.cx(dst, src), core.cx(src, dst)
    return core.cx(src, dst), core.cx(dst, src)


def _path(src: int, dst: int) -> list[tuple[int, int]]:
    step = 1 if dst > src else -1
    return [(p, p + step) for p in range(src, dst, step)]


def hop_chain(role: Role, src: int, dst: int, pipelined: bool = True) -> list[Gate]:
    """CNOT-SWAP chain moving ``src`` to ``dst``.

    When pipelined, the second CNOT of each hop commutes with the first CNOT
    of the next hop (they share a control or a target), so the latter is
    pulled forward.
    """
    pairs = [_hop(role, a, b) for a, b in _path(src, dst)]
    if not pairs:
        return []
    if not pipelined:
        return [g for pair in pairs for g in pair]
    out = [pairs[0][0]]
    for j in range(1, len(pairs)):
        out += [pairs[j][0], pairs[j - 1][1]]
    out.append(pairs[-1][1])
    return out


def swap_chain(src: int, dst: int) -> list[Gate]:
    out = []
    for a, b in _path(src, dst):
        out += [core.cx(a, b), core.cx(b, a), core.cx(a, b)]
    return out


def _reversed(gates: Sequence[Gate]) -> list[Gate]:
    return [g.inverse() for g in reversed(gates)]


def _blue_box(c: int, m: int, t: int) -> list[Gate]:
    """CX(c -> t) through a middle wire m, restoring m."""
    return [core.cx(m, t), core.cx(c, m), core.cx(m, t), core.cx(c, m)]


def long_range_cnot(n_idle: int, method: LongRangeMethod = LongRangeMethod.CNOT_SWAP) -> Circuit:
    """CX(0 -> n+1) on a line of n+2 qubits."""
    method = LongRangeMethod(method)
    n = int(n_idle)
    if n < 0:
        raise InvalidPlacement("idle count must be non-negative")
    N = n + 2
    if n == 0:
        return _circ(N, [core.cx(0, 1)], "long_range_cnot")
    if method is LongRangeMethod.SWAP_BASELINE:
        going = swap_chain(0, n)
        return _circ(N, going + [core.cx(n, n + 1)] + _reversed(going), "long_range_cnot_swap")
    a = (n - 1) // 2
    going = hop_chain(Role.CONTROL, 0, a) + hop_chain(Role.MCX_TARGET, N - 1, a + 2)
    gates = going + _blue_box(a, a + 1, a + 2) + _reversed(going)
    return _circ(N, gates, "long_range_cnot")


def _check_role(role: Role, inner: Circuit, qubit: int) -> None:
    U = unitary_of(inner)
    k = inner.num_qubits
    dim = 2**k
    bit = 1 << (k - 1 - qubit)
    if role is Role.CONTROL:
        idx = np.arange(dim)
        mask = (idx[:, None] & bit) != (idx[None, :] & bit)
        if np.max(np.abs(U[mask]), initial=0.0) > 1e-9:
            raise RoleUnsupported(f"inner gate does not preserve qubit {qubit}; it cannot be moved as a control")
        return
    ref = U[np.flatnonzero(np.abs(U[:, 0]) > 1e-9)[0], 0]
    for col in range(dim):
        rows = np.flatnonzero(np.abs(U[:, col]) > 1e-9)
        if len(rows) != 1 or (rows[0] | bit) != (col | bit) or abs(U[rows[0], col] - ref) > 1e-9:
            raise RoleUnsupported(f"inner gate is not a multi-controlled NOT on qubit {qubit}")
        partner = col ^ bit
        prow = np.flatnonzero(np.abs(U[:, partner]) > 1e-9)
        if (rows[0] == col) != (prow[0] == partner):
            raise RoleUnsupported(f"inner gate is not a multi-controlled NOT on qubit {qubit}")


def move_qubit(role: Role, hops: int, inner: Circuit, qubit: int | None = None) -> Circuit:
    """Run ``inner`` with one of its boundary qubits displaced by ``hops`` wires.

    The returned circuit has ``hops`` extra idle wires between the moving
    qubit and the rest; CNOT-SWAP networks bring it adjacent and back.
    """
    role = Role(role)
    k = inner.num_qubits
    if qubit is None:
        qubit = 0 if role is Role.CONTROL else k - 1
    if qubit not in (0, k - 1):
        raise InvalidPlacement("the moving qubit must sit at an end of the inner circuit")
    if hops == 0:
        return inner
    _check_role(role, inner, qubit)
    N = k + hops
    if qubit == 0:
        mapping = [hops + i for i in range(k)]
        going = hop_chain(role, 0, hops)
    else:
        mapping = list(range(k))
        going = hop_chain(role, N - 1, k - 1)
    placed = remap_qubits(inner, mapping, N)
    return _circ(N, going + list(placed.gates) + _reversed(going), f"moved_{role.value}")


def _embed(c: Circuit, wires: Sequence[int], N: int) -> list[Gate]:
    return list(remap_qubits(c, list(wires), N).gates)


def toffoli_long_range(p: LinePlacement) -> Circuit:
    """Toffoli on arbitrary line positions: outer qubits move in, middle stays."""
    if len(p.controls) != 2 or len(p.targets) != 1:
        raise InvalidPlacement("a Toffoli needs two controls and one target")
    N = p.num_qubits
    roles = {q: Role.CONTROL for q in p.controls}
    roles[p.targets[0]] = Role.MCX_TARGET
    lo, mid, hi = sorted(p.active)
    going = hop_chain(roles[lo], lo, mid - 1) + hop_chain(roles[hi], hi, mid + 1)
    local = {mid - 1: lo, mid: mid, mid + 1: hi}
    t_local = [w for w, orig in local.items() if orig == p.targets[0]][0] - (mid - 1)
    core_c = retarget_toffoli(seed_circuit(TOFFOLI_LINEAR), 1, t_local)
    gates = going + _embed(core_c, [mid - 1, mid, mid + 1], N) + _reversed(going)
    return _circ(N, gates, "toffoli_long_range")


def _simultaneous_split(n: int) -> tuple[int, int]:
    """(control hops, pair hops) for n idle wires."""
    if n <= 1:
        return n, 0
    h = n + 1 - n // 2
    return h, n - h


def _fredkin_parts(p: LinePlacement, strategy: RerouteStrategy):
    """(going network, local core, width) with the control above the targets."""
    N = p.num_qubits
    c = p.controls[0]
    near, far = sorted(p.targets)
    going = swap_chain(far, near + 1) if far - near > 1 else []
    n = near - c - 1
    if strategy is RerouteStrategy.CONTROL_ONLY:
        going += hop_chain(Role.CONTROL, c, near - 1)
        base = near - 1
    else:
        h, k = _simultaneous_split(n)
        going += hop_chain(Role.CONTROL, c, c + h)
        going += hop_chain(Role.CONTROL, near, near - k) + hop_chain(Role.CONTROL, near + 1, near + 1 - k)
        base = c + h
    core_gates = _embed(seed_circuit(FREDKIN_ENDS), [base, base + 1, base + 2], N)
    return going, core_gates


def fredkin_long_range(p: LinePlacement, strategy: RerouteStrategy = RerouteStrategy.CONTROL_ONLY) -> Circuit:
    if len(p.controls) != 1 or len(p.targets) != 2:
        raise InvalidPlacement("a Fredkin needs one control and two targets")
    strategy = RerouteStrategy(strategy)
    N = p.num_qubits
    c = p.controls[0]
    t1, t2 = sorted(p.targets)
    if t1 < c < t2:
        going = swap_chain(t1, c - 1) + swap_chain(t2, c + 1)
        core_gates = _embed(seed_circuit(FREDKIN_CENTER), [c - 1, c, c + 1], N)
        return _circ(N, going + core_gates + _reversed(going), "fredkin_long_range")
    if c > t2:
        mirrored = fredkin_long_range(p.mirrored(), strategy)
        return remap_qubits(mirrored, [N - 1 - q for q in range(N)])
    going, core_gates = _fredkin_parts(p, strategy)
    return _circ(N, going + core_gates + _reversed(going), "fredkin_long_range")


def fredkin_rerouting_network(p: LinePlacement, strategy: RerouteStrategy) -> Circuit:
    """Forward half of the rerouting layers (control above both targets)."""
    if p.controls[0] < min(p.targets):
        going, _ = _fredkin_parts(p, RerouteStrategy(strategy))
        return _circ(p.num_qubits, going)
    if p.controls[0] > max(p.targets):
        net = fredkin_rerouting_network(p.mirrored(), strategy)
        return remap_qubits(net, [p.num_qubits - 1 - q for q in range(p.num_qubits)])
    raise InvalidPlacement("rerouting networks are defined for a control outside the target pair")


def rerouting_depth(p: LinePlacement, strategy: RerouteStrategy) -> int:
    """Depth of the going network plus the depth of the returning network."""
    net = fredkin_rerouting_network(p, strategy)
    back = _reversed(net.gates)
    return depth_of(net.gates, net.num_qubits) + depth_of(back, net.num_qubits)


def _cancel_adjacent(gates: list[Gate]) -> list[Gate]:
    out: list[Gate] = []
    for g in gates:
        if out and g.is_cx and out[-1] == g:
            out.pop()
        else:
            out.append(g)
    return out


def _fanout_side(control: int, targets: list[int], pipelined: bool) -> list[Gate]:
    step = 1 if targets[0] > control else -1
    gates: list[Gate] = []
    hops: list[Gate] = []
    pos = control
    for i, t in enumerate(targets):
        last = i == len(targets) - 1
        stop = t - 2 * step if last and abs(t - pos) >= 2 else t - step
        move = hop_chain(Role.CONTROL, pos, stop, pipelined) if stop != pos else []
        gates += move
        hops += move
        pos = stop
        if abs(t - pos) == 2:
            m = pos + step
            gates += [core.cx(pos, m), core.cx(m, t), core.cx(pos, m), core.cx(m, t)]
        else:
            gates.append(core.cx(pos, t))
    return gates + _reversed(hops)


def fanout_cnots(control_pos: int, target_positions: Sequence[int], line_size: int, pipelined: bool = False) -> Circuit:
    """Product of CX(control -> t) over the targets, on a line.

    The control visits the targets in order of distance and returns along
    the same CNOT-SWAP hops; the last target at distance two is reached
    through the four-CNOT bridge instead of a final hop.  Hops are emitted
    one after another unless ``pipelined`` is set.
    """
    ts = [int(t) for t in target_positions]
    act = [control_pos, *ts]
    if len(set(act)) != len(act) or not ts or any(not 0 <= q < line_size for q in act):
        raise InvalidPlacement(f"invalid fan-out placement {control_pos} -> {ts} on {line_size} qubits")
    below = sorted(t for t in ts if t > control_pos)
    above = sorted((t for t in ts if t < control_pos), reverse=True)
    gates: list[Gate] = []
    if below:
        gates += _fanout_side(control_pos, below, pipelined)
    if above:
        gates += _fanout_side(control_pos, above, pipelined)
    return _circ(line_size, _cancel_adjacent(gates), "fanout")


def _basis_change(P: str) -> tuple[list[Gate], list[Gate]]:
    pre, post = [], []
    for q, ch in enumerate(P):
        if ch == "X":
            pre.append(core.h(q))
            post.append(core.h(q))
        elif ch == "Y":
            pre += [core.sdg(q), core.h(q)]
            post += [core.h(q), core.s(q)]
    return pre, post


def pauli_exponential(P: str | Mapping[int, str], theta: float, coupling: CouplingMap, method: PauliMethod = PauliMethod.ALL_TO_ALL) -> Circuit:
    """exp(-i theta P) exactly, including the global phase."""
    method = PauliMethod(method)
    n = coupling.num_qubits
    if isinstance(P, Mapping):
        chars = ["I"] * n
        for q, ch in P.items():
            chars[int(q)] = ch
        P = "".join(chars)
    P = P.upper()
    if len(P) != n or any(ch not in "IXYZ" for ch in P):
        raise InvalidCoupling(f"Pauli string {P!r} does not fit {n} qubits")
    active = [q for q, ch in enumerate(P) if ch != "I"]
    if not active:
        raise IdentityString("exp(-i theta I) is the global phase e^{-i theta}")
    pre, post = _basis_change(P)
    ladder: list[Gate] = []
    if method is PauliMethod.ALL_TO_ALL:
        for a, b in zip(active, active[1:]):
            if not coupling.has_edge(a, b):
                raise InvalidCoupling(f"qubits {a} and {b} are not coupled")
            ladder.append(core.cx(a, b))
    else:
        if not coupling.is_line:
            raise InvalidCoupling("CNOT-SWAP and SWAP ladders need line connectivity")
        holder = active[0]
        for nxt in active[1:]:
            stop = nxt - 1
            if method is PauliMethod.CNOT_SWAP:
                ladder += hop_chain(Role.CONTROL, holder, stop)
            else:
                ladder += swap_chain(holder, stop)
            ladder.append(core.cx(stop, nxt))
            holder = nxt
    gates = pre + ladder + [core.rz(2 * theta, active[-1])] + _reversed(ladder) + post
    return _circ(n, gates, f"exp_{P}")


def pauli_exponential_matrix(P: str, theta: float) -> np.ndarray:
    """Dense exp(-i theta P) via the eigendecomposition of the Pauli string."""
    M = pauli_matrix(P)
    w, V = np.linalg.eigh(M)
    return (V * np.exp(-1j * theta * w)) @ V.conj().T


# -- BFS minimality oracle ----------------------------------------------------


def _pack(m: BitMatrix) -> int:
    n = m.n
    val = 0
    for i in range(n):
        row = 0
        for j in range(n):
            row |= int(m.data[i, j]) << j
        val |= row << (i * n)
    return val


def bfs_min_cnots(target: BitMatrix, coupling: CouplingMap, max_qubits: int = 5) -> int:
    """Fewest nearest-neighbour CNOTs realizing the F2 map ``target``.

    Bidirectional breadth-first search; every generator is an involution,
    so the two frontiers expand with the same move set.
    """
    n = target.n
    if n > max_qubits:
        raise InvalidCoupling(f"BFS is capped at {max_qubits} qubits")
    if coupling.num_qubits != n:
        raise InvalidCoupling("coupling width differs from the target map")
    if not target.is_invertible():
        raise Unreachable("target map is singular")
    mask = (1 << n) - 1
    moves = [(c * n, t * n) for c, t in coupling.directed_pairs()]
    start = _pack(BitMatrix.identity(n))
    goal = _pack(target)
    if start == goal:
        return 0
    dist = [{start: 0}, {goal: 0}]
    frontier = [deque([start]), deque([goal])]
    while frontier[0] and frontier[1]:
        side = 0 if len(frontier[0]) <= len(frontier[1]) else 1
        seen, other = dist[side], dist[1 - side]
        best = None
        for _ in range(len(frontier[side])):
            s = frontier[side].popleft()
            d = seen[s] + 1
            for cs, ts in moves:
                nxt = s ^ (((s >> cs) & mask) << ts)
                if nxt in seen:
                    continue
                if nxt in other:
                    cand = d + other[nxt]
                    best = cand if best is None else min(best, cand)
                seen[nxt] = d
                frontier[side].append(nxt)
        if best is not None:
            return best
    raise Unreachable("target not reachable on this coupling map")
