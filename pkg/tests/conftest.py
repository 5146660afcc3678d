import numpy as np
import pytest
from hypothesis import strategies as st

from qroute import core
from qroute.core import Circuit

ONE_QUBIT = ["x", "z", "h", "s", "sdg", "t", "tdg", "sx", "sxdg"]
angles = st.floats(min_value=-2 * np.pi, max_value=2 * np.pi, allow_nan=False, allow_infinity=False)


@st.composite
def gates(draw, n: int, cx_only: bool = False, with_three: bool = False):
    if cx_only:
        a, b = draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
        return core.cx(a, b)
    kinds = ONE_QUBIT + ["rz", "rx", "u3", "cx"] + (["swap"] if n >= 2 else [])
    if with_three and n >= 3:
        kinds += ["ccx", "cswap"]
    k = draw(st.sampled_from(kinds))
    if k in ONE_QUBIT:
        return getattr(core, k)(draw(st.integers(0, n - 1)))
    if k in ("rz", "rx"):
        return getattr(core, k)(draw(angles), draw(st.integers(0, n - 1)))
    if k == "u3":
        return core.u3(draw(angles), draw(angles), draw(angles), draw(st.integers(0, n - 1)))
    arity = {"cx": 2, "swap": 2, "ccx": 3, "cswap": 3}[k]
    qs = draw(st.lists(st.integers(0, n - 1), min_size=arity, max_size=arity, unique=True))
    return getattr(core, k)(*qs)


@st.composite
def circuits(draw, n: int | None = None, max_gates: int = 25, cx_only: bool = False, with_three: bool = False):
    if n is None:
        n = draw(st.integers(2, 4))
    gs = draw(st.lists(gates(n, cx_only, with_three), max_size=max_gates))
    return Circuit(n, tuple(gs))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_state(rng, n):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
