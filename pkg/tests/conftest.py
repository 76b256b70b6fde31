import numpy as np
import pytest
from hypothesis import strategies as st

from segqe.pauli import PauliString

SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def dense_pauli(label: str) -> np.ndarray:
    """Kronecker-product oracle; qubit 0 is the least significant amplitude bit."""
    out = np.eye(1, dtype=complex)
    for ch in reversed(label):
        out = np.kron(out, SINGLE[ch])
    return out


def dense_hamiltonian(h) -> np.ndarray:
    dim = 1 << h.n
    out = np.zeros((dim, dim), dtype=complex)
    for c, p in h.terms:
        out += c * dense_pauli(p.dense())
    return out


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@st.composite
def pauli_strings(draw, n=None, min_n=1, max_n=5):
    if n is None:
        n = draw(st.integers(min_n, max_n))
    label = draw(st.text(alphabet="IXYZ", min_size=n, max_size=n))
    return PauliString.from_dense(label)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance summary: one PASS/FAIL line per criterion at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    line = f"acceptance {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
