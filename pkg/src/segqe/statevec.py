"""Dense state-vector simulation.

Amplitude index bit ``q`` is the computational-basis value of qubit ``q``.
Local gates are applied by moving their axes to the front of the
``(2,)*n`` tensor view, so the full ``2^n x 2^n`` operator is never formed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from segqe.pauli import DimensionError, PauliString

if TYPE_CHECKING:
    from segqe.hamiltonians import Hamiltonian

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
MAX_DENSE_QUBITS = 10
MAX_GROUND_QUBITS = 14
DEGENERACY_TOL = 1e-9


class CapacityError(ValueError):
    """Raised when a dense computation would exceed the supported size."""


class ValidationError(ValueError):
    """Raised on malformed numerical input (non-unitary gates and the like)."""


@lru_cache(maxsize=None)
def _indices(n: int) -> np.ndarray:
    return np.arange(1 << n, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalised vector of ``2^n`` complex amplitudes."""

    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.n,):
            raise DimensionError(f"expected {1 << self.n} amplitudes, got shape {amps.shape}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-8:
            raise ValidationError(f"state is not normalised (norm {norm:.3e})")
        if abs(norm - 1.0) > NORM_TOL:
            # drift beyond round-off is renormalised; anything closer is kept bit-exact
            amps = amps / norm
        else:
            amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zeros(cls, n: int) -> StateVector:
        amps = np.zeros(1 << n, dtype=complex)
        amps[0] = 1.0
        return cls(n, amps)

    @classmethod
    def basis(cls, n: int, index: int) -> StateVector:
        amps = np.zeros(1 << n, dtype=complex)
        amps[index] = 1.0
        return cls(n, amps)

    @classmethod
    def product(cls, label: str) -> StateVector:
        """Product state from one character per qubit (qubit 0 first) in ``01+-rl``."""
        single = {
            "0": np.array([1, 0], dtype=complex),
            "1": np.array([0, 1], dtype=complex),
            "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
            "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
            "r": np.array([1, 1j], dtype=complex) / np.sqrt(2),
            "l": np.array([1, -1j], dtype=complex) / np.sqrt(2),
        }
        amps = np.ones(1, dtype=complex)
        for ch in label:
            if ch not in single:
                raise ValueError(f"unknown single-qubit state {ch!r} in {label!r}")
            amps = np.kron(single[ch], amps)
        return cls(len(label), amps)

    @classmethod
    def random(cls, n: int, rng) -> StateVector:
        """Haar-like random state from a :class:`~segqe.rng.CounterRNG`."""
        z = rng.normal(2 << n)
        amps = z[: 1 << n] + 1j * z[1 << n :]
        return cls(n, amps / np.linalg.norm(amps))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class LocalUnitary:
    """A ``2^m x 2^m`` unitary on an ordered qubit list.

    Local index bit ``j`` refers to qubit ``support[j]``.
    """

    support: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        support = tuple(int(q) for q in self.support)
        if len(set(support)) != len(support):
            raise ValidationError(f"support has repeated qubits: {support}")
        mat = np.asarray(self.matrix, dtype=complex)
        dim = 1 << len(support)
        if mat.shape != (dim, dim):
            raise DimensionError(f"matrix shape {mat.shape} does not match support size {len(support)}")
        if not np.allclose(mat.conj().T @ mat, np.eye(dim), atol=UNITARY_TOL, rtol=0):
            raise ValidationError("gate matrix is not unitary")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", mat)

    @property
    def m(self) -> int:
        return len(self.support)

    def inverse(self) -> LocalUnitary:
        return LocalUnitary(self.support, self.matrix.conj().T)


def apply_matrix(amps: np.ndarray, n: int, support: Sequence[int], matrix: np.ndarray) -> np.ndarray:
    """Apply a local matrix to a raw amplitude array; returns a new array."""
    m = len(support)
    for q in support:
        if not 0 <= q < n:
            raise DimensionError(f"qubit {q} out of range for n={n}")
    # C-order reshape puts qubit q on axis n-1-q; local tensor axis k is support[m-1-k]
    axes = [n - 1 - support[m - 1 - k] for k in range(m)]
    psi = np.moveaxis(amps.reshape((2,) * n), axes, range(m))
    shape = psi.shape
    psi = (matrix @ psi.reshape(1 << m, -1)).reshape(shape)
    return np.moveaxis(psi, range(m), axes).reshape(-1)


def apply(state: StateVector, gate: LocalUnitary) -> StateVector:
    amps = apply_matrix(state.amplitudes, state.n, gate.support, gate.matrix)
    return StateVector(state.n, amps)


def _pauli_action(amps: np.ndarray, n: int, p: PauliString) -> np.ndarray:
    """``P|psi>`` via index permutation and signs."""
    idx = _indices(n)
    src = idx ^ p.x
    # P|b> = i^{|x&z|} (-1)^{|b&z|} |b^x>, so (P psi)[c] = i^{|x&z|} (-1)^{|(c^x)&z|} psi[c^x]
    sign = 1.0 - 2.0 * (np.bitwise_count(src & p.z) & 1)
    return (1j ** ((p.x & p.z).bit_count() % 4)) * sign * amps[src]


def apply_pauli(state: StateVector, p: PauliString) -> StateVector:
    _check_n(state, p.n)
    return StateVector(state.n, _pauli_action(state.amplitudes, state.n, p))


def rotate_pauli_amplitudes(amps: np.ndarray, n: int, p: PauliString, theta: float) -> np.ndarray:
    """``exp(-i theta P / 2)`` on raw amplitudes."""
    return np.cos(theta / 2) * amps - 1j * np.sin(theta / 2) * _pauli_action(amps, n, p)


def apply_pauli_rotation(state: StateVector, p: PauliString, theta: float) -> StateVector:
    _check_n(state, p.n)
    return StateVector(state.n, rotate_pauli_amplitudes(state.amplitudes, state.n, p, theta))


def pauli_rotation_matrix(p: PauliString, theta: float) -> np.ndarray:
    dim = 1 << p.n
    return np.cos(theta / 2) * np.eye(dim) - 1j * np.sin(theta / 2) * p.to_matrix()


def _check_n(state: StateVector, n: int) -> None:
    if state.n != n:
        raise DimensionError(f"state has {state.n} qubits, operator has {n}")


def expval_amplitudes(amps: np.ndarray, n: int, p: PauliString) -> float:
    val = np.vdot(amps, _pauli_action(amps, n, p))
    if abs(val.imag) > 1e-10:
        raise ValidationError(f"Pauli expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def expval(state: StateVector, p: PauliString) -> float:
    """``<psi|P|psi>``."""
    _check_n(state, p.n)
    return expval_amplitudes(state.amplitudes, state.n, p)


def energy(state: StateVector, h: Hamiltonian) -> float:
    _check_n(state, h.n)
    return float(sum(c * expval(state, p) for c, p in h.terms))


def fidelity(a: StateVector, b: StateVector) -> float:
    """``|<a|b>|^2``."""
    if a.n != b.n:
        raise DimensionError(f"qubit counts differ: {a.n} vs {b.n}")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


def hamiltonian_sparse(h: Hamiltonian) -> scipy.sparse.csr_matrix:
    dim = 1 << h.n
    idx = _indices(h.n)
    rows, cols, vals = [], [], []
    for c, p in h.terms:
        src = idx ^ p.x
        sign = 1.0 - 2.0 * (np.bitwise_count(src & p.z) & 1)
        rows.append(idx)
        cols.append(src)
        vals.append(c * (1j ** ((p.x & p.z).bit_count() % 4)) * sign)
    if not rows:
        return scipy.sparse.csr_matrix((dim, dim), dtype=complex)
    mat = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )
    return mat.tocsr()


def hamiltonian_matrix(h: Hamiltonian) -> np.ndarray:
    if h.n > MAX_DENSE_QUBITS + 2:
        raise CapacityError(f"dense matrix for n={h.n} is too large")
    return hamiltonian_sparse(h).toarray()


@dataclass(frozen=True, eq=False)
class GroundState:
    """Lowest eigenvalue, one ground vector and an orthonormal basis of the ground space."""

    energy: float
    state: StateVector
    space: np.ndarray  # shape (2^n, g)

    @property
    def degeneracy(self) -> int:
        return self.space.shape[1]

    def fidelity(self, psi: StateVector) -> float:
        """Squared norm of the projection of ``psi`` onto the ground space."""
        overlaps = self.space.conj().T @ psi.amplitudes
        return float(min(1.0, np.sum(np.abs(overlaps) ** 2)))


def exact_ground_state(h: Hamiltonian) -> GroundState:
    """Diagonalise ``h``; dense up to 10 qubits, sparse Lanczos up to 14."""
    if h.n > MAX_GROUND_QUBITS:
        raise CapacityError(f"exact diagonalisation capped at n={MAX_GROUND_QUBITS}, got {h.n}")
    if h.n <= MAX_DENSE_QUBITS:
        mat = hamiltonian_matrix(h)
        if np.allclose(mat.imag, 0.0):
            evals, evecs = scipy.linalg.eigh(mat.real)
        else:
            evals, evecs = scipy.linalg.eigh(mat)
    else:
        sp = hamiltonian_sparse(h)
        k = 6
        while True:
            evals, evecs = scipy.sparse.linalg.eigsh(sp, k=k, which="SA", tol=1e-12)
            order = np.argsort(evals)
            evals, evecs = evals[order], evecs[:, order]
            if evals[-1] - evals[0] > DEGENERACY_TOL or k >= 64:
                break
            k *= 2
    e0 = float(evals[0])
    space = np.asarray(evecs[:, evals - e0 <= DEGENERACY_TOL], dtype=complex)
    return GroundState(e0, StateVector(h.n, space[:, 0]), space)
