"""Phase-free Pauli strings stored as paired X/Z bit masks.

Qubit ``q`` corresponds to bit ``q`` of both masks and to bit ``q`` of a
computational-basis index (little-endian).  A qubit carries ``X`` when only
its x bit is set, ``Z`` when only its z bit is set and ``Y`` when both are.

Two text forms are understood:

* dense, one character per qubit starting with qubit 0: ``"XIIYI"``
* sparse, 1-based sites with identity elsewhere: ``"X1 Y4"``
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 64

_LABELS = "IXYZ"
# (x, z) bits per single-qubit label
_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_OP_LABEL = {bits: label for label, bits in _BITS.items()}
_SPARSE_RE = re.compile(r"^([IXYZ])(\d+)$")

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class DimensionError(ValueError):
    """Raised when operands act on different numbers of qubits."""


@dataclass(frozen=True, slots=True)
class PauliString:
    """Tensor product of single-qubit Paulis without a phase."""

    n: int
    x: int = 0
    z: int = 0

    def __post_init__(self):
        if not 0 <= self.n <= MAX_QUBITS:
            raise ValueError(f"qubit count must lie in [0, {MAX_QUBITS}], got {self.n}")
        limit = 1 << self.n
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise ValueError("mask bits set beyond the qubit count")

    # construction -----------------------------------------------------

    @classmethod
    def identity(cls, n: int) -> PauliString:
        return cls(n)

    @classmethod
    def from_ops(cls, n: int, ops: dict[int, str] | Iterable[tuple[int, str]]) -> PauliString:
        """Build from ``{qubit: label}`` with 0-based qubit indices."""
        items = ops.items() if isinstance(ops, dict) else ops
        x = z = 0
        for q, label in items:
            if not 0 <= q < n:
                raise DimensionError(f"qubit {q} out of range for n={n}")
            bx, bz = _BITS[label.upper()]
            x |= bx << q
            z |= bz << q
        return cls(n, x, z)

    @classmethod
    def from_dense(cls, label: str) -> PauliString:
        label = label.strip().upper()
        if any(ch not in _LABELS for ch in label):
            raise ValueError(f"invalid dense Pauli label {label!r}")
        return cls.from_ops(len(label), {q: ch for q, ch in enumerate(label)})

    @classmethod
    def from_sparse(cls, text: str, n: int) -> PauliString:
        """Parse ``"X1 Y4"`` (1-based sites).  An empty string or ``"I"`` is the identity."""
        ops: dict[int, str] = {}
        for token in text.replace(",", " ").split():
            token = token.upper()
            if token == "I":
                continue
            match = _SPARSE_RE.match(token)
            if match is None:
                raise ValueError(f"invalid sparse Pauli token {token!r}")
            site = int(match.group(2))
            if not 1 <= site <= n:
                raise DimensionError(f"site {site} out of range for n={n}")
            if site - 1 in ops:
                raise ValueError(f"site {site} appears twice in {text!r}")
            ops[site - 1] = match.group(1)
        return cls.from_ops(n, ops)

    @classmethod
    def parse(cls, text: str, n: int | None = None) -> PauliString:
        """Accept either text form.  Sparse notation requires ``n``."""
        stripped = text.strip().upper()
        if stripped and all(ch in _LABELS for ch in stripped) and (n is None or len(stripped) == n):
            return cls.from_dense(stripped)
        if n is None:
            raise ValueError("sparse Pauli notation needs the qubit count")
        return cls.from_sparse(stripped, n)

    # queries ----------------------------------------------------------

    @property
    def support_mask(self) -> int:
        return self.x | self.z

    @property
    def weight(self) -> int:
        return self.support_mask.bit_count()

    @property
    def support(self) -> tuple[int, ...]:
        mask = self.support_mask
        return tuple(q for q in range(self.n) if mask >> q & 1)

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def op(self, q: int) -> str:
        return _OP_LABEL[(self.x >> q & 1, self.z >> q & 1)]

    def ops(self) -> dict[int, str]:
        return {q: self.op(q) for q in self.support}

    def dense(self) -> str:
        return "".join(self.op(q) for q in range(self.n))

    def sparse(self) -> str:
        """1-based sparse label; ``"I"`` for the identity."""
        if self.is_identity():
            return "I"
        return " ".join(f"{self.op(q)}{q + 1}" for q in self.support)

    def __str__(self) -> str:
        return self.sparse()

    def to_matrix(self) -> np.ndarray:
        """Dense ``2^n x 2^n`` matrix in the little-endian basis ordering."""
        out = np.ones((1, 1), dtype=complex)
        for q in range(self.n):
            # qubit 0 is the least significant bit, i.e. the rightmost kron factor
            out = np.kron(_SINGLE[self.op(q)], out)
        return out

    # algebra ----------------------------------------------------------

    def tensor(self, other: PauliString) -> PauliString:
        """``self`` on the low qubits followed by ``other`` on the high ones."""
        return PauliString(self.n + other.n, self.x | other.x << self.n, self.z | other.z << self.n)

    def __mul__(self, other: PauliString) -> PhasedPauli:
        return multiply(self, other)


@dataclass(frozen=True, slots=True)
class PhasedPauli:
    """A Pauli string with a phase ``i**phase``, ``phase`` in {0, 1, 2, 3}."""

    pauli: PauliString
    phase: int = 0

    def __post_init__(self):
        object.__setattr__(self, "phase", self.phase % 4)

    @property
    def coefficient(self) -> complex:
        return (1, 1j, -1, -1j)[self.phase]

    def to_matrix(self) -> np.ndarray:
        return self.coefficient * self.pauli.to_matrix()

    def __str__(self) -> str:
        return f"{('+', '+i', '-', '-i')[self.phase]}{self.pauli.sparse()}"


def _check_same_n(a: PauliString, b: PauliString) -> None:
    if a.n != b.n:
        raise DimensionError(f"qubit counts differ: {a.n} vs {b.n}")


def multiply(a: PauliString, b: PauliString) -> PhasedPauli:
    """Operator product ``a @ b`` with its exact phase."""
    _check_same_n(a, b)
    x = a.x ^ b.x
    z = a.z ^ b.z
    # P = i^{|x&z|} X^x Z^z ; moving Z^{za} past X^{xb} contributes (-1)^{|za&xb|}
    phase = (a.x & a.z).bit_count() + (b.x & b.z).bit_count() + 2 * (a.z & b.x).bit_count() - (x & z).bit_count()
    return PhasedPauli(PauliString(a.n, x, z), phase)


def commutes(a: PauliString, b: PauliString) -> bool:
    _check_same_n(a, b)
    return ((a.x & b.z).bit_count() + (a.z & b.x).bit_count()) % 2 == 0


def qubitwise_commutes(a: PauliString, b: PauliString) -> bool:
    _check_same_n(a, b)
    overlap = a.support_mask & b.support_mask
    return ((a.x ^ b.x) | (a.z ^ b.z)) & overlap == 0


def shared_support(a: PauliString, b: PauliString) -> int:
    """Number of qubits where both strings act non-trivially."""
    _check_same_n(a, b)
    return (a.support_mask & b.support_mask).bit_count()


def restrict(p: PauliString, support: Sequence[int]) -> PauliString:
    """Factor of ``p`` on ``support``, re-indexed so ``support[j]`` becomes qubit ``j``."""
    x = z = 0
    for j, q in enumerate(support):
        if not 0 <= q < p.n:
            raise DimensionError(f"qubit {q} out of range for n={p.n}")
        x |= (p.x >> q & 1) << j
        z |= (p.z >> q & 1) << j
    return PauliString(len(support), x, z)


def embed(p: PauliString, support: Sequence[int], n: int) -> PauliString:
    """Inverse of :func:`restrict`: place the ``len(support)``-qubit ``p`` on ``support``."""
    if p.n != len(support):
        raise DimensionError("support length must equal the string's qubit count")
    x = z = 0
    for j, q in enumerate(support):
        if not 0 <= q < n:
            raise DimensionError(f"qubit {q} out of range for n={n}")
        x |= (p.x >> j & 1) << q
        z |= (p.z >> j & 1) << q
    return PauliString(n, x, z)


def complement(support: Iterable[int], n: int) -> tuple[int, ...]:
    s = set(support)
    return tuple(q for q in range(n) if q not in s)


@lru_cache(maxsize=None)
def pauli_basis(m: int) -> tuple[PauliString, ...]:
    """All ``4^m`` strings on ``m`` qubits.

    Index ``mu`` has base-4 digit ``d_q`` for qubit ``q`` (0=I, 1=X, 2=Y, 3=Z),
    so index 0 is the identity.
    """
    out = []
    for mu in range(4**m):
        ops = {}
        for q in range(m):
            d = mu // 4**q % 4
            if d:
                ops[q] = _LABELS[d]
        out.append(PauliString.from_ops(m, ops))
    return tuple(out)


def basis_index(p: PauliString) -> int:
    """Position of ``p`` in :func:`pauli_basis` ``(p.n)``."""
    return sum(_LABELS.index(p.op(q)) * 4**q for q in range(p.n))


@lru_cache(maxsize=None)
def pauli_basis_matrices(m: int) -> np.ndarray:
    """Stack of the ``4^m`` basis matrices, shape ``(4^m, 2^m, 2^m)``."""
    return np.stack([p.to_matrix() for p in pauli_basis(m)])
