"""Classical shadows from uniformly random single-qubit Pauli measurements.

A snapshot stores, per qubit, the measured basis (X, Y or Z) and the outcome
bit (0 for the +1 eigenvalue).  The single-shot estimator of a Pauli string
``P`` of weight ``w`` is ``3^w * prod(+-1)`` when every non-identity factor of
``P`` matches the measured basis on its qubit, and 0 otherwise.

Snapshot ``t`` of a batch with seed ``s`` draws its numbers from the child
stream ``derive_key(seed_key(s), t)``: positions ``0..n-1`` pick the bases and
position ``n`` the outcome, so batches are reproducible and independent of
how they are generated.

Binary dump layout (all integers little-endian)::

    magic   4 bytes  b"SGQS"
    version u8       1
    n       u16
    count   u64
    seed    u64
    then per snapshot:
        ceil(n/5) bytes of basis trits, five per byte, qubit 0 as the lowest
            base-3 digit (0=X, 1=Y, 2=Z)
        ceil(n/8) bytes of outcome bits, qubit 0 as bit 0 of the first byte
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from segqe.pauli import DimensionError, PauliString, multiply, qubitwise_commutes, shared_support
from segqe.rng import CounterRNG, bits_to_uniform, derive_key, random_bits, seed_key
from segqe.statevec import StateVector, ValidationError, apply_matrix, expval

BASES = "XYZ"
_MAGIC = b"SGQS"
_VERSION = 1

_HAD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SDG = np.array([[1, 0], [0, -1j]], dtype=complex)
# rotation V such that measuring V|psi> in Z measures |psi> in the given basis
_ROTATIONS = (_HAD, _HAD @ _SDG, np.eye(2, dtype=complex))


@dataclass(frozen=True)
class Snapshot:
    bases: str
    outcomes: tuple[int, ...]

    def __post_init__(self):
        if len(self.bases) != len(self.outcomes):
            raise DimensionError("bases and outcomes must have the same length")
        if any(b not in BASES for b in self.bases):
            raise ValueError(f"bases must be drawn from {BASES}")

    @property
    def n(self) -> int:
        return len(self.bases)

    def masks(self) -> tuple[int, int, int]:
        """``(x_mask, z_mask, outcome_mask)`` of the measured Pauli string."""
        x = z = o = 0
        for q, (b, bit) in enumerate(zip(self.bases, self.outcomes)):
            if b in "XY":
                x |= 1 << q
            if b in "YZ":
                z |= 1 << q
            o |= int(bit) << q
        return x, z, o


@dataclass(eq=False)
class ShadowBatch:
    """``N`` snapshots stored as arrays: ``bases`` (0=X, 1=Y, 2=Z) and ``outcomes``."""

    n: int
    bases: np.ndarray
    outcomes: np.ndarray
    source_seed: int = 0

    def __post_init__(self):
        self.bases = np.asarray(self.bases, dtype=np.uint8).reshape(-1, self.n)
        self.outcomes = np.asarray(self.outcomes, dtype=np.uint8).reshape(-1, self.n)
        if self.bases.shape != self.outcomes.shape:
            raise DimensionError("bases and outcomes arrays differ in shape")

    def __len__(self) -> int:
        return self.bases.shape[0]

    def __getitem__(self, t: int) -> Snapshot:
        return Snapshot("".join(BASES[b] for b in self.bases[t]), tuple(int(v) for v in self.outcomes[t]))

    def __iter__(self):
        return (self[t] for t in range(len(self)))

    @classmethod
    def from_snapshots(cls, snapshots: Sequence[Snapshot], source_seed: int = 0) -> ShadowBatch:
        if not snapshots:
            raise ValidationError("empty snapshot list")
        n = snapshots[0].n
        if any(s.n != n for s in snapshots):
            raise DimensionError("snapshots disagree on the qubit count")
        bases = np.array([[BASES.index(b) for b in s.bases] for s in snapshots], dtype=np.uint8)
        outcomes = np.array([s.outcomes for s in snapshots], dtype=np.uint8)
        return cls(n, bases, outcomes, source_seed)

    @cached_property
    def masks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        weights = (np.int64(1) << np.arange(self.n, dtype=np.int64))
        b = self.bases.astype(np.int64)
        sx = ((b <= 1) * weights).sum(axis=1)
        sz = ((b >= 1) * weights).sum(axis=1)
        so = (self.outcomes.astype(np.int64) * weights).sum(axis=1)
        return sx, sz, so

    @cached_property
    def cells(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Distinct ``(x, z, outcome)`` mask triples and their multiplicities."""
        sx, sz, so = self.masks
        key = (sx << (2 * self.n)) | (sz << self.n) | so
        uniq, counts = np.unique(key, return_counts=True)
        low = (np.int64(1) << self.n) - 1
        return uniq >> (2 * self.n), (uniq >> self.n) & low, uniq & low, counts


def _basis_rotation_amplitudes(state: StateVector, basis_digits: Sequence[int]) -> np.ndarray:
    amps = state.amplitudes
    for q, d in enumerate(basis_digits):
        if d != 2:
            amps = apply_matrix(amps, state.n, (q,), _ROTATIONS[d])
    return amps


def _outcome_from_uniform(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    k = np.searchsorted(cdf, u * cdf[-1], side="right")
    return np.minimum(k, cdf.size - 1)


def sample_snapshot(state: StateVector, rng: CounterRNG, bases: str | None = None) -> Snapshot:
    """One randomised measurement.  ``bases`` forces the measurement setting."""
    if bases is None:
        digits = [int(k) for k in rng.integers(3, state.n)]
    else:
        if len(bases) != state.n:
            raise DimensionError("forced bases must name every qubit")
        digits = [BASES.index(b) for b in bases]
        rng.counter += state.n
    amps = _basis_rotation_amplitudes(state, digits)
    cdf = np.cumsum(np.abs(amps) ** 2)
    index = int(_outcome_from_uniform(cdf, np.array([rng.uniform()]))[0])
    outcomes = tuple(index >> q & 1 for q in range(state.n))
    return Snapshot("".join(BASES[d] for d in digits), outcomes)


def sample_shadows(state: StateVector, shots: int, seed: int) -> ShadowBatch:
    """``shots`` snapshots; snapshot ``t`` matches ``sample_snapshot`` on child stream ``t``."""
    if shots < 1:
        raise ValidationError("shots must be positive")
    n = state.n
    keys = derive_key(seed_key(seed), np.arange(shots, dtype=np.uint64))
    lanes = np.arange(n + 1, dtype=np.uint64)
    u = bits_to_uniform(random_bits(keys[:, None], lanes[None, :]))
    digits = np.minimum((u[:, :n] * 3).astype(np.int64), 2)
    weights = 3 ** np.arange(n, dtype=np.int64)
    setting = digits @ weights
    order = np.argsort(setting, kind="stable")
    sorted_settings = setting[order]
    bounds = np.flatnonzero(np.diff(sorted_settings)) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [shots]])
    index = np.empty(shots, dtype=np.int64)
    for lo, hi in zip(starts, ends):
        rows = order[lo:hi]
        amps = _basis_rotation_amplitudes(state, digits[rows[0]])
        cdf = np.cumsum(np.abs(amps) ** 2)
        index[rows] = _outcome_from_uniform(cdf, u[rows, n])
    outcomes = (index[:, None] >> np.arange(n)) & 1
    return ShadowBatch(n, digits.astype(np.uint8), outcomes.astype(np.uint8), seed)


def _single_shot_arrays(sx, sz, so, p: PauliString) -> np.ndarray:
    supp = p.support_mask
    compatible = ((sx & supp) == p.x) & ((sz & supp) == p.z)
    sign = 1.0 - 2.0 * (np.bitwise_count(so & supp) & 1)
    return np.where(compatible, float(3**p.weight) * sign, 0.0)


def single_shot_estimate(snap: Snapshot, p: PauliString) -> float:
    if snap.n != p.n:
        raise DimensionError(f"snapshot has {snap.n} qubits, Pauli has {p.n}")
    sx, sz, so = snap.masks()
    return float(_single_shot_arrays(np.array([sx]), np.array([sz]), np.array([so]), p)[0])


def single_shot_values(batch: ShadowBatch, p: PauliString) -> np.ndarray:
    """Per-snapshot estimates of ``<P>``, shape ``(len(batch),)``."""
    if batch.n != p.n:
        raise DimensionError(f"batch has {batch.n} qubits, Pauli has {p.n}")
    return _single_shot_arrays(*batch.masks, p)


def mean_estimate(batch: ShadowBatch, p: PauliString, median_of_means: int = 0) -> float:
    """Empirical mean of single-shot estimates.

    ``median_of_means=k`` (k >= 2) splits the batch into ``k`` contiguous
    groups and returns the median of the group means instead.
    """
    if len(batch) == 0:
        raise ValidationError("cannot estimate from an empty batch")
    if batch.n != p.n:
        raise DimensionError(f"batch has {batch.n} qubits, Pauli has {p.n}")
    if median_of_means >= 2:
        values = single_shot_values(batch, p)
        groups = np.array_split(values, median_of_means)
        return float(np.median([g.mean() for g in groups if g.size]))
    cx, cz, co, counts = batch.cells
    return float(np.dot(_single_shot_arrays(cx, cz, co, p), counts) / len(batch))


def mean_estimates(batch: ShadowBatch, paulis: Iterable[PauliString], median_of_means: int = 0) -> np.ndarray:
    return np.array([mean_estimate(batch, p, median_of_means) for p in paulis])


def second_moment_analytic(state: StateVector, a: PauliString, b: PauliString) -> float:
    """``E[p_a p_b] = 3^L Tr(rho P_a P_b)`` for qubit-wise commuting pairs, else 0."""
    if not qubitwise_commutes(a, b):
        return 0.0
    prod = multiply(a, b)
    value = prod.coefficient * expval(state, prod.pauli)
    return float(3 ** shared_support(a, b) * value.real)


def covariance_analytic(state: StateVector, a: PauliString, b: PauliString) -> float:
    return second_moment_analytic(state, a, b) - expval(state, a) * expval(state, b)


def write_snapshots(batch: ShadowBatch, path: str | Path) -> None:
    n, count = batch.n, len(batch)
    trit_bytes = (n + 4) // 5
    bit_bytes = (n + 7) // 8
    out = bytearray(struct.pack("<4sBHQQ", _MAGIC, _VERSION, n, count, batch.source_seed & (2**64 - 1)))
    body = np.zeros((count, trit_bytes + bit_bytes), dtype=np.uint8)
    for q in range(n):
        body[:, q // 5] += batch.bases[:, q] * np.uint8(3 ** (q % 5))
        body[:, trit_bytes + q // 8] |= batch.outcomes[:, q] << np.uint8(q % 8)
    out += body.tobytes()
    Path(path).write_bytes(bytes(out))


def read_snapshots(path: str | Path) -> ShadowBatch:
    data = Path(path).read_bytes()
    header = struct.calcsize("<4sBHQQ")
    magic, version, n, count, seed = struct.unpack("<4sBHQQ", data[:header])
    if magic != _MAGIC or version != _VERSION:
        raise ValueError("not a snapshot dump (bad magic or version)")
    trit_bytes = (n + 4) // 5
    bit_bytes = (n + 7) // 8
    body = np.frombuffer(data[header:], dtype=np.uint8).reshape(count, trit_bytes + bit_bytes)
    bases = np.empty((count, n), dtype=np.uint8)
    outcomes = np.empty((count, n), dtype=np.uint8)
    for q in range(n):
        bases[:, q] = body[:, q // 5] // (3 ** (q % 5)) % 3
        outcomes[:, q] = body[:, trit_bytes + q // 8] >> (q % 8) & 1
    return ShadowBatch(n, bases, outcomes, seed)
