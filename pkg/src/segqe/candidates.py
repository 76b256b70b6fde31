"""Candidate gates and their energy-difference models.

For a gate ``U`` on qubits ``Q`` the energy change it causes is linear in the
expectation values of the Pauli strings ``P_mu^Q (x) P_i^c`` (``P_i^c`` the
part of Hamiltonian term ``i`` away from ``Q``).  The coefficients depend on
the gate parameters only through the Pauli expansion of ``U^dag P_i^Q U``,
so once those expectation values are known the energy change can be
evaluated for any parameter value without touching the quantum state.

Pauli rotations ``exp(-i theta G / 2)`` with ``G^2 = 1`` reduce further to

    dE(theta) = (A - A cos(theta) - B sin(theta)) / 2,

with ``A = 2 sum c_i <P_i>`` over terms anticommuting with ``G`` and
``B = <i[G, H]>``, each a short list of single Pauli expectations.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from segqe.hamiltonians import Hamiltonian
from segqe.pauli import (
    PauliString,
    basis_index,
    commutes,
    complement,
    embed,
    multiply,
    pauli_basis,
    pauli_basis_matrices,
    restrict,
)
from segqe.statevec import UNITARY_TOL, LocalUnitary, ValidationError, pauli_rotation_matrix

GATESET_NAMES = ("pauli1", "pauli2", "pauli2-nn", "su4", "su4-nn", "custom")


# -- candidates --------------------------------------------------------------


@dataclass(frozen=True)
class PauliRotation:
    """``exp(-i theta G / 2)`` for a non-identity Pauli string ``G``."""

    generator: PauliString

    def __post_init__(self):
        if self.generator.is_identity():
            raise ValidationError("rotation generator must not be the identity")

    kind = "rotation"
    param_count = 1

    @property
    def support(self) -> tuple[int, ...]:
        return self.generator.support

    @property
    def m(self) -> int:
        return self.generator.weight

    @property
    def label(self) -> str:
        return self.generator.sparse()

    @cached_property
    def local_generator(self) -> PauliString:
        return restrict(self.generator, self.support)

    def unitary(self, theta) -> np.ndarray:
        theta = float(np.ravel(theta)[0])
        return pauli_rotation_matrix(self.local_generator, theta)

    def gate(self, theta) -> LocalUnitary:
        return LocalUnitary(self.support, self.unitary(theta))

    def as_general(self) -> GeneralUnitary:
        """The same gate viewed as a one-parameter general unitary."""
        local = self.local_generator
        basis = local.to_matrix()[None]

        def batch(thetas: np.ndarray) -> np.ndarray:
            return exp_hermitian_batch(np.asarray(thetas, dtype=float).reshape(-1, 1), basis)

        return GeneralUnitary(self.support, 1, self.unitary, f"rot({self.label})", batch, (local,))


@dataclass(frozen=True)
class GeneralUnitary:
    """Arbitrary parametrised unitary on ``support``.

    ``evaluator`` maps a parameter vector to the local ``2^m x 2^m`` matrix
    (local bit ``j`` is ``support[j]``).  ``batch_evaluator``, when given, maps
    a ``(k, param_count)`` array to ``(k, 2^m, 2^m)`` matrices.
    ``axis_generators`` names the Pauli generator of each parameter axis when
    the parametrisation is an exponential of a Pauli sum, so that setting a
    single component reproduces a Pauli rotation.
    """

    support: tuple[int, ...]
    param_count: int
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    name: str = "unitary"
    batch_evaluator: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    axis_generators: tuple[PauliString, ...] | None = field(default=None, repr=False)

    kind = "unitary"

    @property
    def m(self) -> int:
        return len(self.support)

    @property
    def label(self) -> str:
        return f"{self.name}({','.join(str(q + 1) for q in self.support)})"

    def unitary(self, theta) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(theta, dtype=float)), dtype=complex)

    def unitaries(self, thetas: np.ndarray) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float).reshape(-1, self.param_count)
        if self.batch_evaluator is not None:
            return self.batch_evaluator(thetas)
        return np.stack([self.unitary(t) for t in thetas])

    def gate(self, theta) -> LocalUnitary:
        return LocalUnitary(self.support, self.unitary(theta))


Candidate = Union[PauliRotation, GeneralUnitary]


def exp_hermitian_batch(coeffs: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """``exp(-i/2 sum_k coeffs[:, k] basis[k])`` for a stack of coefficient rows."""
    gen = np.tensordot(coeffs, basis, axes=([1], [0]))
    evals, evecs = np.linalg.eigh(gen)
    phases = np.exp(-0.5j * evals)
    return np.einsum("nij,nj,nkj->nik", evecs, phases, evecs.conj())


_SU4_BASIS = pauli_basis_matrices(2)[1:]
SU4_GENERATORS = pauli_basis(2)[1:]


def su4_unitary(theta: np.ndarray) -> np.ndarray:
    """``exp(-i sum_k theta_k P_k / 2)`` over the 15 non-identity two-qubit Paulis."""
    theta = np.asarray(theta, dtype=float).reshape(1, 15)
    return exp_hermitian_batch(theta, _SU4_BASIS)[0]


def su4_unitaries(thetas: np.ndarray) -> np.ndarray:
    return exp_hermitian_batch(np.asarray(thetas, dtype=float).reshape(-1, 15), _SU4_BASIS)


def su4_candidate(a: int, b: int) -> GeneralUnitary:
    return GeneralUnitary((a, b), 15, su4_unitary, "SU4", su4_unitaries, SU4_GENERATORS)


# -- gate sets ---------------------------------------------------------------


@dataclass(frozen=True)
class GateSet:
    name: str
    candidates: tuple[Candidate, ...]

    @property
    def K(self) -> int:
        return len(self.candidates)

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def __getitem__(self, j: int) -> Candidate:
        return self.candidates[j]


def _supports(n: int, m: int, nearest_neighbor_only: bool, periodic: bool) -> list[tuple[int, ...]]:
    """All supports of size 1..m, or contiguous windows when restricted to neighbours."""
    out: set[tuple[int, ...]] = set()
    for k in range(1, m + 1):
        if nearest_neighbor_only and k > 1:
            starts = range(n) if periodic and k < n else range(n - k + 1)
            for s in starts:
                out.add(tuple(sorted((s + t) % n for t in range(k))))
        else:
            out.update(itertools.combinations(range(n), k))
    return sorted(out)


def enumerate_pauli_rotations(
    n: int, m: int, nearest_neighbor_only: bool = False, periodic: bool = False
) -> GateSet:
    """Rotations about every Pauli string of weight 1..m.

    Ordered by support (lexicographic), then by the label on that support.
    """
    if not 1 <= m <= n:
        raise ValidationError(f"need 1 <= m <= n, got m={m}, n={n}")
    gens = []
    for support in _supports(n, m, nearest_neighbor_only, periodic):
        for labels in itertools.product("XYZ", repeat=len(support)):
            gens.append(PauliRotation(PauliString.from_ops(n, dict(zip(support, labels)))))
    name = f"pauli{m}" + ("-nn" if nearest_neighbor_only else "")
    return GateSet(name, tuple(gens))


def enumerate_su4(n: int, nearest_neighbor_only: bool = False, periodic: bool = False) -> GateSet:
    if n < 2:
        raise ValidationError("SU(4) gate sets need n >= 2")
    if nearest_neighbor_only:
        pairs = [(i, i + 1) for i in range(n - 1)]
        if periodic and n > 2:
            pairs.append((0, n - 1))
        pairs.sort()
    else:
        pairs = list(itertools.combinations(range(n), 2))
    return GateSet("su4-nn" if nearest_neighbor_only else "su4", tuple(su4_candidate(a, b) for a, b in pairs))


def custom_gateset(generators: Iterable[str | PauliString], n: int) -> GateSet:
    gens = [g if isinstance(g, PauliString) else PauliString.parse(g, n) for g in generators]
    return GateSet("custom", tuple(PauliRotation(g) for g in gens))


def make_gateset(name: str, n: int, boundary: str = "open", generators: Sequence[str] = ()) -> GateSet:
    """Gate set by CLI name; nearest-neighbour geometry follows ``boundary``."""
    periodic = boundary == "periodic"
    if name == "custom":
        return custom_gateset(generators, n)
    if name.startswith("pauli"):
        body = name[len("pauli") :]
        nn = body.endswith("-nn")
        m = int(body[:-3] if nn else body)
        return enumerate_pauli_rotations(n, m, nn, periodic)
    if name in ("su4", "su4-nn"):
        return enumerate_su4(n, name == "su4-nn", periodic)
    raise ValueError(f"unknown gate set {name!r}; expected one of {GATESET_NAMES}")


# -- conjugation expansion ---------------------------------------------------


def expand_conjugation(u: np.ndarray, p_u: PauliString) -> np.ndarray:
    """Coefficients ``r_mu = tr(U^dag P U P_mu) / 2^m`` over :func:`pauli_basis`."""
    u = np.asarray(u, dtype=complex)
    dim = 1 << p_u.n
    if u.shape != (dim, dim):
        raise ValidationError(f"unitary shape {u.shape} does not match {p_u.n} qubits")
    if not np.allclose(u.conj().T @ u, np.eye(dim), atol=UNITARY_TOL, rtol=0):
        raise ValidationError("expand_conjugation needs a unitary matrix")
    conj = u.conj().T @ p_u.to_matrix() @ u
    basis = pauli_basis_matrices(p_u.n)
    r = np.einsum("ij,kji->k", conj, basis) / dim
    return r.real


# -- energy-difference models ------------------------------------------------


@dataclass(frozen=True)
class ModelEntry:
    """One term of a model: composite index, Pauli string, and coefficient data."""

    alpha: tuple
    pauli: PauliString
    coeff: float


class MissingPValue(ValidationError):
    pass


def _lookup(p_values: Mapping[PauliString, float], pauli: PauliString) -> float:
    try:
        return p_values[pauli]
    except KeyError:
        if pauli.is_identity():
            return 1.0
        raise MissingPValue(f"no expectation value supplied for {pauli}") from None


@dataclass(frozen=True)
class RotationModel:
    """``dE(theta) = (A - A cos theta - B sin theta) / 2`` with ``A``, ``B`` linear in Pauli expectations."""

    candidate: PauliRotation
    a_terms: tuple[tuple[float, PauliString], ...]
    b_terms: tuple[tuple[float, PauliString], ...]
    term_indices: tuple[int, ...] = ()

    @property
    def entries(self) -> list[ModelEntry]:
        out = [ModelEntry(("A", i), p, c) for i, (c, p) in zip(self.term_indices, self.a_terms)]
        out += [ModelEntry(("B", i), p, c) for i, (c, p) in zip(self.term_indices, self.b_terms)]
        return out

    @property
    def paulis(self) -> list[PauliString]:
        return [p for _, p in self.a_terms] + [p for _, p in self.b_terms]

    def coefficients(self, p_values: Mapping[PauliString, float]) -> tuple[float, float]:
        a = sum(c * _lookup(p_values, p) for c, p in self.a_terms)
        b = sum(c * _lookup(p_values, p) for c, p in self.b_terms)
        return float(a), float(b)

    def evaluate(self, theta, p_values: Mapping[PauliString, float]) -> float:
        a, b = self.coefficients(p_values)
        theta = float(np.ravel(theta)[0])
        return 0.5 * (a - a * np.cos(theta) - b * np.sin(theta))


@dataclass(frozen=True)
class GeneralModel:
    """Full expansion over ``I^u x {0..4^m-1}``.

    ``local_terms[k]`` is the part of Hamiltonian term ``term_indices[k]`` on
    the gate support and ``paulis_by_term[k][mu]`` the string
    ``P_mu (x) P_i^c`` whose expectation multiplies ``f_{i mu}``.
    """

    candidate: GeneralUnitary
    term_indices: tuple[int, ...]
    coeffs: tuple[float, ...]
    local_terms: tuple[PauliString, ...]
    paulis_by_term: tuple[tuple[PauliString, ...], ...]

    @property
    def entries(self) -> list[ModelEntry]:
        return [
            ModelEntry((i, mu), p, c)
            for i, c, row in zip(self.term_indices, self.coeffs, self.paulis_by_term)
            for mu, p in enumerate(row)
        ]

    @property
    def paulis(self) -> list[PauliString]:
        return [p for row in self.paulis_by_term for p in row]

    def coefficient_vector(self, theta) -> np.ndarray:
        """``f_{i mu}(theta)`` flattened in :attr:`entries` order."""
        u = self.candidate.unitary(theta)
        rows = []
        for c, local in zip(self.coeffs, self.local_terms):
            r = expand_conjugation(u, local)
            delta = np.zeros_like(r)
            delta[basis_index(local)] = 1.0
            rows.append(c * (delta - r))
        return np.concatenate(rows) if rows else np.zeros(0)

    def p_vector(self, p_values: Mapping[PauliString, float]) -> np.ndarray:
        return np.array([_lookup(p_values, p) for p in self.paulis])

    def evaluate(self, theta, p_values: Mapping[PauliString, float]) -> float:
        return float(self.coefficient_vector(theta) @ self.p_vector(p_values))

    def bilinear_form(self, p_values: Mapping[PauliString, float]) -> tuple[float, np.ndarray]:
        """``(const, W)`` with ``dE(theta) = const - Re(u^dag W u)``, ``u`` the flattened gate matrix.

        Algebraically identical to :meth:`evaluate`: the sum over ``mu`` is
        folded into ``tr(U^dag P_i U R_i)`` with ``R_i = sum_mu p_{i mu} P_mu / 2^m``,
        and the sum over ``i`` into one bilinear form in the entries of ``U``.
        """
        m = self.candidate.m
        dim = 1 << m
        basis = pauli_basis_matrices(m)
        const = 0.0
        weight = np.zeros((dim, dim, dim, dim), dtype=complex)
        for c, local, row in zip(self.coeffs, self.local_terms, self.paulis_by_term):
            p = np.array([_lookup(p_values, q) for q in row])
            const += c * p[basis_index(local)]
            reduced = np.tensordot(p, basis, axes=1) / dim
            # weight[b, a, c, e] += c * local[b, c] * reduced[e, a]
            weight += c * np.einsum("bc,ea->bace", local.to_matrix(), reduced)
        return float(const), weight.reshape(dim * dim, dim * dim)

    def objective(self, p_values: Mapping[PauliString, float]) -> Callable[[np.ndarray], np.ndarray]:
        """Batched ``dE`` for a fixed set of expectation values."""
        const, weight = self.bilinear_form(p_values)
        candidate = self.candidate
        size = weight.shape[0]

        def batch(thetas: np.ndarray) -> np.ndarray:
            u = candidate.unitaries(thetas).reshape(-1, size)
            vals = np.einsum("ni,ij,nj->n", u.conj(), weight, u, optimize=True)
            return const - vals.real

        return batch


DeltaEnergyModel = Union[RotationModel, GeneralModel]


def rotation_terms(
    h: Hamiltonian, generator: PauliString
) -> tuple[list[int], list[tuple[float, PauliString]], list[tuple[float, PauliString]]]:
    """Anticommuting term indices with their ``A`` and ``B`` contributions."""
    idx, a_terms, b_terms = [], [], []
    for i, (c, p) in enumerate(h.terms):
        if not (p.support_mask & generator.support_mask) or commutes(generator, p):
            continue
        prod = multiply(generator, p)
        # i[G, P] = 2i G P for anticommuting G, P; the phase of G P is odd so this is real
        b_coeff = 2.0 * c * (1j * prod.coefficient).real
        idx.append(i)
        a_terms.append((2.0 * c, p))
        b_terms.append((b_coeff, prod.pauli))
    return idx, a_terms, b_terms


def build_model(h: Hamiltonian, c: Candidate) -> DeltaEnergyModel:
    if max(c.support) >= h.n:
        raise ValidationError(f"candidate support {c.support} exceeds n={h.n}")
    if isinstance(c, PauliRotation):
        idx, a_terms, b_terms = rotation_terms(h, c.generator)
        return RotationModel(c, tuple(a_terms), tuple(b_terms), tuple(idx))
    support = c.support
    rest = complement(support, h.n)
    basis = pauli_basis(c.m)
    mask = 0
    for q in support:
        mask |= 1 << q
    term_indices, coeffs, locals_, rows = [], [], [], []
    for i, (coef, p) in enumerate(h.terms):
        if not p.support_mask & mask:
            continue
        outside = embed(restrict(p, rest), rest, h.n) if rest else PauliString.identity(h.n)
        term_indices.append(i)
        coeffs.append(coef)
        locals_.append(restrict(p, support))
        rows.append(tuple(_combine(embed(mu, support, h.n), outside) for mu in basis))
    return GeneralModel(c, tuple(term_indices), tuple(coeffs), tuple(locals_), tuple(rows))


def _combine(a: PauliString, b: PauliString) -> PauliString:
    # disjoint supports: the product is phase-free
    return PauliString(a.n, a.x | b.x, a.z | b.z)


def evaluate_model(model: DeltaEnergyModel, theta, p_values: Mapping[PauliString, float]) -> float:
    return model.evaluate(theta, p_values)


def shared_pauli_index(
    models: Sequence[DeltaEnergyModel] | GateSet, h: Hamiltonian | None = None
) -> dict[PauliString, list[tuple[int, int]]]:
    """Map each distinct Pauli string to ``(candidate, entry)`` pairs that use it.

    Accepts either built models or a gate set plus Hamiltonian.
    """
    if isinstance(models, GateSet):
        if h is None:
            raise ValueError("a Hamiltonian is needed to expand a gate set")
        models = [build_model(h, c) for c in models]
    index: dict[PauliString, list[tuple[int, int]]] = {}
    for j, model in enumerate(models):
        for k, p in enumerate(model.paulis):
            index.setdefault(p, []).append((j, k))
    return index
