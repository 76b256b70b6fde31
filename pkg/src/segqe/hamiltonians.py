"""Benchmark Hamiltonians as weighted Pauli sums."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

from segqe.pauli import PauliString
from segqe.rng import CounterRNG

BOUNDARIES = ("open", "periodic")


@dataclass(frozen=True)
class Hamiltonian:
    """``H = sum_i c_i P_i`` with duplicates merged and zero terms dropped.

    ``boundary`` records the chain geometry (``"open"`` or ``"periodic"``)
    used when a gate set is restricted to nearest neighbours.
    """

    n: int
    terms: tuple[tuple[float, PauliString], ...]
    boundary: str = "open"
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a Hamiltonian needs at least one qubit")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")
        merged: dict[PauliString, float] = {}
        for c, p in self.terms:
            if p.n != self.n:
                raise ValueError(f"term {p} acts on {p.n} qubits, expected {self.n}")
            merged[p] = merged.get(p, 0.0) + float(c)
        object.__setattr__(self, "terms", tuple((c, p) for p, c in merged.items() if c != 0.0))

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[tuple[float, PauliString]], **kwargs) -> Hamiltonian:
        return cls(n, tuple(terms), **kwargs)

    @cached_property
    def locality(self) -> int:
        """Maximum term weight ``l``."""
        return max((p.weight for _, p in self.terms), default=0)

    @cached_property
    def c_max(self) -> float:
        return max((abs(c) for c, _ in self.terms), default=0.0)

    @cached_property
    def index(self) -> dict[PauliString, int]:
        return {p: i for i, (_, p) in enumerate(self.terms)}

    @property
    def coefficients(self) -> list[float]:
        return [c for c, _ in self.terms]

    @property
    def paulis(self) -> list[PauliString]:
        return [p for _, p in self.terms]

    def __len__(self) -> int:
        return len(self.terms)

    def __add__(self, other: Hamiltonian) -> Hamiltonian:
        if other.n != self.n:
            raise ValueError("qubit counts differ")
        return Hamiltonian(self.n, self.terms + other.terms, self.boundary)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "boundary": self.boundary,
            "terms": [{"coeff": c, "pauli": p.sparse()} for c, p in self.terms],
        }

    @classmethod
    def from_dict(cls, data: dict) -> Hamiltonian:
        n = int(data["n"])
        terms = [(float(t["coeff"]), PauliString.parse(t["pauli"], n)) for t in data["terms"]]
        return cls(n, tuple(terms), data.get("boundary", "open"), data.get("name", "custom"))

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_json(cls, path: str | Path) -> Hamiltonian:
        return cls.from_dict(json.loads(Path(path).read_text()))


def build_tfi(n: int, w: float, J: float) -> Hamiltonian:
    """Open-boundary transverse-field Ising chain ``w sum Z_i + J sum X_i X_{i+1}``."""
    if n < 1:
        raise ValueError("TFI chain needs n >= 1")
    terms = [(w, PauliString.from_ops(n, {i: "Z"})) for i in range(n)]
    terms += [(J, PauliString.from_ops(n, {i: "X", i + 1: "X"})) for i in range(n - 1)]
    return Hamiltonian(n, tuple(terms), "open", "tfi", {"w": w, "J": J})


def build_random_local(n: int, seed: int) -> Hamiltonian:
    """Random nearest-neighbour 2-local chain with periodic boundary.

    All ``3n + 9n`` coefficients are standard normal draws from one stream
    seeded by ``seed``: the field block first (site-major, then X, Y, Z),
    then the coupling block (site, first label, second label).
    """
    if n < 2:
        raise ValueError("random local Hamiltonian needs n >= 2")
    draws = CounterRNG(seed).normal(12 * n)
    labels = "XYZ"
    terms = []
    k = 0
    for i in range(n):
        for a in labels:
            terms.append((float(draws[k]), PauliString.from_ops(n, {i: a})))
            k += 1
    for i in range(n):
        j = (i + 1) % n
        for a in labels:
            for b in labels:
                terms.append((float(draws[k]), _two_site(n, i, a, j, b)))
                k += 1
    return Hamiltonian(n, tuple(terms), "periodic", "random", {"seed": seed})


def _two_site(n: int, i: int, a: str, j: int, b: str) -> PauliString:
    if i == j:
        raise ValueError("two-site term on a single site")
    return PauliString.from_ops(n, {i: a, j: b})


def overlap_count(h: Hamiltonian, support: Iterable[int]) -> int:
    """Number of terms acting non-trivially on at least one qubit of ``support``."""
    mask = 0
    for q in support:
        mask |= 1 << q
    return sum(1 for _, p in h.terms if p.support_mask & mask)


def is_tfi_structured(h: Hamiltonian) -> bool:
    """True when every term is a single ``Z`` or an open-chain nearest-neighbour ``XX``."""
    for _, p in h.terms:
        ops = p.ops()
        if len(ops) == 1 and set(ops.values()) == {"Z"}:
            continue
        if len(ops) == 2 and set(ops.values()) == {"X"}:
            a, b = sorted(ops)
            if b == a + 1:
                continue
        return False
    return True
