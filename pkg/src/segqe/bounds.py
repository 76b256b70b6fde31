"""Worst-case shot counts and variance bounds for shadow-estimated energy differences.

All shot counts use the natural logarithm and are rounded up.  The
quadratic-form bound is the model-specific diagnostic: it expands ``A`` or
``B`` of a Pauli rotation into Pauli expectations with coefficients ``f``,
bounds every second moment ``E[p_a p_b]`` by ``3^L`` (``L`` shared support)
when the pair commutes qubit-wise and by 0 otherwise, and returns
``|f|^T K |f|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from segqe.candidates import build_model, PauliRotation
from segqe.hamiltonians import Hamiltonian, build_tfi
from segqe.pauli import PauliString, qubitwise_commutes, shared_support

SILVER = 3.0 + 2.0 * math.sqrt(2.0)


class BoundsError(ValueError):
    """Inputs outside the domain where the bounds hold."""


def _check_unit_interval(name: str, value: float) -> None:
    if not (0.0 < value <= 1.0):
        raise BoundsError(f"{name} must lie in (0, 1], got {value}")


def _check_count(name: str, value) -> None:
    if value < 1:
        raise BoundsError(f"{name} must be at least 1, got {value}")


@dataclass(frozen=True)
class BoundInputs:
    """``K`` candidates, failure probability ``delta``, additive error ``epsilon``,
    gate locality ``m``, Hamiltonian locality ``l``, overlap count ``M`` and
    largest coefficient magnitude ``c_max``."""

    K: int
    delta: float
    epsilon: float
    m: int
    l: int
    M: int
    c_max: float
    n: int | None = None
    T: int | None = None

    def __post_init__(self):
        _check_unit_interval("epsilon", self.epsilon)
        _check_unit_interval("delta", self.delta)
        for name in ("K", "m", "l", "M"):
            _check_count(name, getattr(self, name))
        if not self.c_max > 0:
            raise BoundsError(f"c_max must be positive, got {self.c_max}")
        if self.n is not None and self.m > self.n:
            raise BoundsError(f"gate locality m={self.m} exceeds n={self.n}")
        if self.T is not None:
            _check_count("T", self.T)

    @property
    def scale(self) -> float:
        """``4^m 3^l M^2 c_max^2 / (9 epsilon^2)``, shared by the first two shot counts."""
        return 4**self.m * 3**self.l * self.M**2 * self.c_max**2 / (9.0 * self.epsilon**2)


def n_theorem1(inputs: BoundInputs) -> int:
    """Shots for an ``epsilon``-accurate estimate of every candidate's ``dE`` at a fixed parameter."""
    return math.ceil(32.0 * math.log(2.0 * inputs.K / inputs.delta) * inputs.scale)


def n_theorem2(inputs: BoundInputs) -> int:
    """Shots for ``epsilon``-accurate maxima over involutory-generator rotations."""
    return math.ceil(SILVER * 8.0 * math.log(4.0 * inputs.K / inputs.delta) * inputs.scale)


def n_corollary3(n: int, m: int, delta: float, epsilon: float, l: int, M: int, c_max: float) -> int:
    """Rotation-maxima count specialised to all Pauli rotations of locality at most ``m``.

    Pauli rotations have fewer non-zero expansion terms than general gates, which
    trades ``4^m`` in the scale for ``3^m``; ``K`` is ``4^m C(n, m)``.
    """
    _check_unit_interval("epsilon", epsilon)
    _check_unit_interval("delta", delta)
    for name, v in (("n", n), ("m", m), ("l", l), ("M", M)):
        _check_count(name, v)
    if m > n:
        raise BoundsError(f"gate locality m={m} exceeds n={n}")
    if not c_max > 0:
        raise BoundsError(f"c_max must be positive, got {c_max}")
    log_term = math.log(4 ** (m + 1) * math.comb(n, m) / delta)
    return math.ceil(SILVER * 8.0 * log_term / (9.0 * epsilon**2) * 3 ** (m + l) * M**2 * c_max**2)


def variance_bound_lemma3(m: int, l: int, M_u: int, c_max: float) -> float:
    """Single-shot variance bound ``4^(m+1) 3^(l-1) (M_u c_max)^2`` for a general ``m``-qubit gate."""
    for name, v in (("m", m), ("l", l), ("M_u", M_u)):
        _check_count(name, v)
    return float(4 ** (m + 1) * 3 ** (l - 1) * (M_u * c_max) ** 2)


def single_shot_bound_lemma4(m: int, l: int, M_u: int, c_max: float) -> float:
    """Bound ``2 M_u c_max 4^m 3^(l-1)`` on any single-shot ``dE`` estimate."""
    for name, v in (("m", m), ("l", l), ("M_u", M_u)):
        _check_count(name, v)
    return float(2 * M_u * c_max * 4**m * 3 ** (l - 1))


def corollary3_variance_prefactor(m: int, l: int, M: int) -> int:
    """Worst-case ``Var[A]`` (or ``Var[B]``) of a Pauli rotation in units of ``c_max^2``.

    ``A`` has at most ``M`` terms of weight at most ``l`` with coefficients
    ``2 c_i``; the generic count gives ``4 * 3^(m+l-1) * M^2``.
    """
    return 4 * 3 ** (m + l - 1) * M**2


# -- model-specific quadratic form ---------------------------------------------


def second_moment_bound_matrix(paulis: list[PauliString]) -> np.ndarray:
    """``K[a, b] = 3^L`` for qubit-wise commuting pairs (``L`` shared support), else 0."""
    k = len(paulis)
    K = np.zeros((k, k))
    for a in range(k):
        for b in range(a, k):
            if qubitwise_commutes(paulis[a], paulis[b]):
                K[a, b] = K[b, a] = 3.0 ** shared_support(paulis[a], paulis[b])
    return K


def expansion(h: Hamiltonian, generator: PauliString, which: str) -> tuple[np.ndarray, list[PauliString]]:
    """Coefficients ``f`` and Pauli strings of the ``A`` or ``B`` expansion of a rotation."""
    if which not in ("A", "B"):
        raise ValueError("which must be 'A' or 'B'")
    model = build_model(h, PauliRotation(generator))
    terms = model.a_terms if which == "A" else model.b_terms
    merged: dict[PauliString, float] = {}
    for c, p in terms:
        merged[p] = merged.get(p, 0.0) + c
    paulis = list(merged)
    return np.array([merged[p] for p in paulis]), paulis


def quadratic_form_bound(h: Hamiltonian, generator: PauliString, which: str = "A") -> float:
    """``|f|^T K |f|``, an upper bound on the single-shot variance of the ``A`` or ``B`` estimator."""
    if max(generator.support, default=-1) >= h.n or generator.n != h.n:
        raise BoundsError(f"generator {generator} does not fit the {h.n}-qubit Hamiltonian")
    f, paulis = expansion(h, generator, which)
    if not len(f):
        return 0.0
    fa = np.abs(f)
    return float(fa @ second_moment_bound_matrix(paulis) @ fa)


def tfi_quadratic_form(n: int, generator: PauliString, which: str = "A") -> tuple[float, float, float]:
    """Coefficients ``(a, b, c)`` with ``bound = a w^2 + b w J + c J^2`` for ``w, J >= 0``.

    The bound is a quadratic form in ``(w, J)`` on that quadrant, so three
    evaluations recover it.
    """
    q10 = quadratic_form_bound(build_tfi(n, 1.0, 0.0), generator, which) if n > 0 else 0.0
    q01 = quadratic_form_bound(build_tfi(n, 0.0, 1.0), generator, which)
    q11 = quadratic_form_bound(build_tfi(n, 1.0, 1.0), generator, which)
    return q10, q11 - q10 - q01, q01


def tfi_generator_table(n: int, w: float = 1.0, J: float = 1.0, max_range: int = 2) -> list[dict]:
    """Quadratic-form bounds for every two-local generator with site distance ``<= max_range``."""
    h = build_tfi(n, w, J)
    rows = []
    for i in range(n):
        for dist in range(1, max_range + 1):
            j = i + dist
            if j >= n:
                continue
            for a in "XYZ":
                for b in "XYZ":
                    g = PauliString.from_ops(n, {i: a, j: b})
                    rows.append(
                        {
                            "generator": g.sparse(),
                            "distance": dist,
                            "A": quadratic_form_bound(h, g, "A"),
                            "B": quadratic_form_bound(h, g, "B"),
                            "M_u": sum(1 for _, p in h.terms if p.support_mask & g.support_mask),
                        }
                    )
    return rows
