"""The greedy loop: estimate, score every candidate, append the best gate, repeat.

One iteration fills a table of Pauli expectation values (exactly, or from a
fresh batch of classical shadows of the current state), scores every
candidate of the gate set on that shared table, and appends the gate with the
largest predicted energy drop.  The loop stops as soon as the best predicted
drop is at most ``threshold`` or ``max_depth`` gates have been appended.

Rotation candidates are scored in closed form, vectorised over the whole gate
set: their ``A`` and ``B`` coefficients are rows of two sparse matrices
applied to the expectation-value table.  General candidates go through the
batched simplex search in :mod:`segqe.optimize`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse

from segqe.candidates import (
    Candidate,
    GateSet,
    GeneralUnitary,
    PauliRotation,
    RotationModel,
    build_model,
    make_gateset,
    su4_candidate,
)
from segqe.hamiltonians import Hamiltonian
from segqe.optimize import DEFAULT_BUDGET, optimize_general_many
from segqe.pauli import DimensionError, PauliString
from segqe.rng import derive_key, seed_key
from segqe.shadows import mean_estimates, sample_shadows
from segqe.statevec import (
    MAX_GROUND_QUBITS,
    GroundState,
    StateVector,
    ValidationError,
    apply_matrix,
    energy,
    exact_ground_state,
    expval_amplitudes,
    rotate_pauli_amplitudes,
)

MODES = ("exact", "shadow")
# candidates whose predicted gains differ by less than this count as tied;
# the earliest one in gate-set order wins
TIE_TOL = 1e-10
# exact-mode check that the realised drop of a rotation equals the prediction
REALISED_TOL = 1e-9


class NumericalValidationError(RuntimeError):
    """An internal consistency check failed during a run."""


@dataclass(frozen=True)
class EngineConfig:
    max_depth: int = 100
    threshold: float = 1e-3
    mode: str = "exact"
    shots: int | None = None
    optimizer_budget: int = DEFAULT_BUDGET
    seed: int = 0
    gateset: str = "pauli2"
    generators: tuple[str, ...] = ()
    verify: bool | None = None

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValidationError("max_depth must be at least 1")
        if not self.threshold > 0:
            raise ValidationError("threshold must be positive")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "shadow" and (self.shots is None or self.shots < 1):
            raise ValidationError("shadow mode needs shots >= 1")
        if self.optimizer_budget < 1:
            raise ValidationError("optimizer_budget must be at least 1")

    @property
    def verifies(self) -> bool:
        """Whether realised energies are recomputed exactly after each append."""
        return True if self.verify is None else bool(self.verify)


@dataclass
class IterationRecord:
    k: int
    candidate_index: int
    candidate: str
    theta: float | list[float]
    predicted_dE: float
    energy: float
    rel_error: float
    fidelity: float
    cum_shots: int


# -- circuits ----------------------------------------------------------------


@dataclass(frozen=True)
class CircuitGate:
    """One appended gate.  ``generator`` is set for Pauli rotations, ``kind`` otherwise."""

    iteration: int
    theta: float | tuple[float, ...]
    support: tuple[int, ...]
    generator: PauliString | None = None
    kind: str = "rotation"

    def matrix(self) -> np.ndarray:
        if self.generator is not None:
            return PauliRotation(self.generator).unitary(self.theta)
        if self.kind == "SU4":
            return su4_candidate(*self.support).unitary(self.theta)
        raise ValidationError(f"cannot rebuild gate of kind {self.kind!r}")

    def to_dict(self) -> dict:
        if self.generator is not None:
            return {"generator": self.generator.sparse(), "theta": self.theta, "iteration": self.iteration}
        return {
            "unitary": self.kind,
            "support": [q + 1 for q in self.support],
            "theta": list(self.theta),
            "iteration": self.iteration,
        }

    @classmethod
    def from_dict(cls, data: dict, n: int) -> CircuitGate:
        if "generator" in data:
            g = PauliString.parse(data["generator"], n)
            return cls(int(data["iteration"]), float(data["theta"]), g.support, g)
        support = tuple(int(q) - 1 for q in data["support"])
        return cls(int(data["iteration"]), tuple(float(t) for t in data["theta"]), support, None, data["unitary"])


@dataclass
class Circuit:
    n: int
    initial: str = "zeros"
    gates: list[CircuitGate] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.gates)

    @property
    def two_qubit_count(self) -> int:
        return sum(1 for g in self.gates if len(g.support) == 2)

    def to_dict(self) -> dict:
        return {"n": self.n, "initial": self.initial, "gates": [g.to_dict() for g in self.gates]}

    @classmethod
    def from_dict(cls, data: dict) -> Circuit:
        n = int(data["n"])
        return cls(n, data.get("initial", "zeros"), [CircuitGate.from_dict(g, n) for g in data["gates"]])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> Circuit:
        return cls.from_dict(json.loads(Path(path).read_text()))


def _apply_gate(amps: np.ndarray, n: int, gate: CircuitGate) -> np.ndarray:
    if gate.generator is not None:
        return rotate_pauli_amplitudes(amps, n, gate.generator, float(gate.theta))
    return apply_matrix(amps, n, gate.support, gate.matrix())


def replay(circuit: Circuit, psi0: StateVector) -> StateVector:
    """Apply the circuit's gates in order to ``psi0``."""
    if psi0.n != circuit.n:
        raise DimensionError(f"circuit has {circuit.n} qubits, state has {psi0.n}")
    amps = psi0.amplitudes
    for gate in circuit.gates:
        amps = _apply_gate(amps, circuit.n, gate)
    return StateVector(circuit.n, amps)


def initial_state(descriptor: str, n: int) -> StateVector:
    """``"zeros"``, a product label such as ``"01+-"``, or a ``.npy`` amplitude file."""
    if descriptor in ("zeros", "", None):
        return StateVector.zeros(n)
    if descriptor.endswith(".npy"):
        state = StateVector(n, np.load(descriptor))
        return state
    if len(descriptor) != n:
        raise DimensionError(f"initial state label {descriptor!r} does not have {n} characters")
    return StateVector.product(descriptor)


# -- rotation maximisation ---------------------------------------------------


def maximize_rotation(A: float, B: float) -> tuple[float, float]:
    """Maximiser of ``(A - A cos t - B sin t) / 2`` on ``[0, 2 pi)`` and the maximum.

    The maximum ``(A + sqrt(A^2 + B^2)) / 2`` sits where ``(cos t, sin t)`` points
    along ``-(A, B)``, i.e. ``t = atan2(-B, -A)``.
    """
    if A == 0.0 and B == 0.0:
        return 0.0, 0.0
    theta = math.atan2(-B, -A) % (2 * math.pi)
    if theta >= 2 * math.pi:  # a tiny negative angle rounds up to 2 pi
        theta = 0.0
    return theta, 0.5 * (A + math.hypot(A, B))


def maximize_rotations(A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    theta = np.mod(np.arctan2(-B, -A), 2 * np.pi)
    zero = (A == 0.0) & (B == 0.0)
    theta = np.where(zero, 0.0, theta)
    # atan2 of (-0.0, -x) can land on 2 pi after the modulo
    theta = np.where(theta >= 2 * np.pi, 0.0, theta)
    return theta, 0.5 * (A + np.hypot(A, B))


def literal_arctan_angle(A: float, B: float) -> float:
    """``atan2(B, A)`` taken literally; it lands on the minimum of the rotation curve."""
    return math.atan2(B, A) % (2 * math.pi)


# -- the loop ----------------------------------------------------------------


class _ScoringTables:
    """State-independent scoring data for one (Hamiltonian, gate set) pair."""

    def __init__(self, h: Hamiltonian, gateset: GateSet):
        self.models = [build_model(h, c) for c in gateset]
        index: dict[PauliString, int] = {}
        rot_rows, a_entries, b_entries = [], [], []
        self.general = []
        for j, model in enumerate(self.models):
            for p in model.paulis:
                if not p.is_identity():
                    index.setdefault(p, len(index))
            if isinstance(model, RotationModel):
                r = len(rot_rows)
                rot_rows.append(j)
                a_entries += [(r, index[p], c) for c, p in model.a_terms]
                b_entries += [(r, index[p], c) for c, p in model.b_terms]
            else:
                self.general.append(j)
        self.paulis = list(index)
        self.rotation_rows = np.array(rot_rows, dtype=int)
        shape = (len(rot_rows), len(index))
        self.a_matrix = _sparse(a_entries, shape)
        self.b_matrix = _sparse(b_entries, shape)


def _sparse(entries, shape) -> scipy.sparse.csr_matrix:
    if not entries:
        return scipy.sparse.csr_matrix(shape)
    rows, cols, vals = zip(*entries)
    return scipy.sparse.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()


@dataclass
class EngineResult:
    circuit: Circuit
    trace: list[IterationRecord]
    state: StateVector
    shots: int
    final_gain: float
    initial_energy: float
    ground: GroundState | None = None

    @property
    def energy(self) -> float:
        return self.trace[-1].energy if self.trace else self.initial_energy

    @property
    def rel_error(self) -> float:
        if self.ground is None:
            return math.nan
        return _rel_error(self.energy, self.ground.energy)

    @property
    def fidelity(self) -> float:
        return self.ground.fidelity(self.state) if self.ground is not None else math.nan


def _rel_error(e: float, e0: float) -> float:
    return abs(e - e0) / abs(e0) if e0 != 0 else abs(e - e0)


def resolve_gateset(config: EngineConfig, h: Hamiltonian) -> GateSet:
    return make_gateset(config.gateset, h.n, h.boundary, config.generators)


def iteration_seed(seed: int, k: int) -> int:
    """Seed of the shadow batch drawn in iteration ``k``."""
    return int(derive_key(seed_key(seed), k))


def run(
    h: Hamiltonian,
    psi0: StateVector,
    config: EngineConfig,
    gateset: GateSet | None = None,
    ground: GroundState | None = None,
    initial: str = "zeros",
) -> EngineResult:
    """Greedy circuit construction from ``psi0``.

    ``ground`` is used for the relative-error and fidelity columns; it is
    computed here when omitted and the system is small enough.
    """
    if psi0.n != h.n:
        raise DimensionError(f"state has {psi0.n} qubits, Hamiltonian has {h.n}")
    if gateset is None:
        gateset = resolve_gateset(config, h)
    for c in gateset:
        if max(c.support) >= h.n:
            raise DimensionError(f"candidate {c.label} acts outside {h.n} qubits")
    if ground is None and h.n <= MAX_GROUND_QUBITS:
        ground = exact_ground_state(h)
    tables = _ScoringTables(h, gateset)
    shadow = config.mode == "shadow"
    verify = config.verifies

    n = h.n
    amps = psi0.amplitudes
    e_now = energy(psi0, h)
    e_start = e_now
    circuit = Circuit(n, initial)
    trace: list[IterationRecord] = []
    shots = 0
    final_gain = math.nan

    for k in range(1, config.max_depth + 1):
        if shadow:
            batch = sample_shadows(StateVector(n, amps), config.shots, iteration_seed(config.seed, k))
            shots += config.shots
            values = mean_estimates(batch, tables.paulis)
        else:
            values = np.array([expval_amplitudes(amps, n, p) for p in tables.paulis])
        gains, thetas = _score(tables, values, config.optimizer_budget)

        best = float(np.max(gains)) if len(gains) else 0.0
        j = int(np.flatnonzero(gains >= best - TIE_TOL)[0]) if len(gains) else -1
        final_gain = best
        if best <= config.threshold:
            break

        cand = gateset[j]
        gate = _circuit_gate(cand, thetas[j], k)
        amps = _apply_gate(amps, n, gate)
        state = StateVector(n, amps)
        amps = state.amplitudes
        circuit.gates.append(gate)

        if shadow and not verify:
            e_new = math.nan
        else:
            e_new = energy(state, h)
            if not shadow and isinstance(cand, PauliRotation) and abs((e_now - e_new) - best) > REALISED_TOL:
                raise NumericalValidationError(
                    f"iteration {k}: predicted drop {best:.12g} but realised {e_now - e_new:.12g}"
                )
        e_now = e_new
        trace.append(
            IterationRecord(
                k=k,
                candidate_index=j,
                candidate=cand.label,
                theta=gate.theta if isinstance(gate.theta, float) else list(gate.theta),
                predicted_dE=best,
                energy=e_new,
                rel_error=_rel_error(e_new, ground.energy) if ground is not None else math.nan,
                fidelity=ground.fidelity(state) if ground is not None else math.nan,
                cum_shots=shots,
            )
        )

    return EngineResult(circuit, trace, StateVector(n, amps), shots, final_gain, e_start, ground)


def _score(tables: _ScoringTables, values: np.ndarray, budget: int) -> tuple[np.ndarray, list]:
    K = len(tables.models)
    gains = np.zeros(K)
    thetas: list = [0.0] * K
    if len(tables.rotation_rows):
        A = tables.a_matrix @ values
        B = tables.b_matrix @ values
        th, g = maximize_rotations(A, B)
        gains[tables.rotation_rows] = g
        for j, t in zip(tables.rotation_rows, th):
            thetas[j] = float(t)
    if tables.general:
        lookup = dict(zip(tables.paulis, values))
        models = [tables.models[j] for j in tables.general]
        for j, opt in zip(tables.general, optimize_general_many(models, lookup, budget)):
            gains[j] = opt.delta_e
            thetas[j] = tuple(float(t) for t in opt.theta)
    return gains, thetas


def _circuit_gate(cand: Candidate, theta, k: int) -> CircuitGate:
    if isinstance(cand, PauliRotation):
        return CircuitGate(k, float(theta), cand.support, cand.generator)
    if isinstance(cand, GeneralUnitary) and cand.name == "SU4":
        return CircuitGate(k, tuple(theta), cand.support, None, "SU4")
    raise ValidationError(f"no circuit encoding for candidate {cand.label}")


def score_candidates(h: Hamiltonian, state: StateVector, gateset: GateSet, budget: int = DEFAULT_BUDGET):
    """Exact predicted gains and optimal parameters for every candidate at ``state``."""
    tables = _ScoringTables(h, gateset)
    values = np.array([expval_amplitudes(state.amplitudes, state.n, p) for p in tables.paulis])
    return _score(tables, values, budget)


def selected_generators(circuit: Circuit) -> Sequence[PauliString]:
    return [g.generator for g in circuit.gates if g.generator is not None]
