"""Acceptance suite: each criterion runs at its stated size and tolerance.

Every test records one PASS/FAIL line (collected in the terminal summary)
before asserting, so a failing criterion still reports its measurements.
Run ``python tests/test_acceptance.py`` to get only the eleven lines.
"""
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache

import numpy as np
import pytest

from segqe.bounds import (
    BoundInputs,
    n_corollary3,
    n_theorem1,
    n_theorem2,
    quadratic_form_bound,
    single_shot_bound_lemma4,
    tfi_generator_table,
    tfi_quadratic_form,
    variance_bound_lemma3,
)
from segqe.candidates import PauliRotation, RotationModel, build_model, make_gateset, su4_candidate
from segqe.engine import (
    EngineConfig,
    literal_arctan_angle,
    maximize_rotation,
    run,
    score_candidates,
    selected_generators,
)
from segqe.hamiltonians import build_random_local, build_tfi, overlap_count
from segqe.pauli import PauliString, pauli_basis, qubitwise_commutes
from segqe.rng import CounterRNG
from segqe.shadows import sample_shadows, second_moment_analytic, single_shot_values
from segqe.statevec import StateVector, apply, energy, exact_ground_state, expval
from segqe.vha import train_vha

from conftest import record_acceptance

pytestmark = pytest.mark.acceptance

SNAPSHOTS = 1_000_000
SWEEP_N = tuple(range(4, 11))
DELTA = 1e-3
GATESET_BUDGET = 1500  # general-gate model evaluations per candidate and iteration
GATESETS = ("su4", "pauli2", "pauli2-nn", "su4-nn")


def exact_p(model, psi):
    return {p: expval(psi, p) for p in model.paulis}


def linear_fit(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    r2 = 1.0 - resid @ resid / ((y - y.mean()) @ (y - y.mean()))
    return float(slope), float(r2)


def is_xy_type(g: PauliString) -> bool:
    return sorted(g.ops().values()) == ["X", "Y"]


def _random_pauli(n, weight_max, rng):
    w = int(rng.integers(1, weight_max + 1))
    support = sorted(rng.choice(n, size=w, replace=False))
    labels = rng.choice(list("XYZ"), size=w)
    return PauliString.from_ops(n, dict(zip(map(int, support), labels)))


# -- 1 ------------------------------------------------------------------------------


def test_acceptance_01_model_matches_simulator():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    count = 0
    while count < 240:
        n = int(rng.integers(2, 6))
        h = build_random_local(n, int(rng.integers(2**32))) if rng.random() < 0.6 else build_tfi(n, rng.normal(), rng.normal())
        psi = StateVector.random(n, CounterRNG(int(rng.integers(2**32))))
        if rng.random() < 0.5:
            cand = PauliRotation(_random_pauli(n, min(3, n), rng))
            theta = float(rng.uniform(0, 2 * np.pi))
        else:
            a, b = map(int, rng.choice(n, size=2, replace=False))
            cand = su4_candidate(a, b)
            theta = rng.uniform(-np.pi, np.pi, 15)
        model = build_model(h, cand)
        predicted = model.evaluate(theta, exact_p(model, psi))
        direct = energy(psi, h) - energy(apply(psi, cand.gate(theta)), h)
        worst = max(worst, abs(predicted - direct))
        count += 1
    elapsed = time.perf_counter() - start
    ok = worst < 1e-9 and elapsed < 60
    record_acceptance(1, ok, f"{count} instances, max |model - simulator| = {worst:.2e}, {elapsed:.1f}s")
    assert ok


# -- 2 ------------------------------------------------------------------------------


def _z_scores(psi, pairs, seed):
    batch = sample_shadows(psi, SNAPSHOTS, seed)
    cache = {}
    zs = []
    for a, b in pairs:
        va = cache.setdefault(a, single_shot_values(batch, a))
        vb = cache.setdefault(b, single_shot_values(batch, b))
        prod = va * vb
        diff = prod.mean() - second_moment_analytic(psi, a, b)
        se = prod.std(ddof=1) / math.sqrt(len(prod))
        zs.append(diff / se if se > 0 else (0.0 if abs(diff) < 1e-12 else math.inf))
    return np.array(zs)


def test_acceptance_02_second_moments_monte_carlo():
    start = time.perf_counter()
    basis2 = pauli_basis(2)[1:]
    grid = [(a, b) for a in basis2 for b in basis2]
    z2 = _z_scores(StateVector.random(2, CounterRNG(21)), grid, seed=2)

    rng = np.random.default_rng(202)
    pairs4 = []
    while len(pairs4) < 300:
        a = _random_pauli(4, 4, rng)
        if len(pairs4) % 2:
            b = _random_pauli(4, 4, rng)
        else:  # qubit-wise commuting partner, the case with a non-zero moment
            ops = {q: (a.op(q) if rng.random() < 0.5 else "I") for q in a.support}
            for q in range(4):
                if q not in ops and rng.random() < 0.5:
                    ops[q] = str(rng.choice(list("XYZ")))
            b = PauliString.from_ops(4, {q: l for q, l in ops.items() if l != "I"})
            if b.is_identity() or not qubitwise_commutes(a, b):
                continue
        pairs4.append((a, b))
    z4 = _z_scores(StateVector.random(4, CounterRNG(41)), pairs4, seed=4)
    elapsed = time.perf_counter() - start
    worst = float(max(np.abs(z2).max(), np.abs(z4).max()))
    ok = worst < 5 and elapsed < 300
    record_acceptance(
        2, ok, f"{len(grid)} pairs at n=2 and {len(pairs4)} at n=4 over 1e6 snapshots, max |z| = {worst:.2f}, {elapsed:.0f}s"
    )
    assert ok


# -- 3 ------------------------------------------------------------------------------


def _drop_coefficients(model, theta):
    if isinstance(model, RotationModel):
        a_scale = 0.5 * (1 - math.cos(theta))
        b_scale = -0.5 * math.sin(theta)
        coeffs = [c * a_scale for c, _ in model.a_terms] + [c * b_scale for c, _ in model.b_terms]
        return np.array(coeffs), model.paulis
    return model.coefficient_vector(theta), model.paulis


def _single_shot_drops(model, theta, psi, seed):
    coeffs, paulis = _drop_coefficients(model, theta)
    batch = sample_shadows(psi, SNAPSHOTS, seed)
    merged = {}
    for c, p in zip(coeffs, paulis):
        merged[p] = merged.get(p, 0.0) + c
    drops = np.zeros(SNAPSHOTS)
    for p, c in merged.items():
        if c != 0.0:
            drops += c * (1.0 if p.is_identity() else single_shot_values(batch, p))
    return drops


def test_acceptance_03_single_shot_bounds():
    rng = np.random.default_rng(303)
    instances = [
        (build_random_local(2, 1), su4_candidate(0, 1)),
        (build_tfi(3, 1, 1), su4_candidate(0, 2)),
        (build_tfi(3, 1, 1), PauliRotation(PauliString.from_sparse("X1 Y2", 3))),
        (build_random_local(3, 2), PauliRotation(PauliString.from_sparse("Z2", 3))),
        (build_random_local(4, 3), su4_candidate(1, 2)),
        (build_random_local(4, 4), PauliRotation(PauliString.from_sparse("Y1 X3", 4))),
    ]
    violations = 0
    worst_var_ratio = 0.0
    worst_abs_ratio = 0.0
    for k, (h, cand) in enumerate(instances):
        model = build_model(h, cand)
        theta = float(rng.uniform(0, 2 * np.pi)) if isinstance(cand, PauliRotation) else rng.uniform(-np.pi, np.pi, 15)
        psi = StateVector.random(h.n, CounterRNG(3000 + k))
        drops = _single_shot_drops(model, theta, psi, seed=k)
        m = len(cand.support)
        m_u = overlap_count(h, cand.support)
        var_bound = variance_bound_lemma3(m, h.locality, m_u, h.c_max)
        abs_bound = single_shot_bound_lemma4(m, h.locality, m_u, h.c_max)
        violations += int(np.count_nonzero(np.abs(drops) > abs_bound * (1 + 1e-12)))
        violations += int(drops.var() > var_bound)
        worst_var_ratio = max(worst_var_ratio, drops.var() / var_bound)
        worst_abs_ratio = max(worst_abs_ratio, np.abs(drops).max() / abs_bound)
    ok = violations == 0
    record_acceptance(
        3,
        ok,
        f"{len(instances)} instances x 1e6 snapshots, {violations} violations, "
        f"max var/bound = {worst_var_ratio:.3f}, max |dE|/bound = {worst_abs_ratio:.3f}",
    )
    assert ok


# -- 4 ------------------------------------------------------------------------------


def test_acceptance_04_rotation_maximizer():
    rng = np.random.default_rng(404)
    grid = np.linspace(0, 2 * np.pi, 10_000, endpoint=False)
    pairs = rng.normal(size=(1000, 2)) * rng.uniform(0.1, 3, size=(1000, 1))
    worst = 0.0
    literal_is_minimum = 0
    for a, b in pairs:
        theta, value = maximize_rotation(a, b)
        curve = 0.5 * (a - a * np.cos(grid) - b * np.sin(grid))
        worst = max(worst, abs(value - curve.max()))
        t_lit = literal_arctan_angle(a, b)
        at_literal = 0.5 * (a - a * math.cos(t_lit) - b * math.sin(t_lit))
        literal_is_minimum += abs(at_literal - curve.min()) < 1e-6
    ok = worst < 1e-6 and literal_is_minimum == len(pairs)
    record_acceptance(
        4,
        ok,
        f"max |analytic - grid| = {worst:.2e} over 1000 pairs; atan2(B, A) read literally hits the minimum "
        f"in {literal_is_minimum}/1000, the maximiser is atan2(-B, -A)",
    )
    assert ok


# -- 5 ------------------------------------------------------------------------------


def test_acceptance_05_quadratic_form_constants():
    g = PauliString.from_sparse("Y2 Y4", 5)
    a_form = tfi_quadratic_form(5, g, "A")
    a_val = quadratic_form_bound(build_tfi(5, 1, 1), g, "A")
    b_val = quadratic_form_bound(build_tfi(5, 1, 1), g, "B")
    xy = [r for r in tfi_generator_table(8, 1, 1, max_range=2) if is_xy_type(PauliString.from_sparse(r["generator"], 8))]
    h8 = build_tfi(8, 1, 1)
    long_range = [
        PauliString.from_ops(8, {i: a, j: b}) for i in range(8) for j in range(i + 2, 8) for a, b in (("X", "Y"), ("Y", "X"))
    ]
    nn_a = max(r["A"] for r in xy if r["distance"] == 1)
    nn_b = max(r["B"] for r in xy if r["distance"] == 1)
    far_a = max(quadratic_form_bound(h8, p, "A") for p in long_range)
    far_b = max(quadratic_form_bound(h8, p, "B") for p in long_range)
    ok = (
        a_form == (32.0, 32.0, 240.0)
        and a_val <= 304
        and b_val <= 648
        and nn_a <= 136
        and nn_b <= 216
        and far_a <= 144
        and far_b <= 360
    )
    record_acceptance(
        5,
        ok,
        f"Y2Y4 A-form {a_form[0]:g}w^2+{a_form[1]:g}wJ+{a_form[2]:g}J^2 = {a_val:g}, B = {b_val:g}; "
        f"XY NN {nn_a:g}/{nn_b:g}, longer range {far_a:g}/{far_b:g}",
    )
    assert ok


# -- 6 and 7 ------------------------------------------------------------------------


@lru_cache(maxsize=None)
def tfi_sweep(J: float, start: str = "zeros"):
    rows = []
    t0 = time.perf_counter()
    for n in SWEEP_N:
        h = build_tfi(n, 1.0, J)
        psi = StateVector.zeros(n) if start == "zeros" else StateVector.product("1" * n)
        res = run(h, psi, EngineConfig(threshold=DELTA))
        rows.append((n, res))
    return rows, time.perf_counter() - t0


def _sweep_summary(rows):
    ns = [n for n, _ in rows]
    gates = [len(r.circuit) for _, r in rows]
    rel = max(r.rel_error for _, r in rows)
    gens = [g for _, r in rows for g in selected_generators(r.circuit)]
    return ns, gates, rel, gens


def _field_aligned_note(J):
    rows, _ = tfi_sweep(J, "ones")
    ns, gates, rel, gens = _sweep_summary(rows)
    nn = all(g.weight == 2 and g.support[1] - g.support[0] == 1 for g in gens)
    xy = all(is_xy_type(g) for g in gens)
    return gates, rel, nn, xy


def test_acceptance_06_gapped_sweep():
    rows, elapsed = tfi_sweep(0.5)
    ns, gates, rel, gens = _sweep_summary(rows)
    two_qubit = [g for g in gens if g.weight == 2]
    non_nn = sorted({g.sparse() for g in two_qubit if g.support[1] - g.support[0] != 1})
    slope, r2 = linear_fit(ns, gates)
    ok = rel < 1e-3 and not non_nn and slope > 0 and r2 > 0.95 and elapsed < 600
    fa_gates, fa_rel, fa_nn, _ = _field_aligned_note(0.5)
    record_acceptance(
        6,
        ok,
        f"N_Gates {gates}, slope {slope:.2f}, R^2 {r2:.3f}, max rel error {rel:.1e}, "
        f"non-NN gates {non_nn or 'none'}, {elapsed:.0f}s "
        f"[from |1..1>: N_Gates {fa_gates}, NN only {fa_nn}, max rel error {fa_rel:.1e}]",
    )
    assert ok


def test_acceptance_07_critical_sweep():
    gapped, _ = tfi_sweep(0.5)
    rows, _ = tfi_sweep(1.0)
    ns, gates, rel, gens = _sweep_summary(rows)
    slope_gapped, _ = linear_fit(*_sweep_summary(gapped)[:2])
    slope, r2 = linear_fit(ns, gates)
    ratio = slope / slope_gapped
    not_xy = sorted({g.sparse() for g in gens if not is_xy_type(g)})
    ok = rel < 1e-2 and 2 <= ratio <= 4 and not not_xy
    fa_gates, fa_rel, _, fa_xy = _field_aligned_note(1.0)
    fa_ratio = linear_fit(ns, fa_gates)[0] / linear_fit(ns, _field_aligned_note(0.5)[0])[0]
    record_acceptance(
        7,
        ok,
        f"N_Gates {gates}, slope ratio {ratio:.2f}, max rel error {rel:.1e}, non-XY generators {not_xy or 'none'} "
        f"[from |1..1>: XY/YX only {fa_xy}, slope ratio {fa_ratio:.2f}, max rel error {fa_rel:.1e}]",
    )
    assert ok


# -- 8 ------------------------------------------------------------------------------


def _gateset_error(job):
    seed, gateset = job
    h = build_random_local(5, seed)
    ground = exact_ground_state(h)
    res = run(h, StateVector.zeros(5), EngineConfig(gateset=gateset, optimizer_budget=GATESET_BUDGET), ground=ground)
    return seed, gateset, res.energy - ground.energy


@pytest.mark.slow
def test_acceptance_08_gateset_ordering():
    seeds = range(50)
    jobs = [(s, g) for s in seeds for g in GATESETS]
    start = time.perf_counter()
    workers = int(os.environ.get("SEGQE_WORKERS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_gateset_error, jobs))
    else:
        results = [_gateset_error(j) for j in jobs]
    elapsed = time.perf_counter() - start
    err = {g: np.zeros(len(seeds)) for g in GATESETS}
    for s, g, e in results:
        err[g][s] = e

    def holds(lower, upper):
        # paired seed differences; the ordering holds when the mean sits two standard errors below zero
        d = err[lower] - err[upper]
        sem = d.std(ddof=1) / math.sqrt(len(d))
        return d.mean() + 2 * sem <= 0, d.mean(), sem

    checks = {
        "SU4<=P2": holds("su4", "pauli2"),
        "P2<=NN-P2": holds("pauli2", "pauli2-nn"),
        "NN-SU4<=NN-P2": holds("su4-nn", "pauli2-nn"),
    }
    ok = all(c[0] for c in checks.values()) and elapsed < 1800
    means = ", ".join(f"{g} {err[g].mean():.4f}" for g in GATESETS)
    diffs = ", ".join(f"{k} {m:+.4f}+-{s:.4f}" for k, (_, m, s) in checks.items())
    record_acceptance(8, ok, f"mean dE: {means}; paired differences: {diffs}; {elapsed:.0f}s")
    assert ok


# -- 9 ------------------------------------------------------------------------------


def test_acceptance_09_versus_vha():
    h = build_tfi(6, 1, 1)
    res = run(h, StateVector.zeros(6), EngineConfig(threshold=DELTA))
    segqe_iterations = len(res.trace) + 1  # the last iteration scores and stops
    vha = [train_vha(h, 1, seed, threshold=DELTA) for seed in range(100)]
    vha_energy = float(np.mean([r.energy for r in vha]))
    vha_iterations = float(np.mean([r.iterations for r in vha]))
    ok = res.energy < vha_energy and segqe_iterations < vha_iterations
    record_acceptance(
        9,
        ok,
        f"greedy E = {res.energy:.4f} in {segqe_iterations} iterations; "
        f"VHA L=1 mean E = {vha_energy:.4f} in {vha_iterations:.1f} iterations (100 seeds)",
    )
    assert ok


# -- 10 -----------------------------------------------------------------------------


def test_acceptance_10_shadow_first_selection():
    h = build_tfi(3, 1, 1)
    psi = StateVector.zeros(3)
    exact = run(h, psi, EngineConfig(max_depth=1))
    exact_choice = exact.trace[0].candidate
    gains, _ = score_candidates(h, psi, make_gateset("pauli2", 3))
    gs = make_gateset("pauli2", 3)
    tied = {gs[j].label for j in np.flatnonzero(gains >= gains.max() - 1e-10)}
    choices = [
        run(h, psi, EngineConfig(mode="shadow", shots=SNAPSHOTS, seed=seed, max_depth=1)).trace[0].candidate
        for seed in range(20)
    ]
    matches = sum(c == exact_choice for c in choices)
    in_tie_set = sum(c in tied for c in choices)
    ok = matches >= 19
    record_acceptance(
        10,
        ok,
        f"shadow first choice equals exact choice {exact_choice} in {matches}/20 seeds; "
        f"exact mode has a {len(tied)}-way tie {sorted(tied)} at the top and the shadow choice lies in it in {in_tie_set}/20",
    )
    assert ok


# -- 11 -----------------------------------------------------------------------------


def test_acceptance_11_bounds_regression_and_monotonicity():
    example = BoundInputs(K=1, delta=0.01, epsilon=0.1, m=1, l=1, M=1, c_max=1.0)
    frozen = (
        n_theorem1(example) == 22607
        and n_theorem2(example) == 37249
        and n_corollary3(10, 2, 0.01, 0.1, 2, 6, 1.0) == 18990937
    )
    rng = np.random.default_rng(1111)
    violations = 0
    checks = 0
    for _ in range(2000):
        p = dict(
            K=int(rng.integers(1, 10**6)), delta=float(rng.uniform(1e-6, 1)), epsilon=float(rng.uniform(1e-3, 1)),
            m=int(rng.integers(1, 5)), l=int(rng.integers(1, 5)), M=int(rng.integers(1, 50)), c_max=float(rng.uniform(0.01, 10)),
        )
        base = BoundInputs(**p)
        for key, change in (("K", 1), ("M", 1), ("m", 1), ("l", 1), ("c_max", 1.5), ("delta", 0.5), ("epsilon", 0.5)):
            q = dict(p)
            q[key] = q[key] + change if isinstance(change, int) else q[key] * change
            harder = BoundInputs(**q)
            for fn in (n_theorem1, n_theorem2):
                checks += 1
                violations += fn(harder) < fn(base)
        n = int(rng.integers(p["m"], 20))
        checks += 1
        violations += n_corollary3(n + 1, p["m"], p["delta"], p["epsilon"], p["l"], p["M"], p["c_max"]) < n_corollary3(
            n, p["m"], p["delta"], p["epsilon"], p["l"], p["M"], p["c_max"]
        )
    ok = frozen and violations == 0
    record_acceptance(11, ok, f"frozen values match: {frozen}; monotonicity {checks - violations}/{checks} checks hold")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
