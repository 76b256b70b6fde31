"""Derivative-free maximisation of general-unitary energy models.

All candidates of a gate set are optimised together by one array-based
Nelder-Mead: every step performs the reflection for all live simplices at
once, then the expansion or contraction for those that need it, then the
shrinks, so each step costs at most three vectorised model evaluations
regardless of how many candidates there are.  The searches minimise; the
public functions maximise ``dE`` by feeding in ``-dE``.

Each search starts from the best single-axis rotation.  For an
exponential-of-Pauli-sum parametrisation one axis is a Pauli rotation with
``dE(t) = (A - A cos t - B sin t) / 2``; probing the axis at ``pi`` and
``pi/2`` gives ``A`` and ``B`` and hence its exact optimum.  Starting there
means a general gate never scores below the best Pauli rotation it contains.

A collapsed simplex is restarted around its best vertex (full-size steps
again) until a restart stops improving the value or ``max_restarts`` is hit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from segqe.candidates import GeneralModel
from segqe.pauli import PauliString

DEFAULT_BUDGET = 3000
DEFAULT_STEP = 0.5
XATOL = 1e-7
FATOL = 1e-11
MAX_RESTARTS = 4

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class SearchOutcome:
    x: np.ndarray
    value: float
    evaluations: int
    converged: bool


class _Ledger:
    """Per-search evaluation counts and best-so-far points."""

    def __init__(self, evaluate: Evaluator, count: int, d: int, budget: int):
        self.evaluate = evaluate
        self.budget = budget
        self.used = np.zeros(count, dtype=int)
        self.best_x = np.zeros((count, d))
        self.best_f = np.full(count, np.inf)

    def room(self, ids: np.ndarray, need: int) -> np.ndarray:
        return self.used[ids] + need <= self.budget

    def __call__(self, ids: np.ndarray, points: np.ndarray) -> np.ndarray:
        if len(ids) == 0:
            return np.zeros(0)
        vals = np.asarray(self.evaluate(ids, points), dtype=float)
        np.add.at(self.used, ids, 1)
        order = np.lexsort((vals, ids))
        first = order[np.r_[True, ids[order][1:] != ids[order][:-1]]]
        better = vals[first] < self.best_f[ids[first]]
        sel = first[better]
        self.best_f[ids[sel]] = vals[sel]
        self.best_x[ids[sel]] = points[sel]
        return vals


def batched_nelder_mead(
    evaluate: Evaluator,
    x0: np.ndarray,
    budget: int,
    *,
    step: float = DEFAULT_STEP,
    xatol: float = XATOL,
    fatol: float = FATOL,
    max_restarts: int = MAX_RESTARTS,
    ledger: _Ledger | None = None,
) -> list[SearchOutcome]:
    """Minimise ``S`` independent functions from the rows of ``x0``.

    ``evaluate(ids, points)`` returns the value of function ``ids[k]`` at
    ``points[k]``.  No function is evaluated more than ``budget`` times; a
    search that cannot afford its next move stops with its best point.
    Coefficients are the dimension-adaptive ones of Gao and Han.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    S, d = x0.shape
    if ledger is None:
        ledger = _Ledger(evaluate, S, d, budget)
    alpha, gamma, rho, sigma = 1.0, 1.0 + 2.0 / d, 0.75 - 1.0 / (2.0 * d), 1.0 - 1.0 / d

    sim = np.repeat(x0[:, None, :], d + 1, axis=1)
    fsim = np.full((S, d + 1), np.inf)
    active = np.zeros(S, dtype=bool)
    converged = np.zeros(S, dtype=bool)
    restarts = np.zeros(S, dtype=int)
    start_f = np.full(S, np.inf)

    def build(ids: np.ndarray, centres: np.ndarray, f_centres: np.ndarray) -> None:
        """Fresh simplices around ``centres``; the centre value is known unless inf."""
        known = np.isfinite(f_centres)
        need = np.where(known, d, d + 1)
        ok = ledger.used[ids] + need <= ledger.budget
        ids, centres, f_centres, known = ids[ok], centres[ok], f_centres[ok], known[ok]
        if len(ids) == 0:
            return
        verts = centres[:, None, :] + np.concatenate([np.zeros((1, d)), step * np.eye(d)])[None]
        mask = np.ones((len(ids), d + 1), dtype=bool)
        mask[known, 0] = False
        rows, cols = np.nonzero(mask)
        vals = ledger(ids[rows], verts[rows, cols])
        fs = np.empty((len(ids), d + 1))
        fs[:, 0] = f_centres
        fs[rows, cols] = vals
        sim[ids], fsim[ids] = verts, fs
        active[ids] = True

    everyone = np.arange(S)
    build(everyone, x0, np.full(S, np.inf))

    while active.any():
        ids = np.nonzero(active)[0]
        order = np.argsort(fsim[ids], axis=1, kind="stable")
        sim[ids] = np.take_along_axis(sim[ids], order[:, :, None], axis=1)
        fsim[ids] = np.take_along_axis(fsim[ids], order, axis=1)

        spread_x = np.max(np.abs(sim[ids, 1:] - sim[ids, :1]), axis=(1, 2))
        spread_f = np.max(np.abs(fsim[ids, 1:] - fsim[ids, :1]), axis=1)
        done = (spread_x <= xatol) & (spread_f <= fatol)
        if done.any():
            fin = ids[done]
            improved = start_f[fin] - fsim[fin, 0] > fatol
            again = fin[improved & (restarts[fin] < max_restarts)]
            stop = np.setdiff1d(fin, again)
            active[fin] = False
            converged[stop] = True
            if len(again):
                restarts[again] += 1
                start_f[again] = fsim[again, 0]
                build(again, sim[again, 0].copy(), fsim[again, 0].copy())
            ids = ids[~done]

        room = ledger.room(ids, 1)
        active[ids[~room]] = False
        ids = ids[room]
        if len(ids) == 0:
            continue
        first_pass = np.isinf(start_f[ids])
        start_f[ids[first_pass]] = fsim[ids[first_pass], 0]

        centroid = sim[ids, :-1].mean(axis=1)
        worst = sim[ids, -1]
        xr = (1 + alpha) * centroid - alpha * worst
        fr = ledger(ids, xr)
        f_best, f_second, f_worst = fsim[ids, 0], fsim[ids, -2], fsim[ids, -1]

        expand = fr < f_best
        accept = ~expand & (fr < f_second)
        outside = ~expand & ~accept & (fr < f_worst)
        inside = ~expand & ~accept & ~outside

        new_x = np.where(accept[:, None], xr, worst)
        new_f = np.where(accept, fr, f_worst)

        trial = np.where(
            expand[:, None],
            (1 + alpha * gamma) * centroid - alpha * gamma * worst,
            np.where(
                outside[:, None],
                (1 + rho * alpha) * centroid - rho * alpha * worst,
                (1 - rho) * centroid + rho * worst,
            ),
        )
        second = ~accept & ledger.room(ids, 1)
        ft = np.full(len(ids), np.inf)
        ft[second] = ledger(ids[second], trial[second])

        # expansion: keep the better of the expanded and reflected points
        take_e = expand & second & (ft < fr)
        take_r = expand & ~take_e
        new_x = np.where(take_e[:, None], trial, np.where(take_r[:, None], xr, new_x))
        new_f = np.where(take_e, ft, np.where(take_r, fr, new_f))

        take_oc = outside & second & (ft <= fr)
        take_ic = inside & second & (ft < f_worst)
        take_c = take_oc | take_ic
        new_x = np.where(take_c[:, None], trial, new_x)
        new_f = np.where(take_c, ft, new_f)

        sim[ids, -1] = new_x
        fsim[ids, -1] = new_f

        shrink = (outside | inside) & second & ~take_c
        stalled = (~accept & ~second) | (shrink & ~ledger.room(ids, d))
        active[ids[stalled]] = False
        shrink &= ~stalled
        if shrink.any():
            sid = ids[shrink]
            best = sim[sid, :1]
            sim[sid, 1:] = best + sigma * (sim[sid, 1:] - best)
            pts = sim[sid, 1:].reshape(-1, d)
            vals = ledger(np.repeat(sid, d), pts)
            fsim[sid, 1:] = vals.reshape(len(sid), d)

    return [
        SearchOutcome(ledger.best_x[i].copy(), float(ledger.best_f[i]), int(ledger.used[i]), bool(converged[i]))
        for i in range(S)
    ]


# -- general-unitary models ---------------------------------------------------


@dataclass
class GeneralOptimum:
    """Best parameters found for one model, with the model's ``dE`` there."""

    theta: np.ndarray
    delta_e: float
    evaluations: int
    converged: bool


def axis_seed(values_pi: np.ndarray, values_half: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Best single-axis rotation of each row from probes at ``pi`` and ``pi/2``.

    Inputs are ``(S, d)`` energy changes; returns ``(axis, theta, dE)`` arrays.
    Along one axis ``dE(pi) = A`` and ``dE(pi/2) = (A - B) / 2``.
    """
    a = np.atleast_2d(np.asarray(values_pi, dtype=float))
    b = a - 2.0 * np.atleast_2d(np.asarray(values_half, dtype=float))
    gains = 0.5 * (a + np.hypot(a, b))
    axis = np.argmax(gains, axis=1)
    rows = np.arange(len(a))
    theta = np.mod(np.arctan2(-b[rows, axis], -a[rows, axis]), 2 * np.pi)
    return axis, theta, gains[rows, axis]


def stacked_energy_change(models: Sequence[GeneralModel], p_values: Mapping[PauliString, float]) -> Evaluator:
    """``evaluate(ids, thetas)`` giving ``dE`` of ``models[ids[k]]`` at ``thetas[k]``."""
    forms = [m.bilinear_form(p_values) for m in models]
    const = np.array([c for c, _ in forms])
    evaluators = {m.candidate.batch_evaluator for m in models}
    shapes = {w.shape for _, w in forms}
    if len(evaluators) == 1 and None not in evaluators and len(shapes) == 1:
        weights = np.stack([w for _, w in forms])
        unitaries = evaluators.pop()
        size = weights.shape[1]

        def evaluate(ids: np.ndarray, points: np.ndarray) -> np.ndarray:
            u = unitaries(points).reshape(-1, size)
            wu = np.einsum("nij,nj->ni", weights[ids], u)
            return const[ids] - np.einsum("ni,ni->n", u.conj(), wu).real

        return evaluate

    objectives = [m.objective(p_values) for m in models]

    def evaluate(ids: np.ndarray, points: np.ndarray) -> np.ndarray:
        out = np.empty(len(ids))
        for i in np.unique(ids):
            sel = ids == i
            out[sel] = objectives[i](points[sel])
        return out

    return evaluate


def optimize_general_many(
    models: Sequence[GeneralModel],
    p_values: Mapping[PauliString, float],
    budget: int = DEFAULT_BUDGET,
    step: float = DEFAULT_STEP,
) -> list[GeneralOptimum]:
    """Maximise ``dE`` for every model, at most ``budget`` model evaluations each.

    Axis probes count against the budget.  ``theta = 0`` (no gate, no change)
    is always a valid answer, so the reported gain is never negative.
    """
    if budget < 1:
        raise ValueError("optimizer budget must be positive")
    if not models:
        return []
    dims = {m.candidate.param_count for m in models}
    if len(dims) > 1:
        # different parameter counts cannot share one simplex array
        out: list[GeneralOptimum | None] = [None] * len(models)
        for d in sorted(dims):
            idx = [i for i, m in enumerate(models) if m.candidate.param_count == d]
            for i, r in zip(idx, optimize_general_many([models[i] for i in idx], p_values, budget, step)):
                out[i] = r
        return out  # type: ignore[return-value]

    d = dims.pop()
    S = len(models)
    energy_change = stacked_energy_change(models, p_values)
    ledger = _Ledger(lambda ids, pts: -energy_change(ids, pts), S, d, budget)
    x0 = np.zeros((S, d))
    probe = np.array([m.candidate.axis_generators is not None for m in models]) & (budget >= 2 * d + d + 1)
    if probe.any():
        sid = np.nonzero(probe)[0]
        pts = np.concatenate([np.pi * np.eye(d), 0.5 * np.pi * np.eye(d)])
        vals = -ledger(np.repeat(sid, 2 * d), np.tile(pts, (len(sid), 1))).reshape(len(sid), 2 * d)
        axis, theta, _ = axis_seed(vals[:, :d], vals[:, d:])
        x0[sid, axis] = theta
    outcomes = batched_nelder_mead(ledger.evaluate, x0, budget, step=step, ledger=ledger)

    results = []
    for out in outcomes:
        gain = -out.value
        if not np.isfinite(gain) or gain <= 0.0:
            results.append(GeneralOptimum(np.zeros(d), 0.0, out.evaluations, out.converged))
        else:
            results.append(GeneralOptimum(out.x, gain, out.evaluations, out.converged))
    return results


def optimize_general(
    model: GeneralModel,
    p_values: Mapping[PauliString, float],
    budget: int = DEFAULT_BUDGET,
    step: float = DEFAULT_STEP,
) -> GeneralOptimum:
    return optimize_general_many([model], p_values, budget, step)[0]
