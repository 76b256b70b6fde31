"""Command-line entry point: ``segqe {run,bounds,shadow-bench,baseline-vqe,replay}``.

Exit codes: 0 success, 2 configuration or input error, 3 a numerical
validation failure (an internal consistency check, or a shadow benchmark
z-score beyond 5).

Every file written embeds the resolved configuration and library version.
CSV files carry their only timestamp on the first line (``# generated ...``)
so that reruns are byte-identical below it; JSON outputs carry none.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from segqe import __version__
from segqe import bounds as bnd
from segqe import config as cfgmod
from segqe.engine import (
    Circuit,
    EngineConfig,
    NumericalValidationError,
    initial_state,
    replay,
    resolve_gateset,
    run,
)
from segqe.hamiltonians import Hamiltonian, build_random_local, build_tfi
from segqe.pauli import DimensionError, PauliString, pauli_basis
from segqe.rng import CounterRNG
from segqe.shadows import sample_shadows, second_moment_analytic, single_shot_values
from segqe.statevec import (
    MAX_GROUND_QUBITS,
    CapacityError,
    StateVector,
    ValidationError,
    energy,
    exact_ground_state,
)
from segqe.vha import train_vha

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
SHADOW_BENCH_MAX_N = 6
TRACE_COLUMNS = ("k", "candidate", "theta", "predicted_dE", "energy", "rel_error", "fidelity", "cum_shots")


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


# -- output helpers -----------------------------------------------------------


def _timestamp() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def _fmt(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    if isinstance(value, (list, tuple)):
        return " ".join(_fmt(float(v)) for v in value)
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence], provenance: dict) -> None:
    """CSV with a timestamp line, a provenance comment line, then the table."""
    buf = io.StringIO()
    buf.write(f"# generated {_timestamp()}\n")
    buf.write("# " + json.dumps(provenance, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def write_json(path: Path, data: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if math.isnan(f) else f
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def provenance(config: dict) -> dict:
    return {"version": __version__, "config": config}


# -- Hamiltonian flags --------------------------------------------------------


def _add_hamiltonian_flags(p: argparse.ArgumentParser, with_defaults: bool = False) -> None:
    g = p.add_argument_group("Hamiltonian")
    g.add_argument("--model", choices=("tfi", "random", "file"), default="tfi" if with_defaults else None)
    g.add_argument("--n", type=int, default=None, help="number of qubits")
    g.add_argument("--w", type=float, default=None, help="TFI field strength (default 1)")
    g.add_argument("--J", type=float, default=None, help="TFI coupling (default 1)")
    g.add_argument("--h-seed", type=int, default=None, help="random-Hamiltonian seed")
    g.add_argument("--hamiltonian-file", default=None, help="JSON Hamiltonian for --model file")


def build_hamiltonian(spec: dict, n: int | None = None, seed: int | None = None) -> Hamiltonian:
    model = spec["model"]
    if model == "tfi":
        return build_tfi(n or spec["n"], spec.get("w", 1.0), spec.get("J", 1.0))
    if model == "random":
        return build_random_local(n or spec["n"], spec.get("seed", 0) if seed is None else seed)
    h = Hamiltonian.from_json(spec["path"])
    if n is not None and n != h.n:
        raise CliError(f"Hamiltonian file has n={h.n}, sweep asked for n={n}")
    return h


def _hamiltonian_spec_from_flags(args) -> dict | None:
    if args.model is None:
        return None
    spec: dict = {"model": args.model}
    if args.model == "file":
        if not args.hamiltonian_file:
            raise CliError("--model file needs --hamiltonian-file")
        spec["path"] = args.hamiltonian_file
        return spec
    if args.n is None:
        raise CliError(f"--model {args.model} needs --n")
    spec["n"] = args.n
    if args.model == "tfi":
        spec["w"] = 1.0 if args.w is None else args.w
        spec["J"] = 1.0 if args.J is None else args.J
    else:
        spec["seed"] = 0 if args.h_seed is None else args.h_seed
    return spec


# -- run ----------------------------------------------------------------------


def _flag_config(args) -> dict:
    out: dict = {}
    spec = _hamiltonian_spec_from_flags(args)
    if spec is not None:
        out["hamiltonian"] = spec
    if args.gateset is not None:
        out["gateset"] = args.gateset
    if args.generators:
        out["generators"] = args.generators
    if args.initial is not None:
        out["initial"] = args.initial
    engine = {
        "max_depth": args.max_depth,
        "threshold": args.threshold,
        "mode": args.mode,
        "shots": args.shots,
        "optimizer_budget": args.budget,
        "seed": args.seed,
    }
    engine = {k: v for k, v in engine.items() if v is not None}
    if args.no_verify:
        engine["verify"] = False
    if engine:
        out["engine"] = engine
    sweep = {}
    if args.sweep_n:
        sweep["n"] = args.sweep_n
    if args.sweep_seeds:
        sweep["seeds"] = args.sweep_seeds
    if sweep:
        out["sweep"] = sweep
    if args.out is not None:
        out["output"] = args.out
    return out


def instances(cfg: dict) -> list[dict]:
    """One entry per (n, seed) pair of the sweep, in a fixed order."""
    spec = cfg["hamiltonian"]
    sweep = cfg.get("sweep", {})
    ns = sweep.get("n") or [spec.get("n")]
    seeds = sweep.get("seeds")
    out = []
    for n in ns:
        for s in seeds if seeds is not None else [None]:
            out.append({"n": n, "seed": s})
    return out


def _instance_tag(cfg: dict, inst: dict, h: Hamiltonian) -> str:
    tag = f"{cfg['hamiltonian']['model']}_n{h.n}"
    if inst["seed"] is not None:
        tag += f"_s{inst['seed']}"
    return f"{tag}_{cfg['gateset']}"


def _engine_config(cfg: dict, seed: int | None) -> EngineConfig:
    e = dict(cfg["engine"])
    if seed is not None:
        # each swept seed gets its own shadow stream
        e["seed"] = seed
    return EngineConfig(
        max_depth=e["max_depth"],
        threshold=e["threshold"],
        mode=e["mode"],
        shots=e["shots"],
        optimizer_budget=e["optimizer_budget"],
        seed=e["seed"],
        gateset=cfg["gateset"],
        generators=tuple(cfg.get("generators", ())),
        verify=e.get("verify"),
    )


def run_instance(cfg: dict, inst: dict) -> dict:
    """Run one sweep instance and write its files; returns the summary."""
    h = build_hamiltonian(cfg["hamiltonian"], inst["n"], inst["seed"])
    engine_cfg = _engine_config(cfg, inst["seed"])
    psi0 = initial_state(cfg["initial"], h.n)
    want_ground = cfg["metrics"].get("ground_state", True) and h.n <= MAX_GROUND_QUBITS
    ground = exact_ground_state(h) if want_ground else None
    result = run(h, psi0, engine_cfg, ground=ground, initial=cfg["initial"])

    out = Path(cfg["output"]) / _instance_tag(cfg, inst, h)
    instance_cfg = {**cfg, "instance": inst}
    prov = provenance(instance_cfg)
    if cfg["metrics"].get("trace", True):
        rows = [
            [r.k, r.candidate, r.theta, r.predicted_dE, r.energy, r.rel_error, r.fidelity, r.cum_shots]
            for r in result.trace
        ]
        write_csv(out / "trace.csv", TRACE_COLUMNS, rows, prov)
    if cfg["metrics"].get("circuit", True):
        result.circuit.save(out / "circuit.json")
    summary = {
        **prov,
        "hamiltonian": {**h.to_dict(), "name": h.name, "params": h.params},
        "initial_energy": result.initial_energy,
        "final_energy": result.energy,
        "exact_energy": ground.energy if ground is not None else None,
        "rel_error": result.rel_error,
        "fidelity": result.fidelity,
        "n_gates": len(result.circuit),
        "n_two_qubit_gates": result.circuit.two_qubit_count,
        "iterations": len(result.trace) + (1 if len(result.trace) < engine_cfg.max_depth else 0),
        "cum_shots": result.shots,
        "final_gain": result.final_gain,
        "converged": result.final_gain <= engine_cfg.threshold,
    }
    write_json(out / "summary.json", summary)
    return {"tag": out.name, **{k: summary[k] for k in ("final_energy", "rel_error", "fidelity", "n_gates", "cum_shots")}}


def _run_instance_star(job):
    return run_instance(*job)


def cmd_run(args) -> int:
    file_cfg = cfgmod.load_file(args.config) if args.config else {}
    cfg = cfgmod.resolve(file_cfg, _flag_config(args))
    jobs = instances(cfg)
    if args.dry_run:
        print(json.dumps(cfg, indent=2, sort_keys=True))
        for inst in jobs:
            h = build_hamiltonian(cfg["hamiltonian"], inst["n"], inst["seed"])
            gs = resolve_gateset(_engine_config(cfg, inst["seed"]), h)
            print(f"instance n={h.n} seed={inst['seed']}: K={gs.K} candidates ({gs.name})")
        return EXIT_OK
    try:
        n_workers = cfgmod.workers()
        if n_workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=n_workers) as pool:
                results = list(pool.map(_run_instance_star, [(cfg, j) for j in jobs]))
        else:
            results = [run_instance(cfg, j) for j in jobs]
    except NumericalValidationError as exc:
        raise CliError(str(exc), EXIT_NUMERICAL) from None
    write_json(Path(cfg["output"]) / "sweep.json", {**provenance(cfg), "instances": results})
    for r in results:
        print(
            f"{r['tag']}: E={r['final_energy']:.10g} rel_error={_fmt(r['rel_error'])} "
            f"fidelity={_fmt(r['fidelity'])} gates={r['n_gates']} shots={r['cum_shots']}"
        )
    return EXIT_OK


# -- bounds -------------------------------------------------------------------


def cmd_bounds(args) -> int:
    try:
        inputs = bnd.BoundInputs(args.K, args.delta, args.epsilon, args.m, args.l, args.M, args.c_max, args.n)
        report = {
            "inputs": {
                "K": args.K, "delta": args.delta, "epsilon": args.epsilon, "m": args.m,
                "l": args.l, "M": args.M, "c_max": args.c_max, "n": args.n,
            },
            "theorem1": bnd.n_theorem1(inputs),
            "theorem2": bnd.n_theorem2(inputs),
            "corollary3": (
                bnd.n_corollary3(args.n, args.m, args.delta, args.epsilon, args.l, args.M, args.c_max)
                if args.n is not None
                else None
            ),
            "variance_lemma3": bnd.variance_bound_lemma3(args.m, args.l, args.M, args.c_max),
            "single_shot_lemma4": bnd.single_shot_bound_lemma4(args.m, args.l, args.M, args.c_max),
            "rotation_variance_prefactor": bnd.corollary3_variance_prefactor(args.m, args.l, args.M),
        }
    except bnd.BoundsError as exc:
        raise CliError(str(exc)) from None
    if args.tfi_table:
        rows = bnd.tfi_generator_table(args.tfi_n, args.w, args.J, max_range=2)
        report["tfi_table"] = {
            "n": args.tfi_n, "w": args.w, "J": args.J, "rows": rows,
            "max_A": max(r["A"] for r in rows), "max_B": max(r["B"] for r in rows),
        }
    if args.json:
        print(json.dumps(report, indent=2))
        return EXIT_OK
    lines = [("fixed-parameter estimates", report["theorem1"]), ("maxima over rotation angles", report["theorem2"])]
    if report["corollary3"] is not None:
        lines.append((f"all local Pauli rotations, n={args.n}", report["corollary3"]))
    for label, value in lines:
        print(f"{label:<36}N = {value}")
    print(f"single-shot variance bound (general gate) = {report['variance_lemma3']:g}")
    print(f"single-shot magnitude bound (general gate) = {report['single_shot_lemma4']:g}")
    print(f"rotation A/B variance prefactor = {report['rotation_variance_prefactor']}")
    if args.tfi_table:
        t = report["tfi_table"]
        print(f"\nTFI n={t['n']} w={t['w']} J={t['J']}: |f|^T K |f| per generator")
        print(f"{'generator':<12}{'dist':>5}{'A':>10}{'B':>10}{'M_u':>5}")
        for r in t["rows"]:
            print(f"{r['generator']:<12}{r['distance']:>5}{r['A']:>10g}{r['B']:>10g}{r['M_u']:>5}")
        print(f"max A = {t['max_A']:g}, max B = {t['max_B']:g}")
    return EXIT_OK


# -- shadow benchmark -----------------------------------------------------------


def _bench_state(spec: str, n: int) -> StateVector:
    if spec.startswith("random:"):
        return StateVector.random(n, CounterRNG(int(spec.split(":", 1)[1])))
    return initial_state(spec, n)


def bench_pairs(kind: str, n: int, seed: int) -> list[tuple[PauliString, PauliString]]:
    if kind == "single-z":
        zs = [PauliString.from_ops(n, {i: "Z"}) for i in range(n)]
        return [(a, b) for i, a in enumerate(zs) for b in zs[i:]]
    if kind == "all":
        basis = pauli_basis(n)[1:]
        return [(a, b) for i, a in enumerate(basis) for b in basis[i:]]
    if kind.startswith("random:"):
        count = int(kind.split(":", 1)[1])
        rng = CounterRNG(seed).spawn(1)
        idx = rng.integers(4**n - 1, size=2 * count) + 1
        basis = pauli_basis(n)
        return [(basis[idx[2 * k]], basis[idx[2 * k + 1]]) for k in range(count)]
    raise CliError(f"unknown pair set {kind!r}; use single-z, all or random:<count>")


def shadow_bench(state: StateVector, pairs, shots: int, seed: int) -> list[dict]:
    batch = sample_shadows(state, shots, seed)
    rows = []
    cache: dict[PauliString, np.ndarray] = {}
    for a, b in pairs:
        va = cache.setdefault(a, single_shot_values(batch, a))
        vb = cache.setdefault(b, single_shot_values(batch, b))
        prod = va * vb
        mc = float(prod.mean())
        se = float(prod.std(ddof=1) / math.sqrt(shots)) if shots > 1 else math.inf
        analytic = second_moment_analytic(state, a, b)
        diff = mc - analytic
        if se > 0:
            z = diff / se
        else:
            z = 0.0 if abs(diff) < 1e-12 else math.inf
        rows.append({"a": a.sparse(), "b": b.sparse(), "monte_carlo": mc, "analytic": analytic, "std_error": se, "z": z})
    return rows


def cmd_shadow_bench(args) -> int:
    if args.n > SHADOW_BENCH_MAX_N:
        raise CliError(f"shadow-bench supports n <= {SHADOW_BENCH_MAX_N}, got {args.n}")
    if args.shots < 2:
        raise CliError("shadow-bench needs at least 2 shots")
    state = _bench_state(args.state, args.n)
    rows = shadow_bench(state, bench_pairs(args.pairs, args.n, args.seed), args.shots, args.seed)
    worst = max((abs(r["z"]) for r in rows), default=0.0)
    cfg = {"n": args.n, "state": args.state, "shots": args.shots, "seed": args.seed, "pairs": args.pairs}
    if args.out:
        header = ("a", "b", "monte_carlo", "analytic", "std_error", "z")
        write_csv(Path(args.out), header, [[r[c] for c in header] for r in rows], provenance(cfg))
    print(f"{'P_a':<14}{'P_b':<14}{'monte carlo':>14}{'analytic':>12}{'std err':>12}{'z':>8}")
    for r in rows:
        print(f"{r['a']:<14}{r['b']:<14}{r['monte_carlo']:>14.6f}{r['analytic']:>12.6f}{r['std_error']:>12.2e}{r['z']:>8.2f}")
    print(f"max |z| = {worst:.3f} over {len(rows)} pairs")
    return EXIT_NUMERICAL if worst > 5 else EXIT_OK


# -- VHA baseline ----------------------------------------------------------------


def cmd_baseline_vqe(args) -> int:
    h = build_tfi(args.n, args.w, args.J)
    ground = exact_ground_state(h) if h.n <= MAX_GROUND_QUBITS else None
    rows = []
    settings = None
    for seed in range(args.seeds):
        res = train_vha(h, args.layers, seed, args.threshold, args.max_iters)
        settings = res.settings
        rel = abs(res.energy - ground.energy) / abs(ground.energy) if ground is not None else math.nan
        rows.append([seed, args.layers, args.n, res.energy, ground.energy if ground else math.nan, rel, res.iterations, res.converged])
    cfg = {
        "n": args.n, "w": args.w, "J": args.J, "layers": args.layers, "seeds": args.seeds,
        "threshold": args.threshold, "max_iters": args.max_iters, "optimizer": settings,
    }
    header = ("seed", "layers", "n", "energy", "exact_energy", "rel_error", "iterations", "converged")
    if args.out:
        write_csv(Path(args.out), header, rows, provenance(cfg))
    energies = np.array([r[3] for r in rows])
    iters = np.array([r[6] for r in rows])
    print(f"VHA L={args.layers} n={args.n}: mean energy {energies.mean():.8g} "
          f"(sem {energies.std(ddof=1) / math.sqrt(len(rows)) if len(rows) > 1 else 0:.2g}), "
          f"mean iterations {iters.mean():.4g}")
    return EXIT_OK


# -- replay ------------------------------------------------------------------------


def cmd_replay(args) -> int:
    circuit = Circuit.load(args.circuit)
    psi0 = initial_state(circuit.initial, circuit.n)
    state = replay(circuit, psi0)
    report = {"n": circuit.n, "gates": len(circuit), "initial": circuit.initial}
    spec = _hamiltonian_spec_from_flags(args)
    if spec is not None:
        h = build_hamiltonian(spec)
        if h.n != circuit.n:
            raise CliError(f"Hamiltonian has n={h.n}, circuit has n={circuit.n}")
        report["energy"] = energy(state, h)
        if h.n <= MAX_GROUND_QUBITS:
            ground = exact_ground_state(h)
            report["exact_energy"] = ground.energy
            report["fidelity"] = ground.fidelity(state)
    if args.save_state:
        np.save(args.save_state, state.amplitudes)
    print(json.dumps(report, indent=2))
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segqe", description="Greedy shadow-driven ground-state circuits.")
    parser.add_argument("--version", action="version", version=f"segqe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the greedy solver over one instance or a sweep")
    p.add_argument("--config", help="JSON config file (lowest precedence after defaults)")
    _add_hamiltonian_flags(p)
    p.add_argument("--gateset", choices=("pauli1", "pauli2", "pauli2-nn", "su4", "su4-nn", "custom"))
    p.add_argument("--generators", nargs="+", help="sparse Pauli labels for --gateset custom, e.g. 'X1 Y2'")
    p.add_argument("--initial", help="'zeros', a product label like 0101+, or a .npy amplitude file")
    p.add_argument("--mode", choices=("exact", "shadow"))
    p.add_argument("--shots", type=int, help="snapshots per iteration in shadow mode")
    p.add_argument("--threshold", type=float, help="stop when the best predicted drop is at most this")
    p.add_argument("--max-depth", type=int)
    p.add_argument("--budget", type=int, help="model evaluations per general gate and iteration")
    p.add_argument("--seed", type=int, help="shadow sampling seed")
    p.add_argument("--no-verify", action="store_true", help="skip exact energies after appends in shadow mode")
    p.add_argument("--sweep-n", type=int, nargs="+")
    p.add_argument("--sweep-seeds", type=int, nargs="+")
    p.add_argument("--out", help="output directory")
    p.add_argument("--dry-run", action="store_true", help="print the resolved config and candidate counts only")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bounds", help="shot-count and variance bounds")
    p.add_argument("--K", type=int, default=1)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--l", type=int, default=1)
    p.add_argument("--M", type=int, default=1)
    p.add_argument("--c-max", type=float, default=1.0)
    p.add_argument("--n", type=int, default=None, help="qubit count, enables the all-local-rotations count")
    p.add_argument("--tfi-table", action="store_true", help="add the TFI quadratic-form table")
    p.add_argument("--tfi-n", type=int, default=8)
    p.add_argument("--w", type=float, default=1.0)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("shadow-bench", help="Monte-Carlo vs analytic shadow second moments")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--state", default="zeros", help="'zeros', a product label, or random:<seed>")
    p.add_argument("--shots", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs", default="single-z", help="single-z, all, or random:<count>")
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=cmd_shadow_bench)

    p = sub.add_parser("baseline-vqe", help="VHA-VQE baseline on the TFI chain")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--seeds", type=int, default=10, help="number of random initialisations (seeds 0..N-1)")
    p.add_argument("--w", type=float, default=1.0)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--threshold", type=float, default=1e-3)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=cmd_baseline_vqe)

    p = sub.add_parser("replay", help="replay a circuit JSON file")
    p.add_argument("circuit")
    _add_hamiltonian_flags(p)
    p.add_argument("--save-state", help="write final amplitudes to this .npy file")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (cfgmod.ConfigError, bnd.BoundsError, ValidationError, DimensionError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalValidationError as exc:
        print(f"numerical validation failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
