"""Command-line interface: compile, sweep, compress, bound, synth.

Reported costs and fidelities are measured against the SU(d) representative
of the target nearest the circuit (see ``matrixcore.class_metrics``).

Exit codes: 0 success (for ``compile``, the best restart converged),
2 when the iteration budget ran out first, 1 on bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import circuit as C
from . import matrixcore as mc
from . import rewrite as R
from . import structures as S
from .optimize import OptimizationError, OptimizerConfig, optimize
from .targets import TargetSpec, load

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BUDGET = 2
EXACT_HST = 1e-8


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def derive_seed(*parts: int) -> int:
    """Independent 32-bit seed for a tuple of integers (master seed, restart, ...)."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("AQC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"AQC_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_range(text: str) -> list[int]:
    """``a:b[:step]`` (inclusive of b) or a comma list."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            if step <= 0:
                raise ValueError
            return list(range(start, stop + 1, step))
        return [int(x) for x in text.split(",") if x.strip()]
    except (ValueError, IndexError):
        raise argparse.ArgumentTypeError(f"expected a:b[:step] or a comma list, got {text!r}")


def _step(text: str):
    return text if text == "auto" else float(text)


# --- one optimizer run, picklable for the process pool ----------------------


@dataclass
class _Job:
    n: int
    units: tuple
    target: np.ndarray
    cfg: OptimizerConfig
    restart: int


def _run_job(job: _Job) -> dict:
    s = C.Structure(job.n, job.units)
    res = optimize(s, job.target, job.cfg)
    m = mc.class_metrics(C.assemble(s, res.theta), job.target)
    return {
        "restart": job.restart,
        "units": job.units,
        "theta": res.theta,
        "cost": m.frobenius_cost,
        "hst": m.hst_cost,
        "fidelity": m.frobenius_fidelity,
        "iterations": res.iterations,
        "converged": res.converged,
    }


def _pool_map(fn, items: list, threads: int) -> list:
    """``map`` in input order, over worker processes when ``threads > 1``."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))


def _run_all(jobs: list[_Job], threads: int) -> list[dict]:
    return _pool_map(_run_job, jobs, threads)


def _compress_job(job: tuple):
    s, u, lam, prox_cfg, g, use_synthesis, theta0, reopt_cfg = job
    return R.compress(s, u, lam, prox_cfg, g, use_synthesis, theta0=theta0, reopt_cfg=reopt_cfg)


def _best(results: list[dict]) -> dict:
    return min(results, key=lambda r: (r["cost"], r["restart"]))


def _restart_jobs(args, s: C.Structure, u: np.ndarray, sample: int = 0) -> list[_Job]:
    jobs = []
    for r in range(args.restarts):
        units = s.units
        if args.permute:
            units = S.permute(s, derive_seed(args.seed, sample, r, 1)).units
        cfg = OptimizerConfig(
            method=args.optimizer,
            step=args.step,
            tol=args.tol,
            max_iters=args.max_iters,
            seed=derive_seed(args.seed, sample, r),
        )
        jobs.append(_Job(s.n, units, u, cfg, r))
    return jobs


# --- shared resolution of targets and structures ----------------------------


def _target(args, n: int | None = None) -> tuple[np.ndarray, TargetSpec]:
    seed = args.target_seed if args.target_seed is not None else args.seed
    spec = TargetSpec.parse(args.target, n if n is not None else args.n, seed)
    return load(spec), spec


def _structure(args, n: int) -> tuple[C.Structure, S.ConnectivityGraph]:
    g = S.connectivity(args.connectivity, n)
    if args.structure == "cart" and not g.is_full:
        raise UsageError("--structure cart needs --connectivity full")
    return S.build(args.structure, n, args.length, g), g


def _emit_json(record: dict, path: str | None, mode: str = "w") -> None:
    line = json.dumps(record)
    if path:
        with open(path, mode) as fh:
            fh.write(line + "\n")
    else:
        print(line)


# --- commands ---------------------------------------------------------------


def cmd_compile(args) -> int:
    t0 = time.perf_counter()
    u, spec = _target(args)
    n = u.shape[0].bit_length() - 1
    s, _ = _structure(args, n)
    results = _run_all(_restart_jobs(args, s, u), _threads(args))
    best = _best(results)
    sb = C.Structure(n, best["units"])
    circ = C.emit_circuit(sb, best["theta"])
    if args.out:
        C.write_circuit(args.out, circ)
    m = mc.class_metrics(C.circuit_matrix(circ), u)
    report = {
        "target": args.target,
        "n": n,
        "structure": args.structure,
        "length": len(sb),
        "connectivity": args.connectivity,
        "optimizer": args.optimizer,
        "step": args.step,
        "tol": args.tol,
        "max_iters": args.max_iters,
        "seed": args.seed,
        "restarts": args.restarts,
        "best_restart": best["restart"],
        "exact_restarts": sum(r["hst"] <= EXACT_HST for r in results),
        "frobenius_cost": m.frobenius_cost,
        "fidelity": m.frobenius_fidelity,
        "hst_cost": m.hst_cost,
        "iterations": best["iterations"],
        "converged": best["converged"],
        "circuit": args.out,
    }
    if args.permute:
        report["units"] = [list(p) for p in sb.units]
    if not args.no_timing:
        report["wall_ms"] = (time.perf_counter() - t0) * 1e3
    _emit_json(report, args.report)
    return EXIT_OK if best["converged"] else EXIT_BUDGET


SWEEP_COLUMNS = (
    "length",
    "samples",
    "mean_error",
    "median_error",
    "std_error",
    "mean_fidelity",
    "median_fidelity",
    "min_fidelity",
    "frac_above_floor",
)


def sweep_rows(args) -> list[dict]:
    """Best-of-restarts error per Haar sample, summarized per length."""
    n = args.n
    g = S.connectivity(args.connectivity, n)
    if args.structure == "cart":
        raise UsageError("sweep varies the length; use sequ or spin")
    targets = [mc.haar_random(n, derive_seed(args.seed, k, 7)) for k in range(args.samples)]
    jobs, keys = [], []
    for length in args.lengths:
        s = S.build(args.structure, n, length, g)
        for k, u in enumerate(targets):
            for job in _restart_jobs(args, s, u, sample=k):
                jobs.append(job)
                keys.append((length, k))
    results = _run_all(jobs, _threads(args))
    grouped: dict = {}
    for key, res in zip(keys, results):
        grouped.setdefault(key, []).append(res)
    rows = []
    for length in args.lengths:
        best = [_best(grouped[(length, k)]) for k in range(args.samples)]
        err = np.array([b["cost"] for b in best])
        fid = np.array([b["fidelity"] for b in best])
        rows.append(
            {
                "length": length,
                "samples": args.samples,
                "mean_error": float(err.mean()),
                "median_error": float(np.median(err)),
                "std_error": float(err.std()),
                "mean_fidelity": float(fid.mean()),
                "median_fidelity": float(np.median(fid)),
                "min_fidelity": float(fid.min()),
                "frac_above_floor": float(np.mean(fid >= args.min_fidelity)),
            }
        )
    return rows


def cmd_sweep(args) -> int:
    rows = sweep_rows(args)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def _compress_inputs(args):
    if args.warm:
        circ = C.read_circuit(args.warm)
        s, theta0 = C.circuit_to_units(circ)
        if args.target:
            u, _ = _target(args, s.n)
            u = mc.align_phase(u, C.assemble(s, theta0))
        else:
            u = C.assemble(s, theta0)
        g = S.connectivity(args.connectivity, s.n)
        if not S.validate(s, g):
            raise UsageError(f"warm-start circuit does not fit the {g.name} connectivity")
        return s, u, g, theta0
    if not args.target:
        raise UsageError("compress needs --target or --warm")
    u, _ = _target(args)
    s, g = _structure(args, u.shape[0].bit_length() - 1)
    return s, u, g, None


def _compress_rank(rep: R.CompressionReport, floor: float) -> tuple:
    """Restarts meeting the fidelity floor first, then fewest CNOTs, then fidelity."""
    return (rep.fidelity_after < floor, rep.cnots_after, -rep.fidelity_after)


def cmd_compress(args) -> int:
    s, u, g, theta0 = _compress_inputs(args)
    lams = args.lambda_list if args.lambda_list is not None else [args.lam]
    if any(lam < 0 for lam in lams):
        raise UsageError("lambda must be nonnegative")
    use_synthesis = g.is_full if args.synthesis is None else args.synthesis == "on"
    reopt_cfg = OptimizerConfig(
        method="nesterov", step=args.step, tol=args.tol, max_iters=args.max_iters
    )
    restarts = 1 if theta0 is not None else args.restarts
    if args.report:
        Path(args.report).write_text("")
    jobs = [
        (
            s, u, lam,
            OptimizerConfig(
                method="prox",
                step=args.step,
                max_iters=args.prox_iters or args.max_iters,
                seed=derive_seed(args.seed, r, 0),
            ),
            g, use_synthesis, theta0, reopt_cfg,
        )
        for lam in lams
        for r in range(restarts)
    ]
    results = _pool_map(_compress_job, jobs, _threads(args))
    best = None
    for i, lam in enumerate(lams):
        runs = results[i * restarts : (i + 1) * restarts]
        s2, theta2, rep = min(runs, key=lambda x: _compress_rank(x[2], args.min_fidelity))
        _emit_json(rep.as_record(timing=not args.no_timing), args.report, mode="a")
        if rep.fidelity_after >= args.min_fidelity:
            key = (rep.cnots_after, -rep.fidelity_after, lam)
            if best is None or key < best[0]:
                best = (key, s2, theta2)
    if args.out:
        if best is None:
            print(f"no lambda reached fidelity {args.min_fidelity}", file=sys.stderr)
        else:
            C.write_circuit(args.out, C.emit_circuit(best[1], best[2]))
    return EXIT_OK


def cmd_bound(args) -> int:
    if args.n is None:
        args.n = args.n_flag
    if args.n is None:
        raise UsageError("bound needs n")
    print(f"tlb {S.tlb(args.n)}")
    if args.n >= 2:
        print(f"qsd_count {S.qsd_count(args.n)}")
    if 2 <= args.n <= S.CART_MAX_QUBITS:
        print(f"cart_length {len(S.cart(args.n))}")
    return EXIT_OK


def synth_circuit(circ: C.Circuit, g: S.ConnectivityGraph, use_synthesis: bool) -> C.Circuit:
    """Rewrite every maximal run of consecutive downward CNOTs."""
    out: list[C.Gate] = []
    run: list = []

    def flush():
        if run:
            new = R.rewrite_word(run, g, use_synthesis)
            out.extend(C.cx(j, k) for j, k in (new if len(new) <= len(run) else run))
            run.clear()

    for gate in circ.gates:
        if gate.name == "cx" and gate.qubits[0] < gate.qubits[1]:
            run.append(gate.qubits)
        else:
            flush()
            out.append(gate)
    flush()
    return C.Circuit(circ.n, tuple(out))


def cmd_synth(args) -> int:
    circ = C.read_circuit(args.circuit)
    g = S.connectivity(args.connectivity, circ.n)
    use_synthesis = g.is_full if args.synthesis is None else args.synthesis == "on"
    text = C.serialize(synth_circuit(circ, g, use_synthesis))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _common(p: argparse.ArgumentParser, optimizer: bool = True) -> None:
    p.add_argument("--config", metavar="FILE", help="key=value defaults file")
    p.add_argument("--dump-config", action="store_true", help="print the resolved configuration and exit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: AQC_THREADS or all cores)")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock fields so reports are reproducible byte for byte")
    if optimizer:
        p.add_argument("--tol", type=float, default=1e-6, help="stop when the gradient infinity norm drops below this")
        p.add_argument("--max-iters", type=int, default=50_000)
        p.add_argument("--step", type=_step, default="auto", help="step size or 'auto'")


def _target_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--target", required=required, help="file:PATH | haar | toffoli3 | toffoli4 | fredkin | adder")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--target-seed", type=int, default=None, help="Haar sample seed (default: --seed)")


def _structure_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--structure", choices=("sequ", "spin", "cart"), default="sequ")
    p.add_argument("--length", type=int, default=None)
    p.add_argument("--connectivity", default="full", help="full | star | line | file:PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aqc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compile", help="optimize angles on a fixed structure")
    _common(p)
    _target_args(p)
    _structure_args(p)
    p.add_argument("--optimizer", choices=("gd", "nesterov"), default="nesterov")
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--permute", action="store_true", help="randomly reorder the units for each restart")
    p.add_argument("--out", help="circuit file for the best restart")
    p.add_argument("--report", help="JSON report path (default: stdout)")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("sweep", help="error statistics over lengths and Haar samples")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    _structure_args(p)
    p.add_argument("--lengths", type=_int_range, required=True, help="a:b[:step] or comma list")
    p.add_argument("--optimizer", choices=("gd", "nesterov"), default="nesterov")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--permute", action="store_true")
    p.add_argument("--min-fidelity", type=float, default=0.999)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compress", help="group-LASSO compression over a lambda list")
    _common(p)
    _target_args(p, required=False)
    _structure_args(p)
    p.add_argument("--warm", metavar="CIRCUIT", help="warm-start circuit (.txt or .qasm)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--lambda-list", type=_float_list, default=None)
    p.add_argument("--prox-iters", type=int, default=None, help="prox budget (default: --max-iters)")
    p.add_argument("--restarts", type=int, default=1, help="random prox starts per lambda (ignored with --warm)")
    p.add_argument("--synthesis", choices=("on", "off"), default=None, help="default: on iff full connectivity")
    p.add_argument("--min-fidelity", type=float, default=0.99)
    p.add_argument("--out", help="shortest circuit meeting --min-fidelity")
    p.add_argument("--report", help="JSON-lines path (default: stdout)")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("bound", help="print CNOT-count formulas for n qubits")
    p.add_argument("n", type=int, nargs="?")
    p.add_argument("--n", dest="n_flag", type=int, default=None)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("synth", help="rewrite the CNOT runs of a circuit file")
    p.add_argument("circuit")
    p.add_argument("--connectivity", default="full")
    p.add_argument("--synthesis", choices=("on", "off"), default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)
    return parser


def _config_path(argv: list[str]) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    # config values become subcommand defaults, so they must be in place
    # before the real parse checks required flags
    path = _config_path(argv)
    subs = parser._subparsers._group_actions[0].choices
    command = next((tok for tok in argv if tok in subs), None)
    if not path or command is None:
        return parser.parse_args(argv)
    sub = subs[command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        dest = key.replace("-", "_")
        if dest == "lambda":
            dest = "lam"
        action = actions.get(dest)
        if action is None or dest in ("config", "help", "func"):
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[dest] = value.lower() in ("1", "true", "yes", "on")
        else:
            try:
                defaults[dest] = action.type(value) if action.type else value
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"{path}:{lineno}: {exc}") from None
    sub.set_defaults(**defaults)
    for a in sub._actions:
        if a.dest in defaults:
            a.required = False
    return parser.parse_args(argv)


def dump_config(args) -> str:
    skip = {"func", "command", "config", "dump_config"}
    lines = []
    for key, value in sorted(vars(args).items()):
        if key in skip or value is None:
            continue
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        lines.append(f"{'lambda' if key == 'lam' else key.replace('_', '-')}={value}")
    return "\n".join(lines) + "\n"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        if getattr(args, "dump_config", False):
            sys.stdout.write(dump_config(args))
            return EXIT_OK
        return args.func(args)
    except (UsageError, ValueError, OSError, OptimizationError) as exc:
        print(f"aqc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
