"""Command-line interface.

Subcommands: parse, simulate, tame, compile, spectrum, verify, family,
scaling.  Exit codes follow a sysexits-flavoured mapping: 0 success,
64 usage, 65 parse/data error, 1 failed check, 2 numerical ambiguity,
3 tameness failure.  HAMFORGE_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .circuit import CircuitSyntaxError, parse_circuit, serialize_circuit, validate
from .families import family_f1, family_f2, hadamard_gadget
from .fitting import ModelChoice, ScalingSeries, compare_models
from .hamiltonian import (
    TamenessRequired,
    compile_circuit,
    history_state,
    load_matrix,
    write_hamiltonian,
)
from .simulate import StateVector, ZeroProbabilityOutcome, check_tame, run
from .spectral import (
    AmbiguousKernelEdge,
    DimensionTooLarge,
    eigen_spectrum,
    smallest_nonzero,
    verify_kernel,
)

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_AMBIGUOUS = 2
EXIT_TAMENESS = 3
EXIT_USAGE = 64
EXIT_DATA = 65

CSV_HEADER = "n,dim,kernel_dim,lambda_min,inv_lambda_min,wall_ms,flag"


class _Parser(argparse.ArgumentParser):
    # usage mistakes exit with the sysexits EX_USAGE code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _read_circuit(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        print(f"cannot read {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_DATA) from None
    try:
        return parse_circuit(text, name=Path(path).stem)
    except CircuitSyntaxError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_DATA) from None


def _parse_proof(spec: str | None, c) -> StateVector | None:
    size = c.register.proof_size
    if size == 0:
        return None
    if spec is None:
        spec = "0" * size
    spec = spec.strip()
    if spec.startswith("["):
        amps = [complex(re, im) for re, im in json.loads(spec)]
        state = StateVector.from_amplitudes(amps)
    else:
        state = StateVector.from_label(spec)
    if state.n != size:
        print(f"proof state covers {state.n} qubit(s), circuit needs {size}", file=sys.stderr)
        raise SystemExit(EXIT_DATA)
    return state


def _parse_range(text: str) -> tuple[int, int]:
    try:
        if ".." in text:
            lo_s, hi_s = text.split("..", 1)
            lo, hi = int(lo_s), int(hi_s)
        else:
            lo = hi = int(text)
    except ValueError:
        raise ValueError(f"bad range {text!r}; expected e.g. 2..7") from None
    if lo < 1 or hi < lo:
        raise ValueError(f"empty or invalid range {text!r}")
    return lo, hi


_FAMILIES = {"f1": family_f1, "f2": family_f2, "gadget": lambda n=1: hadamard_gadget()}


@dataclass
class ExperimentConfig:
    """Settings for one gap-scaling sweep."""

    family: str
    n_range: tuple[int, int]
    method: str = "auto"
    kernel_tol: float | None = None
    seed: int = 0
    output_dir: str = "."
    literal: bool = False
    stable_output: bool = False
    k: int | None = None
    dense_limit: int = 10_000


def _solve_one(cfg: ExperimentConfig, n: int) -> dict:
    circuit = _FAMILIES[cfg.family](n)
    tame = check_tame(circuit, n_samples=20, seed=cfg.seed)
    if not tame.is_tame:
        raise TamenessRequired(
            f"{cfg.family} n={n}: not tame (spread {tame.max_prob_deviation:.3e})"
        )
    t0 = time.perf_counter()
    ham = compile_circuit(circuit, literal=cfg.literal)
    method = cfg.method
    if method == "auto":
        method = "dense" if ham.dim <= cfg.dense_limit else "iterative"
    report = eigen_spectrum(
        ham, method=method, k=cfg.k, kernel_tol=cfg.kernel_tol,
        dense_limit=cfg.dense_limit, seed=cfg.seed + 7,
    )
    wall_ms = int(round(1000.0 * (time.perf_counter() - t0)))
    flag = ""
    lam = report.lambda_min_nonzero
    try:
        lam = smallest_nonzero(report)
    except (AmbiguousKernelEdge, ValueError):
        flag = "ambiguous"
    return {
        "n": n,
        "dim": ham.dim,
        "kernel_dim": report.kernel_dim,
        "lambda_min": lam,
        "inv_lambda_min": (1.0 / lam) if (lam is not None and flag == "") else None,
        "wall_ms": 0 if cfg.stable_output else wall_ms,
        "flag": flag,
        "method": report.method,
        "kernel_tol": report.kernel_tol,
    }


def run_scaling_experiment(cfg: ExperimentConfig) -> tuple[list[dict], ModelChoice | None]:
    """Sweep the family over n, returning per-n rows and the model comparison."""
    ns = list(range(cfg.n_range[0], cfg.n_range[1] + 1))
    workers = max(1, int(os.environ.get("HAMFORGE_THREADS", "1") or "1"))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda n: _solve_one(cfg, n), ns))
    else:
        rows = [_solve_one(cfg, n) for n in ns]
    rows.sort(key=lambda r: r["n"])
    clean = [(r["n"], r["inv_lambda_min"]) for r in rows if r["flag"] == ""]
    choice = None
    if len(clean) >= 5:
        series = ScalingSeries(tuple(clean), family=cfg.family.upper())
        choice = compare_models(series)
    return rows, choice


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_scaling_outputs(cfg: ExperimentConfig, rows, choice) -> None:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(",".join(_format_cell(r[k]) for k in
                              ("n", "dim", "kernel_dim", "lambda_min",
                               "inv_lambda_min", "wall_ms", "flag")))
    (out / "scaling.csv").write_text("\n".join(lines) + "\n")
    payload = {
        "family": cfg.family,
        "n_range": list(cfg.n_range),
        "seed": cfg.seed,
        "method": cfg.method,
        "literal": cfg.literal,
        "points": [[r["n"], r["inv_lambda_min"]] for r in rows if r["flag"] == ""],
        "comparison": choice.to_json_dict() if choice is not None else None,
    }
    (out / "fits.json").write_text(_dumps(payload))
    if choice is not None:
        from .plots import render_scaling_figure

        series = ScalingSeries(tuple((r["n"], r["inv_lambda_min"])
                                     for r in rows if r["flag"] == ""),
                               family=cfg.family.upper())
        render_scaling_figure(
            str(out / "scaling.svg"), series, choice,
            log_y=(cfg.family == "f1"),
            title=f"{cfg.family.upper()} gap scaling",
        )


# --------------------------------------------------------------------------
# subcommands


def _cmd_parse(args) -> int:
    circuit = _read_circuit(args.circuit)
    report = validate(circuit)
    if not report.ok:
        for issue in report.issues:
            print(issue, file=sys.stderr)
        return EXIT_CHECK
    if args.echo:
        sys.stdout.write(serialize_circuit(circuit))
    else:
        meas = len(circuit.measure_steps())
        print(f"ok: {circuit.n_qubits} qubit(s), {circuit.n_steps} step(s), {meas} measurement(s)")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    circuit = _read_circuit(args.circuit)
    proof = _parse_proof(args.proof, circuit)
    try:
        traj = run(circuit, proof)
    except ZeroProbabilityOutcome as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    text = _dumps(traj.to_json_dict())
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_tame(args) -> int:
    circuit = _read_circuit(args.circuit)
    report = check_tame(circuit, n_samples=args.samples, tol=args.tol, seed=args.seed)
    sys.stdout.write(_dumps(report.to_json_dict()))
    return EXIT_OK if report.is_tame else EXIT_TAMENESS


def _cmd_compile(args) -> int:
    circuit = _read_circuit(args.circuit)
    try:
        ham = compile_circuit(
            circuit,
            include_input=args.include_input,
            include_output=args.include_output,
            literal=args.literal_paper,
            tame_seed=args.seed,
        )
    except TamenessRequired as exc:
        print(f"compile failed: {exc}", file=sys.stderr)
        return EXIT_TAMENESS
    except ValueError as exc:
        print(f"compile failed: {exc}", file=sys.stderr)
        return EXIT_DATA
    write_hamiltonian(ham, args.out)
    print(f"wrote {args.out} and {args.out}.json (dim {ham.dim}, {len(ham.terms)} terms)")
    return EXIT_OK


def _cmd_spectrum(args) -> int:
    try:
        matrix = load_matrix(args.matrix)
    except (OSError, ValueError) as exc:
        print(f"cannot read {args.matrix}: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        report = eigen_spectrum(
            matrix, method=args.method, k=args.k,
            kernel_tol=args.kernel_tol, dense_limit=args.dense_limit,
        )
    except DimensionTooLarge as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DATA
    text = _dumps(report.to_json_dict())
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    try:
        smallest_nonzero(report)
    except AmbiguousKernelEdge as exc:
        print(f"warning: {exc}", file=sys.stderr)
        return EXIT_AMBIGUOUS
    except ValueError:
        pass
    return EXIT_OK


def _cmd_verify(args) -> int:
    circuit = _read_circuit(args.circuit)
    proof = _parse_proof(args.proof, circuit)
    tame = check_tame(circuit, n_samples=args.samples, tol=args.tol, seed=args.seed)
    print(f"tameness: is_tame={tame.is_tame} "
          f"spread={tame.max_prob_deviation:.3e} "
          f"certificate_residual={tame.unitarity_residual:.3e}")
    for i, p in enumerate(tame.step_probs):
        print(f"  measurement {i}: p = {p!r}")
    if not tame.is_tame:
        print("FAIL: tameness", file=sys.stderr)
        return EXIT_CHECK
    ham = compile_circuit(circuit, literal=args.literal_paper, tame_seed=args.seed)
    eta = history_state(circuit, proof)
    residual = verify_kernel(ham, eta.vector)
    print(f"kernel residual: {residual:.3e} (tol {args.tol:g})")
    for entry in ham.term_summary():
        print(f"  term {entry['label']}: nnz={entry['nnz']} norm_bound={entry['norm_bound']:.6g}")
    if residual > args.tol:
        print("FAIL: kernel residual", file=sys.stderr)
        return EXIT_CHECK
    print("all checks passed")
    return EXIT_OK


def _cmd_family(args) -> int:
    circuit = _FAMILIES[args.kind](args.n)
    if args.emit == "circuit":
        text = serialize_circuit(circuit)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    if not args.out:
        print("--emit hamiltonian requires --out", file=sys.stderr)
        return EXIT_USAGE
    ham = compile_circuit(circuit, literal=args.literal_paper)
    write_hamiltonian(ham, args.out)
    print(f"wrote {args.out} and {args.out}.json (dim {ham.dim})")
    return EXIT_OK


def _cmd_scaling(args, parser) -> int:
    try:
        n_range = _parse_range(args.n)
    except ValueError as exc:
        parser.error(str(exc))
    cfg = ExperimentConfig(
        family=args.family,
        n_range=n_range,
        method=args.method,
        kernel_tol=args.kernel_tol,
        seed=args.seed,
        output_dir=args.out,
        literal=args.literal_paper,
        stable_output=args.stable_output,
        k=args.k,
        dense_limit=args.dense_limit,
    )
    try:
        rows, choice = run_scaling_experiment(cfg)
    except TamenessRequired as exc:
        print(f"scaling failed: {exc}", file=sys.stderr)
        return EXIT_TAMENESS
    _write_scaling_outputs(cfg, rows, choice)
    for r in rows:
        lam = "ambiguous" if r["flag"] else f"{r['lambda_min']:.6e}"
        print(f"n={r['n']} dim={r['dim']} kernel_dim={r['kernel_dim']} lambda_min={lam}")
    if choice is not None:
        print(f"model comparison: best={choice.best} verdict={choice.verdict} "
              f"rmse_ratio={choice.rmse_ratio:.4f}")
    if any(r["flag"] for r in rows):
        print("warning: some rows are numerically ambiguous", file=sys.stderr)
        return EXIT_AMBIGUOUS
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="hamforge",
                     description="Clock Hamiltonians for post-selected quantum circuits")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse and validate a circuit file", parents=[])
    p.add_argument("circuit")
    p.add_argument("--echo", action="store_true", help="print the normalized serialization")

    p = sub.add_parser("simulate", help="run a circuit on a proof state")
    p.add_argument("circuit")
    p.add_argument("--proof", help='basis label like "0+1" or JSON [[re,im],...]')
    p.add_argument("--out", help="write trajectory JSON here instead of stdout")

    p = sub.add_parser("tame", help="certify tame post-selection")
    p.add_argument("circuit")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("compile", help="compile a circuit to a clock Hamiltonian")
    p.add_argument("circuit")
    p.add_argument("--out", required=True, help="Matrix Market output path")
    p.add_argument("--include-input", action="store_true")
    p.add_argument("--include-output", action="store_true")
    p.add_argument("--literal-paper", action="store_true")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("spectrum", help="eigenvalues of an exported Hamiltonian")
    p.add_argument("matrix")
    p.add_argument("--method", choices=("dense", "iterative"), default="dense")
    p.add_argument("--k", type=int, default=None, help="eigenvalue count (iterative)")
    p.add_argument("--kernel-tol", type=float, default=None)
    p.add_argument("--dense-limit", type=int, default=10_000)
    p.add_argument("--out")

    p = sub.add_parser("verify", help="tameness + history-state kernel membership")
    p.add_argument("circuit")
    p.add_argument("--proof")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--literal-paper", action="store_true")

    p = sub.add_parser("family", help="emit a benchmark family instance")
    p.add_argument("--kind", choices=("f1", "f2", "gadget"), required=True)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--emit", choices=("circuit", "hamiltonian"), default="circuit")
    p.add_argument("--out")
    p.add_argument("--literal-paper", action="store_true")

    p = sub.add_parser("scaling", help="gap-scaling experiment over a family sweep")
    p.add_argument("--family", choices=("f1", "f2"), required=True)
    p.add_argument("--n", required=True, help="inclusive range like 2..7")
    p.add_argument("--method", choices=("auto", "dense", "iterative"), default="auto")
    p.add_argument("--kernel-tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--dense-limit", type=int, default=10_000)
    p.add_argument("--literal-paper", action="store_true")
    p.add_argument("--stable-output", action="store_true",
                   help="zero the wall_ms column for byte-reproducible CSV")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if args.command == "parse":
            return _cmd_parse(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "tame":
            return _cmd_tame(args)
        if args.command == "compile":
            return _cmd_compile(args)
        if args.command == "spectrum":
            return _cmd_spectrum(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "family":
            return _cmd_family(args)
        if args.command == "scaling":
            return _cmd_scaling(args, parser)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except ZeroProbabilityOutcome as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CHECK
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
