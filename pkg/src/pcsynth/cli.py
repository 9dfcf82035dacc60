"""Command-line interface: ``pcsynth <command> [flags]``.

Exit codes: 0 success or valid certificate, 1 invalid certificate,
2 infeasible, 3 numerical failure, 64 usage error, 65 bad input data,
66 missing input file.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .controller import (
    CertificateError,
    level_set_csv,
    level_set_samples,
    simulate,
    simulate_lpv,
    verify_certificate,
)
from .graph import GraphError, LabeledGraph, debruijn, load_graph
from .model import (
    EXAMPLES,
    ModelError,
    SwitchedSystem,
    SwitchingSignal,
    example_family,
    load_system,
    random_simplex_weights,
)
from .sdp import SolverOptions, Status
from .synthesis import (
    BUNDLED,
    BracketError,
    Certificate,
    Infeasible,
    Kind,
    NumericalFailure,
    SynthesisRequest,
    attempt,
    bundled_certificate,
    load_certificate,
    max_parameter,
    min_decay_rate,
    save_certificate,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_NOINPUT = 66

TABLE_DEFAULT_ORDERS = {1: (0, 1, 2, 3, 5), 2: (0, 2, 4, 6, 10), 3: (0, 1, 2, 3, 4)}
PARAMETRIC = ("ex1", "ex2")

log = logging.getLogger("pcsynth")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    """Everything needed to re-run a command; written next to its outputs."""

    command: str
    arguments: list
    seed: Optional[int]
    tool_version: str = __version__
    python: str = field(default_factory=platform.python_version)
    numpy: str = np.__version__
    wall_time: float = 0.0
    result: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _add_system(p, required=True):
    grp = p.add_mutually_exclusive_group(required=required)
    grp.add_argument("--system", metavar="FILE", help="system JSON file")
    grp.add_argument("--example", choices=sorted(EXAMPLES), help="built-in example family")
    p.add_argument("--alpha", type=float, help="parameter of the ex1/ex2 families")


def _add_graph(p, orders=False):
    grp = p.add_mutually_exclusive_group()
    if orders:
        grp.add_argument("--orders", type=_int_list, metavar="LIST", help="De Bruijn orders, e.g. 0,1,2")
    else:
        grp.add_argument("--order", type=int, metavar="L", help="De Bruijn graph order")
    grp.add_argument("--graph", metavar="FILE", help="labeled graph JSON file")


def _add_solver(p):
    p.add_argument("--solver-tol", type=float, default=1e-8, help="interior-point tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pcsynth", description="Piecewise-linear feedback synthesis for switched linear systems.")
    parser.add_argument("--version", action="version", version=f"pcsynth {__version__}")
    parser.add_argument("--verbose", action="store_true", help="solver trace and progress on stderr")
    parser.add_argument("--manifest", metavar="FILE", help="where to write the run manifest")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="synthesize one certificate")
    _add_system(p)
    _add_graph(p)
    p.add_argument("--kind", default="robust", choices=["robust", "mode-dependent"])
    p.add_argument("--gamma", type=float, default=1.0, help="decay rate to certify")
    p.add_argument("--out", metavar="FILE", help="certificate JSON (default stdout)")
    _add_solver(p)

    p = sub.add_parser("verify", help="check a certificate edge by edge")
    _add_system(p, required=False)
    p.add_argument("--cert", required=True, metavar="FILE|" + "|".join(BUNDLED))
    p.add_argument("--gamma", type=float, help="override the certified decay rate")
    p.add_argument("--method", choices=["eigen", "cholesky"], default="eigen")

    p = sub.add_parser("simulate", help="closed-loop trajectory as CSV")
    _add_system(p, required=False)
    p.add_argument("--cert", required=True)
    sig = p.add_mutually_exclusive_group()
    sig.add_argument("--signal", default="random", help="periodic:1,2,3 | random[:SEED] | 1,2,1,...")
    sig.add_argument("--lpv", action="store_true", help="random convex combinations of the modes")
    p.add_argument("--x0", type=_float_list, required=True)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="FILE")

    p = sub.add_parser("levelset", help="unit level set of W as CSV")
    p.add_argument("--cert", required=True)
    p.add_argument("--resolution", type=int, default=360)
    p.add_argument("--out", metavar="FILE")

    p = sub.add_parser("sweep", help="extremal alpha or gamma per graph order")
    _add_system(p)
    _add_graph(p, orders=True)
    p.add_argument("--kind", default="robust", choices=["robust", "mode-dependent"])
    p.add_argument("--quantity", choices=["alpha", "gamma"],
                   help="default: alpha for ex1/ex2, gamma otherwise")
    p.add_argument("--bracket", type=_float_list, help="LO,HI search interval")
    p.add_argument("--gamma", type=float, default=1.0, help="decay rate held fixed in alpha sweeps")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out", metavar="FILE")
    _add_solver(p)

    p = sub.add_parser("table", help="extremal-value tables for ex2, ex3 and ex5")
    p.add_argument("--which", type=int, choices=[1, 2, 3], required=True)
    p.add_argument("--orders", type=_int_list)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out", metavar="FILE")
    _add_solver(p)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest_file", metavar="MANIFEST")
    return parser


def _system(args, meta: Optional[dict] = None) -> SwitchedSystem:
    if getattr(args, "system", None):
        if args.alpha is not None:
            raise UsageError("--alpha only applies to --example ex1/ex2")
        return load_system(_read(args.system))
    name = getattr(args, "example", None)
    alpha = getattr(args, "alpha", None)
    if name is None and meta and "system" in meta:
        name = meta["system"]["example"]
        if alpha is None:
            alpha = meta["system"].get("alpha")
    if name is None:
        raise UsageError("one of --system or --example is required")
    if name in PARAMETRIC and alpha is None:
        raise UsageError(f"--example {name} needs --alpha")
    if name not in PARAMETRIC and alpha is not None:
        raise UsageError(f"--alpha does not apply to {name}")
    return example_family(name, alpha)


def _graph(args, M: int) -> LabeledGraph:
    if args.graph:
        return load_graph(_read(args.graph))
    return debruijn(M, args.order if args.order is not None else 0)


def _certificate(spec: str) -> tuple[Certificate, dict]:
    if spec in BUNDLED:
        return bundled_certificate(spec)
    cert = load_certificate(_read(spec))
    return cert, {}


def _options(args) -> SolverOptions:
    return SolverOptions(
        tolerance=getattr(args, "solver_tol", 1e-8),
        trace=sys.stderr if args.verbose else None,
    )


def cmd_synth(args) -> tuple[int, dict]:
    sys_ = _system(args)
    g = _graph(args, sys_.M)
    req = SynthesisRequest(sys_, g, Kind.parse(args.kind), args.gamma, args.alpha)
    res = attempt(req, _options(args))
    summary = {"status": res.status.value, "nodes": g.node_count, "edges": len(g.edges)}
    if res.solution is not None:
        summary["margin"] = res.solution.margin
    if res.feasible:
        _write(args.out, save_certificate(res.certificate) + "\n")
        print(f"feasible: margin {res.solution.margin:.6e}", file=sys.stderr)
        return EXIT_OK, summary
    print(f"{res.status.value}: {res.reason}", file=sys.stderr)
    return (EXIT_INFEASIBLE if res.status is Status.INFEASIBLE else EXIT_NUMERICAL), summary


def cmd_verify(args) -> tuple[int, dict]:
    cert, meta = _certificate(args.cert)
    sys_ = _system(args, meta)
    report = verify_certificate(sys_, cert, args.gamma, args.method)
    print("\n".join(report.lines(cert.graph.node_names)))
    summary = {"valid": report.valid, "max_margin": report.max_margin, "gamma": report.gamma}
    return (EXIT_OK if report.valid else EXIT_INVALID), summary


def cmd_simulate(args) -> tuple[int, dict]:
    cert, meta = _certificate(args.cert)
    sys_ = _system(args, meta)
    if args.steps < 0:
        raise UsageError("--steps must be non-negative")
    names = cert.graph.node_names
    if args.lpv:
        weights = random_simplex_weights(sys_.M, args.steps, args.seed)
        traj = simulate_lpv(sys_, cert, weights, args.x0, args.steps)
        labels = None
    else:
        signal = SwitchingSignal.parse(args.signal, sys_.M, args.steps, args.seed)
        traj = simulate(sys_, cert, signal, args.x0, args.steps)
        labels = list(signal)
    _write(args.out, traj.to_csv(labels, names))
    active = sorted({names[int(s)] for s in traj.active_nodes[:-1]}) if traj.steps else []
    summary = {
        "final_norm": float(np.linalg.norm(traj.states[-1])),
        "active_nodes": active,
        "decrease_violations": len(traj.decrease_violations()),
        "diverged_at": traj.diverged_at,
    }
    return EXIT_OK, summary


def cmd_levelset(args) -> tuple[int, dict]:
    cert, _ = _certificate(args.cert)
    samples = level_set_samples(cert, args.resolution)
    _write(args.out, level_set_csv(samples, cert.graph.node_names))
    return EXIT_OK, {"samples": len(samples)}


def _sweep_rows(orders, values) -> str:
    return ",".join(["l", *map(str, orders)]) + "\n" + ",".join(
        ["value", *(f"{v:.6f}" for v in values)]
    ) + "\n"


def _run_sweep(make_graph, orders, solve_one):
    values = []
    for l in orders:
        t = time.perf_counter()
        v = solve_one(make_graph(l))
        log.info("order %d: %.6f (%.1fs)", l, v, time.perf_counter() - t)
        values.append(v)
    return values


def cmd_sweep(args) -> tuple[int, dict]:
    kind = Kind.parse(args.kind)
    opts = _options(args)
    quantity = args.quantity or ("alpha" if args.example in PARAMETRIC else "gamma")
    if quantity == "alpha":
        if args.example not in PARAMETRIC:
            raise UsageError("alpha sweeps need --example ex1 or ex2")
        if args.alpha is not None:
            raise UsageError("--alpha is the swept quantity")
        M = example_family(args.example, 0.5).M
        bracket = tuple(args.bracket) if args.bracket else (0.3, 0.9)

        def solve_one(g):
            return max_parameter(args.example, g, kind, bracket, args.tol, opts, args.gamma)[0]
    else:
        sys_ = _system(args)
        M = sys_.M
        bracket = tuple(args.bracket) if args.bracket else None

        def solve_one(g):
            return min_decay_rate(sys_, g, kind, args.tol, opts, bracket)[0]

    if bracket is not None and len(bracket) != 2:
        raise UsageError("--bracket takes LO,HI")
    if args.graph:
        orders = ["file"]
        values = [solve_one(load_graph(_read(args.graph)))]
    else:
        orders = args.orders if args.orders is not None else [0, 1, 2]
        values = _run_sweep(lambda l: debruijn(M, l), orders, solve_one)
    _write(args.out, _sweep_rows(orders, values))
    return EXIT_OK, {"quantity": quantity, "orders": list(orders), "values": values}


def table_values(which: int, orders, tol: float = 1e-4, options: Optional[SolverOptions] = None) -> list[float]:
    """Per De Bruijn order: max alpha of ex2 (1), min decay rate of ex3 (2) or ex5 mode-dependent (3)."""
    if which == 1:
        return _run_sweep(
            lambda l: debruijn(2, l), orders,
            lambda g: max_parameter("ex2", g, Kind.ROBUST, tol=tol, options=options)[0],
        )
    if which == 2:
        sys_, M, kind = example_family("ex3"), 2, Kind.ROBUST
    elif which == 3:
        sys_, M, kind = example_family("ex5"), 4, Kind.MODE_DEPENDENT
    else:
        raise ValueError(f"no table {which}")
    return _run_sweep(
        lambda l: debruijn(M, l), orders,
        lambda g: min_decay_rate(sys_, g, kind, tol, options)[0],
    )


def cmd_table(args) -> tuple[int, dict]:
    orders = args.orders if args.orders is not None else list(TABLE_DEFAULT_ORDERS[args.which])
    if any(l < 0 for l in orders):
        raise UsageError("orders must be non-negative")
    values = table_values(args.which, orders, args.tol, _options(args))
    _write(args.out, _sweep_rows(orders, values))
    return EXIT_OK, {"which": args.which, "orders": orders, "values": values}


COMMANDS = {
    "synth": cmd_synth,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "levelset": cmd_levelset,
    "sweep": cmd_sweep,
    "table": cmd_table,
}


def _manifest_path(args) -> Optional[Path]:
    if args.manifest:
        return Path(args.manifest)
    out = getattr(args, "out", None)
    if out and out != "-":
        return Path(out + ".manifest.json")
    return None


def main(argv: Optional[list] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command == "replay":
        try:
            doc = json.loads(_read(args.manifest_file))
            return main(list(doc["arguments"]))
        except (OSError, FileNotFoundError) as exc:
            print(f"pcsynth: {exc}", file=sys.stderr)
            return EXIT_NOINPUT
        except (ValueError, KeyError, TypeError) as exc:
            print(f"pcsynth: bad manifest: {exc}", file=sys.stderr)
            return EXIT_DATA

    start = time.perf_counter()
    try:
        code, summary = COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"pcsynth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"pcsynth: {exc}", file=sys.stderr)
        return EXIT_NOINPUT
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (BracketError, ModelError, GraphError, CertificateError, KeyError, ValueError) as exc:
        print(f"pcsynth: {exc}", file=sys.stderr)
        return EXIT_DATA

    path = _manifest_path(args)
    if path is not None:
        manifest = RunManifest(
            command=args.command,
            arguments=argv,
            seed=getattr(args, "seed", None),
            wall_time=time.perf_counter() - start,
            result={"exit_code": code, **summary},
        )
        path.write_text(manifest.to_json() + "\n", encoding="utf-8")
    return code


if __name__ == "__main__":
    sys.exit(main())
