"""Command-line interface: ``ages <verb> [options]``.

Every verb writes a JSON manifest next to its first output file (or to
``--manifest``).  ``ages replay MANIFEST`` re-runs the recorded command in
memory and compares output digests.

Exit status: 0 ok, 1 usage, 2 numeric failure, 3 input/output failure,
4 replay mismatch.  Errors are one line on stderr, ``error[<kind>]: ...``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .aggregate import ages_run, true_apdag
from .equivalence import ClassTooLarge
from .evaluation import (
    ExperimentConfig,
    path_correctness_rates,
    run_experiment,
    write_records_csv,
    write_summary_csv,
)
from .faithfulness import ages_strong_faithful, path_strong_faithfulness, region_map, strong_faithful
from .ges import ges_run, solution_path
from .graph import GraphError, MixedGraph
from .io import (
    FormatError,
    dumps_json,
    format_edges,
    format_matrix_csv,
    format_path,
    format_sem,
    graph_to_json,
    parse_edges,
    parse_matrix_csv,
    parse_sem,
    path_to_json,
)
from .score import DomainError, bic_lambda
from .sem import (
    ConfigError,
    CovarianceSource,
    SemGenConfig,
    SingularError,
    make_rng,
    random_sem,
    sample_covariance,
    sample_data,
    true_covariance,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO, EXIT_REPLAY = 0, 1, 2, 3, 4

# argument names holding paths of files the verb reads or writes
INPUT_DESTS = ("data", "cov", "sem", "graph")
OUTPUT_DESTS = ("out", "sem_out", "data_out", "cov_out", "records", "summary", "path_rates")


class UsageError(Exception):
    pass


class ReplayMismatch(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class Run:
    """Collects the inputs read and outputs produced by one command."""

    def __init__(self):
        self.inputs: dict = {}
        self.outputs: dict = {}
        self.resolved: dict = {}

    def read(self, dest: str, path) -> str:
        data = Path(path).read_bytes()
        self.inputs[dest] = {"path": str(Path(path).resolve()), "sha256": _sha256(data)}
        return data.decode("utf-8")

    def emit(self, dest: str, path, text: str):
        key = dest if path is not None else "stdout"
        self.outputs[key] = (None if path is None else str(path), text.encode("utf-8"))


# ---- shared helpers ---------------------------------------------------


def _source(args, run: Run):
    """Covariance source and variable labels from ``--data``, ``--cov`` or ``--sem``."""
    given = [d for d in ("data", "cov", "sem") if getattr(args, d, None)]
    if len(given) != 1:
        raise UsageError("give exactly one of --data, --cov, --sem")
    kind = given[0]
    if kind == "data":
        if args.oracle:
            raise UsageError("--oracle cannot be combined with --data")
        text = run.read("data", args.data)
        first = text.splitlines()[0] if text.strip() else ""
        header = bool(first) and any(not _is_number(c) for c in first.split(","))
        X, names = parse_matrix_csv(text, header=header)
        if X.shape[0] < 2:
            raise FormatError("need at least two data rows")
        return CovarianceSource(sample_covariance(X), n=X.shape[0]), names
    if kind == "cov":
        if args.n is None and not args.oracle:
            raise UsageError("--cov needs --n (sample covariance) or --oracle (exact covariance)")
        if args.n is not None and args.oracle:
            raise UsageError("--n and --oracle are exclusive")
        sigma, _ = parse_matrix_csv(run.read("cov", args.cov))
        labels = None
        lp = Path(str(args.cov) + ".labels")
        if lp.exists():
            labels = [s.strip() for s in run.read("cov_labels", lp).splitlines() if s.strip()]
        return CovarianceSource(sigma, n=args.n), labels
    if not args.oracle:
        raise UsageError("--sem needs --oracle; use 'simulate' to draw data from a SEM")
    return true_covariance(_read_sem(args, run)), None


def _read_sem(args, run):
    return parse_sem(run.read("sem", args.sem))


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _graph_text(g: MixedGraph, args, labels=None, extra: Optional[dict] = None) -> str:
    if args.format == "json":
        d = graph_to_json(g, labels)
        d.update(extra or {})
        return dumps_json(d)
    text = format_edges(g, labels)
    if extra:
        comments = "".join(f"# {k}: {_plain(v)}\n" for k, v in sorted(extra.items()))
        text = comments + text
    return text


def _plain(v) -> str:
    if isinstance(v, (list, tuple)):
        return " ".join(map(str, v)) if v else "none"
    return str(v)


def _edge_string(g: MixedGraph) -> str:
    parts = [f"{i}->{j}" for i, j in g.directed_edges()] + [f"{i}--{j}" for i, j in g.undirected_edges()]
    return ";".join(parts)


def _emit_labels(args, run, labels):
    if labels is not None and args.out:
        run.emit("out_labels", str(args.out) + ".labels", "\n".join(labels) + "\n")


def _jobs(args) -> Optional[int]:
    return args.jobs if getattr(args, "jobs", None) else None


# ---- verbs ------------------------------------------------------------


def cmd_simulate(args, run):
    if args.data_out and args.n is None:
        raise UsageError("--data-out needs --n")
    cfg = SemGenConfig(args.p, args.qs, args.qw, seed=args.seed, permute=args.permute)
    sem_ss, data_ss = np.random.SeedSequence(args.seed).spawn(2)
    m = random_sem(cfg, rng=make_rng(sem_ss))
    run.emit("sem_out", args.sem_out, format_sem(m))
    names = [f"X{k + 1}" for k in range(m.p)]
    if args.data_out:
        X, _ = sample_data(m, args.n, data_ss)
        run.emit("data_out", args.data_out, format_matrix_csv(X, header=names))
    if args.cov_out:
        run.emit("cov_out", args.cov_out, format_matrix_csv(true_covariance(m).sigma))


def cmd_ges(args, run):
    src, labels = _source(args, run)
    lam = args.lam if args.lam is not None else (0.0 if src.oracle else bic_lambda(src.n))
    run.resolved["lambda"] = lam
    cpdag, _ = ges_run(src, lam)
    run.emit("out", args.out, _graph_text(cpdag, args, labels))
    _emit_labels(args, run, labels)


def cmd_path(args, run):
    src, _ = _source(args, run)
    path = solution_path(src, args.lambda_min, backward=args.backward)
    run.resolved["lambda_min"] = path.lambda_min
    text = dumps_json(path_to_json(path)) if args.format == "json" else format_path(path)
    run.emit("out", args.out, text)


def cmd_ages(args, run):
    src, labels = _source(args, run)
    res = ages_run(src, args.lambda_min, backward=args.backward)
    run.resolved["lambda_min"] = res.path.lambda_min
    extra = {"discarded": list(res.discarded), "conflicts": res.apdag.conflicts, "rejected": list(res.apdag.rejected)}
    run.emit("out", args.out, _graph_text(res.apdag, args, labels, extra))
    _emit_labels(args, run, labels)


def cmd_true_apdag(args, run):
    m = _read_sem(args, run)
    run.emit("out", args.out, _graph_text(true_apdag(m), args))


def _report_dict(rep, kind, delta):
    return {
        "kind": kind,
        "delta": delta,
        "holds": rep.holds,
        "n_checked": rep.n_checked,
        "exact_ties": rep.exact_ties,
        "min_margin": None if math.isinf(rep.min_margin) else rep.min_margin,
        "violations": [
            {"i": v.i, "j": v.j, "s": sorted(v.s), "abs_rho": v.abs_rho, "delta": v.delta} for v in rep.violations
        ],
    }


def cmd_check_faithfulness(args, run):
    m = _read_sem(args, run)
    if args.kind == "path":
        if args.delta is not None or args.graph:
            raise UsageError("--delta and --graph apply to --kind classical and ages only")
        rep = path_strong_faithfulness(m)
    else:
        if args.delta is None:
            raise UsageError(f"--kind {args.kind} needs --delta")
        g = parse_edges(run.read("graph", args.graph)) if args.graph else m.dag
        if g.p != m.p:
            raise UsageError(f"graph has {g.p} vertices, SEM has {m.p}")
        fn = strong_faithful if args.kind == "classical" else ages_strong_faithful
        rep = fn(true_covariance(m), g, args.delta)
    d = _report_dict(rep, args.kind, args.delta)
    if args.format == "json":
        text = dumps_json(d)
    else:
        lines = [
            f"kind {d['kind']}",
            f"holds {str(d['holds']).lower()}",
            f"checked {d['n_checked']}",
            f"exact_ties {d['exact_ties']}",
            f"min_margin {'NA' if d['min_margin'] is None else repr(float(d['min_margin']))}",
        ]
        for v in d["violations"]:
            s = "{" + ",".join(map(str, v["s"])) + "}"
            lines.append(f"violation {v['i']} {v['j']} {s} {float(v['abs_rho'])!r} {float(v['delta'])!r}")
        text = "\n".join(lines) + "\n"
    run.emit("out", args.out, text)


def cmd_region(args, run):
    cells = region_map(args.resolution, tuple(args.range), args.b12, jobs=_jobs(args))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["b13", "b23", "region", "a0_edges", "a_edges"])
    for c in cells:
        w.writerow([repr(float(c.b13)), repr(float(c.b23)), c.region, _edge_string(c.a0), _edge_string(c.a_oracle)])
    run.emit("out", args.out, buf.getvalue())


def cmd_eval(args, run):
    policy = args.lambda_policy
    lambdas = tuple(args.lam or ())
    cfg = ExperimentConfig(args.p, args.n, args.qs, args.qw, policy, lambdas, args.reps, args.seed)
    run.resolved["experiment"] = cfg.as_dict()
    res = run_experiment(cfg, jobs=_jobs(args))
    run.resolved["skipped_replicates"] = list(res.skipped)
    buf = io.StringIO()
    write_records_csv(res.records, buf, runtime=args.runtime)
    run.emit("records", args.records, buf.getvalue())
    buf = io.StringIO()
    write_summary_csv(res.summary(), buf)
    run.emit("summary", args.summary, buf.getvalue())
    if args.path_rates:
        rows, _ = path_correctness_rates(cfg, jobs=_jobs(args))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replicate", "n_subcpdags", "correct_subcpdags", "n_oriented", "correct_orientations"])
        for r in rows:
            w.writerow([r.replicate, r.n_subcpdags, repr(float(r.correct_subcpdags)), r.n_oriented, repr(float(r.correct_orientations))])
        run.emit("path_rates", args.path_rates, buf.getvalue())


# ---- parser -----------------------------------------------------------


def _add_source(p, lam_flag: str):
    p.add_argument("--data", help="data CSV (rows are observations; optional header of names)")
    p.add_argument("--cov", help="covariance CSV without header")
    p.add_argument("--sem", help="SEM file; requires --oracle")
    p.add_argument("--n", type=int, help="sample size behind --cov")
    p.add_argument("--oracle", action="store_true", help="treat the covariance as exact")
    if lam_flag == "lambda":
        p.add_argument("--lambda", dest="lam", type=float, help="penalty (default: BIC, or 0 in oracle mode)")
    else:
        p.add_argument("--lambda-min", dest="lambda_min", type=float, help="smallest path penalty (default as for ges)")
        p.add_argument("--backward", choices=("lower", "exact"), default="lower", help="backward-phase evaluation")


def _add_common(p, fmt: bool = True):
    if fmt:
        p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--manifest", help="manifest path (default: first output file + .manifest.json)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ages", description="Aggregated greedy equivalence search for linear Gaussian SEMs.")
    parser.add_argument("--version", action="version", version=f"ages {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="VERB", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="draw a random SEM and optionally data from it")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--qs", type=float, required=True, help="probability of a strong edge")
    p.add_argument("--qw", type=float, required=True, help="probability of a weak edge")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, help="number of samples for --data-out")
    p.add_argument("--permute", action="store_true", help="randomly relabel the vertices")
    p.add_argument("--sem-out", required=True)
    p.add_argument("--data-out")
    p.add_argument("--cov-out", help="write the exact covariance")
    _add_common(p, fmt=False)
    p.set_defaults(func=cmd_simulate)

    for name, fn, lam_flag, desc in (
        ("ges", cmd_ges, "lambda", "GES estimate (CPDAG edge list)"),
        ("path", cmd_path, "path", "GES solution path"),
        ("ages", cmd_ages, "path", "AGES estimate (APDAG edge list)"),
    ):
        p = sub.add_parser(name, help=desc)
        _add_source(p, lam_flag)
        p.add_argument("--out", help="output file (default: stdout)")
        _add_common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("true-apdag", help="target APDAG of a SEM")
    p.add_argument("--sem", required=True)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_true_apdag)

    p = sub.add_parser("check-faithfulness", help="strong-faithfulness diagnostics for a SEM")
    p.add_argument("--sem", required=True)
    p.add_argument("--kind", choices=("path", "classical", "ages"), default="path")
    p.add_argument("--delta", type=float)
    p.add_argument("--graph", help="edge list to check against (default: the SEM's DAG)")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_check_faithfulness)

    p = sub.add_parser("region", help="three-vertex region map as CSV")
    p.add_argument("--resolution", type=int, default=81)
    p.add_argument("--range", type=float, nargs=2, default=[-2.0, 2.0], metavar=("LO", "HI"))
    p.add_argument("--b12", type=float, default=0.1)
    p.add_argument("--jobs", type=int, help="worker processes (default: $AGES_JOBS or 1)")
    p.add_argument("--out")
    _add_common(p, fmt=False)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("eval", help="replicated GES versus AGES experiment")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--qs", type=float, required=True)
    p.add_argument("--qw", type=float, required=True)
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda-policy", choices=("bic", "fixed", "grid"), default="bic")
    p.add_argument("--lambda", dest="lam", type=float, action="append", help="penalty; repeat for a grid")
    p.add_argument("--records", default="records.csv")
    p.add_argument("--summary", default="summary.csv")
    p.add_argument("--path-rates", help="also write oracle path correctness rates")
    p.add_argument("--runtime", action="store_true", help="add a wall-time column (not reproducible)")
    p.add_argument("--jobs", type=int, help="worker processes (default: $AGES_JOBS or 1)")
    _add_common(p, fmt=False)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("replay", help="re-run a manifest and compare output digests")
    p.add_argument("manifest_file", metavar="MANIFEST")
    p.set_defaults(func=None)
    return parser


# ---- manifests and dispatch -------------------------------------------

VOLATILE = ("func", "manifest", "jobs")


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in VOLATILE}


def _manifest(args, argv, run: Run) -> dict:
    return {
        "command": args.command,
        "argv": list(argv),
        "config": _config(args),
        "resolved": run.resolved,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "inputs": run.inputs,
        "outputs": {k: {"path": p, "sha256": _sha256(b)} for k, (p, b) in sorted(run.outputs.items())},
    }


def _execute(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        return _replay(parser, args.manifest_file)
    run = Run()
    args.func(args, run)
    for key, (path, data) in run.outputs.items():
        if path is None:
            sys.stdout.write(data.decode("utf-8"))
            sys.stdout.flush()
        else:
            Path(path).write_bytes(data)
    files = [p for p, _ in run.outputs.values() if p is not None]
    target = args.manifest or (files[0] + ".manifest.json" if files else None)
    if target:
        Path(target).write_text(dumps_json(_manifest(args, argv, run)))
    return EXIT_OK


def _replay(parser, manifest_file) -> int:
    try:
        man = json.loads(Path(manifest_file).read_text())
        argv = man["argv"]
        recorded_out = man["outputs"]
        recorded_in = man["inputs"]
    except (KeyError, TypeError, json.JSONDecodeError) as e:
        raise FormatError(f"not a manifest: {e}") from None
    if man.get("version") != __version__:
        raise ReplayMismatch(f"manifest version {man.get('version')} differs from {__version__}")
    args = parser.parse_args(argv)
    if args.command == "replay":
        raise UsageError("a replay manifest cannot itself be replayed")
    for dest, rec in recorded_in.items():
        data = Path(rec["path"]).read_bytes()
        if _sha256(data) != rec["sha256"]:
            raise ReplayMismatch(f"input {dest} ({rec['path']}) changed since the manifest was written")
        if dest in INPUT_DESTS:
            setattr(args, dest, rec["path"])
    run = Run()
    args.func(args, run)
    got = {k: _sha256(b) for k, (_, b) in run.outputs.items()}
    want = {k: v["sha256"] for k, v in recorded_out.items()}
    if got != want:
        diff = sorted(k for k in set(got) | set(want) if got.get(k) != want.get(k))
        raise ReplayMismatch("output digests differ for " + ", ".join(diff))
    sys.stdout.write(f"replay ok: {len(want)} output(s) match\n")
    return EXIT_OK


def _fail(kind: str, code: int, exc) -> int:
    msg = " ".join(str(exc).split()) or type(exc).__name__
    sys.stderr.write(f"error[{kind}]: {msg}\n")
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return _execute(argv)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); stay quiet like other filters
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except ReplayMismatch as e:
        return _fail("replay", EXIT_REPLAY, e)
    except (UsageError, ConfigError, DomainError) as e:
        return _fail("usage", EXIT_USAGE, e)
    except (FormatError, GraphError, OSError, UnicodeDecodeError) as e:
        return _fail("io", EXIT_IO, e)
    except (SingularError, ClassTooLarge, ArithmeticError, np.linalg.LinAlgError) as e:
        return _fail("numeric", EXIT_NUMERIC, e)
    except ValueError as e:
        return _fail("usage", EXIT_USAGE, e)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
