"""Command line front end: selection, verification, enumeration, sweeps, solves.

Every command resolves its output directory from --out, then the KGTORUS_OUT
environment variable, then the working directory, and writes a manifest next
to its outputs listing every file produced, the config snapshot, input hashes,
library versions and wall time.  Outputs are deterministic given identical
inputs and seed; the manifest is the only file carrying timestamps.

Exit codes: 0 success, 1 assertion or verification failure, 2 resource or
search exhaustion, 3 bad input (malformed flags, config, or data files).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from importlib import metadata, resources
from pathlib import Path
import platform

import jsonschema
import numpy as np
import scipy

from .basis import BasisSelectionError, FrequencyBasis, select_basis
from .characteristics import (
    AdjacencySet,
    cluster_decomposition,
    enumerate_characteristics,
    theta_zoo,
)
from .fourier import CosineSeries, Nonlinearity
from .linop import SweepThresholds, theta_bad_sweep
from .newton import NewtonTrace, SolverParameters, q_solve, run

__all__ = ["main"]

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_EXHAUSTED = 2
EXIT_BAD_INPUT = 3


class UsageError(Exception):
    """Bad flags, malformed files, or schema violations; maps to exit 3."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# schema plumbing

def _load_schema(name: str) -> dict:
    path = resources.files("kgtorus").joinpath("schemas", name)
    return json.loads(path.read_text(encoding="utf-8"))


def _resolve_refs(node):
    """Inline $ref entries pointing at sibling schema files."""
    if isinstance(node, dict):
        ref = node.get("$ref")
        if isinstance(ref, str) and ref.endswith(".schema.json"):
            sub = _load_schema(ref)
            sub.pop("$schema", None)
            sub.pop("$id", None)
            return _resolve_refs(sub)
        return {k: _resolve_refs(v) for k, v in node.items()}
    if isinstance(node, list):
        return [_resolve_refs(v) for v in node]
    return node


def _line_hint(text: str, path) -> int | None:
    """Approximate line of a schema violation: last path key found in order."""
    pos = 0
    line = None
    for key in path:
        if not isinstance(key, str):
            continue
        i = text.find(f'"{key}"', pos)
        if i < 0:
            break
        line = text.count("\n", 0, i) + 1
        pos = i + 1
    return line


def _validate(obj, schema_name: str, text: str, label: str) -> None:
    schema = _resolve_refs(_load_schema(schema_name))
    validator = jsonschema.Draft7Validator(schema)
    err = next(iter(sorted(validator.iter_errors(obj), key=str)), None)
    if err is None:
        return
    where = "/".join(str(k) for k in err.absolute_path) or "<root>"
    line = _line_hint(text, list(err.absolute_path))
    at = f" (line {line})" if line is not None else ""
    raise UsageError(f"{label}: {err.message} at {where}{at}")


def _read_json(path) -> tuple[str, object]:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    text = p.read_text(encoding="utf-8")
    try:
        return text, json.loads(text)
    except json.JSONDecodeError as e:
        raise UsageError(
            f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from None


def _load_basis(path) -> FrequencyBasis:
    text, obj = _read_json(path)
    _validate(obj, "basis.schema.json", text, str(path))
    try:
        return FrequencyBasis.from_json_obj(obj)
    except ValueError as e:
        raise UsageError(f"{path}: {e}") from None


def _unverified_message(basis: FrequencyBasis) -> str | None:
    if not basis.verified:
        return "basis carries no verification flags; run `kgtorus verify` first"
    bad = sorted(name for name, ok in basis.verified.items() if not ok)
    if bad:
        return "basis failed verification: condition (%s)" % "), (".join(bad)
    return None


# ---------------------------------------------------------------------------
# manifests and output plumbing

@dataclass
class RunManifest:
    """Reproducibility record: config snapshot + seed regenerate the outputs."""

    command: list
    config: dict
    inputs: dict
    outputs: list
    versions: dict
    wall_time_s: float
    started_at: str


def _versions() -> dict:
    try:
        pkg = metadata.version("kgtorus")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {
        "kgtorus": pkg,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_json(path: Path, obj) -> None:
    path.write_text(
        json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n",
        encoding="utf-8",
    )


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("KGTORUS_OUT") or "."
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


class _Run:
    """Collects outputs and inputs of one command, then writes the manifest."""

    def __init__(self, args, config: dict):
        self.args = args
        self.dir = _out_dir(args)
        self.config = config
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.t0 = time.perf_counter()
        self.started_at = datetime.now(timezone.utc).isoformat(timespec="seconds")

    def track_input(self, path) -> None:
        self.inputs[str(path)] = _sha256(path)

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.dir / name

    def finish(self, manifest_name: str) -> None:
        self.outputs.append(manifest_name)
        manifest = RunManifest(
            command=[sys.argv[0].rsplit("/", 1)[-1]] + list(self.args._argv),
            config=self.config,
            inputs=self.inputs,
            outputs=sorted(self.outputs),
            versions=_versions(),
            wall_time_s=round(time.perf_counter() - self.t0, 6),
            started_at=self.started_at,
        )
        _write_json(self.dir / manifest_name, asdict(manifest))


def _jobs(args) -> int:
    return args.jobs if args.jobs else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# select

def cmd_select(args) -> int:
    config = {
        "d": args.d, "b": args.b, "p": args.p, "bound": args.bound,
        "seed": args.seed, "budget": args.budget,
    }
    runctx = _Run(args, config)
    try:
        basis = select_basis(
            args.d, args.b, args.p, args.bound, seed=args.seed, budget=args.budget
        )
    except BasisSelectionError as e:
        print(f"selection exhausted: {e}", file=sys.stderr)
        return EXIT_EXHAUSTED
    path = runctx.path("basis.json")
    path.write_text(basis.to_json(), encoding="utf-8")
    runctx.finish("select_manifest.json")
    print(
        f"selected modes {list(basis.modes)} radicands {list(basis.radicands)} "
        f"-> {path}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

def cmd_verify(args) -> int:
    runctx = _Run(args, {"basis": str(args.basis), "budget": args.budget})
    basis = _load_basis(args.basis)
    runctx.track_input(args.basis)
    reports = basis.verify(budget=args.budget)
    report_obj = {
        "modes": [list(j) for j in basis.modes],
        "radicands": list(basis.radicands),
        "conditions": {
            name: {"ok": r.ok, "status": r.status, "details": r.details}
            for name, r in reports.items()
        },
        "ok": all(r.ok for r in reports.values()),
    }
    _write_json(runctx.path("verify_report.json"), report_obj)
    runctx.finish("verify_manifest.json")
    exhausted = [n for n, r in reports.items() if r.status == "budget_exceeded"]
    if exhausted:
        print(
            f"verification inconclusive: condition ({exhausted[0]}) budget exceeded",
            file=sys.stderr,
        )
        return EXIT_EXHAUSTED
    failing = [n for n, r in reports.items() if not r.ok]
    if failing:
        details = reports[failing[0]].details
        print(
            f"verification failed: condition ({failing[0]}) {details}",
            file=sys.stderr,
        )
        return EXIT_FAIL
    print("basis verified: conditions (i), (ii), (iii) hold")
    return EXIT_OK


# ---------------------------------------------------------------------------
# characteristics

def _theta_is_zero(th) -> bool:
    return th == 0.0 if isinstance(th, (int, float)) else th.is_zero()


def _members_field(members) -> str:
    return ";".join("(" + ",".join(str(v) for v in m) + ")" for m in members)


def cmd_characteristics(args) -> int:
    config = {
        "basis": str(args.basis), "boxN": args.boxN,
        "theta": args.theta, "zoo": args.zoo,
    }
    runctx = _Run(args, config)
    basis = _load_basis(args.basis)
    runctx.track_input(args.basis)
    msg = _unverified_message(basis)
    if msg:
        print(msg, file=sys.stderr)
        return EXIT_FAIL

    if args.zoo:
        thetas = theta_zoo(basis, args.boxN, limit=args.zoo)
    else:
        thetas = [float(args.theta)]
    gamma = AdjacencySet.gamma(basis, basis.p)

    def job(th):
        pts = enumerate_characteristics(basis, th, args.boxN)
        return cluster_decomposition(pts, gamma, basis=basis, theta=th)

    with ThreadPoolExecutor(max_workers=_jobs(args)) as pool:
        decomposed = list(pool.map(job, thetas))

    b, d = basis.b, basis.d
    rows = []
    summary = []
    violations = []
    for th, clusters in zip(thetas, decomposed):
        bound = max(2 * d, 2 * b) if _theta_is_zero(th) else 4 * b
        th_str = repr(th)
        n_pos = 0
        for idx, c in enumerate(clusters):
            positive = all(all(v > 0 for v in m) for m in c.members)
            n_pos += positive
            rows.append([
                th_str, idx, c.size, int(positive), int(c.is_exceptional_S),
                _members_field(c.members),
            ])
            if c.size > bound:
                violations.append((th_str, idx, c.size, bound))
        summary.append({
            "theta": th_str,
            "n_points": sum(c.size for c in clusters),
            "n_clusters": len(clusters),
            "max_cluster": clusters[0].size if clusters else 0,
            "n_positive": n_pos,
            "bound": bound,
            "ok": all(c.size <= bound for c in clusters),
        })

    with open(runctx.path("characteristics.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "cluster", "size", "positive", "exceptional_S", "members"])
        writer.writerows(rows)
    _write_json(runctx.path("characteristics.json"), {
        "basis": basis.to_json_obj(), "boxN": args.boxN, "levels": summary,
        "ok": not violations,
    })
    runctx.finish("characteristics_manifest.json")

    if violations:
        th_str, idx, size, bound = violations[0]
        print(
            f"cluster bound violated at theta {th_str}: cluster {idx} has size "
            f"{size} > {bound}",
            file=sys.stderr,
        )
        return EXIT_FAIL
    total = sum(s["n_clusters"] for s in summary)
    print(f"{len(thetas)} level(s), {total} cluster(s), bounds hold")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep-theta

def _basis_from_config(cfg: dict, cfg_path: Path, runctx: _Run) -> FrequencyBasis:
    if "basis" in cfg:
        return FrequencyBasis.from_json_obj(cfg["basis"])
    path = Path(cfg["basis_file"])
    if not path.is_absolute():
        path = cfg_path.parent / path
    basis = _load_basis(path)
    runctx.track_input(path)
    return basis


def cmd_sweep_theta(args) -> int:
    text, cfg = _read_json(args.config)
    _validate(cfg, "sweep_config.schema.json", text, str(args.config))
    runctx = _Run(args, cfg)
    runctx.track_input(args.config)
    try:
        basis = _basis_from_config(cfg, Path(args.config), runctx)
    except ValueError as e:
        raise UsageError(f"{args.config}: {e}") from None
    msg = _unverified_message(basis)
    if msg:
        print(msg, file=sys.stderr)
        return EXIT_FAIL

    nl = Nonlinearity(basis.p)
    if "solution_file" in cfg:
        sol_path = Path(cfg["solution_file"])
        if not sol_path.is_absolute():
            sol_path = Path(args.config).parent / sol_path
        _, sol = _read_json(sol_path)
        runctx.track_input(sol_path)
        try:
            u = CosineSeries.from_json_obj(sol["u"])
            omega = np.array([float(w) for w in sol["omega"]])
        except (KeyError, TypeError) as e:
            raise UsageError(f"{sol_path}: not a solution file ({e})") from None
    else:
        a = [float(v) for v in cfg["a"]]
        if len(a) != basis.b:
            raise UsageError(f"config lists {len(a)} amplitudes, basis has b={basis.b}")
        u = CosineSeries.initial_ansatz(basis.modes, a)
        omega = q_solve(u, a, basis, nl)

    if "Ns" in cfg:
        Ns = [int(n) for n in cfg["Ns"]]
    elif "N" in cfg:
        Ns = [int(cfg["N"])]
    else:
        raise UsageError("config needs N or Ns")
    th = cfg["theta"]
    grid = np.linspace(float(th["min"]), float(th["max"]), int(th["count"]))
    thresholds = SweepThresholds(
        delta=float(cfg["delta"]), p=basis.p,
        eps=float(cfg.get("eps", 0.25)), tau=float(cfg.get("tau", 0.4)),
        sigma=cfg.get("sigma"),
    )

    with ThreadPoolExecutor(max_workers=_jobs(args)) as pool:
        reports = list(pool.map(
            lambda N: theta_bad_sweep(u, omega, N, grid, thresholds, nl), Ns
        ))

    with open(runctx.path("sweep.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["N", "theta", "bad"])
        for N, rep in zip(Ns, reports):
            for theta, bad in zip(rep.grid, rep.bad_mask):
                writer.writerow([N, repr(float(theta)), int(bad)])

    fractions = [rep.bad_fraction for rep in reports]
    decreasing = all(f1 > f2 for f1, f2 in zip(fractions, fractions[1:]))
    _write_json(runctx.path("sweep_report.json"), {
        "basis": basis.to_json_obj(),
        "levels": [
            {
                "N": N,
                "cut": thresholds.cut_for(N),
                "bad_fraction": rep.bad_fraction,
                "measure_estimate": rep.measure_estimate,
                "n_dense": rep.n_dense,
                "n_certified": rep.n_certified,
                "intervals": [[lo, hi] for lo, hi in rep.intervals],
                "max_dist_to_z": rep.max_dist_to_z,
                "meets_measure_bound": rep.meets_measure_bound,
                "meets_exp_bound": rep.meets_exp_bound,
            }
            for N, rep in zip(Ns, reports)
        ],
        "bad_fractions": fractions,
        "strictly_decreasing": decreasing,
    })
    runctx.finish("sweep_manifest.json")

    frac_str = ", ".join(f"N={N}: {f:.4f}" for N, f in zip(Ns, fractions))
    print(f"bad fractions {frac_str}")
    if args.assert_decay and len(Ns) > 1 and not decreasing:
        print("bad-set fraction does not strictly decrease in N", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve

_NON_PARAM_KEYS = frozenset({"basis", "basis_file"})


def cmd_solve(args) -> int:
    text, cfg = _read_json(args.config)
    _validate(cfg, "solve_config.schema.json", text, str(args.config))
    runctx = _Run(args, cfg)
    runctx.track_input(args.config)
    try:
        basis = _basis_from_config(cfg, Path(args.config), runctx)
    except ValueError as e:
        raise UsageError(f"{args.config}: {e}") from None
    if basis.verified and not all(basis.verified.values()):
        print(_unverified_message(basis), file=sys.stderr)
        return EXIT_FAIL
    if len(cfg["a"]) != basis.b:
        raise UsageError(
            f"config lists {len(cfg['a'])} amplitudes, basis has b={basis.b}"
        )

    kwargs = {k: v for k, v in cfg.items() if k not in _NON_PARAM_KEYS}
    kwargs["a"] = tuple(float(v) for v in kwargs["a"])
    try:
        params = SolverParameters(**kwargs)
    except (TypeError, ValueError) as e:
        raise UsageError(f"{args.config}: {e}") from None

    nl = Nonlinearity(basis.p)
    try:
        result = run(params, basis, nl)
    except ValueError as e:
        # the driver refuses a basis that fails verification
        print(str(e), file=sys.stderr)
        return EXIT_FAIL

    result.trace.to_jsonl(runctx.path("trace.jsonl"))
    result.trace.to_csv(runctx.path("trace.csv"))
    _write_json(runctx.path("solution.json"), {
        "basis": basis.to_json_obj(),
        "a": [float(v) for v in result.a],
        "omega": [float(w) for w in result.state.omega],
        "r": result.state.r,
        "success": result.success,
        "message": result.message,
        "F_norm": result.state.F.norm(),
        "support": len(result.state.u),
        "u": result.state.u.to_json_obj(),
    })
    runctx.finish("solve_manifest.json")

    steps = result.trace.steps()
    accepted = sum(1 for rec in steps if rec["accepted"])
    final = result.state.F.norm()
    if not result.success:
        print(f"solve failed: {result.message}", file=sys.stderr)
        return EXIT_EXHAUSTED
    print(
        f"{len(steps)} step record(s), {accepted} accepted, "
        f"final residual {final:.6e}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# report

def _load_trace(path) -> NewtonTrace:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    schema = _resolve_refs(_load_schema("trace_record.schema.json"))
    validator = jsonschema.Draft7Validator(schema)
    records = []
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise UsageError(
                    f"{path}: line {lineno}: invalid JSON: {e.msg}"
                ) from None
            err = next(validator.iter_errors(rec), None)
            if err is not None:
                raise UsageError(
                    f"{path}: line {lineno}: not a trace record: {err.message}"
                )
            records.append(rec)
    return NewtonTrace(records=records)


def cmd_report(args) -> int:
    runctx = _Run(args, {"trace": str(args.trace)})
    trace = _load_trace(args.trace)
    runctx.track_input(args.trace)
    steps = trace.steps()
    events = trace.events()

    lines = ["newton trace report", "=" * 19, ""]
    lines.append(
        f"records {len(trace.records)}, steps {len(steps)}, "
        f"accepted {sum(1 for s in steps if s['accepted'])}, "
        f"events {len(events)}"
    )
    lines.append("")
    if steps:
        lines.append(f"{'r':>3} {'N':>5} {'accepted':>8} {'F_norm':>13} {'ratio':>10} {'support':>8}")
        prev = None
        for rec in steps:
            ratio = "" if prev in (None, 0.0) else f"{rec['F_norm'] / prev:.3e}"
            lines.append(
                f"{rec['r']:>3} {rec.get('N', ''):>5} {str(rec['accepted']):>8} "
                f"{rec['F_norm']:>13.6e} {ratio:>10} {rec.get('support', ''):>8}"
            )
            if rec["accepted"]:
                prev = rec["F_norm"]
        last = max(
            (rec for rec in steps if rec["accepted"]), key=lambda rec: rec["r"]
        )
        omega_str = ", ".join(f"{w:.12f}" for w in last["omega"])
        lines.append("")
        lines.append(f"final accepted step r={last['r']}")
        lines.append(f"  residual {last['F_norm']:.6e}")
        lines.append(f"  omega    [{omega_str}]")
        lines.append(f"  support  {last.get('support', 'n/a')}")
    else:
        lines.append("no step records")
    if events:
        lines.append("")
        lines.append("events:")
        for ev in events:
            if ev["kind"] == "gate":
                status = "passed" if ev["passed"] else "FAILED"
                lines.append(f"  r={ev['r']} gate {ev['gate']}: {status}")
            elif ev["kind"] == "excision":
                lines.append(f"  r={ev['r']} excision #{ev['attempt']}: {ev['reason']}")
            elif ev["kind"] == "jitter":
                amps = ", ".join(f"{v:.3e}" for v in ev["a"])
                lines.append(f"  r={ev['r']} jitter -> a = [{amps}]")

    report_path = runctx.path("report.txt")
    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    trace.to_csv(runctx.path("summary.csv"))
    runctx.finish("report_manifest.json")
    print(f"report on {len(steps)} step(s) -> {report_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument(
        "--out", default=None,
        help="output directory (default: $KGTORUS_OUT, then the working directory)",
    )
    common.add_argument(
        "--jobs", type=int, default=None,
        help="worker count for parallel sections (default: logical cores)",
    )

    parser = _Parser(
        prog="kgtorus",
        description=__doc__.split("\n\n")[0],
    )
    try:
        version = metadata.version("kgtorus")
    except metadata.PackageNotFoundError:
        version = "unknown"
    parser.add_argument("--version", action="version", version=f"kgtorus {version}")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)

    p = sub.add_parser(
        "select", parents=[common],
        help="sweep modes and write the first fully verified basis",
    )
    p.add_argument("--d", type=int, required=True, help="spatial dimension")
    p.add_argument("--b", type=int, required=True, help="number of modes")
    p.add_argument("--p", type=int, default=2, help="nonlinearity degree (even)")
    p.add_argument("--bound", type=int, required=True, help="sup-norm bound on modes")
    p.add_argument("--seed", type=int, default=None,
                   help="shuffle candidates within equal-norm shells")
    p.add_argument("--budget", type=int, default=1_000_000,
                   help="enumeration budget for condition (iii)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser(
        "verify", parents=[common],
        help="re-check conditions (i), (ii), (iii) on a basis file",
    )
    p.add_argument("basis", help="basis JSON file")
    p.add_argument("--budget", type=int, default=1_000_000,
                   help="enumeration budget for condition (iii)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser(
        "characteristics", parents=[common],
        help="enumerate characteristics and their clusters in a box",
    )
    p.add_argument("basis", help="basis JSON file")
    p.add_argument("--boxN", type=int, required=True, help="box half-width")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--theta", type=float, default=0.0, help="single level value")
    g.add_argument("--zoo", type=int, default=0,
                   help="enumerate this many representative exact levels instead")
    p.set_defaults(func=cmd_characteristics)

    p = sub.add_parser(
        "sweep-theta", parents=[common],
        help="measure the bad level set of the truncated operator",
    )
    p.add_argument("config", help="sweep configuration JSON file")
    p.add_argument("--assert-decay", action="store_true",
                   help="exit 1 unless the bad fraction strictly decreases in N")
    p.set_defaults(func=cmd_sweep_theta)

    p = sub.add_parser(
        "solve", parents=[common],
        help="run the Newton iteration from a configuration file",
    )
    p.add_argument("config", help="solve configuration JSON file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser(
        "report", parents=[common],
        help="summarize a trace file as text and CSV",
    )
    p.add_argument("trace", help="trace.jsonl file from a solve run")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_help(sys.stderr)
            return EXIT_BAD_INPUT
        args._argv = argv
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except MemoryError:
        print(
            "error: out of memory; reduce the box size or the lattice dimension",
            file=sys.stderr,
        )
        return EXIT_EXHAUSTED


if __name__ == "__main__":
    sys.exit(main())
