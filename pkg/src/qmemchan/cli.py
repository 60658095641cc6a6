"""Command-line front end.

Every subcommand writes its artifacts into ``--output`` and nothing else;
timings go to stderr. Exit status is 0 on success, 1 when an input fails
validation and 2 when ``verify`` finds a violated property.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import linalg
from .capacity import CapacityOptions, capacity_convergence_experiment, lower_upper_capacity, memory_candidates
from .channels import ValidationError, run_channel
from .entropics import CQEnsemble, holevo_chi, mutual_information, von_neumann_entropy
from .indecomposability import DEFAULT_STEP_BUDGET, estimate_mixing_time
from .specfile import BUNDLED, SpecParseError, encode_matrix, resolve_channel, state_from_dict
from .verification import run_property_suite

log = logging.getLogger("qmemchan")

EXIT_OK, EXIT_INVALID, EXIT_VERIFY = 0, 1, 2
SIGNIFICANT = 12
CONFIG_EXCLUDE = {"output", "jobs", "verbose", "func"}


class VerificationFailed(Exception):
    pass


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.{SIGNIFICANT}g}"
    return str(x)


def _rounded(obj):
    """Floats cut to 12 significant digits, recursively, so JSON matches CSV."""
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if not math.isfinite(x) else float(f"{x:.{SIGNIFICANT}g}")
    return obj


def csv_text(header: list[str], rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        values = [row[h] for h in header] if isinstance(row, dict) else row
        w.writerow([_fmt(v) for v in values])
    return buf.getvalue()


def json_text(doc) -> str:
    return json.dumps(_rounded(doc), indent=2, sort_keys=True) + "\n"


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in CONFIG_EXCLUDE}


class Artifacts:
    """Collects artifact texts and writes them all at the end, or none at all."""

    def __init__(self, directory: str):
        self.directory = Path(directory)
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def commit(self) -> list[Path]:
        created_dir = not self.directory.exists()
        written: list[Path] = []
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            for name, text in self.files.items():
                path = self.directory / name
                tmp = path.with_name(path.name + ".part")
                tmp.write_text(text, encoding="utf-8")
                os.replace(tmp, path)
                written.append(path)
        except BaseException:
            for p in written:
                p.unlink(missing_ok=True)
            for name in self.files:
                (self.directory / (name + ".part")).unlink(missing_ok=True)
            if created_dir and self.directory.exists() and not any(self.directory.iterdir()):
                self.directory.rmdir()
            raise
        return written


# -- argument types ---------------------------------------------------------------

def _count(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _epsilon(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"epsilon must lie in (0, 1], got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qmemchan", description="Quantum memory channel simulation and capacity bounds.")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(sp, channel=True):
        if channel:
            sp.add_argument("--channel", required=True,
                            help=f"channel JSON file, or a bundled name ({', '.join(BUNDLED)})")
        sp.add_argument("--seed", type=_seed, default=0)
        sp.add_argument("--output", default="results", help="artifact directory (default: results)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--jobs", type=_count, default=1, help="worker threads; artifacts do not depend on it")
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("simulate", help="apply the channel to an input state")
    common(sp)
    sp.add_argument("--n", type=_count, help="number of uses (default: inferred from --input, else 1)")
    sp.add_argument("--input", help="input state JSON (default: |0...0>)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("entropy", help="entropies of a state or ensemble")
    common(sp, channel=False)
    sp.add_argument("--input", required=True, help="state or ensemble JSON")
    sp.set_defaults(func=cmd_entropy)

    sp = sub.add_parser("probe-mixing", help="sampled mixing time of the memory")
    common(sp)
    sp.add_argument("--epsilon", type=_epsilon, required=True)
    sp.add_argument("--step-budget", type=_count, default=DEFAULT_STEP_BUDGET)
    sp.set_defaults(func=cmd_probe_mixing)

    sp = sub.add_parser("capacity", help="lower/upper capacity estimates per block length")
    common(sp)
    group = sp.add_mutually_exclusive_group(required=True)
    group.add_argument("--n", type=_count, help="a single block length (no mixing probe)")
    group.add_argument("--n-max", type=_count, help="block lengths 1..n-max with the convergence bound")
    sp.add_argument("--epsilon", type=_epsilon, default=0.1)
    sp.add_argument("--restarts", type=_count, default=8)
    sp.add_argument("--ensemble-size", type=_count)
    sp.add_argument("--product-only", action="store_true")
    sp.add_argument("--force", action="store_true", help="run --n-max even if the fixed-point check fails")
    sp.set_defaults(func=cmd_capacity)

    sp = sub.add_parser("verify", help="run the sampled property suite")
    common(sp)
    sp.set_defaults(func=cmd_verify)
    return p


# -- subcommands ------------------------------------------------------------------

def _load_json(path: str, what: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"{what} {path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise SpecParseError(f"{what} {path}: {exc.strerror}") from exc


def _channel(args):
    try:
        return resolve_channel(args.channel)
    except OSError as exc:
        raise SpecParseError(f"channel {args.channel}: {exc.strerror}") from exc


def _matrix_rows(label: str, m: np.ndarray) -> list:
    return [[label, i, j, m[i, j].real, m[i, j].imag] for i in range(m.shape[0]) for j in range(m.shape[1])]


def cmd_simulate(args, out: Artifacts) -> dict:
    spec = _channel(args)
    if args.input:
        rho, _ = state_from_dict(_load_json(args.input, "input"), "input")
        n = round(math.log(rho.shape[0], spec.d_q)) if spec.d_q > 1 else 1
        if spec.d_q ** n != rho.shape[0]:
            raise ValidationError(f"input dimension {rho.shape[0]} is not a power of d_q = {spec.d_q}")
        if args.n is not None and args.n != n:
            raise ValidationError(f"--n {args.n} disagrees with the input, which spans {n} uses")
    else:
        n = args.n or 1
        linalg.check_dim(spec.d_q ** n * spec.d_m, "joint dimension")
        rho = linalg.projector(0, spec.d_q ** n)
    output, memory = run_channel(spec, linalg.DensityMatrix(rho), n=n)
    summary = {"n": n, "output_entropy": von_neumann_entropy(output), "memory_entropy": von_neumann_entropy(memory)}
    if args.format == "csv":
        rows = _matrix_rows("output", output.mat) + _matrix_rows("memory", memory.mat)
        out.add("simulate.csv", csv_text(["system", "row", "col", "re", "im"], rows))
    else:
        out.add("simulate.json", json_text({
            "config": _config(args), "seed": args.seed, "channel": spec.name, **summary,
            "output": encode_matrix(output), "memory": encode_matrix(memory),
        }))
    return summary


def cmd_entropy(args, out: Artifacts) -> dict:
    doc = _load_json(args.input, "input")
    if not isinstance(doc, dict):
        raise SpecParseError("input: expected a JSON object")
    values: dict = {}
    if "ensemble" in doc:
        ens = doc["ensemble"]
        if not isinstance(ens, dict) or "probs" not in ens or "states" not in ens:
            raise SpecParseError("ensemble: expected an object with 'probs' and 'states'")
        states = [state_from_dict({"state": s}, f"ensemble.states[{i}]")[0] for i, s in enumerate(ens["states"])]
        for i, s in enumerate(states):
            linalg.DensityMatrix(s)  # validates
        e = CQEnsemble(np.asarray(ens["probs"], dtype=float), states)
        values["average_entropy"] = von_neumann_entropy(e.average())
        values["holevo_chi"] = holevo_chi(e)
    else:
        rho, dims = state_from_dict(doc, "input")
        state = linalg.DensityMatrix(rho, dims)
        values["entropy"] = von_neumann_entropy(state)
        if dims is not None and len(dims) >= 2:
            cut = doc.get("cut", [0])
            values["mutual_information"] = mutual_information(state, dims, cut)
            for k in range(len(dims)):
                values[f"entropy_factor{k}"] = von_neumann_entropy(linalg.partial_trace(state.mat, dims, [k]))
    if args.format == "csv":
        out.add("entropy.csv", csv_text(["quantity", "value"], [[k, v] for k, v in values.items()]))
    else:
        out.add("entropy.json", json_text({"config": _config(args), "seed": args.seed, "values": values}))
    return values


def cmd_probe_mixing(args, out: Artifacts) -> dict:
    spec = _channel(args)
    res = estimate_mixing_time(spec, args.epsilon, seed=args.seed, step_budget=args.step_budget, jobs=args.jobs)
    summary = {"epsilon": res.epsilon, "n_epsilon": res.n_epsilon, "mixed": res.mixed, "samples": res.samples_used}
    if args.format == "csv":
        out.add("mixing_trajectory.csv", csv_text(["step", "max_trace_distance"], res.trajectory))
        out.add("mixing_summary.csv", csv_text(["quantity", "value"], [[k, v] for k, v in summary.items()]))
    else:
        out.add("mixing.json", json_text({
            "config": _config(args), "seed": args.seed, "channel": spec.name, **summary,
            "trajectory": [{"step": s, "max_trace_distance": d} for s, d in res.trajectory],
        }))
    return summary


REPORT_COLUMNS = ["n", "memory_id", "chi_per_use", "lower", "upper", "gap", "gap_bound"]


def cmd_capacity(args, out: Artifacts) -> dict:
    spec = _channel(args)
    opts = CapacityOptions(restarts=args.restarts, ensemble_size=args.ensemble_size,
                           product_only=args.product_only, seed=args.seed, jobs=args.jobs)
    mixing = None
    if args.n is not None:
        linalg.check_dim(spec.d_q ** args.n * spec.d_m * spec.d_e, "joint dimension")
        reports = [lower_upper_capacity(spec, args.n, memory_candidates(spec.d_m), opts)]
    else:
        linalg.check_dim(spec.d_q ** args.n_max * spec.d_m * spec.d_e, "joint dimension")
        exp = capacity_convergence_experiment(spec, args.n_max, args.epsilon, opts, require_fixed_point=not args.force)
        reports, mixing = exp.reports, exp.mixing
    for r in reports:
        log.info("n=%d wall time %.2fs", r.n, r.wall_time)
    rows = [row for r in reports for row in r.rows()]
    if args.format == "csv":
        out.add("capacity.csv", csv_text(REPORT_COLUMNS, rows))
    else:
        doc = {"config": _config(args), "seed": args.seed, "channel": spec.name,
               "reports": [r.to_dict() for r in reports]}
        if mixing is not None:
            doc["mixing"] = {"epsilon": mixing.epsilon, "n_epsilon": mixing.n_epsilon, "samples": mixing.samples_used}
        out.add("capacity.json", json_text(doc))
    return {"gaps": [r.gap for r in reports], "n_epsilon": None if mixing is None else mixing.n_epsilon}


def cmd_verify(args, out: Artifacts) -> dict:
    spec = _channel(args)
    results = run_property_suite(spec, seed=args.seed, jobs=args.jobs)
    cols = ["check", "status", "value", "threshold", "samples", "detail"]
    rows = [[r.name, r.status, r.value, r.threshold, r.samples, r.detail] for r in results]
    if args.format == "csv":
        out.add("verify.csv", csv_text(cols, rows))
    else:
        out.add("verify.json", json_text({
            "config": _config(args), "seed": args.seed, "channel": spec.name,
            "checks": [dict(zip(cols, row)) for row in rows],
        }))
    failed = [r.name for r in results if r.failed]
    return {"failed": failed, "checks": {r.name: r.status for r in results}}


# -- entry point ------------------------------------------------------------------

def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    out = Artifacts(args.output)
    t0 = time.perf_counter()
    try:
        summary = args.func(args, out)
        out.commit()
    except (SpecParseError, ValidationError, linalg.DimensionError, linalg.NotHermitianError,
            linalg.NotPSDError, ValueError) as exc:
        print(f"qmemchan: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(json.dumps(_rounded(summary), sort_keys=True))
    print(f"wall time {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    if args.subcommand == "verify" and summary["failed"]:
        print(f"qmemchan: verification failed: {', '.join(summary['failed'])}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def main() -> None:
    sys.exit(run())
