"""Command-line interface: simulate, estimate, study, summarize.

``study`` runs a full scenario grid with per-replicate RNG streams derived
from the master seed, writing one CSV row per (scenario, method, replicate).
Files are resume-safe: existing rows are detected by key and skipped, so an
interrupted grid can be re-run to completion with the same command. Results
are byte-identical across runs and worker counts except for the runtime
column.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field

import numpy as np

from .data import (
    COPULA_FAMILIES,
    MARGIN_MODES,
    MEASURE_KINDS,
    Dataset,
    Scenario,
    coordinate_basis,
    read_dataset_csv,
    replicate_rng,
    write_dataset_csv,
)
from .errors import (
    ContractViolation,
    DegenerateNeighborhood,
    EstimationFailed,
    UnsupportedMarginMode,
)
from .kernels import KERNEL_FAMILIES, KernelSpec
from .linalg import SubspaceBasis, subspace_distance
from .margins import pseudo_observations
from .measures import build_pseudo_responses
from .opg import BandwidthSchedule, adaptive_opg, default_schedule, opg_single_pass, trimming_from_quantiles
from .simulation import generate, run_replicate

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    threadpool_limits = None

RESULT_COLUMNS = (
    "n",
    "p",
    "d",
    "alpha",
    "copula",
    "measure",
    "margins",
    "method",
    "replicate",
    "seed",
    "error",
    "runtime_seconds",
    "iterations",
    "h_final",
    "flags",
)
NA = "NA"
WORKERS_ENV = "COPULADR_WORKERS"


class UsageError(Exception):
    """Bad flags or configuration; exit code 1."""


class DataError(Exception):
    """Unreadable or malformed input data; exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise UsageError(message)


def _fmt_float(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return NA
    return repr(float(x))


def _parse_optional_float(s: str) -> float:
    return float("nan") if s == NA else float(s)


# ---------------------------------------------------------------------------
# study configuration


@dataclass
class StudyConfig:
    """Scenario axes plus run controls, parsed from a flat key-value file."""

    n: list = field(default_factory=lambda: [1000])
    p: list = field(default_factory=lambda: [5])
    d: list = field(default_factory=lambda: [1])
    alpha: list = field(default_factory=lambda: [1.5])
    copula: list = field(default_factory=lambda: ["gaussian"])
    measure: list = field(default_factory=lambda: ["spearman"])
    margins: list = field(default_factory=lambda: ["known"])
    method: list = field(default_factory=lambda: ["opga"])
    replications: int = 100
    master_seed: int = 0
    out: str = ""
    workers: int = 0
    kernel: str = "quartic"
    trim_q: float = 0.05
    tol: float = 1e-4
    max_iter: int = 50
    margin_dim: int = 2
    h0: float | None = None
    rho: float | None = None
    h_inf: float | None = None


_AXIS_PARSERS = {
    "n": int,
    "p": int,
    "d": int,
    "alpha": float,
    "copula": str,
    "measure": str,
    "margins": str,
    "method": str,
}
_SCALAR_PARSERS = {
    "replications": int,
    "master_seed": int,
    "out": str,
    "workers": int,
    "kernel": str,
    "trim_q": float,
    "tol": float,
    "max_iter": int,
    "margin_dim": int,
    "h0": float,
    "rho": float,
    "h_inf": float,
}


def parse_study_config(path: str) -> StudyConfig:
    """Parse ``key = value`` lines; list values are comma-separated."""
    cfg = StudyConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key in _AXIS_PARSERS:
                items = [v.strip() for v in value.split(",") if v.strip()]
                if not items:
                    raise ValueError("empty list")
                setattr(cfg, key, [_AXIS_PARSERS[key](v) for v in items])
            elif key in _SCALAR_PARSERS:
                setattr(cfg, key, _SCALAR_PARSERS[key](value))
            else:
                raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        except UsageError:
            raise
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    if not cfg.out:
        raise UsageError("config must set 'out' (results CSV path)")
    if cfg.replications < 1:
        raise UsageError("replications must be >= 1")
    if cfg.kernel not in KERNEL_FAMILIES:
        raise UsageError(f"unknown kernel {cfg.kernel!r}")
    return cfg


def _resolve_schedule(n, p, d, h0, rho, h_inf) -> BandwidthSchedule | None:
    if h0 is None and rho is None and h_inf is None:
        return None
    base = default_schedule(n, p, d)
    return BandwidthSchedule(
        h0=base.h0 if h0 is None else h0,
        rho=base.rho if rho is None else rho,
        h_inf=base.h_inf if h_inf is None else h_inf,
    )


def iter_scenarios(cfg: StudyConfig) -> list[Scenario]:
    """Scenario/replicate grid in the documented deterministic order."""
    out = []
    for n, p, d, alpha, copula, measure, margins, method in itertools.product(
        cfg.n, cfg.p, cfg.d, cfg.alpha, cfg.copula, cfg.measure, cfg.margins, cfg.method
    ):
        for rep in range(cfg.replications):
            try:
                out.append(
                    Scenario(
                        n=n,
                        p=p,
                        d=d,
                        alpha=alpha,
                        copula=copula,
                        measure=measure,
                        margins=margins,
                        method=method,
                        replicate=rep,
                        master_seed=cfg.master_seed,
                    )
                )
            except ContractViolation as exc:
                raise UsageError(str(exc)) from exc
    return out


def _row_key(scenario: Scenario) -> tuple:
    return (
        str(scenario.n),
        str(scenario.p),
        str(scenario.d),
        repr(float(scenario.alpha)),
        scenario.copula,
        scenario.measure,
        scenario.margins,
        scenario.method,
        str(scenario.replicate),
    )


def _key_from_row(row: list[str]) -> tuple:
    n, p, d, alpha, copula, measure, margins, method, rep = row[:9]
    return (n, p, d, repr(float(alpha)), copula, measure, margins, method, rep)


def _study_task(payload) -> list[str]:
    scenario, opts = payload
    limiter = threadpool_limits(limits=1) if threadpool_limits is not None else nullcontext()
    with limiter:
        res = run_replicate(
            scenario,
            kernel=KernelSpec(opts["kernel"]),
            trim_q=opts["trim_q"],
            tol=opts["tol"],
            max_iter=opts["max_iter"],
            schedule=_resolve_schedule(
                scenario.n, scenario.p, scenario.d, opts["h0"], opts["rho"], opts["h_inf"]
            ),
            margin_dim=opts["margin_dim"],
        )
    return [
        str(scenario.n),
        str(scenario.p),
        str(scenario.d),
        repr(float(scenario.alpha)),
        scenario.copula,
        scenario.measure,
        scenario.margins,
        scenario.method,
        str(scenario.replicate),
        str(res.seed),
        _fmt_float(res.error),
        f"{res.runtime_seconds:.6f}",
        str(res.iterations),
        _fmt_float(res.h_final),
        res.flags,
    ]


def _read_result_rows(path: str) -> list[list[str]]:
    """Read result rows, dropping a torn final line from an interrupted run."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return []
        if tuple(header) != RESULT_COLUMNS:
            raise DataError(f"unexpected results header in {path}")
        rows = []
        for row in reader:
            if len(row) != len(RESULT_COLUMNS):
                continue
            rows.append(row)
        return rows


def _resolve_workers(cli_value, cfg_value) -> int:
    if cli_value:
        return max(1, cli_value)
    if cfg_value:
        return max(1, cfg_value)
    env = os.environ.get(WORKERS_ENV, "")
    if env.isdigit() and int(env) > 0:
        return int(env)
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    try:
        scenario = Scenario(
            n=args.n,
            p=args.p,
            d=args.d,
            alpha=args.alpha,
            copula=args.copula,
            master_seed=args.seed,
        )
    except ContractViolation as exc:
        raise UsageError(str(exc)) from exc
    data = generate(scenario, replicate_rng(scenario))
    try:
        write_dataset_csv(args.out, data)
    except OSError as exc:
        raise DataError(f"cannot write {args.out}: {exc}") from exc
    print(f"wrote {data.n} rows x {data.p + 4} columns to {args.out}")
    return 0


def _load_dataset(path: str) -> Dataset:
    try:
        return read_dataset_csv(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except ContractViolation as exc:
        raise DataError(str(exc)) from exc


def cmd_estimate(args) -> int:
    data = _load_dataset(args.data)
    if not 1 <= args.d <= data.p:
        raise UsageError(f"need 1 <= d <= p, got d={args.d}, p={data.p}")
    if args.margins == "known" and data.U_true is None:
        raise DataError("dataset has no stored uniforms; known margins unsupported")
    kernel = KernelSpec(args.kernel)
    schedule = _resolve_schedule(data.n, data.p, args.d, args.h0, args.rho, args.h_inf)
    record = {
        "method": args.method,
        "measure": args.measure,
        "margins": args.margins,
        "d": args.d,
        "n": data.n,
        "p": data.p,
        "failed": False,
        "flags": "",
        "error": None,
        "eigenvalues": None,
        "basis": None,
        "iterations": None,
        "h_final": None,
        "trimmed_fraction": None,
    }
    try:
        U = pseudo_observations(
            data,
            args.margins,
            d_margin=args.margin_dim,
            spec=kernel,
            trim_q=args.trim_q,
            tol=args.tol,
            max_iter=args.max_iter,
        )
        responses = build_pseudo_responses(args.measure, U)
        trim = trimming_from_quantiles(data.X, args.trim_q)
        if args.method == "opg1":
            res = opg_single_pass(data.X, responses, args.d, schedule, trim, kernel)
        else:
            res = adaptive_opg(
                data.X, responses, args.d, schedule, trim, kernel, args.max_iter, args.tol
            )
        record.update(
            eigenvalues=[float(v) for v in res.eigen.eigenvalues],
            basis=[[float(v) for v in row] for row in res.basis.basis],
            iterations=res.iterations,
            h_final=res.h_final,
            trimmed_fraction=res.trimmed_fraction,
            flags="" if res.converged else "nonconverged",
        )
        if data.U_true is not None:
            truth = SubspaceBasis(coordinate_basis(data.p, range(args.d)))
            record["error"] = subspace_distance(res.basis, truth)
    except (EstimationFailed, DegenerateNeighborhood, UnsupportedMarginMode) as exc:
        record["failed"] = True
        record["flags"] = f"failed={type(exc).__name__}"
    if args.json:
        print(json.dumps(record))
        return 0
    print(f"method={record['method']} measure={record['measure']} margins={record['margins']} d={record['d']}")
    print(f"failed={str(record['failed']).lower()} flags={record['flags']}")
    if not record["failed"]:
        print(f"iterations={record['iterations']} h_final={record['h_final']:.6g} "
              f"trimmed_fraction={record['trimmed_fraction']:.4f}")
        print("eigenvalues: " + ", ".join(f"{v:.6g}" for v in record["eigenvalues"]))
        print("basis columns (estimated directions):")
        for row in record["basis"]:
            print("  " + "  ".join(f"{v:+.5f}" for v in row))
        if record["error"] is not None:
            print(f"error={record['error']:.6f} (projector distance to coordinate truth)")
    return 0


def cmd_study(args) -> int:
    cfg = parse_study_config(args.config)
    workers = _resolve_workers(args.workers, cfg.workers)
    scenarios = iter_scenarios(cfg)
    opts = {
        "kernel": cfg.kernel,
        "trim_q": cfg.trim_q,
        "tol": cfg.tol,
        "max_iter": cfg.max_iter,
        "margin_dim": cfg.margin_dim,
        "h0": cfg.h0,
        "rho": cfg.rho,
        "h_inf": cfg.h_inf,
    }

    existing: list[list[str]] = []
    if os.path.exists(cfg.out):
        existing = _read_result_rows(cfg.out)
    done = {_key_from_row(row) for row in existing}
    pending = [s for s in scenarios if _row_key(s) not in done]

    with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in existing:
            writer.writerow(row)
        fh.flush()
        total = len(scenarios)
        completed = len(existing)
        print(
            f"study: {total} rows total, {len(existing)} existing, "
            f"{len(pending)} to run, workers={workers}",
            file=sys.stderr,
        )
        if pending:
            payloads = [(s, opts) for s in pending]
            if workers == 1:
                results = map(_study_task, payloads)
                for row in results:
                    writer.writerow(row)
                    fh.flush()
                    completed += 1
                    print(f"[{completed}/{total}] " + ",".join(row[:9]), file=sys.stderr)
            else:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    futures = [pool.submit(_study_task, pl) for pl in payloads]
                    for fut in futures:
                        row = fut.result()
                        writer.writerow(row)
                        fh.flush()
                        completed += 1
                        print(f"[{completed}/{total}] " + ",".join(row[:9]), file=sys.stderr)
    print(f"wrote {len(scenarios)} rows to {cfg.out} ({len(pending)} new)")
    return 0


_NUMERIC_RESULT_COLS = {"n", "p", "d", "alpha", "replicate", "seed", "error",
                        "runtime_seconds", "iterations", "h_final"}


def cmd_summarize(args) -> int:
    try:
        rows = _read_result_rows(args.results)
    except OSError as exc:
        raise DataError(f"cannot read {args.results}: {exc}") from exc
    keys = [k.strip() for k in args.group_by.split(",") if k.strip()]
    if not keys:
        raise UsageError("--group-by needs at least one column")
    for k in keys:
        if k not in RESULT_COLUMNS:
            raise UsageError(f"unknown group-by key {k!r}")
    if args.loglog and "n" not in keys:
        raise UsageError("--loglog requires grouping by n")
    col = {name: i for i, name in enumerate(RESULT_COLUMNS)}

    groups: dict[tuple, list[list[str]]] = {}
    for row in rows:
        key = tuple(row[col[k]] for k in keys)
        groups.setdefault(key, []).append(row)

    def sort_key(key: tuple):
        out = []
        for name, val in zip(keys, key):
            out.append(float(val) if name in _NUMERIC_RESULT_COLS else val)
        return out

    header = list(keys) + ["count", "failures", "mean_error", "se_error", "mean_runtime"]
    if args.loglog:
        header += ["ln_n", "ln_mean_error"]
    lines = [",".join(header)]
    for key in sorted(groups, key=sort_key):
        members = groups[key]
        errors = [float(r[col["error"]]) for r in members if r[col["error"]] != NA]
        failures = sum(1 for r in members if r[col["error"]] == NA)
        runtimes = [float(r[col["runtime_seconds"]]) for r in members]
        mean = float(np.mean(errors)) if errors else None
        se = float(np.std(errors, ddof=1) / np.sqrt(len(errors))) if len(errors) >= 2 else None
        cells = list(key) + [
            str(len(members)),
            str(failures),
            _fmt_float(mean) if mean is not None else NA,
            _fmt_float(se) if se is not None else NA,
            f"{np.mean(runtimes):.6f}" if runtimes else NA,
        ]
        if args.loglog:
            n_val = float(key[keys.index("n")])
            cells.append(_fmt_float(math.log(n_val)))
            cells.append(_fmt_float(math.log(mean)) if mean and mean > 0 else NA)
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise DataError(f"cannot write {args.out}: {exc}") from exc
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(prog="copuladr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a dataset CSV from the simulation model")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--p", type=int, required=True)
    sim.add_argument("--d", type=int, required=True)
    sim.add_argument("--alpha", type=float, required=True)
    sim.add_argument("--copula", choices=COPULA_FAMILIES, default="gaussian")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    est = sub.add_parser("estimate", help="estimate the dependence subspace from a dataset CSV")
    est.add_argument("--data", required=True)
    est.add_argument("--method", choices=("opg1", "opga"), default="opga")
    est.add_argument("--measure", choices=MEASURE_KINDS, default="spearman")
    est.add_argument("--margins", choices=MARGIN_MODES, default="known")
    est.add_argument("--d", type=int, default=1)
    est.add_argument("--margin-dim", dest="margin_dim", type=int, default=2)
    est.add_argument("--kernel", choices=KERNEL_FAMILIES, default="quartic")
    est.add_argument("--trim-q", dest="trim_q", type=float, default=0.05)
    est.add_argument("--tol", type=float, default=1e-4)
    est.add_argument("--max-iter", dest="max_iter", type=int, default=50)
    est.add_argument("--h0", type=float, default=None)
    est.add_argument("--rho", type=float, default=None)
    est.add_argument("--h-inf", dest="h_inf", type=float, default=None)
    est.add_argument("--json", action="store_true")
    est.set_defaults(func=cmd_estimate)

    study = sub.add_parser("study", help="run a Monte Carlo scenario grid from a config file")
    study.add_argument("--config", required=True)
    study.add_argument("--workers", type=int, default=0)
    study.set_defaults(func=cmd_study)

    summ = sub.add_parser("summarize", help="aggregate a results CSV by group keys")
    summ.add_argument("--results", required=True)
    summ.add_argument("--group-by", dest="group_by", default="n,method")
    summ.add_argument("--out", default="")
    summ.add_argument("--loglog", action="store_true")
    summ.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def run() -> None:
    """Console-script entry point."""
    sys.exit(main())
