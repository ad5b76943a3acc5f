"""``flowplan`` command line: validate, plan, simulate, sweep, gen-trace, report.

Exit codes: 0 success, 1 usage error, 2 infeasible plan, 3 solver time limit,
4 input validation failure. Every command that writes files writes them
atomically into the output directory (``--out-dir``, else ``$FLOWPLAN_OUT_DIR``,
else ``./out``) next to a ``manifest.json`` describing the run.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .compiler import SpecError, load_catalog, parse_spec, resolve_executors, type_check
from .optimizer import (
    MODES,
    OBJECTIVES,
    DeploymentPlan,
    InstanceError,
    instance_from_dict,
    plan_report,
    solve,
    validate_plan,
)
from .profiles import ProfileError
from .scenario import Scenario, data_path, load_scenario
from .sim import POLICIES, PREDICTORS, SimConfig, SimError, SimMetrics, epoch_sensitivity_sweep, run_simulation
from .traces import DemandTrace, SynthParams, TraceError, load_trace_csv, synth_trace, write_trace_csv

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_TIME_LIMIT, EXIT_INVALID = 0, 1, 2, 3, 4
OUT_DIR_ENV = "FLOWPLAN_OUT_DIR"
POLICY_NAMES = {"static": "Static", "opt": "Opt", "opt_mult": "Opt+Mult"}
_OBJECTIVE_ALIASES = {"energy": "min_energy", "cost": "min_cost", "accuracy": "max_accuracy_under_budget"}
_INPUT_ERRORS = (ProfileError, TraceError, SpecError, InstanceError, SimError, json.JSONDecodeError,
                 FileNotFoundError, IsADirectoryError, LookupError, ValueError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- output plumbing -----------------------------------------------------------


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


class Outputs:
    """Collects files for one command and writes them plus the manifest."""

    def __init__(self, args: argparse.Namespace, inputs: Sequence[Path]):
        self.dir = Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or "out")
        self.args = args
        self.inputs = [Path(p) for p in inputs if p is not None]
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        if Path(name).name != name:
            raise ValueError(f"output name {name!r} must be a bare file name")
        self.files[name] = text

    def commit(self) -> Path:
        for name, text in self.files.items():
            atomic_write(self.dir / name, text)
        config = {k: v for k, v in vars(self.args).items() if k not in ("func", "out_dir")}
        manifest = {
            "command": self.args.command,
            "argv": _jsonable(config),
            "inputs": {str(p): sha256_file(p) for p in self.inputs},
            "outputs": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(self.files.items())},
            "seed": getattr(self.args, "seed", None),
            "version": __version__,
        }
        atomic_write(self.dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return self.dir


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# -- shared inputs -------------------------------------------------------------


def _scenario(args) -> tuple[Scenario, Path]:
    path = Path(args.scenario) if args.scenario else data_path("scenario_demo.json")
    return load_scenario(path), path


def _trace(args) -> tuple[DemandTrace, Path | None]:
    if getattr(args, "trace", None):
        return load_trace_csv(args.trace), Path(args.trace)
    if getattr(args, "seed", None) is not None:
        return synth_trace(SynthParams(seed=args.seed)), None
    path = data_path("demo_trace.csv")
    return load_trace_csv(path), path


def _objective(name: str) -> str:
    return _OBJECTIVE_ALIASES.get(name, name)


def _demand_file(path: Path) -> dict[tuple[str, str], tuple[float, float]]:
    doc = json.loads(path.read_text())
    records = doc["demands"] if isinstance(doc, Mapping) else doc
    out = {}
    for r in records:
        peak = float(r["peak"])
        out[(r["workflow"], r["slo"])] = (peak, float(r.get("avg", peak)))
    return out


# -- timeline / summary --------------------------------------------------------


def _resource_order(resources: Sequence[str]) -> list[str]:
    return sorted(resources, key=lambda g: (g == "CPU", g))


def timeline_csv(metrics: SimMetrics) -> str:
    """Per-epoch rows plus a totals row (header only when there are no epochs)."""
    resources = _resource_order(metrics.resources)
    cols = ["epoch", *(f"gpus_{g}" for g in resources), "energy_kwh", "cost", "violations", "dropped"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for e in metrics.epochs:
        w.writerow([e.epoch, *(repr(e.gpus_by_type.get(g, 0.0)) for g in resources),
                    repr(e.energy_kwh), repr(e.cost), repr(e.violations), repr(e.dropped)])
    if metrics.epochs:
        gpus = metrics.gpus_by_type()
        w.writerow(["total", *(repr(gpus.get(g, 0.0)) for g in resources), repr(metrics.energy_kwh),
                    repr(metrics.cost), repr(metrics.violations), repr(metrics.dropped)])
    return buf.getvalue()


def summary_text(runs: Mapping[str, SimMetrics]) -> str:
    """One line per policy: peak accelerator units, energy in MWh and cost in dollars."""
    lines = [f"{'Policy':<10} | {'# of GPUs':>9} | {'Energy (MWh)':>12} | {'Cost':>12}"]
    for policy, m in runs.items():
        name = POLICY_NAMES.get(policy, policy)
        lines.append(f"{name:<10} | {m.peak_gpus():>9.0f} | {m.energy_kwh / 1000:>12.4f} | ${m.cost:>11,.2f}")
    return "\n".join(lines) + "\n"


def _runs_from_doc(doc: Mapping) -> dict[str, SimMetrics]:
    if "runs" not in doc or not isinstance(doc["runs"], Mapping):
        raise SimError("metrics document must have a 'runs' object")
    return {policy: SimMetrics.from_dict(run) for policy, run in doc["runs"].items()}


def _report_files(out: Outputs, runs: Mapping[str, SimMetrics], fmt: str) -> None:
    if fmt in ("csv", "both"):
        for policy, m in runs.items():
            out.add("timeline.csv" if len(runs) == 1 else f"timeline_{policy}.csv", timeline_csv(m))
    if fmt in ("summary", "both"):
        out.add("summary.txt", summary_text(runs))


# -- commands ------------------------------------------------------------------


def cmd_validate(args) -> int:
    checked = False
    problems: list[str] = []
    if args.spec:
        checked = True
        catalog = load_catalog(args.catalog or data_path("executors.json"))
        wf = resolve_executors(parse_spec(Path(args.spec).read_text()), catalog)
        for node in wf.nodes:
            print(f"{node.task_id}: {node.executor_name}")
        for e in wf.edges:
            print(f"{e.src} -> {e.dst} [{e.data_type}]")
        problems += [f"type mismatch on {m.edge.src} -> {m.edge.dst}: expected {m.expected}, found {m.found}"
                     for m in type_check(wf, catalog)]
    if args.scenario:
        checked = True
        scenario, _ = _scenario(args)
        p = scenario.profiles
        print(f"scenario: {len(p.resources)} resources, {len(p.models)} model profiles, "
              f"{len(p.workflows)} workflow configs")
    if args.trace:
        checked = True
        trace = load_trace_csv(args.trace)
        print(f"trace: {trace.num_bins} bins of {trace.resolution:g} s, {len(trace.pairs)} pairs, "
              f"{trace.total():g} requests")
    if args.instance:
        checked = True
        instance = instance_from_dict(json.loads(Path(args.instance).read_text()))
        print(f"instance: {len(instance.demands)} demands, {len(instance.models)} models")
        if args.plan:
            plan = DeploymentPlan.from_dict(json.loads(Path(args.plan).read_text()))
            problems += [f"{v.constraint_id} {list(v.tuple)} slack {v.slack:g}"
                         for v in validate_plan(instance, plan)]
    if not checked:
        raise UsageError("validate: give at least one of --spec, --scenario, --trace, --instance")
    for p in problems:
        print(p, file=sys.stderr)
    return EXIT_INVALID if problems else EXIT_OK


def cmd_plan(args) -> int:
    objective = _objective(args.objective)
    if args.instance:
        inputs = [Path(args.instance)]
        doc = json.loads(Path(args.instance).read_text())
        for key in ("objective", "mode", "backend", "time_limit"):
            value = getattr(args, key)
            if value is not None:
                doc[key] = _objective(value) if key == "objective" else value
        instance = instance_from_dict(doc)
    else:
        scenario, spath = _scenario(args)
        inputs = [spath]
        if args.demand:
            demands = _demand_file(Path(args.demand))
            inputs.append(Path(args.demand))
        else:
            trace, tpath = _trace(args)
            inputs.append(tpath)
            demands = {p: (float(r.max(initial=0.0)), float(r.mean()) if len(r) else 0.0)
                       for p in trace.pairs for r in [trace.rates(p)]}
        overrides = {k: getattr(args, k) for k in ("backend", "time_limit") if getattr(args, k) is not None}
        instance = scenario.instance(demands, objective or "min_energy", args.mode or "joint", **overrides)
    plan = solve(instance)
    out = Outputs(args, inputs)
    out.add("plan.json", _dumps(plan.to_dict()))
    if plan.status in ("optimal", "time_limit") and plan.alloc_peak is not None:
        report = plan_report(instance, plan)
        out.add("plan_report.json", _dumps(report.to_dict()))
    out.commit()
    counts = {m: n for m, n in plan.instance_counts.items() if n}
    print(f"status: {plan.status}")
    print(f"objective: {plan.objective_value}")
    print(f"instances: {json.dumps(counts, sort_keys=True)}")
    if plan.status == "infeasible":
        for pair, reason in sorted(plan.diagnosis.items()):
            print(f"  {pair}: {reason}", file=sys.stderr)
        print("plan is infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    if plan.status == "time_limit":
        print(f"solver hit the time limit (gap {plan.gap:g})", file=sys.stderr)
        return EXIT_TIME_LIMIT
    if plan.status != "optimal":
        print(f"solver returned {plan.status}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _sim_config(args, policy: str) -> SimConfig:
    return SimConfig(
        epoch_length=args.epoch_minutes * 60.0,
        policy=policy,
        objective=_objective(args.objective),
        provisioning_delay=args.delay,
        predictor=args.predictor,
        autoscale=not args.no_autoscale,
        early_reopt=not args.no_early_reopt,
    )


def cmd_simulate(args) -> int:
    scenario, spath = _scenario(args)
    trace, tpath = _trace(args)
    policies = list(POLICIES) if args.policy == "all" else [args.policy]
    runs = {p: run_simulation(trace, _sim_config(args, p), scenario) for p in policies}
    out = Outputs(args, [spath, tpath])
    out.add("metrics.json", _dumps({"runs": {p: m.to_dict() for p, m in runs.items()}}))
    _report_files(out, runs, "both")
    out.commit()
    sys.stdout.write(summary_text(runs))
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario, spath = _scenario(args)
    trace, tpath = _trace(args)
    intervals = [m * 60.0 for m in args.intervals]
    base = SimConfig(policy=args.policy, objective=_objective(args.objective), provisioning_delay=args.delay)
    rows = epoch_sensitivity_sweep(trace, intervals, scenario, base)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    fields = [f.name for f in dataclasses.fields(rows[0])] if rows else ["interval"]
    w.writerow(fields)
    for r in rows:
        w.writerow([repr(getattr(r, f)) for f in fields])
    out = Outputs(args, [spath, tpath])
    out.add("sweep.csv", buf.getvalue())
    out.commit()
    for r in rows:
        print(f"{r.interval / 60:>6g} min  cost ${r.total_cost:,.2f}  utilization {r.mean_utilization:.3f}  "
              f"under-prediction {r.under_prediction_fraction:.4f}")
    return EXIT_OK


def cmd_gen_trace(args) -> int:
    rates = {}
    for item in args.rate or ["video_qa=3.0", "code_gen=1.0"]:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--rate expects workflow=requests_per_second, got {item!r}")
        rates[name] = float(value)
    mix = json.loads(args.slo_mix) if args.slo_mix else None
    params = SynthParams(
        duration=args.hours * 3600.0, resolution=args.resolution, base_rate=rates,
        diurnal_amplitude=args.amplitude, noise_std=args.noise, slo_mix=mix, seed=args.seed,
        peak_hour=args.peak_hour,
    )
    trace = synth_trace(params)
    out = Outputs(args, [])
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "trace.csv"
        write_trace_csv(trace, path)
        out.add("trace.csv", path.read_text())
    out.commit()
    print(f"{trace.num_bins} bins, {len(trace.pairs)} pairs, {trace.total():.1f} requests")
    return EXIT_OK


def cmd_report(args) -> int:
    doc = json.loads(Path(args.metrics).read_text())
    runs = _runs_from_doc(doc)
    if args.policy:
        if args.policy not in runs:
            raise SimError(f"metrics have no run for policy {args.policy!r}")
        runs = {args.policy: runs[args.policy]}
    out = Outputs(args, [Path(args.metrics)])
    _report_files(out, runs, args.format)
    out.commit()
    if args.format in ("summary", "both"):
        sys.stdout.write(summary_text(runs))
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flowplan", description="Plan and simulate multi-workflow LLM serving.")
    parser.add_argument("--version", action="version", version=f"flowplan {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def common(p, seed=False):
        p.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or ./out)")
        p.add_argument("--scenario", help="scenario JSON (default: bundled demo scenario)")
        if seed:
            p.add_argument("--seed", type=int, help="synthesize the trace with this seed instead of the bundled one")
        return p

    p = sub.add_parser("validate", help="check a workflow spec, scenario, trace, or instance and plan")
    p.add_argument("--spec", help="declarative workflow (JSON or DSL)")
    p.add_argument("--catalog", help="executor catalog JSON (default: bundled)")
    p.add_argument("--scenario")
    p.add_argument("--trace")
    p.add_argument("--instance", help="optimization instance JSON")
    p.add_argument("--plan", help="plan JSON to check against --instance")
    p.set_defaults(func=cmd_validate, out_dir=None)

    p = common(sub.add_parser("plan", help="solve one planning instance"), seed=True)
    p.add_argument("--instance", help="full instance JSON (overrides --scenario)")
    p.add_argument("--demand", help="JSON list of {workflow, slo, peak, avg} in requests/second")
    p.add_argument("--trace", help="derive demand from a trace's peak and mean rates")
    p.add_argument("--objective", choices=sorted(OBJECTIVES) + sorted(_OBJECTIVE_ALIASES))
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--backend", choices=["highs", "bnb"])
    p.add_argument("--time-limit", type=float)
    p.set_defaults(func=cmd_plan)

    def sim_flags(p):
        p.add_argument("--trace", help="trace CSV (default: bundled demo trace)")
        p.add_argument("--objective", default="min_cost", choices=sorted(OBJECTIVES) + sorted(_OBJECTIVE_ALIASES))
        p.add_argument("--delay", type=float, default=1200.0, help="provisioning delay in seconds")

    p = common(sub.add_parser("simulate", help="run the epoch simulation"), seed=True)
    sim_flags(p)
    p.add_argument("--policy", default="all", choices=[*POLICIES, "all"])
    p.add_argument("--epoch-minutes", type=float, default=60.0)
    p.add_argument("--predictor", default="ewma", choices=PREDICTORS)
    p.add_argument("--no-autoscale", action="store_true")
    p.add_argument("--no-early-reopt", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("sweep", help="vary the optimization interval"), seed=True)
    sim_flags(p)
    p.add_argument("--policy", default="opt_mult", choices=["opt", "opt_mult"])
    p.add_argument("--intervals", type=float, nargs="+", default=[20, 60, 120, 240, 360], help="minutes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-trace", help="write a seeded synthetic diurnal trace")
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hours", type=float, default=24.0)
    p.add_argument("--resolution", type=float, default=60.0)
    p.add_argument("--rate", action="append", help="workflow=requests_per_second (repeatable)")
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--peak-hour", type=float, default=12.0)
    p.add_argument("--slo-mix", help='JSON, e.g. {"video_qa": {"accuracy-good": 0.7, "latency-good": 0.3}}')
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("report", help="render timeline CSV and summary from metrics.json")
    p.add_argument("metrics")
    p.add_argument("--format", default="both", choices=["csv", "summary", "both"])
    p.add_argument("--policy", choices=POLICIES)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
