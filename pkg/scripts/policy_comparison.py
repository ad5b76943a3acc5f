"""Static, per-pair and shared-pool policies over one day of bundled demand."""
from flowplan.cli import summary_text
from flowplan.scenario import data_path, default_scenario
from flowplan.sim import SimConfig, run_simulation
from flowplan.traces import load_trace_csv

from _common import parser, write_rows


def main():
    p = parser(__doc__)
    p.add_argument("--trace", default=data_path("demo_trace.csv"))
    p.add_argument("--objective", default="min_cost")
    args = p.parse_args()
    sc, trace = default_scenario(), load_trace_csv(args.trace)
    runs = {policy: run_simulation(trace, SimConfig(policy=policy, objective=args.objective), sc)
            for policy in ("static", "opt", "opt_mult")}
    print(summary_text(runs), end="")
    rows = [{"policy": policy, "peak_gpus": m.peak_gpus(), "energy_kwh": m.energy_kwh, "cost": m.cost,
             "dropped": m.dropped, "violations": m.violations, "mean_utilization": m.mean_utilization}
            for policy, m in runs.items()]
    print("wrote", write_rows(args.out_dir, "policy_comparison.csv", rows))


if __name__ == "__main__":
    main()
