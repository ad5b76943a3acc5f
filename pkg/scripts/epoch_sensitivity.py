"""Cost, utilization and under-prediction as the re-optimization interval grows."""
from flowplan.scenario import data_path, default_scenario
from flowplan.sim import epoch_sensitivity_sweep
from flowplan.traces import load_trace_csv

from _common import parser, print_table, write_rows


def main():
    p = parser(__doc__)
    p.add_argument("--trace", default=data_path("demo_trace.csv"))
    p.add_argument("--minutes", type=float, nargs="+", default=[20, 60, 120, 240, 360])
    args = p.parse_args()
    rows = [{"interval_min": r.interval / 60, "total_cost": r.total_cost, "total_energy_kwh": r.total_energy_kwh,
             "mean_utilization": r.mean_utilization, "under_prediction_fraction": r.under_prediction_fraction}
            for r in epoch_sensitivity_sweep(load_trace_csv(args.trace), [m * 60 for m in args.minutes],
                                             default_scenario())]
    print_table(rows)
    print("wrote", write_rows(args.out_dir, "epoch_sensitivity.csv", rows))


if __name__ == "__main__":
    main()
