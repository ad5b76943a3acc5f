"""Optimal cost and energy rates as the accuracy tier of one workflow is relaxed."""
from flowplan.optimizer import plan_report, solve
from flowplan.profiles import TIERS
from flowplan.scenario import default_scenario

from _common import parser, print_table, write_rows


def main():
    p = parser(__doc__)
    p.add_argument("--workflow", default="video_qa")
    p.add_argument("--peaks", type=float, nargs="+", default=[1.0, 4.0, 16.0], help="peak requests/second")
    args = p.parse_args()
    sc = default_scenario()
    rows = []
    for peak in args.peaks:
        for tier in TIERS:
            label = f"accuracy-{tier}"
            demand = {(args.workflow, label): (peak, peak / 2)}
            row = {"peak_rps": peak, "tier": tier, "threshold": sc.slo(args.workflow, label).threshold}
            for objective in ("min_cost", "min_energy"):
                inst = sc.instance(demand, objective)
                plan = solve(inst)
                report = plan_report(inst, plan) if plan.status == "optimal" else None
                row[f"{objective}_value"] = plan.objective_value if report else float("nan")
                row[f"{objective}_accuracy"] = report.mean_accuracy if report else float("nan")
            rows.append(row)
    print_table(rows)
    print("wrote", write_rows(args.out_dir, "slo_sweep.csv", rows))


if __name__ == "__main__":
    main()
