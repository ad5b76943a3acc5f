"""Minimum energy rate as the budget of one accelerator type grows."""
from flowplan.optimizer import plan_report, solve
from flowplan.scenario import default_scenario

from _common import parser, print_table, write_rows

DEMAND = {("video_qa", "accuracy-good"): (9.45, 6.3), ("video_qa", "latency-good"): (4.05, 2.7),
          ("code_gen", "accuracy-good"): (1.575, 1.05), ("code_gen", "latency-good"): (0.675, 0.45)}


def main():
    p = parser(__doc__)
    p.add_argument("--resource", default="H100")
    p.add_argument("--budgets", type=float, nargs="+", default=[0, 8, 16, 32, 64])
    p.add_argument("--objective", default="min_energy")
    args = p.parse_args()
    sc = default_scenario()
    units = sorted(sc.profiles.resources)
    rows = []
    for budget in args.budgets:
        inst = sc.instance(DEMAND, args.objective, budgets={**sc.budgets, args.resource: budget})
        plan = solve(inst)
        report = plan_report(inst, plan) if plan.status == "optimal" else None
        rows.append({"budget": budget, "status": plan.status,
                     **{f"units_{g}": report.gpus_by_type.get(g, 0) if report else "" for g in units},
                     "energy_rate": report.energy_rate if report else "",
                     "cost_rate": report.cost_rate if report else ""})
    print_table(rows)
    print("wrote", write_rows(args.out_dir, "resource_sweep.csv", rows))


if __name__ == "__main__":
    main()
