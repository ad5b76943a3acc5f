"""Every tool placement of the verification workflow against its latency SLO."""
import itertools

from flowplan.compiler import load_catalog, load_placement_scenario
from flowplan.profiles import load_profiles
from flowplan.scenario import data_path

from _common import parser, print_table, write_rows


def main():
    args = parser(__doc__).parse_args()
    models, _ = load_profiles(data_path("models.json"), data_path("workflows.json"))
    sc = load_placement_scenario(data_path("placement_verify.json"), load_catalog(data_path("executors.json")), models)
    tasks = sorted(sc.tool_stages)
    rows = []
    for choice in itertools.product(*([o.resource for o in sc.tool_stages[t].placement_options] for t in tasks)):
        placements = dict(zip(tasks, choice))
        latency, units, ok = sc.evaluate(placements)
        name = next((k for k, v in sc.named.items() if v.items() <= placements.items()), "-")
        rows.append({"binding": name, **placements,
                     "latency_s": latency, "gpus": units, "meets_slo": ok})
    print_table(rows)
    best, latency, units = sc.select()
    print(f"selected {best} at {latency:.2f}s using {units:g} GPUs (SLO {sc.slo_seconds:g}s)")
    print("wrote", write_rows(args.out_dir, "dag_placement.csv", rows))


if __name__ == "__main__":
    main()
