import csv
import hashlib
import json

import pytest

from flowplan import cli
from flowplan.optimizer import DeploymentPlan, instance_to_dict
from flowplan.scenario import data_path
from flowplan.sim import EpochMetrics, SimMetrics

from conftest import small_instance


def run(args, capsys=None):
    code = cli.main([str(a) for a in args])
    return code, (capsys.readouterr() if capsys else None)


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return path


def test_validate_listing_spec(capsys):
    code, out = run(["validate", "--spec", data_path("video_qa.json"), "--catalog", data_path("executors.json")],
                    capsys)
    assert code == 0
    assert "stt: speech_to_text" in out.out
    assert "frame_extract -> q_a [frame]" in out.out


def test_plan_zero_demand(tmp_path):
    inst = write_json(tmp_path / "i.json", instance_to_dict(small_instance(peak=0.0, avg=0.0)))
    code, _ = run(["plan", "--instance", inst, "--out-dir", tmp_path / "out"])
    assert code == 0
    plan = json.loads((tmp_path / "out" / "plan.json").read_text())
    assert plan["status"] == "optimal" and set(plan["instance_counts"].values()) == {0}
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["command"] == "plan"
    assert manifest["inputs"] == {str(inst): hashlib.sha256(inst.read_bytes()).hexdigest()}
    assert set(manifest["outputs"]) == {"plan.json", "plan_report.json"}


def test_plan_empty_budget_exit_2(tmp_path, capsys):
    inst = write_json(tmp_path / "i.json", instance_to_dict(small_instance(budgets={"A100": 0, "H100": 0})))
    code, out = run(["plan", "--instance", inst, "--out-dir", tmp_path], capsys)
    assert code == 2 and "infeasible" in out.err


def test_plan_time_limit_exit_3(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "solve", lambda inst: DeploymentPlan("time_limit", {}, gap=0.1))
    inst = write_json(tmp_path / "i.json", instance_to_dict(small_instance()))
    assert run(["plan", "--instance", inst, "--out-dir", tmp_path])[0] == 3


def test_plan_from_bundled_scenario(tmp_path):
    demand = write_json(tmp_path / "d.json", [{"workflow": "video_qa", "slo": "accuracy-good", "peak": 1.0}])
    code, _ = run(["plan", "--demand", demand, "--objective", "cost", "--out-dir", tmp_path / "o"])
    assert code == 0
    report = json.loads((tmp_path / "o" / "plan_report.json").read_text())
    assert report["cost_rate"] > 0


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["plan", "--mode", "sideways"], ["validate"]])
def test_usage_errors(argv, capsys):
    assert run(argv, capsys)[0] == 1


def test_bad_trace_exit_4(tmp_path, capsys):
    bad = tmp_path / "t.csv"
    bad.write_text("timestamp_s,workflow,slo_tier,count\n60,w,a,1\n0,w,a,1\n")
    code, out = run(["validate", "--trace", bad], capsys)
    assert code == 4 and "line 3" in out.err


def test_validate_plan_violation_exit_4(tmp_path, capsys):
    inst = small_instance()
    ipath = write_json(tmp_path / "i.json", instance_to_dict(inst))
    key = ("w", "acc", "c", "M@A100x4")
    ppath = write_json(tmp_path / "p.json", DeploymentPlan("optimal", {"M@A100x4": 1}, {key: 1.0}, {key: 0.5}).to_dict())
    code, out = run(["validate", "--instance", ipath, "--plan", ppath], capsys)
    assert code == 4 and "capacity" in out.err


def epoch(i, **kw):
    base = dict(epoch=i, start=3600.0 * i, gpus_by_type={"A100": 4.0, "H100": 2.0, "CPU": 0.0},
                peak_gpus_by_type={"A100": 4.0, "H100": 2.0, "CPU": 0.0}, energy_kwh=1.5 + i, cost=10.0 * (i + 1),
                violations=float(i), dropped=0.5, requests=100.0, shadow_dropped=0.5, served_tokens=1.0,
                capacity_tokens=2.0, status="optimal", reoptimized=False, instance_counts={})
    base.update(kw)
    return EpochMetrics(**base)


def report(tmp_path, metrics: SimMetrics, fmt="csv"):
    path = write_json(tmp_path / "metrics.json", {"runs": {"opt": metrics.to_dict()}})
    assert run(["report", path, "--format", fmt, "--out-dir", tmp_path / "r"])[0] == 0
    return tmp_path / "r"


def test_report_empty_metrics(tmp_path):
    out = report(tmp_path, SimMetrics(["A100", "CPU", "H100"]))
    rows = list(csv.reader((out / "timeline.csv").open()))
    assert rows == [["epoch", "gpus_A100", "gpus_H100", "gpus_CPU", "energy_kwh", "cost", "violations", "dropped"]]


def test_report_totals_are_column_sums(tmp_path):
    out = report(tmp_path, SimMetrics(["A100", "CPU", "H100"], [epoch(0), epoch(1)]))
    rows = list(csv.DictReader((out / "timeline.csv").open()))
    assert [r["epoch"] for r in rows] == ["0", "1", "total"]
    for col in rows[0]:
        if col != "epoch":
            assert float(rows[2][col]) == pytest.approx(float(rows[0][col]) + float(rows[1][col]))


def test_report_schema_mismatch(tmp_path, capsys):
    path = write_json(tmp_path / "m.json", {"epochs": []})
    assert run(["report", path, "--out-dir", tmp_path], capsys)[0] == 4


def test_simulate_summary_ordering_and_idempotence(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_DIR_ENV, str(tmp_path / "a"))
    assert run(["simulate"])[0] == 0
    lines = (tmp_path / "a" / "summary.txt").read_text().splitlines()
    costs = {line.split("|")[0].strip(): float(line.split("|")[3].strip().lstrip("$").replace(",", ""))
             for line in lines[1:]}
    assert costs["Static"] > costs["Opt"] > costs["Opt+Mult"]
    assert run(["simulate", "--out-dir", tmp_path / "b"])[0] == 0
    for name in ("metrics.json", "summary.txt", "timeline_opt.csv", "manifest.json"):
        a, b = (tmp_path / d / name for d in "ab")
        if name == "manifest.json":
            assert json.loads(a.read_text())["outputs"] == json.loads(b.read_text())["outputs"]
        else:
            assert a.read_bytes() == b.read_bytes()


def test_gen_trace_seeded(tmp_path):
    for d in ("a", "b"):
        assert run(["gen-trace", "--seed", 4, "--hours", 2, "--out-dir", tmp_path / d])[0] == 0
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()
    assert json.loads((tmp_path / "a" / "manifest.json").read_text())["seed"] == 4


def test_sweep_writes_rows(tmp_path):
    t = tmp_path / "t"
    assert run(["gen-trace", "--seed", 1, "--hours", 4, "--out-dir", t])[0] == 0
    code, _ = run(["sweep", "--trace", t / "trace.csv", "--intervals", 20, 60, "--out-dir", tmp_path / "s"])
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "s" / "sweep.csv").open()))
    assert [float(r["interval"]) for r in rows] == [1200.0, 3600.0]
    assert {"total_cost", "mean_utilization", "under_prediction_fraction"} <= set(rows[0])


def test_outputs_stay_in_out_dir(tmp_path):
    before = set(tmp_path.iterdir())
    assert run(["gen-trace", "--hours", 1, "--out-dir", tmp_path / "only"])[0] == 0
    assert set(tmp_path.iterdir()) - before == {tmp_path / "only"}
    assert {p.name for p in (tmp_path / "only").iterdir()} == {"trace.csv", "manifest.json"}
