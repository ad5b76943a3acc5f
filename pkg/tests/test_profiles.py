import json
import math
import random

import pytest
from hypothesis import given, strategies as st

from flowplan.profiles import (
    LoadPoint,
    ModelProfile,
    OverloadError,
    ProfileError,
    TokenStats,
    derive_slo_tiers,
    dump_models,
    dump_workflows,
    estimate_request_latency,
    load_profiles,
    nearest_rank,
    parse_models,
    parse_workflows,
    perf_at_load,
)
from flowplan.scenario import data_path

from conftest import make_config, make_model


def ref_percentile(values, pct):
    ordered = sorted(values)
    return ordered[max(0, math.ceil(pct / 100 * len(ordered)) - 1)]


@pytest.fixture
def bundled():
    return load_profiles(data_path("models.json"), data_path("workflows.json"))


def test_gemma_a100_record_loads(bundled):
    models, _ = bundled
    gemma = next(m for m in models if m.key == "Gemma-3-27B@A100x4")
    assert gemma.sustainable_tps == 699
    assert gemma.tpot == 0.0624
    assert perf_at_load(gemma, 699).tpot == 0.0624


def test_empty_workflow_file_is_empty(tmp_path):
    models = tmp_path / "m.json"
    models.write_text(json.dumps(dump_models([make_model()])))
    workflows = tmp_path / "w.json"
    workflows.write_text("")
    ms, ws = load_profiles(models, workflows)
    assert len(ms) == 1 and ws == []


def test_token_percentiles_out_of_order_rejected():
    record = {"workflow": "w", "config_id": "c", "accuracy": 0.5, "compatible_models": ["M"],
              "tokens_per_request": {"p50": 900, "p95": 700, "p99": 1000, "mean": 800}}
    with pytest.raises(ProfileError, match="tokens_per_request"):
        parse_workflows([record])


def test_duplicate_and_unordered_curves_rejected():
    with pytest.raises(ProfileError):
        ModelProfile("M", "A100", 4, (LoadPoint(100, 0.2, 0.02, 300), LoadPoint(50, 0.2, 0.02, 200)))
    with pytest.raises(ProfileError):
        parse_models([dump_models([make_model()])[0]] * 2)


def test_perf_at_stored_point_is_exact():
    m = ModelProfile("M", "A100", 1, (LoadPoint(100, 0.1, 0.01, 400), LoadPoint(200, 0.3, 0.02, 600)))
    assert perf_at_load(m, 100) == LoadPoint(100, 0.1, 0.01, 400)
    assert perf_at_load(m, 200) == LoadPoint(200, 0.3, 0.02, 600)


def test_perf_midpoint_power():
    m = ModelProfile("M", "A100", 1, (LoadPoint(100, 0.1, 0.01, 400), LoadPoint(200, 0.3, 0.02, 600)))
    assert perf_at_load(m, 150).power == pytest.approx(500)


def test_perf_below_first_point_holds_and_overload_raises():
    m = ModelProfile("M", "A100", 1, (LoadPoint(100, 0.1, 0.01, 400), LoadPoint(200, 0.3, 0.02, 600)))
    assert perf_at_load(m, 0).power == 400
    with pytest.raises(OverloadError):
        perf_at_load(m, 200.001)


@given(st.lists(st.floats(1, 1000), min_size=2, max_size=6, unique=True), st.floats(0, 1))
def test_perf_monotone_in_load(xs, frac):
    xs = sorted(xs)
    curve = tuple(LoadPoint(x, 0.1 + i * 0.01, 0.01 + i * 0.001, 100 + 10 * i) for i, x in enumerate(xs))
    m = ModelProfile("M", "A100", 1, curve)
    a = xs[-1] * frac
    b = min(xs[-1], a + (xs[-1] - a) * 0.5)
    pa, pb = perf_at_load(m, a), perf_at_load(m, b)
    assert pa.ttft <= pb.ttft + 1e-12 and pa.tpot <= pb.tpot + 1e-12 and pa.power <= pb.power + 1e-9


def test_accuracy_tiers_best_is_max():
    accs = [0.662, 0.644, 0.614, 0.58, 0.50]
    configs = [make_config(cid=f"c{i}", accuracy=a) for i, a in enumerate(accs)]
    tiers = derive_slo_tiers(configs, [make_model()])
    assert tiers["w"]["max_accuracy"]["best"] == 0.662


def test_single_config_collapses_tiers():
    tiers = derive_slo_tiers([make_config(accuracy=0.5)], [make_model()])
    assert set(tiers["w"]["max_accuracy"].values()) == {0.5}


def test_tiers_match_reference_percentiles():
    rng = random.Random(7)
    accs = [round(rng.uniform(0.3, 0.9), 4) for _ in range(20)]
    configs = [make_config(cid=f"c{i}", accuracy=a, p95=rng.uniform(100, 1500)) for i, a in enumerate(accs)]
    model = make_model()
    tiers = derive_slo_tiers(configs, [model])
    for tier, pct in {"best": 100, "good": 95, "fair": 80, "basic": 50}.items():
        assert tiers["w"]["max_accuracy"][tier] == ref_percentile(accs, pct)
    lats = [model.ttft + c.tokens_per_request.p95 * model.tpot for c in configs]
    for tier, pct in {"best": 0, "good": 5, "fair": 20, "basic": 50}.items():
        assert tiers["w"]["min_latency"][tier] == pytest.approx(ref_percentile(lats, pct), rel=1e-12)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.integers(0, 100))
def test_nearest_rank_matches_reference(values, pct):
    assert nearest_rank(values, pct) == ref_percentile(values, pct)


def test_latency_direct_arithmetic():
    fast = make_model(ttft=0.2, tpot=0.0224)
    slow = make_model(ttft=0.2, tpot=0.0624)
    cfg = make_config(p95=600)
    assert estimate_request_latency(cfg, fast) == pytest.approx(13.64)
    assert estimate_request_latency(cfg, slow) == pytest.approx(37.64)


def test_llava_percentile_spread(bundled):
    models, configs = bundled
    cfg = next(c for c in configs if c.config_id == "llava-f10-stt")
    model = next(m for m in models if m.model_name == "Llava-OneVision-7B")
    assert cfg.tokens_per_request.p50 == 600 and cfg.tokens_per_request.p99 == 1200
    d = estimate_request_latency(cfg, model, "p99") - estimate_request_latency(cfg, model, "p50")
    assert d == pytest.approx(600 * model.tpot, rel=1e-12)


def test_profile_round_trip(bundled):
    models, configs = bundled
    assert parse_models(dump_models(models)) == models
    assert parse_workflows(dump_workflows(configs)) == configs


def test_token_stats_indexing():
    t = TokenStats(1, 2, 3, 1.5)
    assert t["p95"] == 2 and t["mean"] == 1.5
    with pytest.raises(KeyError):
        t["p90"]
