import pytest
from hypothesis import given, strategies as st

from flowplan.compiler import (
    DeclarativeSpec,
    Edge,
    LogicalWorkflow,
    SpecError,
    TaskSpec,
    ToolBinding,
    UnresolvedTaskError,
    WorkflowNode,
    critical_path_latency,
    load_catalog,
    load_placement_scenario,
    match_request,
    parse_spec,
    resolve_executors,
    serialize_spec,
    type_check,
    validate_spec,
)
from flowplan.profiles import Placement, load_profiles
from flowplan.scenario import data_path


@pytest.fixture(scope="module")
def catalog():
    return load_catalog(data_path("executors.json"))


@pytest.fixture(scope="module")
def video_spec():
    return parse_spec(data_path("video_qa.wf").read_text())


def tool(latency, resource="CPU", units=1.0):
    return ToolBinding(Placement(resource, latency, units))


def test_video_spec_shape(video_spec):
    assert len(video_spec.tasks) == 4
    deps = {(ref, t.task_id) for t in video_spec.tasks for ref in t.inputs
            if ref in {x.task_id for x in video_spec.tasks}}
    assert deps == {("scene_detect", "frame_extract"), ("scene_detect", "stt"),
                    ("frame_extract", "q_a"), ("stt", "q_a")}


def test_json_and_dsl_forms_agree(video_spec):
    assert parse_spec(data_path("video_qa.json").read_text()) == video_spec
    for fmt in ("json", "dsl"):
        assert parse_spec(serialize_spec(video_spec, fmt)) == video_spec


def test_def_header_and_comments():
    src = '''
    def tiny(query):  # entry point
        answer = "Answer the query given some context."   # only step
        out = answer(query)
        return out
    '''
    spec = parse_spec("\n".join(line.strip() for line in src.splitlines()))
    assert spec.workflow_name == "tiny" and spec.output == "answer"


def test_empty_task_list_rejected():
    with pytest.raises(SpecError, match="no tasks"):
        parse_spec('{"workflow": "w", "tasks": []}')


def test_self_loop_rejected():
    with pytest.raises(SpecError, match="cycle"):
        validate_spec(DeclarativeSpec("w", (TaskSpec("a", "x", ("a",)),)))


def test_two_node_cycle_rejected():
    with pytest.raises(SpecError, match="cycle"):
        validate_spec(DeclarativeSpec("w", (TaskSpec("a", "x", ("b",)), TaskSpec("b", "y", ("a",)))))


def test_listing_resolves(video_spec, catalog):
    wf = resolve_executors(video_spec, catalog)
    assert wf.node("stt").executor_name == "speech_to_text"
    assert wf.node("scene_detect").executor_name == "scene_detection"
    assert wf.node("frame_extract").executor_name == "frame_extraction"
    assert wf.node("q_a").executor_name == "question_answering"
    assert len(wf.edges) == 4 and wf.sink == "q_a"
    assert type_check(wf, catalog) == []


def test_audio_alias_hit(catalog):
    spec = DeclarativeSpec("w", (TaskSpec("t", "Given a list of scenes, convert audio to text."),))
    assert resolve_executors(spec, catalog).node("t").executor_name == "speech_to_text"


def test_pinned_executor_wins(catalog):
    spec = DeclarativeSpec("w", (TaskSpec("t", "Given a list of scenes, convert audio to text.", (),
                                          {"executor": "whisper-cpu"}),))
    assert resolve_executors(spec, catalog).node("t").executor_name == "whisper-cpu"


def test_unmatched_description(catalog):
    spec = DeclarativeSpec("w", (TaskSpec("fold", "fold proteins"),))
    with pytest.raises(UnresolvedTaskError) as info:
        resolve_executors(spec, catalog)
    assert info.value.tasks == ["fold"]


def test_match_request_prefers_registered_workflow(catalog):
    registry = {"video_qa": "answer questions about videos"}
    assert match_request("answer a question about these videos", catalog, registry) == "video_qa"


def test_forced_type_mismatch(catalog):
    wf = LogicalWorkflow("w", (WorkflowNode("stt", "speech_to_text"), WorkflowNode("od", "object_detection")),
                         (Edge("stt", "od", "text"),))
    errors = type_check(wf, catalog)
    assert len(errors) == 1
    assert errors[0].expected == ("frame",) and errors[0].found == "text"


def test_empty_workflow_type_checks(catalog):
    assert type_check(LogicalWorkflow("w", (), ()), catalog) == []


def test_parallel_branches_join():
    wf = LogicalWorkflow("w", tuple(WorkflowNode(t, "x") for t in "abc"),
                         (Edge("a", "c", "text"), Edge("b", "c", "text")))
    assert critical_path_latency(wf, {"a": tool(10), "b": tool(12), "c": tool(5)}) == 17


def test_single_node_path():
    wf = LogicalWorkflow("w", (WorkflowNode("a", "x"),), ())
    assert critical_path_latency(wf, {"a": tool(3)}) == 3


@given(st.lists(st.floats(0.1, 50), min_size=1, max_size=8))
def test_chain_latency_is_sum(latencies):
    ids = [f"n{i}" for i in range(len(latencies))]
    wf = LogicalWorkflow("w", tuple(WorkflowNode(t, "x") for t in ids),
                         tuple(Edge(a, b, "text") for a, b in zip(ids, ids[1:])))
    got = critical_path_latency(wf, {t: tool(x) for t, x in zip(ids, latencies)})
    assert got == pytest.approx(sum(latencies), rel=1e-12)


@pytest.fixture(scope="module")
def placement(catalog):
    models, _ = load_profiles(data_path("models.json"), data_path("workflows.json"))
    return load_placement_scenario(data_path("placement_verify.json"), catalog, models)


def hand_latency(object_detect, stt):
    ttft, tpot = 0.36, 0.0624
    llm = {"q_a": ttft + 118 * tpot, "code_gen": ttft + 238 * tpot, "compare": ttft + 46 * tpot}
    qa_start = max(2.0 + 1.5 + object_detect, 2.0 + stt)
    return max(qa_start + llm["q_a"], llm["code_gen"]) + llm["compare"]


@pytest.mark.parametrize("name, od, stt, gpus, ok", [
    ("gpu_gpu", 3.0, 2.5, 6, True),
    ("cpu_cpu", 17.0, 6.0, 4, False),
    ("gpu_cpu", 3.0, 6.0, 5, True),
])
def test_placement_bindings(placement, name, od, stt, gpus, ok):
    latency, units, passed = placement.evaluate(placement.named[name])
    assert latency == pytest.approx(hand_latency(od, stt), rel=1e-12)
    assert units == gpus
    assert passed is ok


def test_placement_selection(placement):
    choice, latency, units = placement.select()
    assert choice["object_detect"] == "A100" and choice["stt"] == "CPU" and units == 5
