"""Declarative workflow specs -> typed logical DAGs.

A spec names tasks in natural language and wires them together; it says nothing
about models or hardware. Compilation resolves every task to an executor from a
catalog, types the edges from executor interfaces, and checks that data flowing
along each edge is something the consumer accepts.

Two spec syntaxes are accepted. JSON::

    {"workflow": "video_qa", "inputs": ["query", {"name": "videos", "type": "video"}],
     "tasks": [{"id": "scene_detect", "description": "...", "inputs": ["videos"]}, ...],
     "output": "q_a"}

and a line DSL that reads like a short program::

    workflow video_qa(query: text, videos: video)
    scene_detect = "Given a list of videos, identify scenes in each."
    stt          = "Given a list of scenes, convert audio to text." where executor=whisper-cpu
    scenes     = scene_detect(videos)
    transcript = stt(scenes)
    return transcript
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .profiles import (
    ModelProfile,
    Placement,
    ProfileError,
    ToolStage,
    WorkflowConfig,
    estimate_request_latency,
    tokens_from_dict,
    tool_stage_from_dict,
)

DATA_TYPES = ("video", "scene", "frame", "audio", "text", "tokens", "code")
EXECUTOR_KINDS = ("llm", "composition", "tool")


class SpecError(ValueError):
    """A workflow spec is malformed: syntax, duplicate ids, dangling references or cycles."""


class UnresolvedTaskError(LookupError):
    def __init__(self, tasks: Sequence[str]):
        self.tasks = list(tasks)
        super().__init__(
            "no executor in the catalog matches task(s): " + ", ".join(self.tasks)
            + "; onboard a suitable executor"
        )


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    description: str
    inputs: tuple[str, ...] = ()
    constraints: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class DeclarativeSpec:
    workflow_name: str
    tasks: tuple[TaskSpec, ...]
    external_inputs: tuple[tuple[str, str | None], ...] = ()
    output: str | None = None

    def task(self, task_id: str) -> TaskSpec:
        for t in self.tasks:
            if t.task_id == task_id:
                return t
        raise KeyError(task_id)


@dataclass(frozen=True)
class ExecutorCatalogEntry:
    executor_name: str
    kind: str
    description: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    aliases: tuple[str, ...]
    knobs: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EXECUTOR_KINDS:
            raise ValueError(f"executor {self.executor_name!r}: unknown kind {self.kind!r}")
        for t in self.inputs + self.outputs:
            if t not in DATA_TYPES:
                raise ValueError(f"executor {self.executor_name!r}: unknown data type {t!r}")
        if not self.aliases:
            raise ValueError(f"executor {self.executor_name!r}: aliases must be non-empty")


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    data_type: str


@dataclass(frozen=True)
class WorkflowNode:
    task_id: str
    executor_name: str
    constraints: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class LogicalWorkflow:
    workflow_name: str
    nodes: tuple[WorkflowNode, ...]
    edges: tuple[Edge, ...]
    # (external input name, consuming task)
    sources: tuple[tuple[str, str], ...] = ()

    def node(self, task_id: str) -> WorkflowNode:
        for n in self.nodes:
            if n.task_id == task_id:
                return n
        raise KeyError(task_id)

    @property
    def sink(self) -> str | None:
        produced = {e.src for e in self.edges}
        sinks = [n.task_id for n in self.nodes if n.task_id not in produced]
        return sinks[0] if len(sinks) == 1 else None

    def to_dict(self) -> dict:
        return {
            "workflow": self.workflow_name,
            "nodes": [
                {"task": n.task_id, "executor": n.executor_name, "constraints": dict(sorted(n.constraints.items()))}
                for n in self.nodes
            ],
            "edges": [{"from": e.src, "to": e.dst, "type": e.data_type} for e in self.edges],
            "sources": [{"input": name, "task": task} for name, task in self.sources],
            "sink": self.sink,
        }


@dataclass(frozen=True)
class TypeMismatch:
    edge: Edge
    expected: tuple[str, ...]
    found: str

    def __str__(self) -> str:
        return (
            f"{self.edge.src} -> {self.edge.dst}: expected one of {list(self.expected)}, "
            f"found {self.found!r}"
        )


# -- parsing -------------------------------------------------------------------

_IDENT = r"[A-Za-z_][A-Za-z0-9_\-]*"
_HEADER = re.compile(rf"^(?:workflow|def)\s+({_IDENT})\s*(?:\((.*)\))?\s*:?\s*$")
_DECL = re.compile(rf'^({_IDENT})\s*=\s*"((?:[^"\\]|\\.)*)"\s*(?:where\s+(.*))?$')
_CALL = re.compile(rf"^({_IDENT})\s*=\s*({_IDENT})\s*\((.*)\)\s*$")
_RETURN = re.compile(rf"^return\s+({_IDENT})\s*$")


def _strip_comment(line: str) -> str:
    quoted = False
    for i, ch in enumerate(line):
        if ch == '"' and (i == 0 or line[i - 1] != "\\"):
            quoted = not quoted
        elif ch == "#" and not quoted:
            return line[:i]
    return line


def _parse_kv(text: str, lineno: int) -> dict[str, str]:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise SpecError(f"line {lineno}: expected key=value, got {part!r}")
        key, value = (s.strip() for s in part.split("=", 1))
        out[key] = value.strip("\"'")
    return out


def _parse_dsl(source: str) -> DeclarativeSpec:
    name = None
    externals: list[tuple[str, str | None]] = []
    decls: dict[str, tuple[str, dict, int]] = {}
    producers: dict[str, str] = {}
    calls: dict[str, tuple[str, ...]] = {}
    output = None
    for lineno, raw in enumerate(source.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if name is None:
            m = _HEADER.match(line)
            if not m:
                raise SpecError(f"line {lineno}: expected 'workflow <name>(<inputs>)' or 'def <name>(<inputs>):'")
            name = m.group(1)
            for part in filter(None, (p.strip() for p in (m.group(2) or "").split(","))):
                arg, _, typ = (s.strip() for s in part.partition(":"))
                if typ and typ not in DATA_TYPES:
                    raise SpecError(f"line {lineno}: unknown data type {typ!r}")
                externals.append((arg, typ or None))
            continue
        if m := _DECL.match(line):
            task_id, desc, where = m.groups()
            if task_id in decls:
                raise SpecError(f"line {lineno}: duplicate task id {task_id!r}")
            decls[task_id] = (desc.replace('\\"', '"'), _parse_kv(where or "", lineno), lineno)
        elif m := _CALL.match(line):
            var, task_id, args = m.groups()
            if task_id not in decls:
                raise SpecError(f"line {lineno}: call to undeclared task {task_id!r}")
            if task_id in calls:
                raise SpecError(f"line {lineno}: task {task_id!r} invoked twice")
            inputs = []
            for arg in re.split(r"[,\[\]\s]+", args):
                if not arg:
                    continue
                if arg == var and var not in producers:
                    raise SpecError(f"line {lineno}: cycle: task {task_id!r} consumes its own output")
                if arg in producers:
                    inputs.append(producers[arg])
                elif any(arg == e for e, _ in externals):
                    inputs.append(arg)
                else:
                    raise SpecError(f"line {lineno}: undefined input {arg!r}")
            if var in producers:
                raise SpecError(f"line {lineno}: variable {var!r} assigned twice")
            producers[var] = task_id
            calls[task_id] = tuple(inputs)
        elif m := _RETURN.match(line):
            if m.group(1) not in producers:
                raise SpecError(f"line {lineno}: return of undefined variable {m.group(1)!r}")
            output = producers[m.group(1)]
        else:
            raise SpecError(f"line {lineno}: cannot parse {line!r}")
    if name is None:
        raise SpecError("line 1: empty spec")
    for task_id, (_, _, lineno) in decls.items():
        if task_id not in calls:
            raise SpecError(f"line {lineno}: task {task_id!r} declared but never invoked")
    tasks = tuple(TaskSpec(t, d, calls[t], c) for t, (d, c, _) in decls.items())
    return DeclarativeSpec(name, tasks, tuple(externals), output)


def _parse_json(source: str) -> DeclarativeSpec:
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise SpecError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or "workflow" not in doc:
        raise SpecError("JSON spec must be an object with a 'workflow' field")
    externals = []
    for item in doc.get("inputs", []):
        if isinstance(item, str):
            externals.append((item, None))
        else:
            typ = item.get("type")
            if typ is not None and typ not in DATA_TYPES:
                raise SpecError(f"input {item.get('name')!r}: unknown data type {typ!r}")
            externals.append((item["name"], typ))
    tasks = []
    for i, t in enumerate(doc.get("tasks", [])):
        try:
            tasks.append(
                TaskSpec(
                    str(t["id"]),
                    str(t["description"]),
                    tuple(t.get("inputs", [])),
                    {str(k): str(v) for k, v in t.get("constraints", {}).items()},
                )
            )
        except KeyError as exc:
            raise SpecError(f"tasks[{i}]: missing field {exc.args[0]!r}") from exc
    return DeclarativeSpec(str(doc["workflow"]), tuple(tasks), tuple(externals), doc.get("output"))


def _topo_order(ids: Sequence[str], preds: Mapping[str, Iterable[str]]) -> list[str]:
    indeg = {t: 0 for t in ids}
    succ: dict[str, list[str]] = {t: [] for t in ids}
    for t in ids:
        for p in preds[t]:
            indeg[t] += 1
            succ[p].append(t)
    ready = [t for t in ids if indeg[t] == 0]
    order = []
    while ready:
        t = ready.pop(0)
        order.append(t)
        for s in succ[t]:
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
    if len(order) != len(ids):
        stuck = sorted(t for t in ids if t not in order)
        raise SpecError(f"cycle among tasks: {', '.join(stuck)}")
    return order


def validate_spec(spec: DeclarativeSpec) -> DeclarativeSpec:
    if not spec.tasks:
        raise SpecError("no tasks")
    ids = [t.task_id for t in spec.tasks]
    dupes = sorted({t for t in ids if ids.count(t) > 1})
    if dupes:
        raise SpecError(f"duplicate task id(s): {', '.join(dupes)}")
    external = {name for name, _ in spec.external_inputs}
    preds = {}
    for t in spec.tasks:
        if t.task_id in t.inputs:
            raise SpecError(f"cycle: task {t.task_id!r} references itself")
        for ref in t.inputs:
            if ref not in ids and ref not in external:
                raise SpecError(f"task {t.task_id!r}: dangling input reference {ref!r}")
        preds[t.task_id] = [r for r in t.inputs if r in ids]
    _topo_order(ids, preds)
    if spec.output is not None and spec.output not in ids:
        raise SpecError(f"output {spec.output!r} is not a task")
    return spec


def parse_spec(source: str) -> DeclarativeSpec:
    """Parse a JSON or DSL spec and check ids, references and acyclicity."""
    text = source.lstrip()
    spec = _parse_json(source) if text.startswith("{") else _parse_dsl(source)
    return validate_spec(spec)


def serialize_spec(spec: DeclarativeSpec, fmt: str = "json") -> str:
    if fmt == "json":
        doc = {
            "workflow": spec.workflow_name,
            "inputs": [name if typ is None else {"name": name, "type": typ} for name, typ in spec.external_inputs],
            "tasks": [
                {"id": t.task_id, "description": t.description, "inputs": list(t.inputs), "constraints": dict(t.constraints)}
                for t in spec.tasks
            ],
            "output": spec.output,
        }
        return json.dumps(doc, indent=2)
    if fmt != "dsl":
        raise ValueError(f"unknown spec format {fmt!r}")
    args = ", ".join(name if typ is None else f"{name}: {typ}" for name, typ in spec.external_inputs)
    lines = [f"workflow {spec.workflow_name}({args})"]
    for t in spec.tasks:
        desc = t.description.replace('"', '\\"')
        where = ", ".join(f"{k}={v}" for k, v in t.constraints.items())
        lines.append(f'{t.task_id} = "{desc}"' + (f" where {where}" if where else ""))
    ids = [t.task_id for t in spec.tasks]
    order = _topo_order(ids, {t.task_id: [r for r in t.inputs if r in ids] for t in spec.tasks})
    var = {t: f"{t}_out" for t in ids}
    for task_id in order:
        refs = ", ".join(var.get(r, r) for r in spec.task(task_id).inputs)
        lines.append(f"{var[task_id]} = {task_id}({refs})")
    if spec.output is not None:
        lines.append(f"return {var[spec.output]}")
    return "\n".join(lines) + "\n"


# -- executor catalog and resolution ----------------------------------------------

_STOPWORDS = frozenset(
    "a an and any as at be by each for from given in into is it its list of on or some that the this to with".split()
)


def _tokens(text: str) -> list[str]:
    out = []
    for word in re.findall(r"[a-z0-9]+", text.lower()):
        if word in _STOPWORDS:
            continue
        if len(word) > 3 and word.endswith("s") and not word.endswith("ss"):
            word = word[:-1]
        out.append(word)
    return out


def _contains_phrase(tokens: Sequence[str], phrase: Sequence[str]) -> bool:
    n = len(phrase)
    return n > 0 and any(list(tokens[i : i + n]) == list(phrase) for i in range(len(tokens) - n + 1))


def match_score(entry: ExecutorCatalogEntry, description: str) -> int:
    """Keyword score of ``entry`` for a task description.

    One point per description token found in the executor's name, description
    or aliases, plus two per alias that appears verbatim as a phrase.
    """
    desc = _tokens(description)
    vocab = set(_tokens(entry.executor_name.replace("_", " ")))
    vocab.update(_tokens(entry.description))
    score = 0
    for alias in entry.aliases:
        alias_tokens = _tokens(alias)
        vocab.update(alias_tokens)
        if _contains_phrase(desc, alias_tokens):
            score += 2
    return score + len(set(desc) & vocab)


def best_match(description: str, candidates: Iterable[ExecutorCatalogEntry]) -> ExecutorCatalogEntry | None:
    scored = [(match_score(e, description), e.executor_name, e) for e in candidates]
    scored = [s for s in scored if s[0] > 0]
    if not scored:
        return None
    top = max(s[0] for s in scored)
    return min((s for s in scored if s[0] == top), key=lambda s: s[1])[2]


def load_catalog(path) -> list[ExecutorCatalogEntry]:
    return parse_catalog(json.loads(Path(path).read_text()))


def parse_catalog(records: Sequence[Mapping]) -> list[ExecutorCatalogEntry]:
    out = []
    for i, r in enumerate(records):
        try:
            out.append(
                ExecutorCatalogEntry(
                    executor_name=r["name"],
                    kind=r["kind"],
                    description=r.get("description", ""),
                    inputs=tuple(r["interface"]["inputs"]),
                    outputs=tuple(r["interface"]["outputs"]),
                    aliases=tuple(r.get("aliases", ())),
                    knobs=dict(r.get("knobs", {})),
                )
            )
        except (KeyError, ValueError) as exc:
            raise SpecError(f"catalog entry {i}: {exc}") from exc
    names = [e.executor_name for e in out]
    if len(set(names)) != len(names):
        raise SpecError("catalog has duplicate executor names")
    return out


def _edge_type(producer: ExecutorCatalogEntry, consumer: ExecutorCatalogEntry) -> str:
    common = [t for t in DATA_TYPES if t in producer.outputs and t in consumer.inputs]
    return common[0] if common else producer.outputs[0]


def resolve_executors(spec: DeclarativeSpec, catalog: Sequence[ExecutorCatalogEntry]) -> LogicalWorkflow:
    """Map every task to its best-scoring executor and type the data-flow edges.

    A task constraint ``executor=<name>`` pins the choice. Ties go to the
    lexicographically smallest executor name.
    """
    if not catalog:
        raise ValueError("executor catalog is empty")
    by_name = {e.executor_name: e for e in catalog}
    chosen: dict[str, ExecutorCatalogEntry] = {}
    unresolved = []
    for task in spec.tasks:
        pinned = task.constraints.get("executor")
        if pinned is not None:
            if pinned not in by_name:
                raise UnresolvedTaskError([f"{task.task_id} (pinned executor {pinned!r} not in catalog)"])
            chosen[task.task_id] = by_name[pinned]
            continue
        entry = best_match(task.description, catalog)
        if entry is None:
            unresolved.append(task.task_id)
        else:
            chosen[task.task_id] = entry
    if unresolved:
        raise UnresolvedTaskError(unresolved)
    ids = {t.task_id for t in spec.tasks}
    nodes = tuple(
        WorkflowNode(t.task_id, chosen[t.task_id].executor_name,
                     {k: v for k, v in t.constraints.items() if k != "executor"})
        for t in spec.tasks
    )
    edges = []
    sources = []
    for t in spec.tasks:
        for ref in t.inputs:
            if ref in ids:
                edges.append(Edge(ref, t.task_id, _edge_type(chosen[ref], chosen[t.task_id])))
            else:
                sources.append((ref, t.task_id))
    wf = LogicalWorkflow(spec.workflow_name, nodes, tuple(edges), tuple(sources))
    if wf.sink is None:
        produced = {e.src for e in edges}
        sinks = [n.task_id for n in nodes if n.task_id not in produced]
        raise SpecError(f"workflow must have a single sink task, found {sinks}")
    return wf


def match_request(text: str, catalog: Sequence[ExecutorCatalogEntry],
                  registry: Mapping[str, str] | None = None) -> str:
    """Pick an executor or a registered workflow for a free-text request.

    ``registry`` maps workflow names to their descriptions. Returns the winning
    name; raises :class:`UnresolvedTaskError` when nothing matches.
    """
    candidates = list(catalog)
    for name, desc in (registry or {}).items():
        candidates.append(ExecutorCatalogEntry(name, "composition", desc, (), ("text",), (name.replace("_", " "),)))
    entry = best_match(text, candidates)
    if entry is None:
        raise UnresolvedTaskError([text])
    return entry.executor_name


def type_check(wf: LogicalWorkflow, catalog: Sequence[ExecutorCatalogEntry]) -> list[TypeMismatch]:
    by_name = {e.executor_name: e for e in catalog}
    executors = {}
    for n in wf.nodes:
        if n.executor_name not in by_name:
            raise KeyError(f"node {n.task_id!r}: executor {n.executor_name!r} not in catalog")
        executors[n.task_id] = by_name[n.executor_name]
    errors = []
    for e in wf.edges:
        producer, consumer = executors[e.src], executors[e.dst]
        if e.data_type not in producer.outputs:
            errors.append(TypeMismatch(e, producer.outputs, e.data_type))
        elif e.data_type not in consumer.inputs:
            errors.append(TypeMismatch(e, consumer.inputs, e.data_type))
    return errors


# -- DAG latency -----------------------------------------------------------------


@dataclass(frozen=True)
class ToolBinding:
    placement: Placement


@dataclass(frozen=True)
class LlmBinding:
    profile: ModelProfile
    config: WorkflowConfig
    offered: float | None = None


NodeBinding = ToolBinding | LlmBinding


def node_latency(binding: NodeBinding, percentile: str = "p95") -> float:
    if isinstance(binding, ToolBinding):
        return binding.placement.latency
    # tool stages are separate DAG nodes, so only the LLM stage counts here
    return estimate_request_latency(binding.config, binding.profile, percentile, binding.offered, tool_latency=0.0)


def critical_path_latency(wf: LogicalWorkflow, binding: Mapping[str, NodeBinding],
                          percentile: str = "p95") -> float:
    """Longest root-to-sink latency; parallel branches overlap."""
    ids = [n.task_id for n in wf.nodes]
    missing = [t for t in ids if t not in binding]
    if missing:
        raise ValueError(f"unbound node(s): {', '.join(missing)}")
    preds = {t: [e.src for e in wf.edges if e.dst == t] for t in ids}
    finish: dict[str, float] = {}
    for t in _topo_order(ids, preds):
        finish[t] = node_latency(binding[t], percentile) + max((finish[p] for p in preds[t]), default=0.0)
    return max(finish.values(), default=0.0)


def binding_units(binding: Mapping[str, NodeBinding]) -> dict[str, float]:
    """Resource units a binding occupies. LLM nodes on the same profile share one instance."""
    units: dict[str, float] = {}
    seen_profiles = set()
    for b in binding.values():
        if isinstance(b, ToolBinding):
            units[b.placement.resource] = units.get(b.placement.resource, 0.0) + b.placement.units
        elif b.profile.key not in seen_profiles:
            seen_profiles.add(b.profile.key)
            units[b.profile.resource_type] = units.get(b.profile.resource_type, 0.0) + b.profile.parallelism
    return units


def accelerator_units(units: Mapping[str, float], host: Iterable[str] = ("CPU",)) -> float:
    host = set(host)
    return sum(v for k, v in units.items() if k not in host)


@dataclass
class PlacementScenario:
    workflow: LogicalWorkflow
    tool_stages: dict[str, ToolStage]
    llm: dict[str, LlmBinding]
    slo_seconds: float
    percentile: str = "p95"
    named: dict[str, dict[str, str]] = field(default_factory=dict)

    def binding(self, placements: Mapping[str, str]) -> dict[str, NodeBinding]:
        out: dict[str, NodeBinding] = dict(self.llm)
        for task, stage in self.tool_stages.items():
            out[task] = ToolBinding(stage.placement(placements.get(task)))
        return out

    def evaluate(self, placements: Mapping[str, str]) -> tuple[float, float, bool]:
        """(latency, accelerator units, meets SLO) for one tool placement choice."""
        b = self.binding(placements)
        latency = critical_path_latency(self.workflow, b, self.percentile)
        return latency, accelerator_units(binding_units(b)), latency <= self.slo_seconds

    def select(self) -> tuple[dict[str, str], float, float]:
        """Cheapest placement (fewest accelerator units, then lowest latency) meeting the SLO."""
        tasks = sorted(self.tool_stages)
        best = None
        for choice in itertools.product(*(
            [p.resource for p in self.tool_stages[t].placement_options] for t in tasks
        )):
            placements = dict(zip(tasks, choice))
            latency, units, ok = self.evaluate(placements)
            if ok and (best is None or (units, latency) < (best[2], best[1])):
                best = (placements, latency, units)
        if best is None:
            raise ValueError("no tool placement meets the latency SLO")
        return best


def load_placement_scenario(path, catalog: Sequence[ExecutorCatalogEntry],
                            models: Sequence[ModelProfile]) -> PlacementScenario:
    """Load a DAG placement scenario: a spec plus tool placement options and LLM bindings.

    JSON fields: ``spec`` (path relative to the scenario file), ``slo_seconds``,
    ``tool_stages`` (one record per tool task, as in workflow profiles), ``llm``
    (task -> {model key, tokens, optional offered TPS}) and ``bindings`` (named
    task -> resource choices).
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    spec = parse_spec((path.parent / doc["spec"]).read_text())
    wf = resolve_executors(spec, catalog)
    by_key = {m.key: m for m in models}
    stages = {s.stage_name: s for s in map(tool_stage_from_dict, doc["tool_stages"])}
    llm = {}
    for task, entry in doc["llm"].items():
        if entry["model"] not in by_key:
            raise ProfileError(f"{path}: unknown model profile {entry['model']!r}")
        profile = by_key[entry["model"]]
        config = WorkflowConfig(
            workflow_name=spec.workflow_name,
            config_id=task,
            accuracy=float(entry.get("accuracy", 1.0)),
            tokens_per_request=tokens_from_dict(entry["tokens"]),
            compatible_models=(profile.model_name,),
        )
        llm[task] = LlmBinding(profile, config, entry.get("offered"))
    unbound = [n.task_id for n in wf.nodes if n.task_id not in stages and n.task_id not in llm]
    if unbound:
        raise ProfileError(f"{path}: tasks without a binding: {unbound}")
    return PlacementScenario(wf, stages, llm, float(doc["slo_seconds"]), doc.get("percentile", "p95"),
                             {k: dict(v) for k, v in doc.get("bindings", {}).items()})
