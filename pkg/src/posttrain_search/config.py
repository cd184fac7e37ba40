"""Run configuration: loading, object resolution and validation."""

from __future__ import annotations

import copy
import json
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .actions import ActionSchema, schemas_from_mapping
from .constants import (
    DEFAULT_API_KEY_ENV,
    DEFAULT_BACKOFF_BASE,
    DEFAULT_CONTROLLER_MODEL,
    DEFAULT_MAX_ATTEMPTS,
    DEFAULT_MAX_TOKENS,
    DEFAULT_PARSE_RETRIES,
    DEFAULT_REQUEST_TIMEOUT,
    DEFAULT_TEMPERATURE,
    DEFAULT_WINDOW,
    LLM_CONTROLLERS,
    MODELS_KIND,
    RANDOM_CONTROLLER,
    SCRIPTED_CONTROLLER,
)
from .evaluation import (
    AggregationRule,
    Evaluator,
    ShellEvaluator,
    SimulatedEvaluator,
    TableEvaluator,
    TaskSpec,
    make_tasks,
)
from .exceptions import ConfigError, SearchError
from .executor import ExecutorBinding, SimDataset, SimModel, SimParams, build_bindings
from .logging import get_logger
from .registry import Registry

logger = get_logger(__name__)

TRAILING_COMMA = re.compile(r'("(?:\\.|[^"\\])*")|,(\s*[}\]])')

REQUIRED_KEYS = (
    "seed",
    "total_timesteps",
    "controller",
    "objects",
    "action_types",
    "eval_tasks",
)


@dataclass(slots=True, frozen=True)
class ObjectSpec:
    """One declared initial object: prompt label and raw value."""

    label: str
    value: Any


@dataclass(slots=True, frozen=True)
class EndpointConfig:
    url: str = ""
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout: float = DEFAULT_REQUEST_TIMEOUT
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    backoff_base: float = DEFAULT_BACKOFF_BASE
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS


@dataclass(slots=True, frozen=True)
class PolicyOptions:
    script: str = ""
    sequence: tuple[tuple[str, tuple[str, ...]], ...] = ()
    max_parse_retries: int = DEFAULT_PARSE_RETRIES
    memory_cap: int | None = None
    memory_per_task_scores: bool = False
    unordered_merge_pairs: bool = True
    trace_latency: bool = False
    window: int = DEFAULT_WINDOW


@dataclass(slots=True, frozen=True)
class SimulatorConfig:
    params: SimParams = field(default_factory=SimParams)
    dimension: int | None = None
    models: Mapping[str, SimModel] = field(default_factory=dict)
    datasets: Mapping[str, SimDataset] = field(default_factory=dict)
    task_skills: Mapping[str, int] = field(default_factory=dict)
    test_offsets: Mapping[str, float] = field(default_factory=dict)


@dataclass(slots=True)
class RunConfig:
    """A parsed run configuration document."""

    seed: int
    total_timesteps: int
    controller: str
    controller_model: str
    objects: dict[str, list[ObjectSpec]]
    action_types: dict[str, list[str]]
    eval_tasks: list[list[str]]
    score_aggregation: str = AggregationRule.MEAN
    executors: dict[str, dict[str, Any]] = field(default_factory=dict)
    simulator: SimulatorConfig = field(default_factory=SimulatorConfig)
    endpoint: EndpointConfig = field(default_factory=EndpointConfig)
    policy_options: PolicyOptions = field(default_factory=PolicyOptions)
    evaluators: dict[str, dict[str, Any]] = field(default_factory=dict)
    test_tasks: list[list[str]] = field(default_factory=list)
    task_max_values: dict[str, float] = field(default_factory=dict)
    parallelism: int = 1
    output_dir: str = "artifacts"
    raw: dict[str, Any] = field(default_factory=dict)
    base_dir: Path = Path(".")

    @property
    def schemas(self) -> list[ActionSchema]:
        return schemas_from_mapping(self.action_types)

    @property
    def uses_agent(self) -> bool:
        return self.controller in LLM_CONTROLLERS

    def with_overrides(
        self,
        *,
        seed: int | None = None,
        endpoint: str | None = None,
        controller: str | None = None,
    ) -> RunConfig:
        """Copy with overrides applied to both fields and the raw document."""
        raw = copy.deepcopy(self.raw)
        if controller is not None:
            raw["controller"] = controller
        if seed is not None:
            raw["seed"] = seed
        if endpoint is not None:
            raw.setdefault("endpoint", {})["url"] = endpoint
        return parse_config(raw, self.base_dir)


def strip_trailing_commas(text: str) -> str:
    """Drop commas directly before a closing brace or bracket, outside string literals."""
    return TRAILING_COMMA.sub(lambda m: m.group(1) or m.group(2), text)


def object_label(value: Any) -> str:
    """Prompt label of a declared object: basename of a path or compact JSON."""
    if isinstance(value, str):
        return Path(value).name or value
    return json.dumps(value)


def _object_spec(value: Any) -> ObjectSpec:
    if isinstance(value, Mapping):
        if "label" not in value or "value" not in value:
            raise ConfigError(f"Object entry needs 'label' and 'value': {value!r}")
        return ObjectSpec(label=str(value["label"]), value=value["value"])
    return ObjectSpec(label=object_label(value), value=value)


def _load_json(path: Path) -> Any:
    try:
        return json.loads(strip_trailing_commas(path.read_text(encoding="utf-8")))
    except OSError as e:
        raise ConfigError(f"Cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {path}: {e}") from e


def _sim_model(value: Any) -> SimModel:
    skills = value["skills"] if isinstance(value, Mapping) else value
    return SimModel(skills)


def _sim_dataset(value: Mapping[str, Any], known: Mapping[str, SimDataset]) -> SimDataset:
    if "mixture" in value:
        missing = [lbl for lbl in value["mixture"] if lbl not in known]
        if missing:
            raise ConfigError(f"Mixture references undefined datasets {missing}")
        return SimDataset.mixture([known[lbl] for lbl in value["mixture"]])
    return SimDataset(value["targets"], value["coverage"], value["examples"])


def _parse_simulator(raw: Mapping[str, Any], base_dir: Path) -> SimulatorConfig:
    if isinstance(raw, str):
        raw = _load_json(base_dir / raw)
    try:
        params = SimParams(
            phi=float(raw.get("phi", SimParams().phi)),
            n0=float(raw.get("n0", SimParams().n0)),
            lr_ref=float(raw.get("lr_ref", SimParams().lr_ref)),
        )
        models = {str(k): _sim_model(v) for k, v in raw.get("models", {}).items()}
        datasets: dict[str, SimDataset] = {}
        for label, value in raw.get("datasets", {}).items():
            datasets[str(label)] = _sim_dataset(value, datasets)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Invalid simulator section: {e}") from e
    dimension = raw.get("dimension")
    return SimulatorConfig(
        params=params,
        dimension=int(dimension) if dimension is not None else None,
        models=models,
        datasets=datasets,
        task_skills={str(k): int(v) for k, v in raw.get("task_skills", {}).items()},
        test_offsets={str(k): float(v) for k, v in raw.get("test_offsets", {}).items()},
    )


def _parse_sequence(raw: Any) -> tuple[tuple[str, tuple[str, ...]], ...]:
    try:
        return tuple((str(t), tuple(str(x) for x in labels)) for t, labels in raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"policy_options.sequence must be [[type, [labels]], ...]: {e}") from e


def parse_config(data: Mapping[str, Any], base_dir: str | Path = ".") -> RunConfig:
    """Build a RunConfig from a parsed document.

    Args:
        data: Parsed JSON document
        base_dir: Directory relative paths resolve against

    Returns:
        RunConfig (not yet validated)

    Raises:
        ConfigError: Missing keys or malformed sections
    """
    missing = [k for k in REQUIRED_KEYS if k not in data]
    if missing:
        raise ConfigError(f"Config missing keys: {missing}")
    base = Path(base_dir)

    try:
        objects = {
            str(kind): [_object_spec(v) for v in values]
            for kind, values in data["objects"].items()
        }
        action_types = {str(k): [str(s) for s in v] for k, v in data["action_types"].items()}
        endpoint = EndpointConfig(**data.get("endpoint", {}))
        options = dict(data.get("policy_options", {}))
        if "sequence" in options:
            options["sequence"] = _parse_sequence(options["sequence"])
        policy_options = PolicyOptions(**options)
        config = RunConfig(
            seed=int(data["seed"]),
            total_timesteps=int(data["total_timesteps"]),
            controller=str(data["controller"]),
            controller_model=str(data.get("controller_model", DEFAULT_CONTROLLER_MODEL)),
            objects=objects,
            action_types=action_types,
            eval_tasks=[list(t) for t in data["eval_tasks"]],
            score_aggregation=str(data.get("score_aggregation", AggregationRule.MEAN)),
            executors={str(k): dict(v) for k, v in data.get("executors", {}).items()},
            simulator=_parse_simulator(data.get("simulator", {}), base),
            endpoint=endpoint,
            policy_options=policy_options,
            evaluators={str(k): dict(v) for k, v in data.get("evaluators", {}).items()},
            test_tasks=[list(t) for t in data.get("test_tasks", [])],
            task_max_values={str(k): float(v) for k, v in data.get("task_max_values", {}).items()},
            parallelism=int(data.get("parallelism", 1)),
            output_dir=str(data.get("output_dir", "artifacts")),
            raw=copy.deepcopy(dict(data)),
            base_dir=base,
        )
    except ConfigError:
        raise
    except (AttributeError, TypeError, ValueError) as e:
        raise ConfigError(f"Malformed config: {e}") from e
    return config


def load_config(path: str | Path) -> RunConfig:
    """Load a config file; trailing commas are tolerated."""
    path = Path(path)
    return parse_config(_load_json(path), path.parent)


def resolve_payload(config: RunConfig, kind: str, spec: ObjectSpec) -> Any:
    """Turn a declared object into its registry payload.

    Simulator definitions win, then numeric-vector documents on disk; other
    strings stay paths and numbers/lists become floats/tuples.
    """
    sim = config.simulator
    tables: list[Mapping[str, Any]] = [sim.models, sim.datasets]
    if "dataset" in kind:
        tables.reverse()
    for table in tables:
        if spec.label in table:
            return table[spec.label]
    value = spec.value
    if isinstance(value, str):
        for candidate in (config.base_dir / value, config.base_dir / f"{value}.json"):
            if candidate.is_file() and candidate.suffix == ".json":
                doc = _load_json(candidate)
                if isinstance(doc, Mapping) and "skills" in doc:
                    return _sim_model(doc)
                if isinstance(doc, Mapping) and "targets" in doc:
                    return _sim_dataset(doc, sim.datasets)
        return value
    if isinstance(value, list):
        return tuple(float(v) for v in value)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    return value


def initial_objects(config: RunConfig) -> list[tuple[str, str, Any]]:
    """(kind, label, payload) for every declared object, in declaration order."""
    return [
        (kind, spec.label, resolve_payload(config, kind, spec))
        for kind, specs in config.objects.items()
        for spec in specs
    ]


def build_registry(config: RunConfig) -> Registry:
    registry = Registry()
    for kind, label, payload in initial_objects(config):
        registry.register_object(kind, label, payload)
    return registry


def build_tasks(config: RunConfig, *, test: bool = False) -> list[TaskSpec]:
    """Validation tasks, or the held-out test tasks (validation tasks when none)."""
    entries = config.test_tasks if test and config.test_tasks else config.eval_tasks
    return make_tasks(entries, config.task_max_values)


def _evaluator(config: RunConfig, task: str, raw: Mapping[str, Any]) -> Evaluator:
    kind = raw.get("kind", "simulated")
    if kind == "simulated":
        skills = dict(config.simulator.task_skills)
        if "skill" in raw:
            skills[task] = int(raw["skill"])
        return SimulatedEvaluator(skills, config.simulator.test_offsets)
    if kind == "table":
        table = raw.get("table", {})
        if isinstance(table, str):
            table = _load_json(config.base_dir / table)
        return TableEvaluator(table)
    if kind == "shell":
        return ShellEvaluator(str(raw["command"]), timeout=float(raw.get("timeout", 3600.0)))
    raise ConfigError(f"Task {task!r}: unknown evaluator kind {kind!r}")


def build_evaluators(config: RunConfig) -> dict[str, Evaluator]:
    """Evaluator per task; tasks without an entry use the simulated evaluator."""
    names = {str(t[0]) for t in config.eval_tasks} | {str(t[0]) for t in config.test_tasks}
    return {name: _evaluator(config, name, config.evaluators.get(name, {})) for name in sorted(names)}


def build_executor_bindings(config: RunConfig) -> dict[str, ExecutorBinding]:
    return build_bindings(config.schemas, config.executors)


def _payload_problems(config: RunConfig) -> list[str]:
    """Simulated executors need simulated payloads of one dimension."""
    problems = []
    payloads = {(k, lbl): p for k, lbl, p in initial_objects(config)}
    dimensions = {p.dimension for p in payloads.values() if isinstance(p, (SimModel, SimDataset))}
    if config.simulator.dimension is not None:
        dimensions.add(config.simulator.dimension)
    if len(dimensions) > 1:
        problems.append(f"simulated objects disagree on dimension: {sorted(dimensions)}")

    for binding in build_executor_bindings(config).values():
        if binding.kind == "shell":
            continue
        slots = config.action_types[binding.action_type]
        for role, kind in zip(binding.roles, slots, strict=True):
            expected = SimDataset if role == "dataset" else SimModel if role.startswith(("model", "base")) else None
            if expected is None:
                continue
            bad = [lbl for (k, lbl), p in payloads.items() if k == kind and not isinstance(p, expected)]
            if bad:
                problems.append(
                    f"{binding.action_type} ({binding.kind}) needs simulated {kind!r} objects; not defined: {bad}"
                )
    return problems


def validate_config(config: RunConfig) -> None:
    """Check a config, collecting every problem.

    Raises:
        ConfigError: Listing all problems found
    """
    problems: list[str] = []

    if config.total_timesteps < 0:
        problems.append(f"total_timesteps must be >= 0, got {config.total_timesteps}")
    known = (*LLM_CONTROLLERS, RANDOM_CONTROLLER, SCRIPTED_CONTROLLER)
    if config.controller not in known:
        problems.append(f"unknown controller {config.controller!r}; expected one of {list(known)}")
    if config.uses_agent and not (config.endpoint.url or config.policy_options.script):
        problems.append("agent controller needs endpoint.url or policy_options.script")
    if config.controller == SCRIPTED_CONTROLLER and not config.policy_options.sequence:
        problems.append("scripted controller needs policy_options.sequence")
    if config.parallelism < 1:
        problems.append(f"parallelism must be >= 1, got {config.parallelism}")
    if config.policy_options.window < 1:
        problems.append("policy_options.window must be >= 1")

    if not config.action_types:
        problems.append("no action_types declared")
    for name, slots in config.action_types.items():
        if not slots:
            problems.append(f"action type {name!r} has no slots")
        for kind in slots:
            if kind not in config.objects and kind != MODELS_KIND:
                problems.append(f"action type {name!r} uses undeclared object kind {kind!r}")

    for kind, specs in config.objects.items():
        labels = [s.label for s in specs]
        duplicates = sorted({lbl for lbl in labels if labels.count(lbl) > 1})
        if duplicates:
            problems.append(f"duplicate labels under {kind!r}: {duplicates}")

    try:
        AggregationRule(config.score_aggregation)
    except ValueError:
        problems.append(f"unknown score_aggregation {config.score_aggregation!r}")

    if not config.eval_tasks:
        problems.append("no eval_tasks declared")
    for check in (
        lambda: build_tasks(config),
        lambda: build_tasks(config, test=True),
        lambda: config.schemas,
        lambda: build_executor_bindings(config),
        lambda: build_evaluators(config),
        lambda: initial_objects(config),
    ):
        try:
            check()
        except (SearchError, KeyError, TypeError, ValueError) as e:
            problems.append(str(e))

    if not problems:
        problems.extend(_payload_problems(config))

    tasks = {str(t[0]) for t in config.eval_tasks} | {str(t[0]) for t in config.test_tasks}
    unmapped = sorted(
        t
        for t in tasks
        if config.evaluators.get(t, {}).get("kind", "simulated") == "simulated"
        and "skill" not in config.evaluators.get(t, {})
        and t not in config.simulator.task_skills
    )
    if unmapped:
        problems.append(f"tasks without an evaluator or simulator skill: {unmapped}")

    if problems:
        raise ConfigError("Invalid config: " + "; ".join(problems))
    logger.debug("Config valid: %d action types, %d object kinds", len(config.action_types), len(config.objects))
