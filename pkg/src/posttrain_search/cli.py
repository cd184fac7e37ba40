"""Command-line interface for pipeline search runs and experiments."""

import json
import logging
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Any

import typer

from .actions import enumerate_candidates
from .config import RunConfig, build_registry, load_config, parse_config, validate_config
from .constants import DATA_SCALE_FACTORS, DEFAULT_GRID_STEP, DEFAULT_TOP_K
from .exceptions import ConfigError, SearchError
from .experiments import (
    PipelineScript,
    grid_search_from_config,
    replay_pipeline,
    run_random_baseline,
    scale_data_replay,
    transfer_model_replay,
)
from .orchestrator import (
    Orchestrator,
    RunState,
    load_checkpoint,
    state_from_checkpoint,
    top_k,
)
from .report import (
    build_report,
    grid_table,
    render_report,
    replay_table,
    scale_table,
    transfer_table,
)

app = typer.Typer(
    name="posttrain-search",
    help="Agent-driven search over model post-training pipelines.",
    no_args_is_help=True,
    add_completion=False,
)

ConfigOption = Annotated[
    Path,
    typer.Option("--config", "-c", exists=True, dir_okay=False, help="Run configuration file"),
]
TraceOption = Annotated[
    Path | None, typer.Option("--trace", help="JSON-lines run trace to write")
]
SeedOption = Annotated[int | None, typer.Option("--seed", help="Override the config seed")]
JsonOption = Annotated[bool, typer.Option("--json", help="Print JSON instead of text/TSV")]
PipelineOption = Annotated[
    Path | None,
    typer.Option("--pipeline", "-p", exists=True, dir_okay=False, help="Pipeline script file"),
]
CheckpointInput = Annotated[
    Path | None,
    typer.Option(
        "--checkpoint",
        exists=True,
        dir_okay=False,
        help="Checkpoint whose Top-k lineage provides the pipeline",
    ),
]
RankOption = Annotated[int, typer.Option("--rank", min=1, help="Top-k rank to extract")]
EndpointOption = Annotated[
    str | None, typer.Option("--endpoint", help="Override the chat-completions URL")
]


@contextmanager
def _errors() -> Iterator[None]:
    """Map runtime failures to a one-line message and exit status 1."""
    try:
        yield
    except (SearchError, OSError) as e:
        message = " ".join(str(e).split())
        typer.echo(f"error: {type(e).__name__}: {message}", err=True)
        raise typer.Exit(1) from e


def _emit(data: dict[str, Any]) -> None:
    typer.echo(json.dumps(data, indent=2, sort_keys=True))


def _load(path: Path, seed: int | None = None, endpoint: str | None = None) -> RunConfig:
    config = load_config(path)
    if seed is not None or endpoint is not None:
        config = config.with_overrides(seed=seed, endpoint=endpoint)
    return config


def _summary(state: RunState) -> str:
    if not len(state.history):
        return f"Completed {state.step} steps"
    best = top_k(state, 1).models[0].record
    return (
        f"Completed {state.step} steps; best {best.produced_label} "
        f"(step {best.step}) score {best.aggregate:.4f}"
    )


def _checkpoint_config(data: dict[str, Any]) -> RunConfig:
    return parse_config(data["config"], data.get("base_dir", "."))


def _pipeline(
    pipeline: Path | None, checkpoint: Path | None, rank: int
) -> tuple[PipelineScript, RunConfig | None]:
    """Pipeline from a script file, or the lineage of a checkpointed Top-k model."""
    if pipeline is not None:
        return PipelineScript.load(pipeline), None
    if checkpoint is None:
        raise typer.BadParameter("Give --pipeline or --checkpoint")
    data = load_checkpoint(checkpoint)
    state = state_from_checkpoint(data)
    ranked = top_k(state, rank)
    if ranked.truncated:
        raise ConfigError(f"Checkpoint has only {len(ranked.models)} models, no Top-{rank}")
    model = ranked.models[rank - 1]
    script = PipelineScript.from_lineage(state.registry, model.artifact, name=f"top-{rank}")
    return script, _checkpoint_config(data)


def _factors(text: str) -> list[float]:
    try:
        return [float(f) for f in text.split(",") if f.strip()]
    except ValueError as e:
        raise typer.BadParameter(f"Factors must be comma-separated numbers: {text!r}") from e


def _substitutions(pairs: list[str]) -> dict[str, str]:
    result = {}
    for pair in pairs:
        source, sep, target = pair.partition("=")
        if not sep or not source or not target:
            raise typer.BadParameter(f"Substitution must be SOURCE=TARGET, got {pair!r}")
        result[source] = target
    return result


@app.callback()
def _main(
    verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Debug logging")] = False,
) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )


@app.command("validate-config")
def validate_config_command(config: ConfigOption) -> None:
    """Check a config and print the candidate count at step 1."""
    with _errors():
        run_config = load_config(config)
        validate_config(run_config)
        candidates = enumerate_candidates(
            run_config.schemas,
            build_registry(run_config).view(),
            unordered_pairs=run_config.policy_options.unordered_merge_pairs,
        )
        typer.echo(f"{len(candidates)} candidates at step 1")


@app.command("enumerate")
def enumerate_command(config: ConfigOption) -> None:
    """Print every action candidate at step 1."""
    with _errors():
        run_config = load_config(config)
        registry = build_registry(run_config)
        candidates = enumerate_candidates(
            run_config.schemas,
            registry.view(),
            unordered_pairs=run_config.policy_options.unordered_merge_pairs,
        )
        for i, candidate in enumerate(candidates):
            typer.echo(f"{i}: {candidate.describe(registry)}")


@app.command("run")
def run_command(
    config: ConfigOption,
    trace: TraceOption = None,
    checkpoint: Annotated[
        Path | None, typer.Option("--checkpoint", help="Checkpoint written after every step")
    ] = None,
    seed: SeedOption = None,
    endpoint: EndpointOption = None,
) -> None:
    """Run a search to its step budget."""
    with _errors():
        run_config = _load(config, seed, endpoint)
        state = Orchestrator(run_config, trace_path=trace, checkpoint_path=checkpoint).run()
        typer.echo(_summary(state))


@app.command("resume")
def resume_command(
    checkpoint: Annotated[
        Path, typer.Option("--checkpoint", exists=True, dir_okay=False, help="Checkpoint to resume")
    ],
    trace: TraceOption = None,
    endpoint: EndpointOption = None,
) -> None:
    """Resume a checkpointed run and complete it."""
    with _errors():
        state = Orchestrator.from_checkpoint(checkpoint, trace_path=trace, endpoint=endpoint).run()
        typer.echo(_summary(state))


@app.command("report")
def report_command(
    checkpoint: Annotated[
        Path, typer.Option("--checkpoint", exists=True, dir_okay=False, help="Run checkpoint")
    ],
    top: Annotated[int, typer.Option("--top", min=1, help="Number of best models")] = DEFAULT_TOP_K,
    window: Annotated[int | None, typer.Option("--window", min=1, help="Trials per window")] = None,
    output: Annotated[Path | None, typer.Option("--output", "-o", help="Write the JSON report here")] = None,
    as_json: JsonOption = False,
) -> None:
    """Window statistics and Top-k pipelines scored on held-out test tasks."""
    with _errors():
        data = load_checkpoint(checkpoint)
        report = build_report(
            _checkpoint_config(data), state_from_checkpoint(data), top=top, window=window
        )
        if output is not None:
            output.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        if as_json:
            _emit(report)
        else:
            typer.echo(render_report(report))


@app.command("grid-search")
def grid_search_command(
    config: ConfigOption,
    grid_step: Annotated[float, typer.Option("--grid-step", help="Simplex lattice step")] = DEFAULT_GRID_STEP,
    specialist: Annotated[
        list[str] | None, typer.Option("--specialist", help="Specialist model label (repeatable)")
    ] = None,
    as_json: JsonOption = False,
) -> None:
    """TIES-merge specialists over a weight grid and report the best weights."""
    with _errors():
        result = grid_search_from_config(load_config(config), step=grid_step, specialists=specialist)
        if as_json:
            _emit(result.to_dict())
        else:
            typer.echo(grid_table(result), nl=False)
            typer.echo(f"best {result.best_weights} -> {result.best_score:.4f}")


@app.command("random-baseline")
def random_baseline_command(
    config: ConfigOption,
    trace: TraceOption = None,
    checkpoint: Annotated[
        Path | None, typer.Option("--checkpoint", help="Checkpoint written after every step")
    ] = None,
    seed: SeedOption = None,
) -> None:
    """Run the loop with uniformly random action selection."""
    with _errors():
        state = run_random_baseline(
            _load(config, seed), trace_path=trace, checkpoint_path=checkpoint
        )
        typer.echo(_summary(state))


@app.command("scale-data")
def scale_data_command(
    config: Annotated[
        Path | None, typer.Option("--config", "-c", exists=True, dir_okay=False, help="Run configuration file")
    ] = None,
    pipeline: PipelineOption = None,
    checkpoint: CheckpointInput = None,
    rank: RankOption = 1,
    factors: Annotated[
        str, typer.Option("--factors", help="Comma-separated dataset scale factors")
    ] = ",".join(f"{f:g}" for f in (1.0, *DATA_SCALE_FACTORS)),
    as_json: JsonOption = False,
) -> None:
    """Replay a pipeline with every dataset scaled by each factor."""
    with _errors():
        script, recorded = _pipeline(pipeline, checkpoint, rank)
        run_config = load_config(config) if config is not None else recorded
        if run_config is None:
            raise typer.BadParameter("Give --config with --pipeline")
        results = scale_data_replay(run_config, script, _factors(factors))
        if as_json:
            _emit({"factors": [{"factor": f, **r.to_dict()} for f, r in results]})
        else:
            typer.echo(scale_table(results), nl=False)


@app.command("transfer-model")
def transfer_model_command(
    config: Annotated[
        Path | None, typer.Option("--config", "-c", exists=True, dir_okay=False, help="Run configuration file")
    ] = None,
    pipeline: PipelineOption = None,
    checkpoint: CheckpointInput = None,
    rank: RankOption = 1,
    substitute: Annotated[
        list[str] | None, typer.Option("--substitute", "-s", help="SOURCE=TARGET label substitution")
    ] = None,
    as_json: JsonOption = False,
) -> None:
    """Replay a pipeline before and after object substitution."""
    with _errors():
        script, recorded = _pipeline(pipeline, checkpoint, rank)
        run_config = load_config(config) if config is not None else recorded
        if run_config is None:
            raise typer.BadParameter("Give --config with --pipeline")
        result = transfer_model_replay(run_config, script, _substitutions(substitute or []))
        if as_json:
            _emit(result.to_dict())
        else:
            typer.echo(transfer_table(result), nl=False)


@app.command("replay")
def replay_command(
    config: Annotated[
        Path | None, typer.Option("--config", "-c", exists=True, dir_okay=False, help="Run configuration file")
    ] = None,
    pipeline: PipelineOption = None,
    checkpoint: CheckpointInput = None,
    rank: RankOption = 1,
    save: Annotated[Path | None, typer.Option("--save", help="Write the pipeline script here")] = None,
    as_json: JsonOption = False,
) -> None:
    """Re-execute a pipeline and print per-step scores."""
    with _errors():
        script, recorded = _pipeline(pipeline, checkpoint, rank)
        run_config = load_config(config) if config is not None else recorded
        if run_config is None:
            raise typer.BadParameter("Give --config with --pipeline")
        if save is not None:
            script.save(save)
        result = replay_pipeline(run_config, script)
        if as_json:
            _emit(result.to_dict())
        else:
            typer.echo(replay_table(result), nl=False)


def main() -> None:
    """Console script entry point."""
    app()


if __name__ == "__main__":
    main()
