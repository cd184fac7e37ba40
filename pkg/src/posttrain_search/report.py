"""Run reports and delimited score tables."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from typing import Any

from .config import RunConfig
from .constants import DEFAULT_TOP_K, REPORT_VERSION
from .experiments import GridResult, ReplayResult, Scorer, TransferResult
from .logging import get_logger
from .orchestrator import RankedModel, RunState, running_max, top_k, window_stats
from .registry import PipelineStep

logger = get_logger(__name__)


def score_evolution(state: RunState, steps: Sequence[PipelineStep]) -> list[float]:
    """Validation aggregate after each main-line step of a pipeline, root-first."""
    by_label = {r.produced_label: r.aggregate for r in state.history}
    return [by_label[s.output] for s in steps if not s.branch and s.output in by_label]


def _ranked_entry(state: RunState, ranked: RankedModel, scorer: Scorer) -> dict[str, Any]:
    record = ranked.record
    test, test_value = scorer(ranked.artifact, "test")
    steps = state.registry.lineage_pipeline(ranked.artifact)
    return {
        "rank": ranked.rank,
        "label": record.produced_label,
        "step": record.step,
        "validation": record.score_map,
        "validation_aggregate": record.aggregate,
        "test": test.to_dict(),
        "test_aggregate": test_value,
        "pipeline": [
            {
                "action": s.action_type,
                "labels": list(s.labels),
                "output": s.output,
                "step": s.step,
                "branch": list(s.branch),
            }
            for s in steps
        ],
        "score_evolution": score_evolution(state, steps),
    }


def build_report(
    config: RunConfig,
    state: RunState,
    *,
    top: int = DEFAULT_TOP_K,
    window: int | None = None,
) -> dict[str, Any]:
    """Report document for a finished (or partial) run.

    Top-k models are scored on the held-out test tasks here; the search
    itself only ever saw validation scores.

    Args:
        config: Run configuration
        state: Run state, usually restored from a checkpoint
        top: Number of best models to report
        window: Trials per statistics window (config default when omitted)

    Returns:
        JSON-serializable report
    """
    window = window or config.policy_options.window
    best = top_k(state, top) if len(state.history) else None
    scorer = Scorer(config)
    return {
        "version": REPORT_VERSION,
        "seed": config.seed,
        "controller": config.controller,
        "steps": state.step,
        "budget": config.total_timesteps,
        "window": window,
        "windows": [w.to_dict() for w in window_stats(state.history, window)],
        "running_max": running_max(state.history),
        "top_k": {
            "requested": top,
            "truncated": best.truncated if best else True,
            "models": [_ranked_entry(state, m, scorer) for m in best.models] if best else [],
        },
    }


def render_report(report: dict[str, Any]) -> str:
    """Human-readable report: window statistics then Top-k pipelines."""
    lines = [
        f"Run: {report['controller']} seed {report['seed']}, "
        f"{report['steps']}/{report['budget']} steps",
        "",
        f"Window statistics (every {report['window']} iterations):",
    ]
    for w in report["windows"]:
        lines.append(
            f"  steps {w['start']}-{w['start'] + w['size'] - 1}: "
            f"mean {w['mean']:.3f}, max {w['max']:.3f}, std {w['std']:.3f}"
        )
    if not report["windows"]:
        lines.append("  (no trials)")

    top = report["top_k"]
    lines += ["", f"Top-{top['requested']} models:"]
    if top["truncated"]:
        lines.append(f"  only {len(top['models'])} models available")
    for m in top["models"]:
        lines.append(
            f"  Top-{m['rank']}: {m['label']} (step {m['step']}) "
            f"validation {m['validation_aggregate']:.3f}, test {m['test_aggregate']:.3f}"
        )
        for task, value in m["test"].items():
            lines.append(
                f"    {task}: validation {m['validation'].get(task, float('nan')):.3f}, test {value:.3f}"
            )
        for s in m["pipeline"]:
            indent = "    " + "  " * len(s["branch"])
            lines.append(f"{indent}{s['action']}({', '.join(s['labels'])}) -> {s['output']}")
        if m["score_evolution"]:
            lines.append("    score evolution: " + " -> ".join(f"{v:.3f}" for v in m["score_evolution"]))
    return "\n".join(lines)


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def to_tsv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Tab-delimited table with a header row and a trailing newline."""
    lines = ["\t".join(header)]
    lines += ["\t".join(_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def replay_table(result: ReplayResult) -> str:
    tasks = result.final.validation.names
    header = ["step", "action", "labels", "output", "validation", "test", *(f"test:{t}" for t in tasks)]
    rows = [
        [
            i,
            s.action,
            ",".join(s.labels),
            s.output,
            s.validation_aggregate,
            s.test_aggregate,
            *(s.test.to_dict().get(t, "") for t in tasks),
        ]
        for i, s in enumerate(result.steps, start=1)
    ]
    return to_tsv(header, rows)


def scale_table(results: Sequence[tuple[float, ReplayResult]]) -> str:
    rows = [
        [f"{factor:g}", r.pipeline, r.final.validation_aggregate, r.final.test_aggregate]
        for factor, r in results
    ]
    return to_tsv(["factor", "pipeline", "validation", "test"], rows)


def transfer_table(result: TransferResult) -> str:
    rows = [
        [
            i,
            b.action,
            ",".join(a.labels),
            b.validation_aggregate,
            a.validation_aggregate,
            b.test_aggregate,
            a.test_aggregate,
        ]
        for i, (b, a) in enumerate(zip(result.before.steps, result.after.steps, strict=True), start=1)
    ]
    header = ["step", "action", "labels", "validation_before", "validation_after", "test_before", "test_after"]
    return to_tsv(header, rows)


def grid_table(result: GridResult) -> str:
    tasks = result.table[0].scores.names if result.table else ()
    header = ["weights", "aggregate", *tasks]
    rows = [
        [",".join(f"{w:g}" for w in row.weights), row.aggregate, *(v for _, v in row.scores.values)]
        for row in result.table
    ]
    return f"# grid_step={result.step:g} density={result.density:g}\n" + to_tsv(header, rows)
