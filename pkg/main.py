#!/usr/bin/env python3
"""Example usage of posttrain-search - runs the scripted demo and prints a report."""

import json
import logging
from pathlib import Path

from posttrain_search import Orchestrator, PipelineScript, load_config, scale_data_replay
from posttrain_search.report import build_report, render_report, scale_table


def main() -> None:
    """Run the bundled demo search, report it, and scale its best pipeline."""

    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )

    # Scripted agent answers; swap in configs/reference.json and set
    # OPENAI_API_KEY to drive the search with a live endpoint.
    config_path = Path(__file__).parent / "configs" / "demo_scripted.json"
    out_dir = Path("artifacts") / "demo"
    out_dir.mkdir(parents=True, exist_ok=True)

    config = load_config(config_path)
    orchestrator = Orchestrator(
        config,
        trace_path=out_dir / "trace.jsonl",
        checkpoint_path=out_dir / "checkpoint.json",
    )
    state = orchestrator.run()

    report = build_report(config, state, top=3, window=2)
    print(render_report(report))
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")

    best = report["top_k"]["models"][0]
    script = PipelineScript.from_lineage(
        state.registry, state.registry.artifact_by_label(best["label"]), name="top-1"
    )
    print()
    print("=== Data scaling of the Top-1 pipeline ===")
    print(scale_table(scale_data_replay(config, script, [1.0, 2.0, 4.0, 6.0])), end="")


if __name__ == "__main__":
    main()
