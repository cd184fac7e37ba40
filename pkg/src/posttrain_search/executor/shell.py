"""Shell-command executor for real training and merging toolchains."""

from __future__ import annotations

import shlex
import subprocess
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..constants import DEFAULT_SHELL_TIMEOUT
from ..exceptions import ExecutorError, ExecutorTimeoutError
from ..logging import get_logger
from .base import ExecutionContext, ExecutorBinding, ExecutorSpec
from .registry import EXECUTORS, ExecutorKind

logger = get_logger(__name__)

OUTPUT_PLACEHOLDER = "out"


@dataclass(slots=True, frozen=True)
class ShellResult:
    """Outcome of one external command."""

    argv: tuple[str, ...]
    returncode: int
    stdout: str
    stderr: str
    output: Path | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "argv": list(self.argv),
            "returncode": self.returncode,
            "stdout": self.stdout,
            "stderr": self.stderr,
            "output": str(self.output) if self.output is not None else None,
        }


def render_command(template: str, placeholders: Mapping[str, Any]) -> list[str]:
    """Split a template into argv and fill ``{name}`` placeholders per token."""
    try:
        tokens = shlex.split(template)
    except ValueError as e:
        raise ExecutorError(f"Malformed command template {template!r}: {e}") from e
    if not tokens:
        raise ExecutorError("Empty command template")
    try:
        return [token.format_map({k: str(v) for k, v in placeholders.items()}) for token in tokens]
    except (KeyError, IndexError) as e:
        raise ExecutorError(f"Unresolved placeholder {e} in {template!r}") from e


def shell_execute(
    template: str,
    placeholders: Mapping[str, Any],
    *,
    timeout: float = DEFAULT_SHELL_TIMEOUT,
    require_output: bool = True,
    cwd: str | Path | None = None,
) -> ShellResult:
    """Run an external command built from a template.

    Args:
        template: Command with named placeholders, e.g. "train.sh {model} {out}"
        placeholders: Values for the placeholders
        timeout: Seconds before the command is killed
        require_output: Fail unless the ``{out}`` path exists afterwards
        cwd: Working directory

    Returns:
        Captured result, with the output path on success

    Raises:
        ExecutorTimeoutError: Command exceeded ``timeout``
        ExecutorError: Nonzero exit, missing output, or command not runnable
    """
    argv = render_command(template, placeholders)
    logger.debug("Running %s", shlex.join(argv))
    try:
        completed = subprocess.run(
            argv,
            capture_output=True,
            text=True,
            timeout=timeout,
            cwd=cwd,
            check=False,
        )
    except subprocess.TimeoutExpired as e:
        partial = ShellResult(
            argv=tuple(argv), returncode=-1, stdout=_text(e.stdout), stderr=_text(e.stderr)
        )
        raise ExecutorTimeoutError(
            f"Command timed out after {timeout}s: {argv[0]}", result=partial
        ) from e
    except OSError as e:
        raise ExecutorError(f"Cannot run {argv[0]}: {e}") from e

    output = Path(str(placeholders[OUTPUT_PLACEHOLDER])) if OUTPUT_PLACEHOLDER in placeholders else None
    result = ShellResult(
        argv=tuple(argv),
        returncode=completed.returncode,
        stdout=completed.stdout,
        stderr=completed.stderr,
        output=output,
    )
    if completed.returncode != 0:
        raise ExecutorError(
            f"Command exited with status {completed.returncode}: {completed.stderr.strip()[-500:]}",
            result=result,
        )
    if require_output and (output is None or not output.exists()):
        raise ExecutorError(f"Command succeeded but produced no output at {output}", result=result)
    return result


def _text(stream: str | bytes | None) -> str:
    # TimeoutExpired may hold bytes even with text=True
    if stream is None:
        return ""
    return stream.decode("utf-8", "replace") if isinstance(stream, bytes) else stream


def _run_shell(
    binding: ExecutorBinding, inputs: Mapping[str, Any], context: ExecutionContext
) -> str:
    if not binding.command:
        raise ExecutorError(f"Shell binding for {binding.action_type} has no command")
    out = context.output_dir / context.label
    placeholders = {**_format_inputs(inputs), OUTPUT_PLACEHOLDER: str(out)}
    result = shell_execute(binding.command, placeholders, timeout=binding.timeout)
    context.records.append(result.to_dict())
    logger.debug("Shell %s finished: %s", context.label, result.stdout.strip()[-200:])
    return str(out)


def _format_inputs(inputs: Mapping[str, Any]) -> dict[str, str]:
    formatted = {}
    for role, value in inputs.items():
        if isinstance(value, (list, tuple)):
            formatted[role] = ",".join(str(v) for v in value)
        else:
            formatted[role] = str(value)
    return formatted


EXECUTORS[ExecutorKind.SHELL] = ExecutorSpec(
    run=_run_shell,
    description="external command writing the new model to {out}",
)
