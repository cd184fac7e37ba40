"""Logging utilities for pipeline search."""

import logging


def get_logger(name: str) -> logging.Logger:
    """Get logger instance with library-friendly defaults.

    Args:
        name: Logger name (typically __name__)

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    # Only add handler if none exists (avoid duplicate handlers)
    if not logger.handlers:
        handler = logging.NullHandler()
        logger.addHandler(handler)

    return logger


def preview(text: str, limit: int = 120, prefix: str = "") -> str:
    """Format prompt or response text as a single log line.

    Args:
        text: Text to format
        limit: Maximum number of characters kept
        prefix: Optional prefix

    Returns:
        Single-line, possibly truncated text
    """
    if not text:
        return f"{prefix}<empty>"

    flat = " ".join(text.split())
    if len(flat) > limit:
        flat = flat[: max(limit - 3, 0)] + "..."
    return f"{prefix}{flat}"


def log_prompt(
    logger: logging.Logger, phase: str, prompt: str, description: str = "PROMPT"
) -> None:
    """Log an outgoing agent prompt at debug level.

    Args:
        logger: Logger instance
        phase: Selection or memory phase name
        prompt: Prompt text
        description: Record description
    """
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(
            "%s [%s] (%d chars): %s", description, phase, len(prompt), preview(prompt)
        )


def log_reply(
    logger: logging.Logger,
    phase: str,
    reply: str,
    latency: float,
    description: str = "REPLY",
) -> None:
    """Log an agent reply at debug level.

    Args:
        logger: Logger instance
        phase: Selection or memory phase name
        reply: Reply text
        latency: Round-trip time in seconds
        description: Record description
    """
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(
            "%s [%s] in %.3fs: %s", description, phase, latency, preview(reply)
        )
