from __future__ import annotations

import logging
import os
import shlex
import subprocess
from pathlib import Path

import numpy as np
import psutil
from rich.console import Console
from rich.logging import RichHandler

from . import __version__

console = Console()

BASE_DIR = Path(__file__).resolve().parents[1]


def setup_logging(level: int = logging.WARNING) -> None:
    """Route library logs through rich. Safe to call more than once."""
    root = logging.getLogger("gibbslab")
    if not any(isinstance(h, RichHandler) for h in root.handlers):
        handler = RichHandler(console=console, show_path=False, markup=False)
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        root.addHandler(handler)
    root.setLevel(level)


def worker_count(requested: int | None = None) -> int:
    """Number of joblib workers.

    Resolution order: explicit request > $GIBBSLAB_THREADS > physical cores.
    The environment variable is a cap, so it also bounds explicit requests.
    """
    cores = psutil.cpu_count(logical=False) or os.cpu_count() or 1
    env = os.environ.get("GIBBSLAB_THREADS")
    cap = cores
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            console.print(f"[yellow]Ignoring malformed GIBBSLAB_THREADS={env!r}[/]")
    n = requested if requested is not None else cores
    return max(1, min(n, cap))


def seed_streams(seed: int, count: int) -> list[np.random.Generator]:
    """Independent generators (seed, stream-id) for parallel workers."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(c) for c in children]


def describe_version(cwd: Path | None = None) -> str:
    """git-describe of the checkout, falling back to the package version."""
    cmd = ["git", "describe", "--tags", "--always", "--dirty"]
    try:
        result = subprocess.run(
            cmd,
            cwd=cwd or BASE_DIR,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.TimeoutExpired):
        return f"v{__version__}"
    if result.returncode != 0 or not result.stdout.strip():
        logging.getLogger(__name__).debug("%s failed, using package version", shlex.join(cmd))
        return f"v{__version__}"
    return f"v{__version__}-{result.stdout.strip()}"
