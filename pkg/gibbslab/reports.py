"""Structured-text reports (YAML) and CSV artifacts."""
from __future__ import annotations

import csv
import math
import time
from collections.abc import Iterable, Sequence
from enum import Enum
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from .utils import describe_version


def plain(value):
    """Recursively convert numpy, Fraction, Enum and complex values to YAML-safe builtins."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, (complex, np.complexfloating)):
        return repr(complex(value))
    if value is None or isinstance(value, str):
        return value
    return str(value)


class Report:
    """Accumulates one command's report; `wall_clock_seconds` runs from construction."""

    def __init__(self, command: str, config: dict | None, seeds: Sequence[int] = ()):
        self.command = command
        self.config = config
        self.seeds = list(seeds)
        self.started = time.perf_counter()

    def build(self, result: dict) -> dict:
        return plain(
            {
                "command": self.command,
                "config": self.config,
                "version": describe_version(),
                "seeds": self.seeds,
                "wall_clock_seconds": round(time.perf_counter() - self.started, 3),
                "result": result,
            }
        )

    def write(self, path: Path, result: dict) -> Path:
        return write_yaml(path, self.build(result))


def write_yaml(path: Path, data: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(plain(data), sort_keys=True, default_flow_style=False, allow_unicode=True))
    return path


def record_line(record: dict) -> str:
    """One record as a single-line YAML flow mapping."""
    return yaml.safe_dump(plain(record), sort_keys=True, default_flow_style=True, width=math.inf).strip()


def write_records(path: Path, records: Iterable[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(record_line(r) + "\n" for r in records))
    return path


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """CSV with repr-formatted floats; identical rows give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path
