from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import yaml

from .ding import DingSettings
from .errors import ConfigError
from .geometry import SpherePoint
from .pairs import LogPairCurve
from .utils import BASE_DIR

CONFIG_DIR = BASE_DIR / "configs"
EXPERIMENTS_FILE = CONFIG_DIR / "experiments.yaml"

FIELDS = ("genus", "points", "weights", "k", "gamma", "seeds", "budget", "resolution", "out_dir", "ding")


def _rational(value, what: str) -> Fraction:
    """Exact rational from a "p/q" string or an integer; floats are rejected."""
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise ConfigError(f"{what} must be an integer or a rational string like '1/2', got {value!r}")
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse {what} {value!r}: {exc}") from exc


def _rational_text(value: Fraction) -> str:
    return str(value)


def _point(value, what: str) -> str:
    text = str(value).strip()
    try:
        SpherePoint.from_chart(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse {what} {value!r} as a chart coordinate or 'inf'") from exc
    return text


def _integer(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{what} must be an integer, got {value!r}")
    return value


def _ding_settings(name: str, data) -> DingSettings:
    if data is None:
        return DingSettings()
    if not isinstance(data, dict):
        raise ConfigError(f"experiment {name!r}: the ding block must be a mapping")
    settings = DingSettings.from_dict(data)
    for key, value in settings.to_dict().items():
        expected = float if key in ("rtol", "gtol") else int
        if isinstance(value, bool) or not isinstance(value, expected):
            raise ConfigError(f"experiment {name!r}: ding.{key} must be a {expected.__name__}, got {value!r}")
    return settings


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    genus: int = 0
    points: tuple[str, ...] = ()
    weights: tuple[Fraction, ...] = ()
    k: Fraction = Fraction(1)
    gamma: Fraction = Fraction(1)
    seeds: tuple[int, ...] = (0, 1, 2)
    budget: int = 100_000
    resolution: int = 32
    out_dir: str = "results"
    ding: DingSettings = field(default_factory=DingSettings)

    @classmethod
    def from_dict(cls, name: str, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError(f"experiment {name!r} must be a mapping, got {type(data).__name__}")
        unknown = set(data) - set(FIELDS)
        if unknown:
            raise ConfigError(f"experiment {name!r} has unknown keys: {', '.join(sorted(unknown))}")
        points = tuple(_point(p, "marked point") for p in data.get("points") or ())
        weights = tuple(_rational(w, "weight") for w in data.get("weights") or ())
        if len(points) != len(weights):
            raise ConfigError(f"experiment {name!r}: {len(points)} points but {len(weights)} weights")
        seeds = tuple(_integer(s, "seed") for s in data.get("seeds", (0, 1, 2)))
        if not seeds:
            raise ConfigError(f"experiment {name!r} needs at least one seed")
        ding = _ding_settings(name, data.get("ding"))
        cfg = cls(
            name=name,
            genus=_integer(data.get("genus", 0), "genus"),
            points=points,
            weights=weights,
            k=_rational(data.get("k", 1), "k"),
            gamma=_rational(data.get("gamma", 1), "gamma"),
            seeds=seeds,
            budget=_integer(data.get("budget", 100_000), "budget"),
            resolution=_integer(data.get("resolution", 32), "resolution"),
            out_dir=str(data.get("out_dir", f"results/{name}")),
            ding=ding,
        )
        cfg.pair()
        return cfg

    @classmethod
    def loads(cls, text: str, name: str | None = None) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("an experiment file must hold a mapping")
        data = dict(data)
        found = data.pop("name", None)
        return cls.from_dict(name or found or "custom", data)

    def to_dict(self) -> dict:
        """Canonical form: rationals as "p/q" strings; keys are sorted on output."""
        return {
            "name": self.name,
            "genus": self.genus,
            "points": list(self.points),
            "weights": [_rational_text(w) for w in self.weights],
            "k": _rational_text(self.k),
            "gamma": _rational_text(self.gamma),
            "seeds": list(self.seeds),
            "budget": self.budget,
            "resolution": self.resolution,
            "out_dir": self.out_dir,
            "ding": self.ding.to_dict(),
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)

    def pair(self) -> LogPairCurve:
        try:
            return LogPairCurve.from_chart(self.points, self.weights, genus=self.genus)
        except ValueError as exc:
            raise ConfigError(f"experiment {self.name!r}: {exc}") from exc

    def with_overrides(
        self,
        seed: int | None = None,
        budget: int | None = None,
        resolution: int | None = None,
        out_dir: Path | str | None = None,
    ) -> "ExperimentConfig":
        changes = {}
        if seed is not None:
            changes["seeds"] = (seed,)
        if budget is not None:
            changes["budget"] = budget
        if resolution is not None:
            changes["resolution"] = resolution
        if out_dir is not None:
            changes["out_dir"] = str(out_dir)
        return replace(self, **changes)


class Config:
    """Named experiments from configs/experiments.yaml, loaded on first use."""

    def __init__(self, path: Path = EXPERIMENTS_FILE):
        self.path = path
        self._raw: dict | None = None
        self._experiments: dict[str, ExperimentConfig] | None = None

    def _load_raw(self) -> dict:
        if self._raw is None:
            try:
                data = yaml.safe_load(self.path.read_text())
            except OSError as exc:
                raise ConfigError(f"cannot read {self.path}: {exc}") from exc
            except yaml.YAMLError as exc:
                raise ConfigError(f"malformed YAML in {self.path}: {exc}") from exc
            if not isinstance(data, dict) or "experiments" not in data:
                raise ConfigError(f"{self.path} needs an 'experiments' mapping")
            self._raw = data
        return self._raw

    @property
    def default_name(self) -> str:
        return self._load_raw()["default"]

    @property
    def experiments(self) -> dict[str, ExperimentConfig]:
        if self._experiments is None:
            raw = self._load_raw()["experiments"]
            self._experiments = {name: ExperimentConfig.from_dict(name, cfg) for name, cfg in raw.items()}
        return self._experiments

    def get(self, name: str | None) -> ExperimentConfig:
        if name is None:
            name = self.default_name
        cfg = self.experiments.get(name)
        if cfg is None:
            raise ConfigError(f"Unknown experiment: {name}")
        return cfg

    def resolve(self, name_or_path: str | None) -> ExperimentConfig:
        """An experiment name, a YAML file holding one experiment, or None for the default."""
        if name_or_path is not None:
            path = Path(name_or_path)
            if path.suffix in (".yaml", ".yml"):
                try:
                    text = path.read_text()
                except OSError as exc:
                    raise ConfigError(f"cannot read {path}: {exc}") from exc
                return ExperimentConfig.loads(text, name=None)
        return self.get(name_or_path)


CONFIG = Config()
