from fractions import Fraction

import pytest

from gibbslab.config import CONFIG, Config, ExperimentConfig
from gibbslab.ding import DingSettings
from gibbslab.errors import ConfigError

CUSTOM = """\
name: custom-pair
points: ["0", "1", "inf"]
weights: ["1/3", "2/3", "1/2"]
k: "6"
gamma: "1/2"
seeds: [4]
budget: 20000
resolution: 16
out_dir: results/custom
ding:
  max_iterations: 50
  rtol: 1.0e-9
"""


def test_shipped_experiments_load():
    names = set(CONFIG.experiments)
    assert {"triple-half", "triple-half-deformed", "bare-p1", "toric-boundary"} <= names
    assert CONFIG.default_name in names
    cfg = CONFIG.get("triple-half")
    assert cfg.weights == (Fraction(1, 2),) * 3
    assert cfg.k == 2
    assert cfg.ding.rtol == 1e-10
    assert CONFIG.get(None) == CONFIG.get(CONFIG.default_name)


def test_unknown_experiment():
    with pytest.raises(ConfigError):
        CONFIG.get("no-such-experiment")


def test_dump_is_canonical():
    cfg = ExperimentConfig.loads(CUSTOM)
    assert cfg.name == "custom-pair"
    assert cfg.ding == DingSettings(max_iterations=50, rtol=1e-9)
    text = cfg.dump()
    again = ExperimentConfig.loads(text)
    assert again == cfg
    assert again.dump() == text


def test_overrides():
    cfg = ExperimentConfig.loads(CUSTOM).with_overrides(seed=9, budget=1000, resolution=8, out_dir="elsewhere")
    assert cfg.seeds == (9,)
    assert (cfg.budget, cfg.resolution, cfg.out_dir) == (1000, 8, "elsewhere")
    assert ExperimentConfig.loads(CUSTOM).with_overrides() == ExperimentConfig.loads(CUSTOM)


@pytest.mark.parametrize(
    "patch",
    [
        ('weights: ["1/3", "2/3", "1/2"]', "weights: [0.5, 0.5, 0.5]"),
        ('k: "6"', 'k: "1/0"'),
        ('k: "6"', "k: 2.0"),
        ('gamma: "1/2"', 'gamma: "half"'),
        ("budget: 20000", "budget: 2e4"),
        ("resolution: 16", "resolution: 16\ncolour: blue"),
        ('points: ["0", "1", "inf"]', 'points: ["0", "1"]'),
        ('points: ["0", "1", "inf"]', 'points: ["0", "0", "inf"]'),
        ("rtol: 1.0e-9", "rtol: 1"),
        ("seeds: [4]", "seeds: []"),
    ],
)
def test_malformed_experiments(patch):
    old, new = patch
    assert old in CUSTOM
    with pytest.raises(ConfigError):
        ExperimentConfig.loads(CUSTOM.replace(old, new))


def test_malformed_yaml():
    with pytest.raises(ConfigError):
        ExperimentConfig.loads("points: [0, 1\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.loads("- just\n- a list\n")


def test_resolve_reads_a_yaml_file(tmp_path):
    path = tmp_path / "pair.yaml"
    path.write_text(CUSTOM)
    cfg = CONFIG.resolve(str(path))
    assert cfg.name == "custom-pair"
    assert cfg.pair().total_weight == Fraction(3, 2)
    with pytest.raises(ConfigError):
        CONFIG.resolve(str(tmp_path / "missing.yaml"))


def test_broken_experiments_file(tmp_path):
    path = tmp_path / "experiments.yaml"
    path.write_text("default: x\n")
    with pytest.raises(ConfigError):
        Config(path).experiments
