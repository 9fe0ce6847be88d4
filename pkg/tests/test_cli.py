import pytest
import yaml
from typer.testing import CliRunner

from gibbslab.cli import app
from gibbslab.errors import EXIT_OK, EXIT_REFUSED, EXIT_UNSTABLE, EXIT_USAGE

runner = CliRunner()


def invoke(*args):
    return runner.invoke(app, [str(a) for a in args])


def test_list_configs():
    result = invoke("list-configs")
    assert result.exit_code == EXIT_OK, result.output
    assert "triple-half" in result.output
    assert "bare-p1" in result.output


def test_bare_sphere_is_an_unstable_witness(tmp_path):
    result = invoke("stability", "-c", "bare-p1", "--budget", 0, "--out", tmp_path)
    assert result.exit_code == EXIT_UNSTABLE, result.output
    report = yaml.safe_load((tmp_path / "stability.yaml").read_text())
    assert set(report) == {"command", "config", "version", "seeds", "wall_clock_seconds", "result"}
    assert report["command"] == "stability"
    assert report["config"]["name"] == "bare-p1"
    assert report["result"]["verdict"] == "UnstableWitness"
    lines = (tmp_path / "strata.records").read_text().splitlines()
    assert lines and all(isinstance(yaml.safe_load(line), dict) for line in lines)


def test_malformed_config_file(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text('points: ["0"]\nweights: [0.5]\nk: "2"\n')
    result = invoke("stability", "-c", path, "--budget", 0, "--out", tmp_path)
    assert result.exit_code == EXIT_USAGE
    assert "ConfigError" in result.output


def test_unknown_flow_test(tmp_path):
    assert invoke("flows", "--test", "nothing", "--out", tmp_path).exit_code == EXIT_USAGE


@pytest.mark.parametrize("test", ["intertwine", "zeros", "hamiltonian", "nepsilon"])
def test_flow_checks_pass(tmp_path, test):
    result = invoke("flows", "--test", test, "--out", tmp_path)
    assert result.exit_code == EXIT_OK, result.output
    record = yaml.safe_load((tmp_path / f"flows_{test}.yaml").read_text())
    assert record["result"]["passed"] is True


def test_sampling_is_reproducible(tmp_path):
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        result = invoke("sample", "-c", "triple-half", "--budget", 2000, "--seed", 0, "--chains", 1, "--out", out)
        assert result.exit_code == EXIT_OK, result.output
        outputs.append((out / "samples.csv").read_bytes())
    assert outputs[0] == outputs[1]
    assert outputs[0].startswith(b"chain,")


def test_sampling_refuses_unstable_targets(tmp_path):
    result = invoke("sample", "-c", "bare-p1", "--budget", 2000, "--chains", 1, "--out", tmp_path)
    assert result.exit_code == EXIT_REFUSED
    assert not (tmp_path / "samples.csv").exists()


def test_lct():
    result = invoke("lct", "1/2@0", "1@inf")
    assert result.exit_code == EXIT_OK, result.output
    assert "lct = 1" in result.output
    assert invoke("lct", "1/2").exit_code == EXIT_USAGE


def test_tensor_partition(tmp_path):
    result = invoke("partition", "-c", "triple-half", "--method", "tensor", "--order", 12, "--out", tmp_path)
    assert result.exit_code == EXIT_OK, result.output
    record = yaml.safe_load((tmp_path / "partition.yaml").read_text())
    assert record["result"]["Z"] > 0
    assert record["result"]["method"] == "tensor"


@pytest.mark.slow
def test_inequality_command(tmp_path):
    result = invoke(
        "inequality", "-c", "triple-half", "--seed", 0, "--budget", 20000, "--resolution", 24, "--out", tmp_path
    )
    assert result.exit_code == EXIT_OK, result.output
    assert (tmp_path / "inequality.yaml").exists()


@pytest.mark.slow
def test_three_point_tensor_partition(tmp_path):
    result = invoke("partition", "-c", "triple-half-k4", "--method", "tensor", "--out", tmp_path)
    assert result.exit_code == EXIT_OK, result.output
    record = yaml.safe_load((tmp_path / "partition.yaml").read_text())
    assert record["result"]["Z"] > 0
    assert record["result"]["n_samples"] == 8
