from fractions import Fraction

import numpy as np
import yaml

from gibbslab.reports import Report, plain, record_line, write_csv, write_records
from gibbslab.stability import Verdict


def test_plain_converts_numeric_types():
    value = plain(
        {
            "f": np.float64(0.25),
            "i": np.int64(3),
            "b": np.bool_(True),
            "q": Fraction(1, 3),
            "v": Verdict.INCONCLUSIVE,
            "z": 1 + 2j,
            "a": np.arange(3),
            "t": (1, None),
        }
    )
    assert value == {
        "f": 0.25,
        "i": 3,
        "b": True,
        "q": "1/3",
        "v": "Inconclusive",
        "z": "(1+2j)",
        "a": [0, 1, 2],
        "t": [1, None],
    }
    assert type(value["f"]) is float and type(value["i"]) is int


def test_record_line_is_one_line():
    line = record_line({"stratum": "generic m=2", "E": Fraction(-1, 2), "strata": list(range(40))})
    assert "\n" not in line
    assert yaml.safe_load(line)["E"] == "-1/2"


def test_report_layout(tmp_path):
    report = Report("stability", {"name": "x"}, [0, 1])
    path = report.write(tmp_path / "nested" / "report.yaml", {"verdict": Verdict.UNSTABLE_WITNESS})
    data = yaml.safe_load(path.read_text())
    assert set(data) == {"command", "config", "version", "seeds", "wall_clock_seconds", "result"}
    assert data["result"] == {"verdict": "UnstableWitness"}
    assert data["seeds"] == [0, 1]
    assert data["version"].startswith("v")


def test_records_and_csv(tmp_path):
    path = write_records(tmp_path / "a.records", [{"x": 1}, {"x": 2}])
    assert [yaml.safe_load(line) for line in path.read_text().splitlines()] == [{"x": 1}, {"x": 2}]
    csv_path = write_csv(tmp_path / "a.csv", ("i", "v"), [(0, 0.1), (1, np.float64(1 / 3))])
    assert csv_path.read_text() == "i,v\n0,0.1\n1,0.3333333333333333\n"
