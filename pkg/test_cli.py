import csv
import json
import math
import os

import pytest

from main import EXIT_CONFIG, EXIT_PASS, main


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("PARAMORPHISM_SEED", raising=False)
    return tmp_path


def test_invariants_of_full_twist(workdir, capsys):
    assert main(["braid", "invariants", "s1 s1"]) == EXIT_PASS
    out = capsys.readouterr().out.splitlines()
    assert "exponent_sum: 2" in out
    assert "lk_1_2: 1.0" in out
    assert "permutation: [1, 2]" in out


def test_invariants_as_json(workdir, capsys):
    assert main(["braid", "invariants", "s1 s1 s1", "--json"]) == EXIT_PASS
    table = json.loads(capsys.readouterr().out)
    assert table["signature"] == -2
    assert table["permutation"] == [2, 1]


def test_compose_with_inverse_prints_empty_word(workdir, capsys):
    assert main(["braid", "compose", "s1", "s1^-1"]) == EXIT_PASS
    assert capsys.readouterr().out == "\n"


def test_compose_order_and_json_input(workdir, capsys):
    assert main(["braid", "compose", "s2", "[[1, 1]]"]) == EXIT_PASS
    assert capsys.readouterr().out.strip() == "s1 s2"


def test_malformed_word_is_a_config_error(workdir, capsys):
    assert main(["braid", "invariants", "s0 s1"]) == EXIT_CONFIG
    assert capsys.readouterr().out.startswith("[ERROR]")


def test_extract_identity_flow(workdir, capsys):
    assert main(["braid", "extract", "--flow", "identity", "--n", "4", "--seed", "2", "--json"]) == EXIT_PASS
    assert json.loads(capsys.readouterr().out) == []


def test_unknown_flow_is_a_config_error(workdir):
    assert main(["braid", "extract", "--flow", "spin"]) == EXIT_CONFIG


def test_run_rejects_three_points(workdir, capsys):
    assert main(["run", "--n", "3"]) == EXIT_CONFIG
    assert "n > 3" in capsys.readouterr().out


def test_run_rejects_missing_profile(workdir):
    assert main(["run", "--profile", "nope"]) == EXIT_CONFIG


def test_rotation_length_run(workdir, capsys):
    code = main(["run", "--experiment", "length", "--flow", "rotation", "--angle", "1.0"])
    assert code == EXIT_PASS
    out = capsys.readouterr().out
    line = next(l for l in out.splitlines() if l.startswith("[INFO] L1 length:"))
    assert abs(float(line.split(":")[1]) - math.pi ** 2) < 1e-3 * math.pi ** 2
    report = json.loads((workdir / "out" / "report.json").read_text())
    assert report["pass"] is True
    assert report["properties"][0]["property"] == "Length"
    with open(workdir / "out" / "points.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert rows[0]["experiment"] == "length:Length"
    assert os.path.exists(workdir / "out" / "runs.db")


def test_reports_repeat_apart_from_timestamp(workdir):
    args = ["run", "--experiment", "length", "--flow", "rotation", "--angle", "0.5", "--seed", "3"]
    assert main(args) == EXIT_PASS
    first = json.loads((workdir / "out" / "report.json").read_text())
    assert main(args) == EXIT_PASS
    second = json.loads((workdir / "out" / "report.json").read_text())
    first.pop("generated_at")
    second.pop("generated_at")
    assert first == second
