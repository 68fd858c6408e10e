import csv
import json

import numpy as np

from core.property_suites import PropertyReport
from core.report_engine import CSV_COLUMNS, ReportTemplateEngine
from core.run_ledger import RunLedger


def sample_run(engine, passed=True, error=None):
    report = PropertyReport(
        "P2", {"slope": np.float64(0.25), "r2": 0.999},
        [{"k_or_index": 1, "value": 0.5, "stderr": 0.01, "samples": 100, "seed": 7},
         {"k_or_index": 2, "value": 0.75, "stderr": 0.01, "samples": 100, "seed": 7}],
        passed,
    )
    return engine.build_run("p2", {"seed": 7, "n": 4}, "abc123", {"name": "cross-linking"}, [report.to_dict()], error)


def test_summary_line_per_property(tmp_path):
    engine = ReportTemplateEngine(str(tmp_path / "templates"))
    lines = engine.summary_lines(sample_run(engine))
    assert lines == ["PASS P2 r2=0.999 slope=0.25"]
    assert engine.summary_lines(sample_run(engine, passed=False))[0].startswith("FAIL P2")


def test_run_passes_only_without_error(tmp_path):
    engine = ReportTemplateEngine(str(tmp_path))
    assert sample_run(engine)["pass"] is True
    failed = sample_run(engine, error={"error": "NumericalFailure", "message": "x", "details": {}})
    assert failed["pass"] is False
    assert engine.build_run("p2", {}, "h", {}, [])["pass"] is False


def test_report_json_is_sorted_and_timestamp_isolated(tmp_path):
    engine = ReportTemplateEngine(str(tmp_path))
    run = sample_run(engine)
    first = engine.write_report_json(str(tmp_path / "a" / "report.json"), run, generated_at="t1")
    second = engine.write_report_json(str(tmp_path / "b" / "report.json"), run, generated_at="t2")
    a = open(first, encoding="utf-8").read()
    b = open(second, encoding="utf-8").read()
    assert a.replace('"t1"', '"t2"') == b
    data = json.loads(a)
    assert list(data) == sorted(data)
    assert data["properties"][0]["constants"]["slope"] == 0.25


def test_non_finite_values_stay_json(tmp_path):
    engine = ReportTemplateEngine(str(tmp_path))
    run = engine.build_run("p4", {}, "h", {}, [PropertyReport("P4", {"A": float("inf")}, [], True).to_dict()])
    assert run["properties"][0]["constants"]["A"] == "inf"


def test_points_csv_columns(tmp_path):
    engine = ReportTemplateEngine(str(tmp_path))
    path = engine.write_points_csv(str(tmp_path / "points.csv"), sample_run(engine))
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == CSV_COLUMNS
    assert [r["k_or_index"] for r in rows] == ["1", "2"]
    assert rows[0]["experiment"] == "p2:P2"


def test_user_template_overrides_builtin(tmp_path):
    (tmp_path / "summary_line.txt").write_text("{{ report.property }} done")
    engine = ReportTemplateEngine(str(tmp_path))
    assert engine.summary_lines(sample_run(engine)) == ["P2 done"]


def test_text_report(tmp_path):
    engine = ReportTemplateEngine(str(tmp_path / "none"))
    text = engine.text_report(sample_run(engine))
    assert "Config hash: abc123" in text
    assert "[PASS] P2 (empirical)" in text


def test_template_validation(tmp_path):
    engine = ReportTemplateEngine(str(tmp_path))
    assert engine.validate_template("{{ x }}")[0]
    assert not engine.validate_template("{% if %}")[0]


def test_ledger_records_runs(tmp_path):
    engine = ReportTemplateEngine(str(tmp_path))
    ledger = RunLedger(str(tmp_path / "out" / "runs.db"))
    first = ledger.record_run(sample_run(engine), 0, "report.json")
    ledger.record_run(sample_run(engine, passed=False), 1)
    runs = ledger.get_runs()
    assert runs[0]["exit_code"] == 1
    assert runs[1]["id"] == first
    assert runs[1]["properties"] == {"P2": True}
    assert len(ledger.get_runs_by_hash("abc123")) == 2
    assert ledger.get_statistics() == {"total": 2, "passed": 1, "failed": 1}
