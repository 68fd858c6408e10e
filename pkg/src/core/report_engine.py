from jinja2 import Environment, FileSystemLoader, ChoiceLoader, DictLoader, Template, TemplateError
import csv
import datetime
import json
import math
import os
from typing import Dict, Any, List, Optional

CSV_COLUMNS = ["experiment", "k_or_index", "value", "stderr", "samples", "seed"]

DEFAULT_TEMPLATES = {
    "summary_line.txt": (
        "{{ 'PASS' if report.pass else 'FAIL' }} {{ report.property }}"
        "{% for key, value in report.constants | dictsort %} {{ key }}={{ value | fmt }}{% endfor %}"
    ),
    "report.txt": (
        "Experiment: {{ run.experiment }}\n"
        "Config hash: {{ run.config_hash }}\n"
        "Seed: {{ run.seed }}\n"
        "Quasimorphism: {{ run.plugin.name }} (declared defect {{ run.plugin.declared_defect | fmt }})\n"
        "{% if run.error %}Error: {{ run.error.error }}: {{ run.error.message }}\n{% endif %}"
        "{% for report in run.properties %}\n"
        "[{{ 'PASS' if report.pass else 'FAIL' }}] {{ report.property }}"
        "{% if report.empirical %} (empirical){% endif %}\n"
        "{% for key, value in report.constants | dictsort %}  {{ key }}: {{ value | fmt }}\n{% endfor %}"
        "  points: {{ report.points | length }}\n"
        "{% endfor %}"
    ),
}


def _fmt(value):
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return str(value)
        return f"{value:.6g}"
    return str(value)


def _jsonable(obj):
    """Turn numpy scalars, tuples and non-finite floats into plain JSON values"""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


class ReportTemplateEngine:
    """Renders run summaries with Jinja2 and writes report.json / points.csv"""

    def __init__(self, template_dir: str = None):
        self.template_dir = template_dir or "templates"
        loaders = [DictLoader(DEFAULT_TEMPLATES)]
        if os.path.exists(self.template_dir):
            loaders.insert(0, FileSystemLoader(self.template_dir))
        self.env = Environment(loader=ChoiceLoader(loaders), keep_trailing_newline=True)
        self.env.filters["fmt"] = _fmt

    def render_file_template(self, template_filename: str, variables: Dict[str, Any]) -> str:
        try:
            template = self.env.get_template(template_filename)
            return template.render(**variables)
        except TemplateError as e:
            raise ValueError(f"Template file rendering error: {str(e)}") from e

    def validate_template(self, template_content: str) -> tuple:
        try:
            Template(template_content)
            return True, "Template is valid"
        except TemplateError as e:
            return False, f"Template validation error: {str(e)}"

    def summary_lines(self, run: Dict[str, Any]) -> List[str]:
        """One PASS/FAIL line per property"""
        return [self.render_file_template("summary_line.txt", {"report": r}) for r in run.get("properties", [])]

    def text_report(self, run: Dict[str, Any]) -> str:
        return self.render_file_template("report.txt", {"run": run})

    def build_run(self, experiment: str, config: Dict[str, Any], config_hash: str, plugin: Dict[str, Any],
                  properties: List[Dict[str, Any]], error: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        return _jsonable({
            "experiment": experiment,
            "config": config,
            "config_hash": config_hash,
            "seed": config.get("seed"),
            "plugin": plugin,
            "properties": properties,
            "pass": bool(properties) and error is None and all(p["pass"] for p in properties),
            "error": error,
        })

    def write_report_json(self, path: str, run: Dict[str, Any],
                          generated_at: Optional[str] = None) -> str:
        """Sorted-key JSON; the timestamp lives in its own top-level field"""
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        payload = dict(run)
        payload["generated_at"] = generated_at or datetime.datetime.now(datetime.timezone.utc).isoformat()
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True, ensure_ascii=False)
            f.write("\n")
        return path

    def points_rows(self, run: Dict[str, Any]) -> List[Dict[str, Any]]:
        rows = []
        for report in run.get("properties", []):
            for point in report.get("points", []):
                rows.append({
                    "experiment": f"{run['experiment']}:{report['property']}",
                    "k_or_index": point.get("k_or_index"),
                    "value": point.get("value"),
                    "stderr": point.get("stderr"),
                    "samples": point.get("samples"),
                    "seed": point.get("seed"),
                })
        return rows

    def write_points_csv(self, path: str, run: Dict[str, Any]) -> str:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for row in self.points_rows(run):
                writer.writerow(row)
        return path
