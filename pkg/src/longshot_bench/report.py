"""Run result documents and comparison-table rendering.

A run result is a small JSON document so that toolkit-computed rows and
hand-entered published rows can be mixed in one report::

    {
      "schema": "longshot-bench/run-result/1",
      "run_name": "Ytr1200",
      "metrics": {
        "person": {"ap11": 0.9058, "coco_map": 0.7025},
        "ball": {"ap11": ..., "coco_map": ..., "avg_precision": ...,
                 "avg_recall": ..., "pct_correct_frames": ...},
        "timing": {"inference_ms": 7.4, "total_ms": 10.2}
      },
      "config": {...}          optional
    }
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .exceptions import EmptyInput, IoFailure, SchemaMismatch
from .metrics import MetricsReport

SCHEMA = "longshot-bench/run-result/1"

COLUMNS = (
    "run",
    "Person AP₁₁",
    "Person COCO mAP",
    "Ball AP₁₁",
    "Ball COCO mAP",
    "Ball Avg Prec.",
    "Ball Avg Rec.",
    "Ball %",
    "T(ms)",
)

# (report attribute, decimals) per accuracy column, in table order
_ACCURACY = (
    ("person_ap11", 4),
    ("person_coco_map", 4),
    ("ball_ap11", 4),
    ("ball_coco_map", 4),
    ("ball_avg_precision", 3),
    ("ball_avg_recall", 3),
    ("ball_pct_frames", 3),
)

_MISSING = "-"


@dataclass(frozen=True)
class RunResult:
    run_name: str
    metrics: MetricsReport
    config: Optional[dict] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {"schema": SCHEMA, "run_name": self.run_name, "metrics": self.metrics.to_dict()}
        if self.config is not None:
            doc["config"] = self.config
        if self.extra:
            doc["extra"] = self.extra
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, doc, source="<document>") -> "RunResult":
        if not isinstance(doc, dict):
            raise SchemaMismatch("run result must be a JSON object", path=source)
        if doc.get("schema") != SCHEMA:
            raise SchemaMismatch(f"expected schema {SCHEMA!r}, got {doc.get('schema')!r}", path=source)
        name = doc.get("run_name")
        if not isinstance(name, str) or not name:
            raise SchemaMismatch("run_name must be a non-empty string", path=source)
        metrics = doc.get("metrics")
        if not isinstance(metrics, dict):
            raise SchemaMismatch("missing metrics section", path=source)
        unknown = set(metrics) - {"person", "ball", "timing"}
        if unknown:
            raise SchemaMismatch(f"unknown metrics sections {sorted(unknown)}", path=source)
        for section in metrics.values():
            if section is not None and not isinstance(section, dict):
                raise SchemaMismatch("metrics sections must be objects", path=source)
            for value in (section or {}).values():
                if value is not None and (isinstance(value, bool) or not isinstance(value, (int, float))):
                    raise SchemaMismatch(f"non-numeric metric value {value!r}", path=source)
        try:
            report = MetricsReport.from_dict(metrics)
        except ValueError as exc:
            raise SchemaMismatch(str(exc), path=source) from None
        return cls(name, report, doc.get("config"), doc.get("extra") or {})

    def save(self, path) -> None:
        try:
            Path(path).write_text(self.to_json(), encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot write run result ({exc.strerror})", path=path) from None

    @classmethod
    def load(cls, path) -> "RunResult":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot read run result ({exc.strerror})", path=path) from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"invalid JSON ({exc.msg} at line {exc.lineno})", path=path) from None
        return cls.from_dict(doc, source=path)


def format_latency(inference_ms: Optional[float], total_ms: Optional[float]) -> str:
    if inference_ms is None:
        return _MISSING
    if total_ms is None:
        return f"{inference_ms:.1f}"
    return f"{inference_ms:.1f}/{total_ms:.1f}"


def _cells(result: RunResult) -> list[str]:
    m = result.metrics
    row = [result.run_name]
    for attr, decimals in _ACCURACY:
        v = getattr(m, attr)
        row.append(_MISSING if v is None else f"{v:.{decimals}f}")
    row.append(format_latency(m.inference_ms, m.total_ms))
    return row


def _check_runs(results: Sequence[RunResult]) -> None:
    if not results:
        raise EmptyInput("no run results to report")
    seen = set()
    for r in results:
        if r.run_name in seen:
            raise SchemaMismatch(f"run_name {r.run_name!r} appears twice")
        seen.add(r.run_name)


def _best_rows(rows: list[list[str]]) -> list[set[int]]:
    """Row indices holding the best rendered value of each accuracy column."""
    best = []
    for col in range(1, 1 + len(_ACCURACY)):
        values = [float(r[col]) if r[col] != _MISSING else -math.inf for r in rows]
        top = max(values)
        best.append({i for i, v in enumerate(values) if v == top and v != -math.inf})
    return best


def render_markdown(results: Sequence[RunResult]) -> str:
    """Comparison table with the best value of each accuracy column in bold."""
    _check_runs(results)
    rows = [_cells(r) for r in results]
    for col, winners in enumerate(_best_rows(rows), start=1):
        for i in winners:
            rows[i][col] = f"**{rows[i][col]}**"
    lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "---|" * len(COLUMNS)]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def render_csv(results: Sequence[RunResult]) -> str:
    _check_runs(results)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in results:
        writer.writerow(_cells(r))
    return buf.getvalue()


RENDERERS = {"markdown": render_markdown, "csv": render_csv}
