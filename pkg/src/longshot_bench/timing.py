"""Per-frame latency logs written by external model runners.

The log is CSV with header ``frame_id,inference_ms`` or
``frame_id,inference_ms,total_ms``. Latency is never measured here.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

from .exceptions import EmptyLog, MalformedRow, MixedTimingLog, NegativeDuration

_HEADERS = (["frame_id", "inference_ms"], ["frame_id", "inference_ms", "total_ms"])


@dataclass(frozen=True)
class TimingRecord:
    frame_id: str
    inference_ms: float
    total_ms: Optional[float] = None


class TimingSummary(NamedTuple):
    mean_inference_ms: float
    mean_total_ms: Optional[float]


def _duration(text: str, row: int, column: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise MalformedRow(row, f"{column} {text!r} is not a number") from None
    if not math.isfinite(v):
        raise MalformedRow(row, f"{column} is not finite")
    if v <= 0:
        raise NegativeDuration(row, f"{column} must be positive, got {v}")
    return v


def parse_timing_log(text: str) -> list[TimingRecord]:
    rows = [r for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
    if not rows:
        raise EmptyLog("timing log is empty")
    header = [c.strip() for c in rows[0]]
    if header not in _HEADERS:
        # headerless logs are accepted when the first row is data
        if len(header) in (2, 3) and header[0] != "frame_id":
            header, data = _HEADERS[len(header) - 2], rows
            start = 1
        else:
            raise MalformedRow(1, f"unexpected header {','.join(header)!r}")
    else:
        data, start = rows[1:], 2
    records = []
    width = len(header)
    for number, row in enumerate(data, start=start):
        cells = [c.strip() for c in row]
        if len(cells) != width:
            raise MalformedRow(number, f"expected {width} columns, got {len(cells)}")
        if not cells[0]:
            raise MalformedRow(number, "empty frame_id")
        inference = _duration(cells[1], number, "inference_ms")
        total = None
        if width == 3 and cells[2]:
            total = _duration(cells[2], number, "total_ms")
            if total < inference:
                raise MalformedRow(number, f"total_ms {total} is below inference_ms {inference}")
        records.append(TimingRecord(cells[0], inference, total))
    return records


def summarize_timing(records: Sequence[TimingRecord]) -> TimingSummary:
    """Mean inference and total latency; the total is None for inference-only logs."""
    if not records:
        raise EmptyLog("no timing records")
    with_total = sum(1 for r in records if r.total_ms is not None)
    if 0 < with_total < len(records):
        raise MixedTimingLog(
            f"{with_total} of {len(records)} records carry total_ms; refusing to average a mixed log"
        )
    mean_inf = math.fsum(r.inference_ms for r in records) / len(records)
    mean_total = None
    if with_total:
        mean_total = math.fsum(r.total_ms for r in records) / len(records)
    return TimingSummary(mean_inf, mean_total)
