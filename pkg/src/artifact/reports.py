"""Deterministic CSV and JSON report files with a versioned schema header."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

SCHEMA = "artifact.report/v1"
_HEADER_PREFIX = "# schema: "


class SchemaMismatch(ValueError):
    pass


def _fmt(value):
    if hasattr(value, "item") and not isinstance(value, (list, tuple)):
        value = value.item()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(float(value))
    return str(value)


def write_csv(path, columns, rows, schema=SCHEMA):
    """Write rows (sequences or dicts) under a schema comment line.

    An empty ``rows`` produces a header-only file.
    """
    buf = io.StringIO()
    buf.write(f"{_HEADER_PREFIX}{schema}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if isinstance(row, dict):
            row = [row.get(c, "") for c in columns]
        writer.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
    return Path(path)


def read_csv(path, schema=SCHEMA):
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith(_HEADER_PREFIX):
        raise SchemaMismatch(f"{path}: missing schema header")
    found = text[0][len(_HEADER_PREFIX):].strip()
    if found != schema:
        raise SchemaMismatch(f"{path}: schema {found!r}, expected {schema!r}")
    reader = csv.reader(text[1:])
    columns = next(reader)
    return columns, [row for row in reader]


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def write_summary(path, payload, schema=SCHEMA):
    body = {"schema": schema}
    body.update(_clean(payload))
    Path(path).write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return Path(path)


def read_summary(path, schema=SCHEMA):
    body = json.loads(Path(path).read_text(encoding="utf-8"))
    if body.get("schema") != schema:
        raise SchemaMismatch(f"{path}: schema {body.get('schema')!r}, expected {schema!r}")
    return body


class CheckResult:
    """Outcome of one named assertion, with the measured value and threshold."""

    __slots__ = ("name", "passed", "value", "threshold", "detail")

    def __init__(self, name, passed, value, threshold=None, detail=None):
        self.name = name
        self.passed = bool(passed)
        self.value = value
        self.threshold = threshold
        self.detail = dict(detail or {})

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "threshold": self.threshold, "detail": self.detail}

    def __repr__(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"<{mark} {self.name}: {self.value!r} (threshold {self.threshold!r})>"


def order_check(name, fit, threshold):
    """CheckResult for an order fit; residuals at round-off report as ``"exact"``."""
    value = "exact" if fit.exact else fit.slope
    return CheckResult(name, fit.passes(threshold), value, threshold, fit.as_dict())
