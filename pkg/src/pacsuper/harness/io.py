"""CSV and JSON writers with lossless float round-trips."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Sequence

SCHEMA_VERSION = "1"


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    return str(v)


def parse_value(text: str, kind: type):
    if kind is bool:
        if text not in ("true", "false"):
            raise ValueError(f"not a boolean: {text!r}")
        return text == "true"
    if kind is float:
        return float(text)
    if kind is int:
        return int(text)
    return text


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row[c]) for c in columns])
    return buf.getvalue()


def csv_to_rows(text: str, schema: dict) -> list[dict]:
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader)
    if list(header) != list(schema):
        raise ValueError(f"unexpected header {header}")
    return [{c: parse_value(v, schema[c]) for c, v in zip(header, line)} for line in reader]


def write_csv(path, rows: Sequence[dict], columns: Sequence[str]) -> None:
    Path(path).write_bytes(rows_to_csv(rows, columns).encode("utf-8"))


def read_csv(path, schema: dict) -> list[dict]:
    return csv_to_rows(Path(path).read_bytes().decode("utf-8"), schema)


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_bytes(dumps(obj).encode("utf-8"))


def read_json(path):
    return json.loads(Path(path).read_text())
