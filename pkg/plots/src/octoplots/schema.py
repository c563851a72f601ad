"""Strict CSV loading against the simulator's fixed schemas.

The producer guarantees exact column names and order; anything else is
an error here, reported as a column diff rather than a silent misread.
"""

from __future__ import annotations

import csv

QUEUE_COLUMNS = ["t_ms", "qdelay_ms"]
SUMMARY_COLUMNS = [
    "scenario", "scheme", "quality_mean", "lat_p50_ms", "lat_p99_ms",
    "aoi_p50_ms", "aoi_p99_ms", "util_pct", "drops_by_msg",
    "drops_by_bitrate", "drops_tail",
]
FRAMES_COLUMNS = ["frame", "send_us", "deliver_us", "level", "decodable"]


class SchemaError(ValueError):
    """Raised when a CSV does not match its expected schema."""


def read_csv(path: str, expected_columns: list[str]) -> list[dict[str, str]]:
    """Read rows as dicts after verifying the header matches exactly."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected columns "
                              f"{expected_columns}") from None
        if header != expected_columns:
            missing = [c for c in expected_columns if c not in header]
            extra = [c for c in header if c not in expected_columns]
            parts = [f"{path}: header mismatch"]
            if missing:
                parts.append(f"missing columns: {missing}")
            if extra:
                parts.append(f"unexpected columns: {extra}")
            if not missing and not extra:
                parts.append(f"column order {header} != {expected_columns}")
            raise SchemaError("; ".join(parts))
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(expected_columns):
                raise SchemaError(
                    f"{path}:{lineno}: {len(row)} fields, "
                    f"expected {len(expected_columns)}"
                )
            rows.append(dict(zip(expected_columns, row)))
        return rows


def as_float(row: dict[str, str], col: str, default: float = float("nan")) -> float:
    v = row[col]
    return default if v == "" else float(v)
