"""CSV rows and JSON summaries.

Every suite writes rows with the same fixed columns; cells that do not apply
to a suite are left empty.  Floats are written with ``repr`` so that reading
a file back reproduces the in-memory values exactly.
"""
from __future__ import annotations

import csv
import io
import json
import math
import subprocess
from dataclasses import asdict, is_dataclass
from importlib import metadata
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

COLUMNS = ("suite", "N", "theta", "eta", "sign", "replica", "seed", "count",
           "tau_value", "max_norm", "min_norm", "min_local_time")
_INT_COLS = {"N", "replica", "seed", "count"}
_FLOAT_COLS = {"theta", "eta", "tau_value", "max_norm", "min_norm", "min_local_time"}


class IoFailure(OSError):
    pass


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(COLUMNS)
    for row in rows:
        extra = set(row) - set(COLUMNS)
        if extra:
            raise ValueError(f"unknown columns {sorted(extra)}")
        w.writerow([_cell(row.get(c)) for c in COLUMNS])
    return buf.getvalue()


def _parse(col: str, text: str):
    if text == "":
        return None
    if col in _INT_COLS:
        return int(text)
    if col in _FLOAT_COLS:
        return float(text)
    return text


def csv_to_rows(text: str) -> list[dict]:
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    if header is None or tuple(header) != COLUMNS:
        raise ValueError(f"unexpected CSV header {header}")
    return [{c: _parse(c, v) for c, v in zip(COLUMNS, rec)} for rec in reader]


def version_string() -> str:
    """Package version, plus ``git describe`` output when run from a checkout."""
    try:
        ver = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        ver = "unknown"
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).resolve().parent)
        if out.returncode == 0 and out.stdout.strip():
            return f"{ver}+git.{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return ver


def _jsonable(x):
    if isinstance(x, np.generic):
        x = x.item()
    if is_dataclass(x) and not isinstance(x, type):
        x = asdict(x)
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def summary_to_json(summary: dict) -> str:
    return json.dumps(_jsonable(summary), indent=2, ensure_ascii=False) + "\n"


def write_text(path, text: str) -> None:
    p = Path(path)
    try:
        if p.parent and not p.parent.exists():
            p.parent.mkdir(parents=True)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {p}: {exc.strerror}") from exc


def emit(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        import sys

        sys.stdout.write(text)
    else:
        write_text(path, text)
