"""Result records and their CSV / JSON serialisation.

A record holds named tables (declared columns with units, plain rows), a
free-form JSON summary and run metadata. Floats are written with ``repr`` so
a parse of an emitted file reproduces the values bit for bit; non-finite
floats are spelled ``nan``, ``inf`` and ``-inf`` in both formats.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


@dataclass
class Table:
    columns: list  # [(name, unit)]
    rows: list = field(default_factory=list)

    def __post_init__(self):
        self.columns = [tuple(c) for c in self.columns]
        width = len(self.columns)
        self.rows = [tuple(_native(x) for x in row) for row in self.rows]
        for row in self.rows:
            if len(row) != width:
                raise ValueError(f"row has {len(row)} cells, table has {width} columns")

    @property
    def names(self) -> list[str]:
        return [c[0] for c in self.columns]

    def column(self, name: str) -> list:
        i = self.names.index(name)
        return [row[i] for row in self.rows]

    def __eq__(self, other):
        if not isinstance(other, Table) or self.columns != other.columns or len(self.rows) != len(other.rows):
            return False
        return all(_same(a, b) for ra, rb in zip(self.rows, other.rows) for a, b in zip(ra, rb))


@dataclass
class ResultRecord:
    scenario: str
    metadata: dict
    tables: dict
    summary: dict = field(default_factory=dict)

    def payload(self) -> dict:
        """Everything except metadata, in serialisable form."""
        return {"summary": _to_json(self.summary), "tables": {k: _table_json(t) for k, t in self.tables.items()}}

    def payload_bytes(self) -> bytes:
        return json.dumps(self.payload(), sort_keys=True, separators=(",", ":")).encode()

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "scenario": self.scenario,
            "metadata": _to_json(self.metadata),
            **self.payload(),
        }


def _native(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, np.str_):
        return str(x)
    return x


def _same(a, b) -> bool:
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return a == b and type(a) is type(b)


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    if x is None:
        return None
    return str(x)


def _to_json(obj):
    if isinstance(obj, dict):
        return {str(k): _to_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_json(obj.tolist())
    return _cell(obj)


def _table_json(t: Table) -> dict:
    return {
        "columns": [{"name": n, "unit": u} for n, u in t.columns],
        "rows": [[_cell(x) for x in row] for row in t.rows],
    }


_SPECIAL = {"nan": math.nan, "inf": math.inf, "-inf": -math.inf}


def _from_json_cell(x):
    if isinstance(x, str) and x in _SPECIAL:
        return _SPECIAL[x]
    return x


def table_from_json(obj: dict) -> Table:
    cols = [(c["name"], c["unit"]) for c in obj["columns"]]
    return Table(cols, [tuple(_from_json_cell(x) for x in row) for row in obj["rows"]])


def _csv_text(x) -> str:
    c = _cell(x)
    if c is None:
        return ""
    if isinstance(c, bool):
        return "true" if c else "false"
    if isinstance(c, float):
        return repr(c)
    return str(c)


def _parse_csv_text(s: str):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    if s in _SPECIAL:
        return _SPECIAL[s]
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def _header(name, unit):
    return f"{name} [{unit}]"


def _parse_header(h: str):
    name, _, rest = h.partition(" [")
    return name, rest[:-1]


def write_table_csv(table: Table, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([_header(n, u) for n, u in table.columns])
        for row in table.rows:
            w.writerow([_csv_text(x) for x in row])
    return path


def read_table_csv(path) -> Table:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    cols = [_parse_header(h) for h in rows[0]]
    return Table(cols, [tuple(_parse_csv_text(x) for x in r) for r in rows[1:]])


def emit(record: ResultRecord, out_dir, fmt: str = "json") -> list[Path]:
    """Write ``record`` under ``out_dir``.

    ``csv``: one ``<scenario>.<table>.csv`` per table plus a
    ``<scenario>.meta.json`` with metadata and summary. ``json``: a single
    ``<scenario>.json`` document.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out / f"{record.scenario}.json"
        path.write_text(json.dumps(record.to_json(), indent=1, sort_keys=True))
        return [path]
    if fmt == "csv":
        paths = [write_table_csv(t, out / f"{record.scenario}.{name}.csv") for name, t in record.tables.items()]
        meta = out / f"{record.scenario}.meta.json"
        meta.write_text(
            json.dumps(
                {
                    "format_version": FORMAT_VERSION,
                    "scenario": record.scenario,
                    "metadata": _to_json(record.metadata),
                    "summary": _to_json(record.summary),
                    "tables": list(record.tables),
                },
                indent=1,
                sort_keys=True,
            )
        )
        return paths + [meta]
    raise ValueError(f"unknown format {fmt!r}; use 'csv' or 'json'")


def load(path) -> ResultRecord:
    """Parse a record written by :func:`emit` (either format)."""
    path = Path(path)
    doc = json.loads(path.read_text())
    if path.name.endswith(".meta.json"):
        stem = path.name[: -len(".meta.json")]
        tables = {n: read_table_csv(path.parent / f"{stem}.{n}.csv") for n in doc["tables"]}
    else:
        tables = {n: table_from_json(t) for n, t in doc["tables"].items()}
    return ResultRecord(doc["scenario"], doc["metadata"], tables, doc.get("summary", {}))
