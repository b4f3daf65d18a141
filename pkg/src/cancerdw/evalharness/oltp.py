"""Row-store baseline: normalized operational tables joined per query.

The tables are plain lists of tuples read from the clean ``oltp/`` copy of a
generated dataset. Every query scans the event table and hash-joins the
patient, diagnosis and procedure tables it needs; nothing is cached between
queries.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any

# warehouse (dimension, level) -> (table, column); DimDate levels derive from the event date
LEVEL_COLUMNS = {
    ("DimPatient", "patientNo"): ("patients", "patientNo"),
    ("DimPatient", "name"): ("patients", "name"),
    ("DimPatient", "sex"): ("patients", "sex"),
    ("DimPatient", "birthDate"): ("patients", "birthDate"),
    ("DimPatient", "stage"): ("patients", "stage"),
    ("DimPatient", "phase"): ("patients", "phase"),
    ("DimCancerType", "cancerCode"): ("diagnoses", "cancerCode"),
    ("DimCancerType", "cancerName"): ("diagnoses", "cancerName"),
    ("DimCancerType", "organ"): ("diagnoses", "organ"),
    ("DimProcedure", "procCode"): ("procedures", "procCode"),
    ("DimProcedure", "procName"): ("procedures", "procName"),
    ("DimProcedure", "kind"): ("procedures", "kind"),
}
DATE_LEVELS = {"year", "quarter", "month", "day", "dateKey"}
JOIN_COLUMN = {"patients": "patientNo", "diagnoses": "cancerCode", "procedures": "procCode"}


@dataclass(frozen=True)
class LogicalQuery:
    """Backend-neutral query: group-by levels, equality filters and measures."""

    query_id: str
    axes: tuple[tuple[str, str], ...]
    slicers: tuple[tuple[str, str, Any], ...]
    measures: tuple[str, ...]


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def col(self, name: str) -> int:
        return self.columns.index(name)


def _date_level(d: date, level: str):
    if level == "year":
        return d.year
    if level == "quarter":
        return (d.month - 1) // 3 + 1
    if level == "month":
        return d.month
    if level == "day":
        return d.day
    return int(d.strftime("%Y%m%d"))


class OltpEmulation:
    def __init__(self, tables: dict[str, Table]):
        self.tables = tables

    @classmethod
    def from_directory(cls, directory) -> "OltpEmulation":
        directory = Path(directory)
        tables = {}
        for name in ("patients", "diagnoses", "procedures", "treatment_events"):
            with open(directory / f"{name}.csv", newline="", encoding="utf-8") as fh:
                reader = csv.reader(fh)
                header = tuple(next(reader))
                tables[name] = Table(header, [tuple(r) for r in reader])
        ev = tables["treatment_events"]
        d, c, k = ev.col("treatmentDate"), ev.col("cost"), ev.col("deaths")
        ev.rows = [r[:d] + (date.fromisoformat(r[d]),) + r[d + 1:c] + (float(r[c]), int(r[k])) + r[k + 1:]
                   for r in ev.rows]
        return cls(tables)

    @property
    def n_events(self) -> int:
        return len(self.tables["treatment_events"].rows)

    def _accessor(self, dim: str, level: str, indexes: dict):
        """Return f(event_row) -> value for one warehouse level, joining as needed."""
        ev = self.tables["treatment_events"]
        if dim == "DimDate":
            if level not in DATE_LEVELS:
                raise KeyError(f"no operational column for {dim}.{level}")
            di = ev.col("treatmentDate")
            return lambda r: _date_level(r[di], level)
        table, column = LEVEL_COLUMNS[(dim, level)]
        t = self.tables[table]
        key = JOIN_COLUMN[table]
        if table not in indexes:
            kc = t.col(key)
            indexes[table] = {row[kc]: row for row in t.rows}  # hash-join build side
        idx = indexes[table]
        fk = ev.col(key)  # event foreign keys share the referenced column names
        vc = t.col(column)
        return lambda r: idx[r[fk]][vc]

    def query(self, q: LogicalQuery) -> dict[tuple, dict[str, float]]:
        ev = self.tables["treatment_events"]
        indexes: dict = {}
        filters = [(self._accessor(d, lv, indexes), str(m)) for d, lv, m in q.slicers]
        groups = [self._accessor(d, lv, indexes) for d, lv in q.axes]
        ci, ki = ev.col("cost"), ev.col("deaths")
        acc: dict[tuple, list] = {}
        for r in ev.rows:
            if all(str(f(r)) == m for f, m in filters):
                key = tuple(g(r) for g in groups)
                a = acc.get(key)
                if a is None:
                    a = acc[key] = [0.0, 0.0, 0]
                a[0] += r[ci]
                a[1] += r[ki]
                a[2] += 1
        out = {}
        for key, (cost, deaths, n) in acc.items():
            cell = {}
            for m in q.measures:
                if m == "cost":
                    cell[m] = cost
                elif m == "deaths":
                    cell[m] = float(deaths)
                elif m == "patients":
                    cell[m] = float(n)
                elif m == "deathRate":
                    cell[m] = deaths / n
                else:
                    raise KeyError(f"unknown measure {m!r}")
            out[key] = cell
        return out


def build_oltp_emulation(dataset_dir) -> OltpEmulation:
    """Load the operational tables written next to a generated dataset."""
    return OltpEmulation.from_directory(Path(dataset_dir) / "oltp")
