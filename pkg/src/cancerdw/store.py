"""Append-only warehouse storage.

Dimension tables hold SCD2 rows with half-open validity intervals
``[start, end)``; ``end is None`` marks the current (open) row. The fact
table is a set of growable numpy columns, one per dimension key and one per
base measure. Facts are never rewritten or removed once a load is committed.

On-disk layout is described in ``docs/storage-format.md``.
"""

from __future__ import annotations

import bisect
import contextlib
import hashlib
import json
import math
import os
import struct
import threading
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Any, Iterator, Mapping

import numpy as np

from .schema import DimensionDef, StarSchema, parse_schema, print_schema

FORMAT_VERSION = 1
MANIFEST = "MANIFEST"
OPEN = "OPEN"
BLOCK_MAGIC = b"CDWB"


class StoreError(Exception):
    """Rejected warehouse operation."""


class UnknownDimensionError(StoreError, KeyError):
    def __str__(self):  # KeyError quotes its message otherwise
        return self.args[0]


class NotFound(StoreError):
    pass


class CorruptWarehouseError(StoreError):
    pass


@dataclass(frozen=True)
class DimensionRow:
    key: int
    natural_key: str
    attributes: Mapping[str, Any]
    start: date
    end: date | None

    def covers(self, at: date) -> bool:
        return self.start <= at and (self.end is None or at < self.end)


@dataclass(frozen=True)
class FactRow:
    fact_id: int
    dim_keys: Mapping[str, int]
    measures: Mapping[str, float]


def coerce_value(kind: str, value: Any) -> Any:
    """Return ``value`` as the Python type for attribute ``kind`` or raise."""
    if kind == "text":
        if isinstance(value, str):
            return value
    elif kind == "integer":
        if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
            return int(value)
    elif kind == "decimal":
        if isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, bool):
            v = float(value)
            if math.isfinite(v):
                return v
    elif kind == "date":
        if isinstance(value, date):
            return value
    raise StoreError(f"value {value!r} does not conform to kind {kind}")


def conforms(kind: str, value: Any) -> bool:
    try:
        return coerce_value(kind, value) == value
    except StoreError:
        return False


class DimensionTable:
    """Rows of one dimension, stored column-wise."""

    def __init__(self, defn: DimensionDef):
        self.defn = defn
        self.natural: list[str] = []
        self.columns: dict[str, list] = {a.name: [] for a in defn.attributes}
        self.start: list[date] = []
        self.end: list[date | None] = []
        self.history: dict[str, list[int]] = {}
        # (row index, end date) in the order closures happened
        self.closures: list[tuple[int, date]] = []

    def __len__(self) -> int:
        return len(self.natural)

    def row(self, idx: int) -> DimensionRow:
        attrs = {name: col[idx] for name, col in self.columns.items()}
        return DimensionRow(idx + 1, self.natural[idx], attrs, self.start[idx], self.end[idx])

    def current_index(self, natural_key: str) -> int | None:
        rows = self.history.get(natural_key)
        if rows and self.end[rows[-1]] is None:
            return rows[-1]
        return None

    def index_at(self, natural_key: str, at: date) -> int | None:
        rows = self.history.get(natural_key)
        if not rows:
            return None
        starts = [self.start[r] for r in rows]
        pos = bisect.bisect_right(starts, at) - 1
        if pos < 0:
            return None
        r = rows[pos]
        end = self.end[r]
        if end is not None and at >= end:
            return None
        return r

    def _append(self, natural_key: str, attrs: dict, start: date, end: date | None) -> int:
        idx = len(self.natural)
        self.natural.append(natural_key)
        for name, col in self.columns.items():
            col.append(attrs[name])
        self.start.append(start)
        self.end.append(end)
        self.history.setdefault(natural_key, []).append(idx)
        return idx

    def _truncate(self, n_rows: int, n_closures: int) -> None:
        for idx, _end in self.closures[n_closures:]:
            if idx < n_rows:
                self.end[idx] = None
        del self.closures[n_closures:]
        for idx in range(len(self.natural) - 1, n_rows - 1, -1):
            nk = self.natural[idx]
            self.history[nk].pop()
            if not self.history[nk]:
                del self.history[nk]
        del self.natural[n_rows:]
        for col in self.columns.values():
            del col[n_rows:]
        del self.start[n_rows:]
        del self.end[n_rows:]


class _Column:
    """Growable 1-d numpy column."""

    def __init__(self, dtype, capacity: int = 1024):
        self.data = np.empty(capacity, dtype=dtype)
        self.n = 0

    def append(self, value) -> None:
        if self.n == len(self.data):
            grown = np.empty(len(self.data) * 2, dtype=self.data.dtype)
            grown[: self.n] = self.data[: self.n]
            self.data = grown
        self.data[self.n] = value
        self.n += 1

    def extend(self, values: np.ndarray) -> None:
        need = self.n + len(values)
        if need > len(self.data):
            grown = np.empty(max(need, len(self.data) * 2), dtype=self.data.dtype)
            grown[: self.n] = self.data[: self.n]
            self.data = grown
        self.data[self.n:need] = values
        self.n = need

    def view(self, n: int | None = None) -> np.ndarray:
        v = self.data[: self.n if n is None else n]
        v.flags.writeable = False
        return v


class FactTable:
    def __init__(self, schema: StarSchema):
        self.defn = schema.fact
        self.keys = {d: _Column(np.int64) for d in self.defn.dimension_refs}
        self.measures = {m.name: _Column(np.float64) for m in self.defn.base_measures}
        self.n = 0

    def __len__(self) -> int:
        return self.n

    def _truncate(self, n: int) -> None:
        for c in (*self.keys.values(), *self.measures.values()):
            c.n = n
        self.n = n


@dataclass(frozen=True)
class Snapshot:
    """Consistent read view: fact columns and dimension validity at one instant."""

    schema: StarSchema
    version: int
    n_facts: int
    fact_keys: Mapping[str, np.ndarray]
    fact_measures: Mapping[str, np.ndarray]
    dim_rows: Mapping[str, int]
    dim_ends: Mapping[str, tuple]
    warehouse: "Warehouse"

    def resolve_index(self, dim: str, row_idx: int, at: date | None) -> int | None:
        """Map a stored row index to the row valid at ``at`` (current row when None)."""
        table = self.warehouse.tables[dim]
        nk = table.natural[row_idx]
        rows = [r for r in table.history[nk] if r < self.dim_rows[dim]]
        ends = self.dim_ends[dim]
        if at is None:
            last = rows[-1]
            return last if ends[last] is None else None
        for r in reversed(rows):
            if table.start[r] <= at:
                return r if ends[r] is None or at < ends[r] else None
        return None


class Warehouse:
    """Star-schema warehouse with append-only facts and SCD2 dimensions.

    There is deliberately no API that updates or deletes a stored fact.
    """

    def __init__(self, schema: StarSchema):
        self.schema = schema
        self.tables: dict[str, DimensionTable] = {d.name: DimensionTable(d) for d in schema.dimensions}
        self.facts = FactTable(schema)
        self.version = 0
        self.directory: Path | None = None
        self._lock = threading.RLock()
        self._crossref = {d.name: schema.crossref(d.name) for d in schema.dimensions}
        self._persisted: dict | None = None

    # -- dimensions ---------------------------------------------------------

    def _table(self, dim: str) -> DimensionTable:
        try:
            return self.tables[dim]
        except KeyError:
            raise UnknownDimensionError(f"unknown dimension {dim!r}") from None

    def upsert_dimension_row(self, dim: str, natural_key: str, attributes: Mapping[str, Any],
                             effective: date) -> int:
        """Insert or version a dimension row and return its surrogate key."""
        table = self._table(dim)
        defn = table.defn
        natural_key = str(natural_key)
        attrs: dict[str, Any] = {}
        extra = set(attributes) - set(defn.attribute_names)
        if extra:
            raise StoreError(f"{dim}: unknown attributes {sorted(extra)}")
        for a in defn.attributes:
            if a.name in attributes:
                attrs[a.name] = coerce_value(a.kind, attributes[a.name])
            elif a.name == defn.natural_key and a.kind == "text":
                attrs[a.name] = natural_key
            else:
                raise StoreError(f"{dim}: missing attribute {a.name!r}")
        if str(attrs[defn.natural_key]) != natural_key:
            raise StoreError(f"{dim}: natural key {natural_key!r} disagrees with attribute "
                             f"{defn.natural_key}={attrs[defn.natural_key]!r}")
        if not isinstance(effective, date):
            raise StoreError(f"effective date must be a date, got {effective!r}")
        with self._lock:
            cur = table.current_index(natural_key)
            if cur is None:
                if natural_key in table.history:
                    # every history ends with an open row; a closed tail means corruption
                    raise StoreError(f"{dim}: {natural_key!r} has no open row")
                idx = table._append(natural_key, attrs, effective, None)
                self.version += 1
                return idx + 1
            if all(table.columns[k][cur] == v for k, v in attrs.items()):
                return cur + 1
            if not defn.scd2:
                raise StoreError(f"{dim} is not history-tracked; attribute change for {natural_key!r} refused")
            if effective <= table.start[cur]:
                raise StoreError(
                    f"{dim}: effective date {effective.isoformat()} for {natural_key!r} must follow "
                    f"current row start {table.start[cur].isoformat()}")
            table.end[cur] = effective
            table.closures.append((cur, effective))
            idx = table._append(natural_key, attrs, effective, None)
            self.version += 1
            return idx + 1

    def resolve_crossref(self, dim: str, source_text: str) -> str:
        try:
            mapping = self._crossref[dim]
        except KeyError:
            raise UnknownDimensionError(f"unknown dimension {dim!r}") from None
        return mapping.get(source_text, source_text)

    def point_in_time(self, dim: str, natural_key: str, at: date) -> DimensionRow:
        table = self._table(dim)
        with self._lock:
            idx = table.index_at(str(natural_key), at)
            if idx is None:
                raise NotFound(f"{dim}: no row for {natural_key!r} at {at.isoformat()}")
            return table.row(idx)

    def current_row(self, dim: str, natural_key: str) -> DimensionRow:
        table = self._table(dim)
        with self._lock:
            idx = table.current_index(str(natural_key))
            if idx is None:
                raise NotFound(f"{dim}: no current row for {natural_key!r}")
            return table.row(idx)

    def dimension_rows(self, dim: str) -> list[DimensionRow]:
        table = self._table(dim)
        with self._lock:
            return [table.row(i) for i in range(len(table))]

    def natural_keys(self, dim: str) -> list[str]:
        return list(self._table(dim).history)

    # -- facts --------------------------------------------------------------

    def append_fact(self, dim_naturals: Mapping[str, str], measures: Mapping[str, Any], as_of: date) -> FactRow:
        """Append one fact, binding each natural key to the row valid at ``as_of``."""
        fact = self.schema.fact
        missing = [d for d in fact.dimension_refs if d not in dim_naturals]
        if missing:
            raise StoreError(f"fact is missing dimension references {missing}")
        values: dict[str, float] = {}
        for m in fact.base_measures:
            if m.name not in measures:
                if m.kind == "count":
                    values[m.name] = 1.0
                    continue
                raise StoreError(f"fact is missing measure {m.name!r}")
            v = measures[m.name]
            if isinstance(v, bool) or not isinstance(v, (int, float, np.integer, np.floating)):
                raise StoreError(f"measure {m.name!r} must be numeric, got {v!r}")
            v = float(v)
            if not math.isfinite(v):
                raise StoreError(f"measure {m.name!r} is not finite: {v!r}")
            values[m.name] = v
        unknown = set(measures) - {m.name for m in fact.base_measures}
        if unknown:
            raise StoreError(f"unknown or derived measures supplied: {sorted(unknown)}")
        with self._lock:
            keys: dict[str, int] = {}
            for d in fact.dimension_refs:
                nk = str(dim_naturals[d])
                idx = self.tables[d].index_at(nk, as_of)
                if idx is None:
                    raise StoreError(f"{d}: natural key {nk!r} has no row valid at {as_of.isoformat()}")
                keys[d] = idx + 1
            for d, k in keys.items():
                self.facts.keys[d].append(k)
            for name, v in values.items():
                self.facts.measures[name].append(v)
            self.facts.n += 1
            self.version += 1
            return FactRow(self.facts.n, keys, values)

    @property
    def fact_count(self) -> int:
        return self.facts.n

    def fact_column(self, name: str) -> np.ndarray:
        """Read-only view of a fact key column (by dimension) or measure column."""
        with self._lock:
            if name in self.facts.keys:
                return self.facts.keys[name].view()
            if name in self.facts.measures:
                return self.facts.measures[name].view()
        raise KeyError(name)

    def fact_rows(self) -> Iterator[FactRow]:
        snap = self.snapshot()
        for i in range(snap.n_facts):
            yield FactRow(
                i + 1,
                {d: int(c[i]) for d, c in snap.fact_keys.items()},
                {m: float(c[i]) for m, c in snap.fact_measures.items()},
            )

    def snapshot(self) -> Snapshot:
        with self._lock:
            n = self.facts.n
            return Snapshot(
                schema=self.schema,
                version=self.version,
                n_facts=n,
                fact_keys={d: c.view(n) for d, c in self.facts.keys.items()},
                fact_measures={m: c.view(n) for m, c in self.facts.measures.items()},
                dim_rows={d: len(t) for d, t in self.tables.items()},
                dim_ends={d: tuple(t.end) for d, t in self.tables.items()},
                warehouse=self,
            )

    # -- load batches -------------------------------------------------------

    @contextlib.contextmanager
    def batch(self):
        """Group writes into one load.

        On exception every row written inside the block is discarded and the
        warehouse returns to its state at entry. On success, a warehouse bound
        to a directory is persisted before the block exits.
        """
        with self._lock:
            mark = (
                {d: (len(t), len(t.closures)) for d, t in self.tables.items()},
                self.facts.n,
                self.version,
            )
            try:
                yield self
                if self.directory is not None:
                    persist(self, self.directory)
            except BaseException:
                dims, n_facts, version = mark
                for d, (rows, closures) in dims.items():
                    self.tables[d]._truncate(rows, closures)
                self.facts._truncate(n_facts)
                self.version = version + 1
                raise

    def counters(self) -> dict[str, int]:
        """Next surrogate key per table."""
        out = {d: len(t) + 1 for d, t in self.tables.items()}
        out[self.schema.fact.name] = self.facts.n + 1
        return out


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def _encode_block(kind: str, first_key: int, columns: list[tuple[str, str, Any]]) -> bytes:
    meta = []
    payload = []
    count = None
    for name, ctype, values in columns:
        if ctype == "i8":
            raw = np.asarray(values, dtype="<i8").tobytes()
            n = len(values)
        elif ctype == "f8":
            raw = np.asarray(values, dtype="<f8").tobytes()
            n = len(values)
        else:
            raw = json.dumps(list(values), ensure_ascii=False, separators=(",", ":")).encode("utf-8")
            n = len(values)
        if count is None:
            count = n
        meta.append({"name": name, "type": ctype, "nbytes": len(raw)})
        payload.append(raw)
    header = json.dumps({"kind": kind, "count": count or 0, "first_key": first_key, "columns": meta},
                        separators=(",", ":"), sort_keys=True).encode("utf-8")
    return BLOCK_MAGIC + struct.pack("<I", len(header)) + header + b"".join(payload)


def _decode_blocks(buf: bytes, path: Path) -> Iterator[tuple[dict, dict]]:
    pos = 0
    while pos < len(buf):
        if buf[pos:pos + 4] != BLOCK_MAGIC or pos + 8 > len(buf):
            raise CorruptWarehouseError(f"{path.name}: bad block header at byte {pos}")
        (hlen,) = struct.unpack("<I", buf[pos + 4:pos + 8])
        pos += 8
        try:
            header = json.loads(buf[pos:pos + hlen].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorruptWarehouseError(f"{path.name}: unreadable block header") from exc
        pos += hlen
        cols: dict[str, Any] = {}
        for c in header["columns"]:
            raw = buf[pos:pos + c["nbytes"]]
            if len(raw) != c["nbytes"]:
                raise CorruptWarehouseError(f"{path.name}: truncated column {c['name']}")
            pos += c["nbytes"]
            if c["type"] == "i8":
                cols[c["name"]] = np.frombuffer(raw, dtype="<i8")
            elif c["type"] == "f8":
                cols[c["name"]] = np.frombuffer(raw, dtype="<f8")
            else:
                cols[c["name"]] = json.loads(raw.decode("utf-8"))
            if len(cols[c["name"]]) != header["count"]:
                raise CorruptWarehouseError(f"{path.name}: column {c['name']} length mismatch")
        yield header, cols


def _to_text(kind: str, v: Any):
    return v.isoformat() if kind == "date" else v


def _from_text(kind: str, v: Any):
    return date.fromisoformat(v) if kind == "date" else v


def _dim_blocks(table: DimensionTable, from_row: int, from_closure: int) -> bytes:
    out = b""
    if len(table) > from_row:
        cols: list[tuple[str, str, Any]] = [("__natural", "text", table.natural[from_row:])]
        for a in table.defn.attributes:
            vals = table.columns[a.name][from_row:]
            if a.kind == "integer":
                cols.append((a.name, "i8", vals))
            elif a.kind == "decimal":
                cols.append((a.name, "f8", vals))
            else:
                cols.append((a.name, "text", [_to_text(a.kind, v) for v in vals]))
        cols.append(("__start", "text", [d.isoformat() for d in table.start[from_row:]]))
        # rows are written with the end they had when first persisted; later
        # closures travel in separate closure blocks
        cols.append(("__end", "text", [OPEN] * (len(table) - from_row)))
        out += _encode_block("rows", from_row + 1, cols)
    pending = table.closures[from_closure:]
    if pending:
        out += _encode_block("closures", 0, [
            ("row_key", "i8", [i + 1 for i, _ in pending]),
            ("end", "text", [e.isoformat() for _, e in pending]),
        ])
    return out


def _fact_block(facts: FactTable, from_row: int) -> bytes:
    if facts.n <= from_row:
        return b""
    cols: list[tuple[str, str, Any]] = []
    for d, c in facts.keys.items():
        cols.append((d, "i8", c.data[from_row:facts.n]))
    for m, c in facts.measures.items():
        cols.append((m, "f8", c.data[from_row:facts.n]))
    return _encode_block("rows", from_row + 1, cols)


def _manifest_digest(body: dict) -> str:
    return hashlib.sha256(json.dumps(body, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def read_manifest(directory: Path) -> dict:
    path = Path(directory) / MANIFEST
    if not path.exists():
        raise CorruptWarehouseError(f"{directory}: no warehouse manifest")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        body = doc["body"]
        digest = doc["sha256"]
    except (json.JSONDecodeError, UnicodeDecodeError, KeyError, TypeError) as exc:
        raise CorruptWarehouseError(f"{path}: corrupt manifest") from exc
    if _manifest_digest(body) != digest:
        raise CorruptWarehouseError(f"{path}: manifest checksum mismatch")
    if body.get("format_version") != FORMAT_VERSION:
        raise CorruptWarehouseError(f"{path}: unsupported format version {body.get('format_version')!r}")
    return body


def _fsync_dir(directory: Path) -> None:
    try:
        fd = os.open(directory, os.O_RDONLY)
    except OSError:
        return
    try:
        os.fsync(fd)
    except OSError:
        pass
    finally:
        os.close(fd)


def persist(wh: Warehouse, directory) -> None:
    """Append unsaved rows to the table files, then publish a new manifest.

    Bytes already acknowledged by the previous manifest are never rewritten.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    schema_text = print_schema(wh.schema)
    with wh._lock:
        prev = read_manifest(directory) if (directory / MANIFEST).exists() else None
        if prev is not None and prev["schema"] != schema_text:
            raise StoreError(f"{directory}: holds a warehouse with a different schema")
        tables: dict[str, dict] = {}
        names = [(d, f"{d}.tbl") for d in wh.tables] + [(wh.schema.fact.name, f"{wh.schema.fact.name}.tbl")]
        for name, fname in names:
            old = prev["tables"][name] if prev else {"file": fname, "records": 0, "closures": 0, "bytes": 0}
            if name in wh.tables:
                table = wh.tables[name]
                n_rows, n_closures = len(table), len(table.closures)
                if old["records"] > n_rows or old["closures"] > n_closures:
                    raise StoreError(f"{directory}: on-disk {name} is ahead of this warehouse")
                blob = _dim_blocks(table, old["records"], old["closures"])
            else:
                n_rows, n_closures = wh.facts.n, 0
                if old["records"] > n_rows:
                    raise StoreError(f"{directory}: on-disk {name} is ahead of this warehouse")
                blob = _fact_block(wh.facts, old["records"])
            path = directory / fname
            with open(path, "ab") as fh:
                # drop any unacknowledged tail left by an interrupted write
                fh.truncate(old["bytes"])
                fh.seek(old["bytes"])
                fh.write(blob)
                fh.flush()
                os.fsync(fh.fileno())
            tables[name] = {"file": fname, "records": n_rows, "closures": n_closures,
                            "bytes": old["bytes"] + len(blob), "next_key": n_rows + 1}
        body = {"format_version": FORMAT_VERSION, "schema": schema_text, "tables": tables}
        doc = {"body": body, "sha256": _manifest_digest(body)}
        tmp = directory / (MANIFEST + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, directory / MANIFEST)
        _fsync_dir(directory)
        wh._persisted = body


def open_warehouse(directory) -> Warehouse:
    """Load a persisted warehouse; raises :class:`CorruptWarehouseError` on any inconsistency."""
    directory = Path(directory)
    body = read_manifest(directory)
    try:
        schema = parse_schema(body["schema"])
    except Exception as exc:
        raise CorruptWarehouseError(f"{directory}: manifest schema does not parse: {exc}") from exc
    wh = Warehouse(schema)
    expected = set(wh.tables) | {schema.fact.name}
    if set(body["tables"]) != expected:
        raise CorruptWarehouseError(f"{directory}: manifest tables do not match schema")
    for name, info in body["tables"].items():
        path = directory / info["file"]
        try:
            with open(path, "rb") as fh:
                buf = fh.read(info["bytes"])
        except OSError as exc:
            raise CorruptWarehouseError(f"{path}: unreadable table file") from exc
        if len(buf) != info["bytes"]:
            raise CorruptWarehouseError(f"{path}: shorter than manifest records")
        if name in wh.tables:
            _load_dimension(wh.tables[name], buf, path)
            table = wh.tables[name]
            if len(table) != info["records"] or len(table.closures) != info["closures"]:
                raise CorruptWarehouseError(f"{path}: record count disagrees with manifest")
        else:
            _load_facts(wh.facts, buf, path)
            if wh.facts.n != info["records"]:
                raise CorruptWarehouseError(f"{path}: record count disagrees with manifest")
        if info["next_key"] != info["records"] + 1:
            raise CorruptWarehouseError(f"{directory}: key counter for {name} is inconsistent")
    wh._persisted = body
    wh.directory = directory
    return wh


def _load_dimension(table: DimensionTable, buf: bytes, path: Path) -> None:
    for header, cols in _decode_blocks(buf, path):
        if header["kind"] == "rows":
            if header["first_key"] != len(table) + 1:
                raise CorruptWarehouseError(f"{path.name}: non-contiguous keys")
            for i in range(header["count"]):
                attrs = {}
                for a in table.defn.attributes:
                    v = cols[a.name][i]
                    if a.kind == "integer":
                        v = int(v)
                    elif a.kind == "decimal":
                        v = float(v)
                    attrs[a.name] = _from_text(a.kind, v)
                end = cols["__end"][i]
                table._append(cols["__natural"][i], attrs, date.fromisoformat(cols["__start"][i]),
                              None if end == OPEN else date.fromisoformat(end))
        elif header["kind"] == "closures":
            for k, e in zip(cols["row_key"], cols["end"]):
                idx = int(k) - 1
                if not 0 <= idx < len(table) or table.end[idx] is not None:
                    raise CorruptWarehouseError(f"{path.name}: closure of invalid row {k}")
                table.end[idx] = date.fromisoformat(e)
                table.closures.append((idx, table.end[idx]))
        else:
            raise CorruptWarehouseError(f"{path.name}: unknown block kind {header['kind']!r}")


def _load_facts(facts: FactTable, buf: bytes, path: Path) -> None:
    for header, cols in _decode_blocks(buf, path):
        if header["kind"] != "rows" or header["first_key"] != facts.n + 1:
            raise CorruptWarehouseError(f"{path.name}: unexpected fact block")
        for d, c in facts.keys.items():
            c.extend(cols[d])
        for m, c in facts.measures.items():
            c.extend(cols[m])
        facts.n += header["count"]


def init_warehouse(schema: StarSchema, directory) -> Warehouse:
    """Create and persist an empty warehouse bound to ``directory``."""
    directory = Path(directory)
    if (directory / MANIFEST).exists():
        raise StoreError(f"{directory}: already holds a warehouse")
    wh = Warehouse(schema)
    persist(wh, directory)
    wh.directory = directory
    return wh
