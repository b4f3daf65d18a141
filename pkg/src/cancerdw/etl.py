"""Acquisition pipeline: extract delimited exports, cleanse, transform, load.

Cleansing corrects misspelt dimension-coded values by fuzzy lookup against
the vocabulary already present in the warehouse (natural keys, cross-reference
variants and the descriptive attribute's values), then drops records that are
identical after correction.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
import time
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import _kernels
from .schema import StarSchema
from .store import StoreError, Warehouse

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.8
DATE_DIMENSION_EPOCH = date(1900, 1, 1)

CORRECTED = "corrected"
DEDUPLICATED = "deduplicated"
REJECTED = "rejected"
PASSED = "passed"


class EtlError(Exception):
    pass


class SourceError(EtlError):
    """A whole source file cannot be processed."""


class HeaderMismatch(SourceError):
    def __init__(self, path, missing: Sequence[str], extra: Sequence[str]):
        parts = []
        if missing:
            parts.append("missing columns " + ", ".join(missing))
        if extra:
            parts.append("unexpected columns " + ", ".join(extra))
        super().__init__(f"{path}: header mismatch: " + "; ".join(parts))
        self.missing = list(missing)
        self.extra = list(extra)


# ---------------------------------------------------------------------------
# records and mapping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Lineage:
    source: str
    line: int

    def __str__(self) -> str:
        return f"{self.source}:{self.line}"


@dataclass
class StagingRecord:
    source_id: str
    fields: dict[str, str]
    lineage: Lineage
    error: str | None = None


@dataclass(frozen=True)
class CleansingAction:
    lineage: Lineage
    field: str
    original: str
    corrected: str
    similarity: float
    kind: str


@dataclass
class SourceMapping:
    """How one source export maps onto the star schema.

    ``columns`` declares every header column. Values are ``None`` (carried,
    unused), an attribute name (dimension targets), or for fact targets one
    of ``"Dim"`` (natural key), ``"Dim.attr"`` (resolved through an
    attribute), ``"Dim:date"`` (a date-grain dimension keyed yyyymmdd) or a
    measure name.
    """

    file: str
    target: str
    columns: dict[str, str | None]
    id_column: str | None = None
    date_format: str = "%Y-%m-%d"
    effective: str | None = None
    effective_column: str | None = None
    as_of_column: str | None = None
    scale: dict[str, float] = field(default_factory=dict)
    exact: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> "SourceMapping":
        known = {"file", "target", "columns", "id_column", "date_format", "effective",
                 "effective_column", "as_of_column", "scale", "exact"}
        unknown = set(d) - known
        if unknown:
            raise EtlError(f"mapping for {d.get('file')!r} has unknown keys {sorted(unknown)}")
        return cls(
            file=d["file"], target=d["target"], columns=dict(d["columns"]),
            id_column=d.get("id_column"), date_format=d.get("date_format", "%Y-%m-%d"),
            effective=d.get("effective"), effective_column=d.get("effective_column"),
            as_of_column=d.get("as_of_column"), scale={k: float(v) for k, v in d.get("scale", {}).items()},
            exact=tuple(d.get("exact", ())),
        )


@dataclass
class Mapping:
    sources: dict[str, SourceMapping]

    def for_source(self, path) -> SourceMapping:
        name = Path(path).name
        try:
            return self.sources[name]
        except KeyError:
            raise SourceError(f"{name}: no mapping declared for this source") from None


def load_mapping(source: str | Path | dict | None = None) -> Mapping:
    """Read a JSON mapping file (or dict); ``None`` gives the shipped default."""
    if source is None:
        doc = json.loads(resources.files("cancerdw.data").joinpath("mapping.json").read_text("utf-8"))
    elif isinstance(source, dict):
        doc = source
    else:
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    sources = [SourceMapping.from_dict(s) for s in doc["sources"]]
    return Mapping({s.file: s for s in sources})


def validate_mapping(sm: SourceMapping, schema: StarSchema) -> None:
    fact = schema.fact
    if sm.target == fact.name:
        for col, tgt in sm.columns.items():
            if tgt is None:
                continue
            dim, _, rest = tgt.partition(":") if ":" in tgt else tgt.partition(".")
            if schema.has_dimension(dim):
                if rest and ":" not in tgt and rest not in schema.dimension(dim).attribute_names:
                    raise EtlError(f"{sm.file}: column {col} maps to unknown attribute {tgt}")
            elif tgt not in {m.name for m in fact.base_measures}:
                raise EtlError(f"{sm.file}: column {col} maps to unknown target {tgt!r}")
        if sm.as_of_column is None:
            raise EtlError(f"{sm.file}: fact sources need as_of_column")
    elif schema.has_dimension(sm.target):
        names = schema.dimension(sm.target).attribute_names
        for col, tgt in sm.columns.items():
            if tgt is not None and tgt not in names:
                raise EtlError(f"{sm.file}: column {col} maps to unknown attribute {tgt!r}")
        if sm.effective is None and sm.effective_column is None:
            raise EtlError(f"{sm.file}: dimension sources need effective or effective_column")
    else:
        raise EtlError(f"{sm.file}: unknown target {sm.target!r}")


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------


def extract(source, mapping: SourceMapping) -> list[StagingRecord]:
    """Read a UTF-8 delimited export into staging records, one per data line.

    Lines with the wrong field count come back as records with ``error`` set
    so later stages can account for them.
    """
    path = Path(source)
    if not path.is_file():
        raise SourceError(f"{path}: source file not found")
    declared = list(mapping.columns)
    records: list[StagingRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SourceError(f"{path}: empty file, header row required") from None
        missing = [c for c in declared if c not in header]
        extra = [c for c in header if c not in declared]
        if missing or extra or len(set(header)) != len(header):
            raise HeaderMismatch(path.name, missing, extra)
        while True:
            try:
                row = next(reader)
            except StopIteration:
                break
            except csv.Error as exc:
                records.append(StagingRecord("", {}, Lineage(path.name, reader.line_num), f"unreadable line: {exc}"))
                continue
            line = reader.line_num
            if not row:
                continue
            lineage = Lineage(path.name, line)
            if len(row) != len(header):
                records.append(StagingRecord("", {}, lineage,
                                             f"expected {len(header)} fields, found {len(row)}"))
                continue
            fields = dict(zip(header, row))
            sid = fields.get(mapping.id_column, "") if mapping.id_column else str(lineage)
            records.append(StagingRecord(sid, fields, lineage))
    return records


# ---------------------------------------------------------------------------
# fuzzy matching
# ---------------------------------------------------------------------------

_WS = re.compile(r"\s+")


def fold(text: str) -> str:
    """Case-fold, trim and collapse internal whitespace."""
    return _WS.sub(" ", text.casefold().strip())


def similarity(a: str, b: str) -> float:
    """1 - DamerauLevenshtein(fold(a), fold(b)) / longer folded length."""
    fa, fb = fold(a), fold(b)
    longest = max(len(fa), len(fb))
    if longest == 0:
        return 1.0
    ea, eb, size = _kernels.encode_pair(fa, fb)
    return 1.0 - _kernels.dl_distance(ea, eb, size) / longest


@dataclass(frozen=True)
class MatchResult:
    matched: bool
    value: str | None
    score: float
    index: int


class Vocabulary:
    """Reference strings pre-encoded for batched distance scoring."""

    def __init__(self, reference: Sequence[str]):
        self.reference = list(reference)
        self.folded = [fold(r) for r in self.reference]
        self._symbols: dict[str, int] = {}
        codes = []
        offsets = [0]
        for f in self.folded:
            codes.extend(self._symbols.setdefault(ch, len(self._symbols)) for ch in f)
            offsets.append(len(codes))
        self._codes = np.array(codes, dtype=np.int64)
        self._offsets = np.array(offsets, dtype=np.int64)
        self._lengths = np.diff(self._offsets)
        self._exact: dict[str, int] = {}
        for i, f in enumerate(self.folded):
            self._exact.setdefault(f, i)

    def exact(self, value: str) -> int | None:
        return self._exact.get(fold(value))

    def scores(self, value: str) -> np.ndarray:
        fv = fold(value)
        if not self.reference:
            return np.zeros(0)
        extra: dict[str, int] = {}
        base = len(self._symbols)
        q = np.array([self._symbols.get(ch) if ch in self._symbols else base + extra.setdefault(ch, len(extra))
                      for ch in fv], dtype=np.int64)
        dist = _kernels.dl_distances(q, self._codes, self._offsets, max(base + len(extra), 1))
        longest = np.maximum(self._lengths, len(fv))
        out = np.ones(len(self.reference))
        nz = longest > 0
        out[nz] = 1.0 - dist[nz] / longest[nz]
        return out

    def lookup(self, value: str, threshold: float) -> MatchResult:
        if not 0 < threshold <= 1:
            raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
        if not self.reference:
            return MatchResult(False, None, 0.0, -1)
        s = self.scores(value)
        best = int(np.argmax(s))  # first maximum = lowest index
        score = float(s[best])
        return MatchResult(score >= threshold, self.reference[best], score, best)


def fuzzy_lookup(value: str, reference: Sequence[str], threshold: float) -> MatchResult:
    """Best reference entry for ``value``; unmatched when below ``threshold``.

    Ties go to the lowest reference index.
    """
    return Vocabulary(reference).lookup(value, threshold)


# ---------------------------------------------------------------------------
# cleanse
# ---------------------------------------------------------------------------


def _coded_fields(sm: SourceMapping, schema: StarSchema) -> dict[str, tuple[str, str | None]]:
    """Columns holding dimension codes: column -> (dimension, attribute or None)."""
    out: dict[str, tuple[str, str | None]] = {}
    if sm.target != schema.fact.name:
        return out
    for col, tgt in sm.columns.items():
        if tgt is None or ":" in tgt:
            continue
        dim, _, attr = tgt.partition(".")
        if schema.has_dimension(dim):
            out[col] = (dim, attr or None)
    return out


def reference_vocabulary(wh: Warehouse, dim: str, attr: str | None) -> list[str]:
    """Natural keys, cross-reference variants and ``attr`` values, sorted."""
    vocab = set(wh.natural_keys(dim))
    vocab.update(wh.schema.crossref(dim))
    if attr is not None:
        table = wh.tables[dim]
        vocab.update(str(v) for v in table.columns[attr])
    return sorted(vocab)


def cleanse(records: Sequence[StagingRecord], schema: StarSchema, wh: Warehouse,
            threshold: float = DEFAULT_THRESHOLD, mapping: SourceMapping | None = None
            ) -> tuple[list[StagingRecord], list[CleansingAction]]:
    """Correct coded fields by fuzzy lookup, reject the unmatchable, drop duplicates.

    Every input record ends in exactly one disposition: it is returned,
    rejected or deduplicated. Only non-passing outcomes produce actions.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    coded = _coded_fields(mapping, schema) if mapping is not None else {}
    vocabs = {col: Vocabulary(reference_vocabulary(wh, dim, attr)) for col, (dim, attr) in coded.items()}
    exact_only = set(mapping.exact) if mapping is not None else set()
    memo: dict[tuple[str, str], tuple[str, str, float]] = {}

    def check(col: str, value: str) -> tuple[str, str, float]:
        key = (col, value)
        hit = memo.get(key)
        if hit is not None:
            return hit
        vocab = vocabs[col]
        idx = vocab.exact(value)
        if idx is not None:
            res = (PASSED, vocab.reference[idx], 1.0)
        elif not fold(value):
            res = (REJECTED, "", 0.0)
        elif col in exact_only:
            res = (REJECTED, "", 0.0)
        else:
            m = vocab.lookup(value, threshold)
            res = (CORRECTED, m.value, m.score) if m.matched else (REJECTED, m.value or "", m.score)
        memo[key] = res
        return res

    actions: list[CleansingAction] = []
    survivors: list[StagingRecord] = []
    for rec in records:
        if rec.error is not None:
            actions.append(CleansingAction(rec.lineage, "*", rec.error, "", 0.0, REJECTED))
            continue
        fixed = dict(rec.fields)
        pending: list[CleansingAction] = []
        rejected: CleansingAction | None = None
        for col in coded:
            value = rec.fields[col]
            kind, out, score = check(col, value)
            if kind == REJECTED:
                rejected = CleansingAction(rec.lineage, col, value, out, score, REJECTED)
                break
            if kind == CORRECTED:
                pending.append(CleansingAction(rec.lineage, col, value, out, score, CORRECTED))
            fixed[col] = out
        if rejected is not None:
            actions.append(rejected)
            continue
        actions.extend(pending)
        survivors.append(StagingRecord(fixed.get(mapping.id_column, rec.source_id) if mapping and mapping.id_column
                                       else rec.source_id, fixed, rec.lineage))

    seen: dict[tuple, Lineage] = {}
    clean: list[StagingRecord] = []
    for rec in survivors:
        key = tuple(rec.fields.items())
        first = seen.get(key)
        if first is not None:
            actions.append(CleansingAction(rec.lineage, "*", str(first), "", 1.0, DEDUPLICATED))
            continue
        seen[key] = rec.lineage
        clean.append(rec)
    return clean, actions


# ---------------------------------------------------------------------------
# transform
# ---------------------------------------------------------------------------

_DECIMAL = re.compile(r"[+-]?(\d{1,3}(,\d{3})+|\d+)(\.\d+)?\Z|[+-]?\.\d+\Z")
_INTEGER = re.compile(r"[+-]?\d+\Z")


class CoercionError(ValueError):
    pass


def parse_decimal(text: str) -> float:
    s = text.strip()
    if not _DECIMAL.match(s):
        raise CoercionError(f"invalid decimal {text!r}")
    v = float(s.replace(",", ""))
    if not math.isfinite(v):
        raise CoercionError(f"non-finite decimal {text!r}")
    return v


def parse_date(text: str, fmt: str) -> date:
    s = text.strip()
    try:
        return datetime.strptime(s, fmt).date()
    except ValueError as exc:
        msg = str(exc)
        if "out of range" in msg or "unconverted data" not in msg and _looks_like(s, fmt):
            raise CoercionError("invalid calendar date") from None
        raise CoercionError(f"date {text!r} does not match format {fmt}") from None


def _looks_like(s: str, fmt: str) -> bool:
    # shape check: digits where the format has numeric fields
    pattern = re.escape(fmt)
    for d, r in (("%d", r"\d{1,2}"), ("%m", r"\d{1,2}"), ("%Y", r"\d{4}"), ("%y", r"\d{2}")):
        pattern = pattern.replace(re.escape(d), r)
    return re.fullmatch(pattern, s) is not None


def coerce_text(kind: str, text: str, date_format: str) -> Any:
    if kind == "text":
        return text.strip()
    if kind == "integer":
        s = text.strip()
        if not _INTEGER.match(s):
            raise CoercionError(f"invalid integer {text!r}")
        return int(s)
    if kind == "decimal":
        return parse_decimal(text)
    if kind == "date":
        return parse_date(text, date_format)
    raise CoercionError(f"unknown kind {kind}")


def date_attributes(d: date, attribute_names: Iterable[str]) -> dict[str, int]:
    """Derived calendar attributes for a day-grain date dimension row."""
    derived = {
        "dateKey": d.year * 10000 + d.month * 100 + d.day,
        "day": d.day,
        "month": d.month,
        "quarter": (d.month - 1) // 3 + 1,
        "year": d.year,
    }
    out = {}
    for a in attribute_names:
        if a not in derived:
            raise EtlError(f"cannot derive date attribute {a!r}")
        out[a] = derived[a]
    return out


@dataclass
class DimensionRecord:
    lineage: Lineage
    dimension: str
    natural_key: str
    attributes: dict[str, Any]
    effective: date


@dataclass
class FactRecord:
    lineage: Lineage
    dim_naturals: dict[str, str]
    measures: dict[str, float]
    as_of: date
    date_rows: dict[str, date] = field(default_factory=dict)


def transform(records: Sequence[StagingRecord], mapping: SourceMapping, wh: Warehouse
              ) -> tuple[list[DimensionRecord | FactRecord], list[CleansingAction]]:
    """Coerce cleansed text to schema kinds; failures become rejection actions."""
    schema = wh.schema
    rows: list[DimensionRecord | FactRecord] = []
    actions: list[CleansingAction] = []
    if mapping.target == schema.fact.name:
        attr_index: dict[tuple[str, str], dict[str, str | None]] = {}
        for col, tgt in mapping.columns.items():
            if tgt and "." in tgt and ":" not in tgt:
                dim, attr = tgt.split(".", 1)
                index: dict[str, str | None] = {}
                table = wh.tables[dim]
                for nk in table.history:
                    cur = table.current_index(nk)
                    if cur is None:
                        continue
                    v = str(table.columns[attr][cur])
                    index[v] = nk if v not in index else None
                attr_index[(dim, attr)] = index
        natural_sets = {d: set(wh.natural_keys(d)) for d in schema.fact.dimension_refs}
        for rec in records:
            try:
                rows.append(_transform_fact(rec, mapping, wh, attr_index, natural_sets))
            except CoercionError as exc:
                col = exc.args[1] if len(exc.args) > 1 else "*"
                actions.append(CleansingAction(rec.lineage, col, exc.args[0], "", 0.0, REJECTED))
    else:
        dim = schema.dimension(mapping.target)
        for rec in records:
            try:
                rows.append(_transform_dimension(rec, mapping, dim))
            except CoercionError as exc:
                col = exc.args[1] if len(exc.args) > 1 else "*"
                actions.append(CleansingAction(rec.lineage, col, exc.args[0], "", 0.0, REJECTED))
    return rows, actions


def _fail(col: str, exc: Exception) -> CoercionError:
    return CoercionError(str(exc.args[0] if exc.args else exc), col)


def _transform_fact(rec, sm: SourceMapping, wh, attr_index, natural_sets) -> FactRecord:
    dims: dict[str, str] = {}
    measures: dict[str, float] = {}
    date_rows: dict[str, date] = {}
    as_of = None
    for col, tgt in sm.columns.items():
        raw = rec.fields[col]
        if col == sm.as_of_column:
            try:
                as_of = parse_date(raw, sm.date_format)
            except CoercionError as exc:
                raise _fail(col, exc)
        if tgt is None:
            continue
        if ":" in tgt:
            dim = tgt.split(":", 1)[0]
            try:
                d = parse_date(raw, sm.date_format)
            except CoercionError as exc:
                raise _fail(col, exc)
            dims[dim] = str(d.year * 10000 + d.month * 100 + d.day)
            date_rows[dim] = d
            continue
        dim, _, attr = tgt.partition(".")
        if wh.schema.has_dimension(dim):
            value = wh.resolve_crossref(dim, raw.strip())
            if value in natural_sets[dim]:
                dims[dim] = value
            elif attr:
                nk = attr_index[(dim, attr)].get(value)
                if nk is None:
                    raise CoercionError(f"{value!r} does not identify a single {dim} row", col)
                dims[dim] = nk
            else:
                raise CoercionError(f"unknown {dim} key {value!r}", col)
            continue
        try:
            measures[tgt] = parse_decimal(raw) * sm.scale.get(tgt, 1.0)
        except CoercionError as exc:
            raise _fail(col, exc)
    if as_of is None:
        raise CoercionError("no as-of date", "*")
    return FactRecord(rec.lineage, dims, measures, as_of, date_rows)


def _transform_dimension(rec, sm: SourceMapping, dim) -> DimensionRecord:
    attrs: dict[str, Any] = {}
    for col, tgt in sm.columns.items():
        if tgt is None:
            continue
        try:
            attrs[tgt] = coerce_text(dim.attribute(tgt).kind, rec.fields[col], sm.date_format)
        except CoercionError as exc:
            raise _fail(col, exc)
    missing = [a for a in dim.attribute_names if a not in attrs]
    if missing:
        raise CoercionError(f"missing attributes {missing}", "*")
    if sm.effective_column is not None:
        try:
            effective = parse_date(rec.fields[sm.effective_column], sm.date_format)
        except CoercionError as exc:
            raise _fail(sm.effective_column, exc)
    else:
        effective = date.fromisoformat(sm.effective)
    return DimensionRecord(rec.lineage, dim.name, str(attrs[dim.natural_key]), attrs, effective)


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


@dataclass
class LoadStats:
    extracted: int = 0
    cleansed: int = 0
    corrected: int = 0
    deduplicated: int = 0
    rejected: int = 0
    loaded: int = 0
    elapsed: float = 0.0
    per_source: dict[str, "LoadStats"] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    threshold: float = DEFAULT_THRESHOLD

    COUNTS = ("extracted", "cleansed", "corrected", "deduplicated", "rejected", "loaded")

    def add(self, other: "LoadStats") -> None:
        for k in self.COUNTS:
            setattr(self, k, getattr(self, k) + getattr(other, k))

    @property
    def conserved(self) -> bool:
        return self.loaded == self.extracted - self.deduplicated - self.rejected

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.COUNTS}
        d["elapsed"] = self.elapsed
        d["threshold"] = self.threshold
        d["per_source"] = {k: v.to_dict() for k, v in self.per_source.items()}
        d["errors"] = dict(self.errors)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LoadStats":
        s = cls(**{k: d[k] for k in cls.COUNTS}, elapsed=d.get("elapsed", 0.0),
                threshold=d.get("threshold", DEFAULT_THRESHOLD))
        s.per_source = {k: cls.from_dict(v) for k, v in d.get("per_source", {}).items()}
        s.errors = dict(d.get("errors", {}))
        return s


def _escape_field(v: str) -> str:
    return v.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n").replace("\r", "\\r")


def format_action(a: CleansingAction) -> str:
    return "\t".join([
        _escape_field(str(a.lineage)), _escape_field(a.field), a.kind,
        _escape_field(a.original), _escape_field(a.corrected), f"{a.similarity:.6f}",
    ])


def parse_audit_log(path) -> list[CleansingAction]:
    """Read action lines back (comment lines starting with ``#`` are skipped)."""
    out = []

    def unescape(s: str) -> str:
        return re.sub(r"\\(.)", lambda m: {"t": "\t", "n": "\n", "r": "\r"}.get(m[1], m[1]), s)

    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        lin, fld, kind, orig, corr, sim = line.split("\t")
        src, _, num = unescape(lin).rpartition(":")
        out.append(CleansingAction(Lineage(src, int(num)), unescape(fld), unescape(orig),
                                   unescape(corr), float(sim), kind))
    return out


def _load_rows(wh: Warehouse, rows, actions: list[CleansingAction]) -> int:
    loaded = 0
    date_dims: dict[str, set[str]] = {}
    dim_rows = [r for r in rows if isinstance(r, DimensionRecord)]
    # chronological so history versions apply in order; sort is stable
    dim_rows.sort(key=lambda r: r.effective)
    for r in dim_rows:
        try:
            wh.upsert_dimension_row(r.dimension, r.natural_key, r.attributes, r.effective)
            loaded += 1
        except StoreError as exc:
            actions.append(CleansingAction(r.lineage, "*", str(exc), "", 0.0, REJECTED))
    for r in rows:
        if not isinstance(r, FactRecord):
            continue
        try:
            for dim, d in r.date_rows.items():
                seen = date_dims.setdefault(dim, set())
                nk = r.dim_naturals[dim]
                if nk not in seen:
                    attrs = date_attributes(d, wh.schema.dimension(dim).attribute_names)
                    wh.upsert_dimension_row(dim, nk, attrs, DATE_DIMENSION_EPOCH)
                    seen.add(nk)
            wh.append_fact(r.dim_naturals, r.measures, r.as_of)
            loaded += 1
        except StoreError as exc:
            actions.append(CleansingAction(r.lineage, "*", str(exc), "", 0.0, REJECTED))
    return loaded


def run_source(path, wh: Warehouse, sm: SourceMapping, threshold: float
               ) -> tuple[LoadStats, list[CleansingAction]]:
    """Extract, cleanse, transform and load one file inside a single batch."""
    t0 = time.perf_counter()
    records = extract(path, sm)
    stats = LoadStats(extracted=len(records), threshold=threshold)
    with wh.batch():
        clean, actions = cleanse(records, wh.schema, wh, threshold, sm)
        stats.cleansed = len(clean)
        rows, t_actions = transform(clean, sm, wh)
        actions.extend(t_actions)
        stats.loaded = _load_rows(wh, rows, actions)
    stats.corrected = sum(a.kind == CORRECTED for a in actions)
    stats.deduplicated = sum(a.kind == DEDUPLICATED for a in actions)
    stats.rejected = sum(a.kind == REJECTED for a in actions)
    stats.elapsed = time.perf_counter() - t0
    return stats, actions


def run_pipeline(sources: Sequence, wh: Warehouse, mapping: Mapping | None = None,
                 threshold: float = DEFAULT_THRESHOLD, audit_log=None) -> LoadStats:
    """Load ``sources`` in order. A failing file is rolled back and reported.

    Returns aggregate stats with a per-source breakdown; aborted files are
    listed in ``errors`` and contribute nothing to the totals.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    mapping = mapping or load_mapping()
    t0 = time.perf_counter()
    total = LoadStats(threshold=threshold)
    log_fh = None
    if audit_log is not None:
        log_fh = open(audit_log, "a", encoding="utf-8")
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        log_fh.write(f"# cancerdw-audit run={stamp} threshold={threshold:g}\n")
    try:
        for src in sources:
            name = Path(src).name
            try:
                sm = mapping.for_source(src)
                validate_mapping(sm, wh.schema)
                stats, actions = run_source(src, wh, sm, threshold)
            except (SourceError, EtlError, OSError, UnicodeDecodeError, StoreError) as exc:
                log.warning("aborted %s: %s", name, exc)
                total.errors[name] = str(exc)
                if log_fh:
                    log_fh.write(f"# aborted {_escape_field(name)}: {_escape_field(str(exc))}\n")
                continue
            total.per_source[name] = stats
            total.add(stats)
            if log_fh:
                for a in actions:
                    log_fh.write(format_action(a) + "\n")
                log_fh.flush()
    finally:
        if log_fh:
            log_fh.close()
    total.elapsed = time.perf_counter() - t0
    return total
