"""The eight warehouse quality checks: four data characteristics, four operations.

Each check turns its inputs into a few named metrics and passes only when
those metrics meet the thresholds listed in ``THRESHOLDS``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from ..cube import Cube
from ..etl import CORRECTED, DEDUPLICATED, LoadStats, Mapping, load_mapping, parse_audit_log
from ..mdx import execute_mdx, parse_mdx
from ..schema import validate_subject_orientation
from ..store import FactRow, NotFound, Warehouse, conforms
from .bench import BenchmarkInvalid, bench_figure3
from .generate import load_dataset, read_truth
from .golden import GOLDEN_QUERIES
from .oltp import build_oltp_emulation
from .oracle import oracle_mdx

CRITERIA = {
    "A1": "subject-oriented",
    "A2": "integrated",
    "A3": "time-variant",
    "A4": "non-volatile",
    "B1": "extraction",
    "B2": "cleansing",
    "B3": "loading",
    "B4": "querying",
}

THRESHOLDS = {"recall": 0.95, "precision": 0.95, "golden_rel_tol": 1e-9}

# public attribute names that would let callers rewrite or drop stored facts
_MUTATOR = re.compile(r"(delete|remove|update|truncate|drop|erase|purge|pop|overwrite|replace)", re.I)


@dataclass
class CriterionResult:
    criterion: str
    passed: bool
    metrics: dict[str, float] = field(default_factory=dict)
    narrative: str = ""

    @property
    def name(self) -> str:
        return CRITERIA[self.criterion]


def _a1(wh: Warehouse) -> CriterionResult:
    rep = validate_subject_orientation(wh.schema)
    return CriterionResult("A1", rep.passed, {"orphans": float(len(rep.orphans))},
                           "; ".join(rep.messages) or "every dimension is referenced by the fact")


def _a2(wh: Warehouse) -> CriterionResult:
    schema = wh.schema
    mismatches = 0
    bad_keys = 0
    for d in schema.dimensions:
        rows = wh.dimension_rows(d.name)
        if [r.key for r in rows] != list(range(1, len(rows) + 1)):
            bad_keys += 1
        for r in rows:
            for a in d.attributes:
                if not conforms(a.kind, r.attributes[a.name]):
                    mismatches += 1
    for m in schema.fact.base_measures:
        col = wh.fact_column(m.name)
        mismatches += int((~np.isfinite(col)).sum())
    fact_ids = [r.fact_id for r in wh.fact_rows()]
    if fact_ids != list(range(1, len(fact_ids) + 1)):
        bad_keys += 1
    unresolved = 0
    variants = 0
    for cr in schema.crossrefs:
        known = set(wh.natural_keys(cr.dimension))
        for variant, canonical in cr.entries:
            variants += 1
            if wh.resolve_crossref(cr.dimension, variant) != canonical or canonical not in known:
                unresolved += 1
    ok = mismatches == 0 and bad_keys == 0 and unresolved == 0
    return CriterionResult("A2", ok, {"kind_mismatches": float(mismatches), "tables_with_bad_keys": float(bad_keys),
                                      "crossref_variants": float(variants), "unresolved_variants": float(unresolved)},
                           "stored values conform to declared kinds; keys are 1..n; variants resolve")


def _a3(wh: Warehouse) -> CriterionResult:
    probes = failures = rows_checked = 0
    for d in wh.schema.dimensions:
        if not d.scd2:
            continue
        by_key: dict[str, list] = {}
        for r in wh.dimension_rows(d.name):
            rows_checked += 1
            if r.start is None or (r.end is not None and r.end <= r.start):
                failures += 1
            by_key.setdefault(r.natural_key, []).append(r)
        for nk, rows in by_key.items():
            rows.sort(key=lambda r: r.start)
            if sum(r.end is None for r in rows) != 1 or rows[-1].end is not None:
                failures += 1
            for a, b in zip(rows, rows[1:]):
                if a.end != b.start:
                    failures += 1
            for r in rows:
                probe_dates = [r.start]
                if r.end is not None:
                    probe_dates.append(r.end - timedelta(days=1))
                for at in probe_dates:
                    probes += 1
                    try:
                        if wh.point_in_time(d.name, nk, at).key != r.key:
                            failures += 1
                    except NotFound:
                        failures += 1
            probes += 1
            try:
                wh.point_in_time(d.name, nk, rows[0].start - timedelta(days=1))
                failures += 1
            except NotFound:
                pass
    ok = failures == 0 and probes > 0
    return CriterionResult("A3", ok, {"history_rows": float(rows_checked), "probes": float(probes),
                                      "failures": float(failures)},
                           "validity intervals are disjoint and contiguous; point-in-time probes resolve")


def _a4(wh: Warehouse, history: Sequence[int] | None) -> CriterionResult:
    failures: list[str] = []
    before = wh.fact_count
    snapshot = {m.name: wh.fact_column(m.name).copy() for m in wh.schema.fact.base_measures}
    if before:
        name = next(iter(snapshot))
        col = wh.fact_column(name)
        try:
            col[0] = col[0] + 1.0
            failures.append("fact column view accepted a write")
        except (ValueError, TypeError):
            pass
    mutators = [n for n in dir(type(wh)) if not n.startswith("_") and _MUTATOR.search(n)]
    if mutators:
        failures.append(f"public mutators exposed: {', '.join(sorted(mutators))}")
    rows = list(wh.fact_rows())
    if rows:
        try:
            rows[0].measures = {}
            failures.append("fact rows are mutable")
        except AttributeError:
            pass
    if not getattr(FactRow, "__dataclass_params__", None) or not FactRow.__dataclass_params__.frozen:
        failures.append("fact rows are not frozen")
    if wh.fact_count < before:
        failures.append("fact count decreased during probe")
    for name, col in snapshot.items():
        if not np.array_equal(wh.fact_column(name)[: len(col)], col):
            failures.append(f"stored values of {name} changed")
    counts = list(history or []) + [wh.fact_count]
    if any(b < a for a, b in zip(counts, counts[1:])):
        failures.append("fact count decreased across runs")
    return CriterionResult("A4", not failures, {"probe_failures": float(len(failures)),
                                                "fact_count": float(wh.fact_count)},
                           "; ".join(failures) or "no operation rewrites or removes a stored fact")


def _data_lines(path: Path) -> int:
    with open(path, encoding="utf-8") as fh:
        return max(sum(1 for line in fh if line.strip()) - 1, 0)


def _b1(stats: LoadStats, sources: Sequence[Path]) -> CriterionResult:
    metrics = {}
    ok = not stats.errors
    for p in sources:
        lines = _data_lines(p)
        got = stats.per_source.get(p.name)
        extracted = got.extracted if got else -1
        metrics[f"{p.name}:lines"] = float(lines)
        metrics[f"{p.name}:extracted"] = float(extracted)
        ok &= extracted == lines
    return CriterionResult("B1", ok, metrics,
                           "; ".join(f"{k}: {v}" for k, v in stats.errors.items()) or "every data line was extracted")


def _canonical(wh: Warehouse, dim: str, attr: str, value: str) -> str | None:
    value = wh.resolve_crossref(dim, value.strip())
    if value in set(wh.natural_keys(dim)):
        return value
    for nk in wh.natural_keys(dim):
        try:
            if str(wh.current_row(dim, nk).attributes[attr]) == value:
                return nk
        except NotFound:
            continue
    return None


def _b2(wh: Warehouse, audit_log, truth_file, mapping: Mapping) -> CriterionResult:
    truth = read_truth(truth_file)
    actions = parse_audit_log(audit_log)
    typos = [t for t in truth if not t.is_duplicate]
    dups = [t for t in truth if t.is_duplicate]
    corrected = {(str(a.lineage), a.field): a for a in actions if a.kind == CORRECTED}
    deduped = {str(a.lineage) for a in actions if a.kind == DEDUPLICATED}
    truth_by_key = {(t.lineage, t.field): t for t in typos}

    def target(lineage: str, fld: str) -> tuple[str, str] | None:
        src = lineage.rpartition(":")[0]
        try:
            tgt = mapping.for_source(src).columns.get(fld)
        except Exception:
            return None
        if not tgt or "." not in tgt:
            return None
        dim, attr = tgt.split(".", 1)
        return dim, attr

    cache: dict = {}

    def canon(lineage, fld, v):
        t = target(lineage, fld)
        if t is None:
            return v
        k = (t, v)
        if k not in cache:
            cache[k] = _canonical(wh, t[0], t[1], v)
        return cache[k]

    def right(a, t) -> bool:
        c = canon(t.lineage, t.field, a.corrected)
        return c is not None and c == canon(t.lineage, t.field, t.original)

    hits = sum(1 for t in typos if (t.lineage, t.field) in corrected
               and right(corrected[(t.lineage, t.field)], t))
    true_pos = sum(1 for key, a in corrected.items() if key in truth_by_key and right(a, truth_by_key[key]))
    recall = hits / len(typos) if typos else 1.0
    precision = true_pos / len(corrected) if corrected else 1.0
    dup_found = sum(t.lineage in deduped for t in dups)
    ok = recall >= THRESHOLDS["recall"] and precision >= THRESHOLDS["precision"] and dup_found == len(dups)
    return CriterionResult("B2", ok, {
        "seeded_typos": float(len(typos)), "corrected_actions": float(len(corrected)),
        "recall": recall, "precision": precision,
        "seeded_duplicates": float(len(dups)), "duplicates_removed": float(dup_found),
    }, f"recall {recall:.4f}, precision {precision:.4f}, duplicates {dup_found}/{len(dups)}")


def _b3(wh: Warehouse, stats: LoadStats, mapping: Mapping) -> CriterionResult:
    ok = stats.conserved and all(s.conserved for s in stats.per_source.values()) and not stats.errors
    fact_loaded = 0
    for name, s in stats.per_source.items():
        try:
            if mapping.for_source(name).target == wh.schema.fact.name:
                fact_loaded += s.loaded
        except Exception:
            ok = False
    ok &= fact_loaded == wh.fact_count
    return CriterionResult("B3", ok, {
        "extracted": float(stats.extracted), "deduplicated": float(stats.deduplicated),
        "rejected": float(stats.rejected), "loaded": float(stats.loaded),
        "facts_loaded": float(fact_loaded), "fact_count": float(wh.fact_count),
    }, "loaded = extracted - deduplicated - rejected")


def _grids_match(a, b, rel: float) -> bool:
    if len(a) != len(b):
        return False
    for ra, rb in zip(a, b):
        if len(ra) != len(rb):
            return False
        for x, y in zip(ra, rb):
            if (x is None) != (y is None):
                return False
            if x is not None and not math.isclose(x, y, rel_tol=rel, abs_tol=1e-12):
                return False
    return True


def _b4(wh: Warehouse, dataset_dir: Path | None, bench_reps: int) -> CriterionResult:
    cube = Cube(wh)
    matched = 0
    failed: list[str] = []
    for name, text in GOLDEN_QUERIES.items():
        q = parse_mdx(text)
        try:
            grid = execute_mdx(q, wh, cube)
            ok = _grids_match([list(r) for r in grid.cells], oracle_mdx(q, wh), THRESHOLDS["golden_rel_tol"])
        except Exception as exc:  # any failure counts against the suite
            ok = False
            name = f"{name} ({exc})"
        if ok:
            matched += 1
        else:
            failed.append(name)
    bench_ok = 0.0
    note = ""
    if dataset_dir is not None:
        from .warehouse import warehouse_from_oltp
        oltp = build_oltp_emulation(dataset_dir)
        try:
            report = bench_figure3(warehouse_from_oltp(oltp, wh.schema), oltp, "Q1", bench_reps)
            bench_ok = 1.0
            note = f"bench Q1 {report.warehouse_median * 1e3:.3f} ms vs {report.oltp_median * 1e3:.3f} ms"
        except BenchmarkInvalid as exc:
            note = f"bench invalid: {exc}"
    ok = matched == len(GOLDEN_QUERIES) and bench_ok == 1.0
    narrative = "; ".join(filter(None, [f"golden {matched}/{len(GOLDEN_QUERIES)}",
                                        f"failed: {', '.join(failed)}" if failed else "", note]))
    return CriterionResult("B4", ok, {"golden_queries": float(len(GOLDEN_QUERIES)),
                                      "golden_matched": float(matched), "bench_completed": bench_ok}, narrative)


def check_criteria(wh: Warehouse, stats: LoadStats, audit_log, truth_file, dataset_dir=None,
                   mapping: Mapping | None = None, fact_count_history: Sequence[int] | None = None,
                   bench_reps: int = 10) -> list[CriterionResult]:
    """Run A1-A4 and B1-B4 over a warehouse built by one pipeline run."""
    audit_log, truth_file = Path(audit_log), Path(truth_file)
    for p in (audit_log, truth_file):
        if not p.exists():
            raise FileNotFoundError(p)
    dataset_dir = Path(dataset_dir) if dataset_dir is not None else truth_file.parent
    mapping = mapping or load_mapping()
    sources = load_dataset(dataset_dir).sources
    return [
        _a1(wh),
        _a2(wh),
        _a3(wh),
        _a4(wh, fact_count_history),
        _b1(stats, sources),
        _b2(wh, audit_log, truth_file, mapping),
        _b3(wh, stats, mapping),
        _b4(wh, dataset_dir, bench_reps),
    ]
