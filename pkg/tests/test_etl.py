import csv
from datetime import date

import pytest
from hypothesis import given, settings, strategies as st

from cancerdw.etl import (
    CORRECTED, DEDUPLICATED, PASSED, REJECTED, CoercionError, HeaderMismatch, Lineage, LoadStats, SourceError,
    SourceMapping, StagingRecord, cleanse, extract, fold, fuzzy_lookup, load_mapping, parse_audit_log,
    parse_date, parse_decimal, run_pipeline, similarity, transform,
)
from cancerdw.evalharness import SyntheticDatasetSpec, generate_dataset, read_truth
from cancerdw.evalharness.oracle import dl_reference
from cancerdw.schema import reference_schema
from cancerdw.store import Warehouse

SCHEMA = reference_schema()
MAPPING = load_mapping()
TREAT = MAPPING.for_source("treatments.csv")


def oracle_similarity(a, b):
    fa, fb = fold(a), fold(b)
    n = max(len(fa), len(fb))
    return 1.0 if n == 0 else 1 - dl_reference(fa, fb) / n


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def reference_wh(tmp_path):
    """Warehouse with the cancer and procedure catalogs and two patients loaded."""
    wh = Warehouse(SCHEMA)
    ds = generate_dataset(SyntheticDatasetSpec(patients=2, facts=5, seed=1), tmp_path / "ref")
    run_pipeline(ds.sources[:3], wh)
    return wh


# -- similarity -------------------------------------------------------------------------

@pytest.mark.parametrize("a,b", [
    ("Leukemia", "Luekemia"), ("Hodgkin Lymphoma", "hodgkin  lymphoma"), ("", ""), ("abc", ""),
    ("Lobectomy", "Lobectmy"), ("CA", "ABC"),
])
def test_similarity_against_oracle(a, b):
    assert similarity(a, b) == pytest.approx(oracle_similarity(a, b), abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.text("abcAB \t", max_size=9), st.text("abcAB \t", max_size=9))
def test_similarity_property(a, b):
    s = similarity(a, b)
    assert 0.0 <= s <= 1.0
    assert s == pytest.approx(oracle_similarity(a, b), abs=1e-12)
    assert s == similarity(b, a)
    assert (s == 1.0) == (fold(a) == fold(b))


def test_fold():
    assert fold("  Lung \t CARCINOMA ") == "lung carcinoma"


def test_fuzzy_lookup_examples():
    ref = ["Breast Carcinoma", "Leukemia", "Lung Carcinoma"]
    m = fuzzy_lookup("Lukemia", ref, 0.8)
    assert m.matched and m.value == "Leukemia" and m.index == 1
    assert m.score == pytest.approx(oracle_similarity("Lukemia", "Leukemia"))
    miss = fuzzy_lookup("zzz", ref, 0.8)
    assert not miss.matched
    assert not fuzzy_lookup("x", [], 0.8).matched
    with pytest.raises(ValueError):
        fuzzy_lookup("x", ref, 0.0)


def test_fuzzy_lookup_tie_goes_to_lowest_index():
    m = fuzzy_lookup("ab", ["ax", "xb"], 0.1)
    assert m.score == 0.5 and m.index == 0


@settings(max_examples=100, deadline=None)
@given(st.text("abcd", max_size=6), st.lists(st.text("abcd", max_size=6), min_size=1, max_size=6))
def test_fuzzy_lookup_is_argmax(value, ref):
    scores = [oracle_similarity(value, r) for r in ref]
    best = max(scores)
    m = fuzzy_lookup(value, ref, 0.5)
    assert m.index == scores.index(best)
    assert m.score == pytest.approx(best)
    assert m.matched == (best >= 0.5)


# -- extract ----------------------------------------------------------------------------

def test_extract_counts_every_line(tmp_path):
    p = write_csv(tmp_path / "treatments.csv", list(TREAT.columns),
                  [["E1", "P1", "Leukemia", "Lobectomy", "01/02/2010", "1,500.00", "0"],
                   ["E2", "P1", "Leukemia"]])
    recs = extract(p, TREAT)
    assert len(recs) == 2
    assert recs[0].error is None and recs[0].source_id == "E1" and str(recs[0].lineage) == "treatments.csv:2"
    assert recs[1].error and "fields" in recs[1].error


def test_extract_header_mismatch(tmp_path):
    p = write_csv(tmp_path / "treatments.csv", ["eventNo", "bogus"], [])
    with pytest.raises(HeaderMismatch) as ei:
        extract(p, TREAT)
    assert "patientNo" in ei.value.missing and ei.value.extra == ["bogus"]


def test_extract_missing_file(tmp_path):
    with pytest.raises(SourceError):
        extract(tmp_path / "nope.csv", TREAT)


# -- parsing helpers --------------------------------------------------------------------

@pytest.mark.parametrize("text,value", [("1,500.00", 1500.0), ("12", 12.0), ("-3.5", -3.5), (".5", 0.5)])
def test_parse_decimal(text, value):
    assert parse_decimal(text) == value


@pytest.mark.parametrize("text", ["1,50", "abc", "1.2.3", "", "inf"])
def test_parse_decimal_rejects(text):
    with pytest.raises(CoercionError):
        parse_decimal(text)


def test_parse_date_messages():
    assert parse_date("29/02/2012", "%d/%m/%Y") == date(2012, 2, 29)
    with pytest.raises(CoercionError, match="invalid calendar date"):
        parse_date("31/02/2011", "%d/%m/%Y")
    with pytest.raises(CoercionError, match="does not match"):
        parse_date("2011-02-01", "%d/%m/%Y")


# -- cleanse and transform --------------------------------------------------------------

def rec(line, **fields):
    base = {"eventNo": f"E{line}", "patientNo": "P000001", "cancerName": "Leukemia", "procName": "Lobectomy",
            "treatmentDate": "05/05/2010", "cost": "100", "deaths": "0"}
    base.update(fields)
    return StagingRecord(base["eventNo"], base, Lineage("treatments.csv", line))


def test_cleanse_dispositions(tmp_path):
    wh = reference_wh(tmp_path)
    records = [
        rec(2),
        rec(3, cancerName="Lukemia"),
        rec(4, procName="Qqqqqq"),
        rec(5, cancerName="Leukaemia"),     # cross-reference variant passes untouched
        StagingRecord("E2", dict(rec(2).fields), Lineage("treatments.csv", 6)),  # exact duplicate of line 2
        StagingRecord("", {}, Lineage("treatments.csv", 7), "expected 7 fields, found 2"),
        rec(8, patientNo="P00000l"),        # identifiers are matched exactly
    ]
    clean, actions = cleanse(records, SCHEMA, wh, 0.8, TREAT)
    kinds = {str(a.lineage): a.kind for a in actions}
    assert kinds == {"treatments.csv:3": CORRECTED, "treatments.csv:4": REJECTED,
                     "treatments.csv:6": DEDUPLICATED, "treatments.csv:7": REJECTED,
                     "treatments.csv:8": REJECTED}
    fix = next(a for a in actions if a.kind == CORRECTED)
    assert (fix.field, fix.original, fix.corrected) == ("cancerName", "Lukemia", "Leukemia")
    assert fix.similarity == pytest.approx(oracle_similarity("Lukemia", "Leukemia"))
    dup = next(a for a in actions if a.kind == DEDUPLICATED)
    assert dup.original == "treatments.csv:2"
    assert [str(r.lineage) for r in clean] == ["treatments.csv:2", "treatments.csv:3", "treatments.csv:5"]
    assert len(clean) + len(actions) - 1 == len(records)  # the corrected record is returned and logged
    assert PASSED not in kinds.values()


def test_cleanse_threshold_validated(tmp_path):
    with pytest.raises(ValueError):
        cleanse([], SCHEMA, Warehouse(SCHEMA), 1.5, TREAT)


def test_transform_fact_coercion(tmp_path):
    wh = reference_wh(tmp_path)
    rows, actions = transform([rec(2, cost="1,234.50", cancerName="Leukaemia"),
                               rec(3, treatmentDate="31/02/2010"), rec(4, cost="12,34")], TREAT, wh)
    assert len(rows) == 1 and len(actions) == 2
    f = rows[0]
    assert f.measures == {"cost": 1234.5, "deaths": 0.0}
    assert f.dim_naturals["DimCancerType"] == "C91"
    assert f.dim_naturals["DimProcedure"] == "P02"
    assert f.dim_naturals["DimDate"] == "20100505"
    assert f.as_of == date(2010, 5, 5)
    assert {a.field for a in actions} == {"treatmentDate", "cost"}
    assert all(a.kind == REJECTED for a in actions)


# -- pipeline ---------------------------------------------------------------------------

def test_pipeline_hundred_records(tmp_path):
    ds = generate_dataset(SyntheticDatasetSpec(patients=20, facts=100, typo_rate=0.05, dup_rate=0.03, seed=3),
                          tmp_path / "ds")
    truth = read_truth(ds.truth)
    assert sum(not t.is_duplicate for t in truth) == 5
    assert sum(t.is_duplicate for t in truth) == 3
    wh = Warehouse(SCHEMA)
    audit = tmp_path / "audit.log"
    stats = run_pipeline(ds.sources, wh, audit_log=audit)
    t = stats.per_source["treatments.csv"]
    assert (t.extracted, t.corrected, t.deduplicated, t.rejected, t.loaded) == (100, 5, 3, 0, 97)
    assert wh.fact_count == 97
    assert stats.conserved and all(s.conserved for s in stats.per_source.values())
    actions = parse_audit_log(audit)
    assert len(actions) == 8
    assert audit.read_text().startswith("# cancerdw-audit run=")


def test_pipeline_isolates_bad_file(tmp_path):
    ds = generate_dataset(SyntheticDatasetSpec(patients=5, facts=20, seed=4), tmp_path / "ds")
    bad = write_csv(tmp_path / "procedures.csv", ["procCode", "wrong"], [["x", "y"]])
    wh = Warehouse(SCHEMA)
    srcs = [ds.sources[0], bad, tmp_path / "ds" / "missing.csv", *ds.sources[2:]]
    stats = run_pipeline(srcs, wh)
    assert set(stats.errors) == {"procedures.csv", "missing.csv"}
    assert wh.dimension_rows("DimProcedure") == []
    assert len(wh.dimension_rows("DimCancerType")) == 16
    # facts need procedures, so every treatment row is rejected but accounted for
    t = stats.per_source["treatments.csv"]
    assert t.loaded == 0 and t.rejected == t.extracted - t.deduplicated


def test_pipeline_threshold_in_audit_header(tmp_path):
    ds = generate_dataset(SyntheticDatasetSpec(patients=5, facts=20, seed=5), tmp_path / "ds")
    audit = tmp_path / "a.log"
    run_pipeline(ds.sources, Warehouse(SCHEMA), threshold=0.9, audit_log=audit)
    assert "threshold=0.9" in audit.read_text().splitlines()[0]


def test_audit_log_round_trip(tmp_path):
    from cancerdw.etl import CleansingAction, format_action
    a = CleansingAction(Lineage("we\tird:name.csv", 12), "f\\x", "tab\there", "new\nline", 0.875, CORRECTED)
    p = tmp_path / "log"
    p.write_text("# header\n" + format_action(a) + "\n", encoding="utf-8")
    assert parse_audit_log(p) == [a]


def test_load_stats_dict_round_trip():
    s = LoadStats(extracted=10, cleansed=9, corrected=2, deduplicated=1, rejected=0, loaded=9, elapsed=0.5)
    s.per_source["x.csv"] = LoadStats(extracted=10, loaded=9, deduplicated=1)
    s.errors["y.csv"] = "boom"
    assert LoadStats.from_dict(s.to_dict()) == s


def test_reload_adds_no_dimension_rows_but_repeats_facts(tmp_path):
    ds = generate_dataset(SyntheticDatasetSpec(patients=10, facts=50, seed=6), tmp_path / "ds")
    wh = Warehouse(SCHEMA)
    run_pipeline(ds.sources, wh)
    dims = {d.name: len(wh.dimension_rows(d.name)) for d in SCHEMA.dimensions}
    facts = wh.fact_count
    run_pipeline(ds.sources, wh)
    assert {d.name: len(wh.dimension_rows(d.name)) for d in SCHEMA.dimensions} == dims
    assert wh.fact_count == 2 * facts
