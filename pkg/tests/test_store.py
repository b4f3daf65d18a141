import json
import random
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cancerdw.schema import parse_schema, reference_schema
from cancerdw.store import (
    MANIFEST, CorruptWarehouseError, FactRow, NotFound, StoreError, UnknownDimensionError, Warehouse,
    init_warehouse, open_warehouse, persist, read_manifest,
)

from conftest import build_random_warehouse

SCHEMA = reference_schema()
D0 = date(2010, 1, 1)


def observable_state(wh: Warehouse) -> dict:
    return {
        "dims": {d.name: wh.dimension_rows(d.name) for d in wh.schema.dimensions},
        "facts": list(wh.fact_rows()),
        "counters": wh.counters(),
        "schema": wh.schema,
    }


def cancer(wh, code="C50", name="Breast Carcinoma", organ="Breast", at=D0):
    return wh.upsert_dimension_row("DimCancerType", code, {"cancerCode": code, "cancerName": name, "organ": organ}, at)


def patient(wh, pno="P1", stage="I", at=D0, phase="diagnosis"):
    return wh.upsert_dimension_row("DimPatient", pno, {"patientNo": pno, "name": "A", "sex": "F",
                                                       "birthDate": date(1960, 1, 1), "stage": stage,
                                                       "phase": phase}, at)


def filled(wh):
    cancer(wh)
    patient(wh)
    wh.upsert_dimension_row("DimProcedure", "P01", {"procCode": "P01", "procName": "Lobectomy", "kind": "Surgery"}, D0)
    wh.upsert_dimension_row("DimDate", "20100105", {"dateKey": 20100105, "day": 5, "month": 1, "quarter": 1,
                                                    "year": 2010}, date(1900, 1, 1))
    return wh


NATURALS = {"DimPatient": "P1", "DimCancerType": "C50", "DimProcedure": "P01", "DimDate": "20100105"}


# -- dimension upserts ------------------------------------------------------------------

def test_upsert_cases():
    wh = Warehouse(SCHEMA)
    assert patient(wh) == 1                                   # new key
    assert patient(wh) == 1                                   # unchanged: no new row
    assert patient(wh, stage="II", at=D0 + timedelta(days=10)) == 2   # change: version
    rows = wh.dimension_rows("DimPatient")
    assert rows[0].end == D0 + timedelta(days=10) and rows[1].end is None
    assert rows[1].start == rows[0].end
    with pytest.raises(StoreError, match="must follow"):
        patient(wh, stage="III", at=D0 + timedelta(days=10))
    assert patient(wh, pno="P2") == 3                         # keys are global per table


def test_non_history_dimension_refuses_change():
    wh = Warehouse(SCHEMA)
    cancer(wh)
    with pytest.raises(StoreError, match="not history-tracked"):
        cancer(wh, name="Other", at=D0 + timedelta(days=1))


def test_kind_checked_on_upsert():
    wh = Warehouse(SCHEMA)
    with pytest.raises(StoreError, match="conform"):
        wh.upsert_dimension_row("DimDate", "1", {"dateKey": "1", "day": 1, "month": 1, "quarter": 1, "year": 1}, D0)
    with pytest.raises(StoreError, match="missing attribute"):
        wh.upsert_dimension_row("DimProcedure", "X", {"procCode": "X"}, D0)
    with pytest.raises(UnknownDimensionError):
        wh.upsert_dimension_row("DimNope", "X", {}, D0)


def test_point_in_time_and_current():
    wh = Warehouse(SCHEMA)
    patient(wh)
    patient(wh, stage="II", at=D0 + timedelta(days=30))
    assert wh.point_in_time("DimPatient", "P1", D0).attributes["stage"] == "I"
    assert wh.point_in_time("DimPatient", "P1", D0 + timedelta(days=29)).attributes["stage"] == "I"
    assert wh.point_in_time("DimPatient", "P1", D0 + timedelta(days=30)).attributes["stage"] == "II"
    assert wh.current_row("DimPatient", "P1").attributes["stage"] == "II"
    with pytest.raises(NotFound):
        wh.point_in_time("DimPatient", "P1", D0 - timedelta(days=1))
    with pytest.raises(NotFound):
        wh.current_row("DimPatient", "P9")


def test_crossref_resolution():
    wh = Warehouse(SCHEMA)
    assert wh.resolve_crossref("DimCancerType", "Leukaemia") == "C91"
    assert wh.resolve_crossref("DimCancerType", "C50") == "C50"
    assert wh.resolve_crossref("DimProcedure", "anything") == "anything"


# -- facts -----------------------------------------------------------------------------

def test_append_fact_binds_row_valid_at_as_of():
    wh = filled(Warehouse(SCHEMA))
    patient(wh, stage="IV", at=date(2010, 6, 1))
    early = wh.append_fact(NATURALS, {"cost": 10, "deaths": 0}, date(2010, 2, 1))
    late = wh.append_fact(NATURALS, {"cost": 20, "deaths": 1}, date(2010, 7, 1))
    assert early.dim_keys["DimPatient"] == 1 and late.dim_keys["DimPatient"] == 2
    assert (early.fact_id, late.fact_id) == (1, 2)
    assert early.measures["patients"] == 1.0


@pytest.mark.parametrize("measures,needle", [
    ({"cost": float("nan"), "deaths": 0}, "not finite"),
    ({"cost": "12", "deaths": 0}, "numeric"),
    ({"deaths": 0}, "missing measure"),
    ({"cost": 1, "deaths": 0, "deathRate": 0.5}, "derived"),
])
def test_append_fact_rejects_bad_measures(measures, needle):
    wh = filled(Warehouse(SCHEMA))
    with pytest.raises(StoreError, match=needle):
        wh.append_fact(NATURALS, measures, date(2010, 2, 1))
    assert wh.fact_count == 0


def test_append_fact_needs_valid_dimension_row():
    wh = filled(Warehouse(SCHEMA))
    with pytest.raises(StoreError, match="no row valid"):
        wh.append_fact(NATURALS, {"cost": 1, "deaths": 0}, D0 - timedelta(days=1))
    with pytest.raises(StoreError, match="missing dimension"):
        wh.append_fact({"DimPatient": "P1"}, {"cost": 1, "deaths": 0}, D0)


def test_fact_columns_are_read_only():
    wh = filled(Warehouse(SCHEMA))
    wh.append_fact(NATURALS, {"cost": 5, "deaths": 0}, D0)
    col = wh.fact_column("cost")
    with pytest.raises(ValueError):
        col[0] = 99.0
    with pytest.raises(ValueError):
        wh.fact_column("DimPatient")[0] = 7
    assert wh.fact_column("cost")[0] == 5.0
    row = next(wh.fact_rows())
    with pytest.raises(AttributeError):
        row.fact_id = 3
    assert isinstance(row, FactRow)


def test_batch_rolls_back_on_error():
    wh = filled(Warehouse(SCHEMA))
    wh.append_fact(NATURALS, {"cost": 5, "deaths": 0}, D0)
    before = observable_state(wh)
    with pytest.raises(RuntimeError):
        with wh.batch():
            patient(wh, pno="P7")
            patient(wh, stage="III", at=D0 + timedelta(days=3))
            wh.append_fact(NATURALS, {"cost": 6, "deaths": 0}, D0)
            raise RuntimeError("boom")
    assert observable_state(wh) == before
    assert wh.current_row("DimPatient", "P1").end is None
    # keys continue densely after a rollback
    assert patient(wh, pno="P8") == 2


# -- surrogate key property ------------------------------------------------------------

ops = st.lists(st.tuples(st.sampled_from(["new", "change", "same", "fact", "fail_batch"]),
                         st.integers(0, 5), st.integers(1, 40)), min_size=1, max_size=30)


@settings(max_examples=120, deadline=None)
@given(ops)
def test_surrogate_keys_dense_under_random_ops(seq):
    wh = filled(Warehouse(SCHEMA))
    day = {"P1": D0}
    for op, who, step in seq:
        pno = f"P{who}"
        if op == "new" and pno not in day:
            patient(wh, pno=pno, at=D0)
            day[pno] = D0
        elif op == "change" and pno in day:
            day[pno] += timedelta(days=step)
            patient(wh, pno=pno, stage=random.Random(step).choice("ABCD"), at=day[pno])
        elif op == "same" and pno in day:
            cur = wh.current_row("DimPatient", pno)
            wh.upsert_dimension_row("DimPatient", pno, cur.attributes, day[pno] + timedelta(days=1))
        elif op == "fact" and pno in day:
            wh.append_fact({**NATURALS, "DimPatient": pno}, {"cost": step, "deaths": 0}, day[pno])
        elif op == "fail_batch":
            with pytest.raises(KeyError):
                with wh.batch():
                    patient(wh, pno=f"Z{step}")
                    wh.append_fact(NATURALS, {"cost": 1, "deaths": 0}, D0)
                    raise KeyError("abort")
    for d in SCHEMA.dimensions:
        keys = [r.key for r in wh.dimension_rows(d.name)]
        assert keys == list(range(1, len(keys) + 1))
    ids = [f.fact_id for f in wh.fact_rows()]
    assert ids == list(range(1, len(ids) + 1))
    assert wh.counters()["FactTreatment"] == len(ids) + 1


# -- persistence ------------------------------------------------------------------------

def test_init_refuses_existing(tmp_path):
    init_warehouse(SCHEMA, tmp_path / "w")
    with pytest.raises(StoreError):
        init_warehouse(SCHEMA, tmp_path / "w")


@pytest.mark.parametrize("seed", range(8))
def test_persist_open_round_trip(tmp_path, seed):
    wh = build_random_warehouse(seed, n_facts=60)
    persist(wh, tmp_path)
    assert observable_state(open_warehouse(tmp_path)) == observable_state(wh)


def test_incremental_persist_is_append_only(tmp_path):
    wh = build_random_warehouse(3, n_facts=40)
    persist(wh, tmp_path)
    first = {p.name: p.read_bytes() for p in tmp_path.glob("*.tbl")}
    # more history and facts, including closures of previously written rows
    for r in list(wh.natural_keys("DimPatient"))[:3]:
        cur = wh.current_row("DimPatient", r)
        wh.upsert_dimension_row("DimPatient", r, {**cur.attributes, "phase": "late"}, date(2016, 1, 1))
    extra = build_random_warehouse(3, n_facts=40)
    for f in extra.fact_rows():
        keys = {d: extra.dimension_rows(d)[k - 1].natural_key for d, k in f.dim_keys.items()}
        wh.append_fact(keys, {m: v for m, v in f.measures.items() if m != "patients"}, date(2016, 6, 1))
    persist(wh, tmp_path)
    for name, data in first.items():
        assert (tmp_path / name).read_bytes()[: len(data)] == data
    persist(wh, tmp_path)  # no-op persist keeps files identical
    again = open_warehouse(tmp_path)
    assert observable_state(again) == observable_state(wh)


def test_unacknowledged_tail_is_dropped(tmp_path):
    wh = build_random_warehouse(4, n_facts=30)
    persist(wh, tmp_path)
    with open(tmp_path / "FactTreatment.tbl", "ab") as fh:
        fh.write(b"half-written garbage")
    reopened = open_warehouse(tmp_path)
    assert observable_state(reopened) == observable_state(wh)
    persist(reopened, tmp_path)  # truncates the tail before appending
    assert observable_state(open_warehouse(tmp_path)) == observable_state(wh)


def test_corruption_detected(tmp_path):
    wh = build_random_warehouse(5, n_facts=30)
    persist(wh, tmp_path)
    doc = json.loads((tmp_path / MANIFEST).read_text())
    doc["body"]["tables"]["FactTreatment"]["records"] += 1
    (tmp_path / MANIFEST).write_text(json.dumps(doc))
    with pytest.raises(CorruptWarehouseError, match="checksum"):
        open_warehouse(tmp_path)


def test_truncated_table_detected(tmp_path):
    wh = build_random_warehouse(6, n_facts=30)
    persist(wh, tmp_path)
    p = tmp_path / "DimPatient.tbl"
    p.write_bytes(p.read_bytes()[:-5])
    with pytest.raises(CorruptWarehouseError):
        open_warehouse(tmp_path)


def test_schema_mismatch_refused(tmp_path):
    persist(Warehouse(SCHEMA), tmp_path)
    other = parse_schema("dimension A\n  attr a:text\nfact F\n  dim A\n  measure m:sum\n")
    with pytest.raises(StoreError, match="different schema"):
        persist(Warehouse(other), tmp_path)


def test_manifest_records_counters(tmp_path):
    wh = build_random_warehouse(8, n_facts=25)
    persist(wh, tmp_path)
    body = read_manifest(tmp_path)
    assert body["tables"]["FactTreatment"]["next_key"] == 26
    assert body["format_version"] == 1


def test_bound_batch_persists(tmp_path):
    wh = init_warehouse(SCHEMA, tmp_path)
    with wh.batch():
        filled(wh)
        wh.append_fact(NATURALS, {"cost": 3.5, "deaths": 1}, D0)
    assert observable_state(open_warehouse(tmp_path)) == observable_state(wh)
    assert np.array_equal(open_warehouse(tmp_path).fact_column("cost"), [3.5])
