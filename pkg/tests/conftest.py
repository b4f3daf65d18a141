import random
from datetime import date, timedelta

import pytest

from cancerdw.etl import DATE_DIMENSION_EPOCH, date_attributes, run_pipeline
from cancerdw.evalharness import SyntheticDatasetSpec, generate_dataset
from cancerdw.evalharness.generate import CANCER_TYPES, PROCEDURES, STAGES, PHASES
from cancerdw.schema import reference_schema
from cancerdw.store import Warehouse

SCHEMA = reference_schema()


def build_random_warehouse(seed: int, n_facts: int = 200, n_patients: int = 12) -> Warehouse:
    """Reference-schema warehouse with random history, written through the store API."""
    rng = random.Random(seed)
    wh = Warehouse(SCHEMA)
    for code, name, organ in rng.sample(CANCER_TYPES, rng.randint(3, len(CANCER_TYPES))):
        wh.upsert_dimension_row("DimCancerType", code, {"cancerCode": code, "cancerName": name, "organ": organ},
                                DATE_DIMENSION_EPOCH)
    for code, name, kind in rng.sample(PROCEDURES, rng.randint(3, len(PROCEDURES))):
        wh.upsert_dimension_row("DimProcedure", code, {"procCode": code, "procName": name, "kind": kind},
                                DATE_DIMENSION_EPOCH)
    first: dict[str, date] = {}
    for i in range(1, n_patients + 1):
        pno = f"P{i:04d}"
        start = date(2008, 1, 1) + timedelta(days=rng.randrange(600))
        first[pno] = start
        attrs = {"patientNo": pno, "name": f"N{i}", "sex": rng.choice("FM"),
                 "birthDate": date(1940, 1, 1) + timedelta(days=rng.randrange(15000)),
                 "stage": rng.choice(STAGES), "phase": PHASES[0]}
        wh.upsert_dimension_row("DimPatient", pno, attrs, start)
        eff = start
        for _ in range(rng.randrange(4)):
            eff += timedelta(days=rng.randint(1, 300))
            attrs = {**attrs, "stage": rng.choice(STAGES), "phase": rng.choice(PHASES)}
            wh.upsert_dimension_row("DimPatient", pno, attrs, eff)
    cancers = wh.natural_keys("DimCancerType")
    procs = wh.natural_keys("DimProcedure")
    patients = sorted(first)
    names = SCHEMA.dimension("DimDate").attribute_names
    for _ in range(n_facts):
        pno = rng.choice(patients)
        when = first[pno] + timedelta(days=rng.randrange(1500))
        nk = str(when.year * 10000 + when.month * 100 + when.day)
        wh.upsert_dimension_row("DimDate", nk, date_attributes(when, names), DATE_DIMENSION_EPOCH)
        wh.append_fact({"DimPatient": pno, "DimCancerType": rng.choice(cancers),
                        "DimProcedure": rng.choice(procs), "DimDate": nk},
                       {"cost": round(rng.uniform(10, 5000), 2), "deaths": float(rng.random() < 0.1)}, when)
    return wh


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    return generate_dataset(SyntheticDatasetSpec(patients=40, facts=300, seed=42),
                            tmp_path_factory.mktemp("small_dataset"))


@pytest.fixture(scope="session")
def loaded(small_dataset, tmp_path_factory):
    """(warehouse, stats, audit log path, dataset) after one pipeline run."""
    audit = tmp_path_factory.mktemp("audit") / "audit.log"
    wh = Warehouse(SCHEMA)
    stats = run_pipeline(small_dataset.sources, wh, audit_log=audit)
    return wh, stats, audit, small_dataset


@pytest.fixture
def random_wh():
    return build_random_warehouse(7)


# -- acceptance summary -----------------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
