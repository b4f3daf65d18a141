"""Deterministic synthetic cancer dataset with seeded typos and duplicates.

Writes the warehouse source exports (``cancer_types.csv``, ``procedures.csv``,
``patients.csv``, ``treatments.csv``), a ``truth.tsv`` listing every seeded
corruption, and a clean operational copy under ``oltp/`` that backs the
row-store baseline.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from ..etl import fold
from ..schema import reference_schema

CANCER_TYPES = [
    ("C91", "Leukemia", "Blood"),
    ("C90", "Multiple Myeloma", "Blood"),
    ("C81", "Hodgkin Lymphoma", "Lymph"),
    ("C50", "Breast Carcinoma", "Breast"),
    ("C34", "Lung Carcinoma", "Lung"),
    ("C22", "Hepatocellular Carcinoma", "Liver"),
    ("C16", "Gastric Adenocarcinoma", "Stomach"),
    ("C18", "Colorectal Carcinoma", "Colon"),
    ("C61", "Prostate Adenocarcinoma", "Prostate"),
    ("C71", "Glioblastoma", "Brain"),
    ("C43", "Melanoma", "Skin"),
    ("C49", "Sarcoma", "Soft Tissue"),
    ("C73", "Thyroid Carcinoma", "Thyroid"),
    ("C64", "Renal Cell Carcinoma", "Kidney"),
    ("C25", "Pancreatic Carcinoma", "Pancreas"),
    ("C56", "Ovarian Carcinoma", "Ovary"),
]

PROCEDURES = [
    ("P01", "Radical Mastectomy", "Surgery"),
    ("P02", "Lobectomy", "Surgery"),
    ("P03", "Craniotomy", "Surgery"),
    ("P04", "Hemicolectomy", "Surgery"),
    ("P05", "External Beam Radiotherapy", "Radiotherapy"),
    ("P06", "Brachytherapy", "Radiotherapy"),
    ("P07", "Cisplatin Chemotherapy", "Chemotherapy"),
    ("P08", "Doxorubicin Chemotherapy", "Chemotherapy"),
    ("P09", "Bone Marrow Transplant", "Transplant"),
    ("P10", "Immunotherapy", "Immunotherapy"),
    ("P11", "Hormone Therapy", "Hormonal"),
]

BASE_COST = {"Surgery": 9000.0, "Radiotherapy": 4000.0, "Chemotherapy": 2500.0,
             "Transplant": 30000.0, "Immunotherapy": 7000.0, "Hormonal": 800.0}

STAGES = ["I", "II", "III", "IV"]
PHASES = ["diagnosis", "treatment", "remission", "follow-up"]
FIRST_NAMES = ["Amira", "Omar", "Laila", "Hassan", "Nour", "Karim", "Salma", "Youssef", "Mona", "Tarek",
               "Heba", "Samir", "Dina", "Khaled", "Rania", "Walid", "Fatma", "Adel", "Yasmin", "Sherif"]
LAST_NAMES = ["Mansour", "Fahmy", "Saleh", "Naguib", "Ibrahim", "Hamdy", "Rizk", "Zaki", "Farouk", "Gamal",
              "Shawky", "Lotfy", "Hegazy", "Kamel", "Morsi", "Sabry"]

FUZZY_FIELDS = ("cancerName", "procName")
SOURCE_ORDER = ("cancer_types.csv", "procedures.csv", "patients.csv", "treatments.csv")
TREATMENT_COLUMNS = ["eventNo", "patientNo", "cancerName", "procName", "treatmentDate", "cost", "deaths"]
DUPLICATE = "<duplicate>"


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    patients: int = 300
    facts: int = 3000
    typo_rate: float = 0.05
    dup_rate: float = 0.01
    seed: int = 42
    start: date = date(2008, 1, 1)
    end: date = date(2012, 12, 31)

    def __post_init__(self):
        if self.patients <= 0 or self.facts <= 0:
            raise ValueError("patient and fact counts must be positive")
        for name in ("typo_rate", "dup_rate"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.start >= self.end:
            raise ValueError("date span must be non-empty")

    @property
    def n_duplicates(self) -> int:
        return min(int(round(self.facts * self.dup_rate)), self.facts // 2)

    @property
    def n_typos(self) -> int:
        return int(round(self.facts * self.typo_rate))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["start"], d["end"] = self.start.isoformat(), self.end.isoformat()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticDatasetSpec":
        d = dict(d)
        d["start"], d["end"] = date.fromisoformat(d["start"]), date.fromisoformat(d["end"])
        return cls(**d)


@dataclass(frozen=True)
class TruthEntry:
    lineage: str
    field: str
    original: str
    corrupted: str

    @property
    def is_duplicate(self) -> bool:
        return self.corrupted == DUPLICATE


@dataclass
class Dataset:
    directory: Path
    spec: SyntheticDatasetSpec
    sources: list[Path] = field(default_factory=list)

    @property
    def truth(self) -> Path:
        return self.directory / "truth.tsv"

    @property
    def oltp_dir(self) -> Path:
        return self.directory / "oltp"


def _name_variants() -> dict[str, list[str]]:
    """Cancer code -> long-form cross-reference spellings usable in sources."""
    out: dict[str, list[str]] = {}
    for variant, code in reference_schema().crossref("DimCancerType").items():
        if len(variant) >= 5:
            out.setdefault(code, []).append(variant)
    return out


def _vocabulary() -> set[str]:
    words = {c for c, _, _ in CANCER_TYPES} | {n for _, n, _ in CANCER_TYPES}
    words |= {c for c, _, _ in PROCEDURES} | {n for _, n, _ in PROCEDURES}
    words |= set(reference_schema().crossref("DimCancerType"))
    return {fold(w) for w in words}


LETTERS = "abcdefghijklmnopqrstuvwxyz"


def corrupt(value: str, rng: np.random.Generator, forbidden: set[str]) -> str:
    """One random substitution, insertion, deletion or adjacent transposition.

    The result differs from ``value`` after case/whitespace folding and does
    not collide with any folded entry of ``forbidden``.
    """
    for _ in range(200):
        op = int(rng.integers(4))
        n = len(value)
        if op == 0:
            i = int(rng.integers(n))
            out = value[:i] + LETTERS[int(rng.integers(26))] + value[i + 1:]
        elif op == 1:
            i = int(rng.integers(n + 1))
            out = value[:i] + LETTERS[int(rng.integers(26))] + value[i:]
        elif op == 2:
            i = int(rng.integers(n))
            out = value[:i] + value[i + 1:]
        else:
            i = int(rng.integers(n - 1))
            out = value[:i] + value[i + 1] + value[i] + value[i + 2:]
        f = fold(out)
        if f != fold(value) and f not in forbidden and out == out.strip() and "  " not in out:
            return out
    raise RuntimeError(f"could not corrupt {value!r}")


def _rand_date(rng: np.random.Generator, lo: date, hi: date) -> date:
    return lo + timedelta(days=int(rng.integers((hi - lo).days + 1)))


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def generate_dataset(spec: SyntheticDatasetSpec, out_dir) -> Dataset:
    """Write a dataset for ``spec`` into ``out_dir``; identical seeds give identical bytes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "oltp").mkdir(exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    span_days = (spec.end - spec.start).days

    # patients and their stage history
    patient_rows: list[list] = []
    current: dict[str, list] = {}
    patient_info: list[tuple[str, date, int]] = []  # (patientNo, first effective, cancer index)
    for i in range(1, spec.patients + 1):
        pno = f"P{i:06d}"
        name = f"{FIRST_NAMES[int(rng.integers(len(FIRST_NAMES)))]} {LAST_NAMES[int(rng.integers(len(LAST_NAMES)))]}"
        sex = "F" if rng.random() < 0.5 else "M"
        birth = _rand_date(rng, date(1930, 1, 1), date(1990, 12, 31))
        d0 = spec.start + timedelta(days=int(rng.integers(max(1, int(span_days * 0.6)))))
        stage = int(rng.integers(len(STAGES)))
        cancer = int(rng.integers(len(CANCER_TYPES)))
        versions = [(d0, STAGES[stage], PHASES[0])]
        n_changes = int(rng.choice(3, p=[0.6, 0.3, 0.1]))
        eff = d0
        for _ in range(n_changes):
            eff = eff + timedelta(days=int(rng.integers(30, 366)))
            if eff >= spec.end:
                break
            stage = min(stage + int(rng.integers(0, 2)), len(STAGES) - 1)
            versions.append((eff, STAGES[stage], PHASES[1 + int(rng.integers(len(PHASES) - 1))]))
        for eff_date, st, ph in versions:
            patient_rows.append([pno, name, sex, birth.isoformat(), st, ph, eff_date.isoformat()])
        current[pno] = [pno, name, sex, birth.isoformat(), versions[-1][1], versions[-1][2]]
        patient_info.append((pno, d0, cancer))

    # treatment events (clean base rows)
    variants = _name_variants()
    n_base = spec.facts - spec.n_duplicates
    base: list[list[str]] = []
    oltp_events: list[list] = []
    drafts = []
    for _ in range(n_base):
        pno, d0, cancer = patient_info[int(rng.integers(len(patient_info)))]
        when = _rand_date(rng, d0, spec.end)
        proc = int(rng.integers(len(PROCEDURES)))
        code, cname, _organ = CANCER_TYPES[cancer]
        if code in variants and rng.random() < 0.05:
            cname = variants[code][int(rng.integers(len(variants[code])))]
        kind = PROCEDURES[proc][2]
        cost = round(BASE_COST[kind] * float(rng.lognormal(0.0, 0.35)), 2)
        p_death = 0.01 + 0.03 * STAGES.index(current[pno][4]) + (0.05 if kind == "Transplant" else 0.0)
        deaths = int(rng.random() < p_death)
        drafts.append((when, pno, code, cname, proc, cost, deaths))
    drafts.sort(key=lambda r: (r[0], r[1]))
    for k, (when, pno, code, cname, proc, cost, deaths) in enumerate(drafts, start=1):
        eno = f"E{k:07d}"
        base.append([eno, pno, cname, PROCEDURES[proc][1], when.strftime("%d/%m/%Y"), f"{cost:,.2f}", str(deaths)])
        oltp_events.append([eno, pno, code, PROCEDURES[proc][0], when.isoformat(), f"{cost:.2f}", str(deaths)])

    # duplicates: copies of distinct base rows placed after their source
    n_dup = spec.n_duplicates
    dup_sources = sorted(int(x) for x in rng.choice(n_base, size=n_dup, replace=False)) if n_dup else []
    after: dict[int, list[int]] = {}
    for s in dup_sources:
        q = int(rng.integers(s, n_base))
        after.setdefault(q, []).append(s)

    # typos on base rows that are not duplicated
    forbidden = _vocabulary()
    eligible = np.array([i for i in range(n_base) if i not in set(dup_sources)], dtype=np.int64)
    n_typo = min(spec.n_typos, len(eligible))
    typo_rows = sorted(int(x) for x in rng.choice(eligible, size=n_typo, replace=False)) if n_typo else []
    typos: dict[int, tuple[str, str, str]] = {}
    for r in typo_rows:
        fld = FUZZY_FIELDS[int(rng.integers(len(FUZZY_FIELDS)))]
        col = TREATMENT_COLUMNS.index(fld)
        original = base[r][col]
        typos[r] = (fld, original, corrupt(original, rng, forbidden))

    lines: list[list[str]] = []
    truth: list[TruthEntry] = []
    line_of: dict[int, int] = {}
    for i, row in enumerate(base):
        out_row = list(row)
        lineno = len(lines) + 2
        line_of[i] = lineno
        if i in typos:
            fld, original, bad = typos[i]
            out_row[TREATMENT_COLUMNS.index(fld)] = bad
            truth.append(TruthEntry(f"treatments.csv:{lineno}", fld, original, bad))
        lines.append(out_row)
        for s in after.get(i, []):
            lineno = len(lines) + 2
            lines.append(list(base[s]))
            truth.append(TruthEntry(f"treatments.csv:{lineno}", "*", f"treatments.csv:{line_of[s]}", DUPLICATE))

    _write_csv(out / "cancer_types.csv", ["cancerCode", "cancerName", "organ"], [list(c) for c in CANCER_TYPES])
    _write_csv(out / "procedures.csv", ["procCode", "procName", "kind"], [list(p) for p in PROCEDURES])
    _write_csv(out / "patients.csv",
               ["patientNo", "name", "sex", "birthDate", "stage", "phase", "effectiveDate"], patient_rows)
    _write_csv(out / "treatments.csv", TREATMENT_COLUMNS, lines)
    with open(out / "truth.tsv", "w", encoding="utf-8", newline="") as fh:
        fh.write("lineage\tfield\toriginal\tcorrupted\n")
        for t in truth:
            fh.write(f"{t.lineage}\t{t.field}\t{t.original}\t{t.corrupted}\n")

    _write_csv(out / "oltp" / "patients.csv", ["patientNo", "name", "sex", "birthDate", "stage", "phase"],
               [current[p] for p, _, _ in patient_info])
    _write_csv(out / "oltp" / "diagnoses.csv", ["cancerCode", "cancerName", "organ"], [list(c) for c in CANCER_TYPES])
    _write_csv(out / "oltp" / "procedures.csv", ["procCode", "procName", "kind"], [list(p) for p in PROCEDURES])
    _write_csv(out / "oltp" / "treatment_events.csv",
               ["eventNo", "patientNo", "cancerCode", "procCode", "treatmentDate", "cost", "deaths"], oltp_events)
    (out / "spec.json").write_text(json.dumps(spec.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return Dataset(out, spec, [out / name for name in SOURCE_ORDER])


def load_dataset(directory) -> Dataset:
    directory = Path(directory)
    spec = SyntheticDatasetSpec.from_dict(json.loads((directory / "spec.json").read_text(encoding="utf-8")))
    return Dataset(directory, spec, [directory / name for name in SOURCE_ORDER])


def read_truth(path) -> list[TruthEntry]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        next(fh, None)
        for line in fh:
            line = line.rstrip("\n")
            if line:
                entries.append(TruthEntry(*line.split("\t")))
    return entries
