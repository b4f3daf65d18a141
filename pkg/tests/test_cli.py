import csv
import io
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from cancerdw.cli import (
    EXIT_ABORTED, EXIT_BIND, EXIT_CRITERION, EXIT_EXISTS, EXIT_INPUT, EXIT_OK, main, render_rows, report_ids,
)
from cancerdw.evalharness import GOLDEN_QUERIES, generate_dataset, SyntheticDatasetSpec

GOLDEN_DIR = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def warehouse(tmp_path_factory, small_dataset):
    """A warehouse directory loaded from the seed-42 dataset through the CLI."""
    wh = tmp_path_factory.mktemp("cli") / "wh"
    assert main(["-w", str(wh), "init"]) == EXIT_OK
    assert main(["-w", str(wh), "etl", *map(str, small_dataset.sources)]) == EXIT_OK
    return wh


def test_init_twice_is_exit_3(tmp_path, capsys):
    assert run(capsys, "-w", tmp_path / "wh", "init")[0] == EXIT_OK
    code, _, err = run(capsys, "-w", tmp_path / "wh", "init")
    assert code == EXIT_EXISTS and "already" in err


def test_init_with_bad_schema_is_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.cdw"
    bad.write_text("dimension D\n  attr a:blob\n")
    code, _, err = run(capsys, "-w", tmp_path / "wh", "--schema", bad, "init")
    assert code == EXIT_INPUT and "line 2" in err


def test_missing_warehouse_flag(monkeypatch, capsys):
    monkeypatch.delenv("CANCERDW_WAREHOUSE", raising=False)
    code, _, err = run(capsys, "query", "SELECT {[DimDate].[year].MEMBERS} ON COLUMNS FROM [Treatment]")
    assert code == EXIT_INPUT and "--warehouse" in err


def test_env_var_names_warehouse(warehouse, monkeypatch, capsys):
    monkeypatch.setenv("CANCERDW_WAREHOUSE", str(warehouse))
    code, out, _ = run(capsys, "report", "death-rate")
    assert code == EXIT_OK and "deathRate" in out


def test_uninitialized_directory(tmp_path, capsys):
    code, _, err = run(capsys, "-w", tmp_path, "query", "SELECT {[DimDate].[year].MEMBERS} ON COLUMNS FROM [T]")
    assert code == EXIT_INPUT and "not an initialized warehouse" in err


@pytest.mark.parametrize("qid", ["g04_cancer_by_year", "g10_measures_columns", "g17_organ_children_rows"])
def test_query_csv_matches_golden_bytes(warehouse, capsys, qid):
    code, out, _ = run(capsys, "-w", warehouse, "--format", "csv", "query", GOLDEN_QUERIES[qid])
    assert code == EXIT_OK
    assert out.encode("utf-8") == (GOLDEN_DIR / f"{qid}.csv").read_bytes()


def test_query_from_file_and_format_after_subcommand(warehouse, tmp_path, capsys):
    f = tmp_path / "q.mdx"
    f.write_text(GOLDEN_QUERIES["g10_measures_columns"])
    code, out, _ = run(capsys, "-w", warehouse, "query", "--file", f, "--format", "csv")
    assert code == EXIT_OK
    assert out.encode() == (GOLDEN_DIR / "g10_measures_columns.csv").read_bytes()


def test_table_format_marks_empty_cells(warehouse, capsys):
    code, out, _ = run(capsys, "-w", warehouse, "query",
                       "SELECT {[DimDate].[year].MEMBERS} ON COLUMNS, {[DimCancerType].[cancerName].MEMBERS} ON ROWS "
                       "FROM [Treatment] WHERE ([DimPatient].[stage].[I], [DimProcedure].[kind].[Transplant])")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert set(lines[1]) <= {"-", " "}
    assert "·" in out


def test_syntax_error_prints_caret(warehouse, capsys):
    code, _, err = run(capsys, "-w", warehouse, "query", "SELECT {[DimDate].[year].MEMBERS} ON COLUMNS FROM [T] X")
    assert code == EXIT_INPUT
    assert "offset 54" in err and err.rstrip().endswith(" " * 54 + "^")


def test_bind_error_is_exit_5(warehouse, capsys):
    code, _, err = run(capsys, "-w", warehouse, "query", "SELECT {[DimDate].[week].MEMBERS} ON COLUMNS FROM [Treatment]")
    assert code == EXIT_BIND and "unknown level" in err


def test_query_needs_exactly_one_source(warehouse, capsys):
    assert run(capsys, "-w", warehouse, "query")[0] == EXIT_INPUT


def test_reports(warehouse, capsys):
    code, out, _ = run(capsys, "report")
    assert code == EXIT_OK and out.split() == report_ids()
    assert {"cost-by-cancer-year", "death-rate", "procedure-volume-by-quarter"} <= set(report_ids())
    for rid in report_ids():
        assert run(capsys, "-w", warehouse, "report", rid)[0] == EXIT_OK
    code, _, err = run(capsys, "-w", warehouse, "report", "nope")
    assert code == EXIT_INPUT and "unknown report" in err


def test_etl_missing_file_is_exit_4(tmp_path, small_dataset, capsys):
    wh = tmp_path / "wh"
    run(capsys, "-w", wh, "init")
    code, out, err = run(capsys, "-w", wh, "etl", *small_dataset.sources[:3], tmp_path / "missing.csv")
    assert code == EXIT_ABORTED and "missing.csv" in err
    assert "total" in out


def test_etl_threshold_reaches_audit_header(tmp_path, small_dataset, capsys):
    wh = tmp_path / "wh"
    run(capsys, "-w", wh, "init")
    code, out, _ = run(capsys, "-w", wh, "--threshold", "0.9", "--format", "csv", "etl", *small_dataset.sources)
    assert code == EXIT_OK
    assert "threshold=0.9" in (wh / "audit.log").read_text().splitlines()[0]
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0][0] == "source" and rows[-1][0] == "total"


def test_bad_threshold(tmp_path, small_dataset, capsys):
    run(capsys, "-w", tmp_path, "init")
    assert run(capsys, "-w", tmp_path, "--threshold", "1.5", "etl", *small_dataset.sources)[0] == EXIT_INPUT


def test_generate(tmp_path, capsys):
    code, out, _ = run(capsys, "--seed", "3", "generate", tmp_path / "d", "--patients", "5", "--facts", "20")
    assert code == EXIT_OK
    assert (tmp_path / "d" / "treatments.csv").exists() and "truth.tsv" in out
    assert run(capsys, "generate", tmp_path / "e", "--facts", "0")[0] == EXIT_INPUT
    assert run(capsys, "generate", tmp_path / "e", "--start", "2010-13-01")[0] == EXIT_INPUT


def test_evaluate_on_loaded_warehouse(warehouse, small_dataset, capsys):
    code, out, _ = run(capsys, "-w", warehouse, "evaluate", "--dataset", small_dataset.directory)
    assert code == EXIT_OK
    assert out.count(" pass ") == 8


def test_evaluate_full(capsys):
    code, out, _ = run(capsys, "--format", "csv", "evaluate", "--full", "--patients", "20", "--facts", "150")
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(out)))
    assert [r[0] for r in rows[1:]] == ["A1", "A2", "A3", "A4", "B1", "B2", "B3", "B4"]
    assert all(r[2] == "pass" for r in rows[1:])


def test_evaluate_reports_failure(tmp_path, capsys):
    ds = generate_dataset(SyntheticDatasetSpec(patients=20, facts=200, typo_rate=0.5, seed=8), tmp_path / "ds")
    wh = tmp_path / "wh"
    run(capsys, "-w", wh, "init")
    run(capsys, "-w", wh, "--threshold", "0.99", "etl", *ds.sources)
    code, out, _ = run(capsys, "-w", wh, "evaluate", "--dataset", ds.directory)
    assert code == EXIT_CRITERION and "FAIL" in out


def test_bench_small_is_not_asserted(capsys):
    code, out, _ = run(capsys, "bench", "--facts", "10")
    assert code == EXIT_OK
    assert "below assertion size" in out
    assert run(capsys, "bench", "--facts", "10", "--reps", "3")[0] == 7


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "cancerdw.cli", "report"], capture_output=True, text=True)
    assert res.returncode == 0 and "death-rate" in res.stdout
    res = subprocess.run([sys.executable, "-m", "cancerdw.cli", "frobnicate"], capture_output=True, text=True)
    assert res.returncode == 2


# -- CSV output is RFC 4180 -------------------------------------------------------------

cell = st.text(st.sampled_from(list('ab,"\r\n ;\t·é')), max_size=6)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.lists(cell, min_size=3, max_size=3), max_size=5), st.lists(cell, min_size=3, max_size=3))
def test_csv_is_rfc4180(rows, header):
    text = render_rows(header, rows, "csv")
    # every record ends in CRLF and parses back to the same cells
    assert text.endswith("\r\n")
    assert list(csv.reader(io.StringIO(text, newline=""), strict=True)) == [header, *rows]
    for field in [*header, *(c for r in rows for c in r)]:
        if any(ch in field for ch in ',"\r\n'):
            assert '"' + field.replace('"', '""') + '"' in text
