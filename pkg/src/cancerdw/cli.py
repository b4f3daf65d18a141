"""Command-line front end: init, etl, query, report, generate, evaluate, bench.

Exit codes: 0 success; 2 bad input (schema, query syntax, unknown report,
missing warehouse); 3 warehouse already initialized; 4 a source file was
aborted during ETL; 5 a query failed to bind or execute; 6 a quality
criterion failed; 7 the benchmark was invalid.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import fcntl
import io
import json
import logging
import os
import sys
import tempfile
from datetime import date
from importlib import resources
from pathlib import Path

from .cube import CubeError
from .etl import DEFAULT_THRESHOLD, LoadStats, load_mapping, run_pipeline
from .mdx import MdxBindError, MdxSyntaxError, ResultGrid, execute_mdx, parse_mdx
from .schema import SchemaError, SchemaSyntaxError, parse_schema, reference_schema_text
from .store import MANIFEST, CorruptWarehouseError, StoreError, Warehouse, init_warehouse, open_warehouse

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_EXISTS = 3
EXIT_ABORTED = 4
EXIT_BIND = 5
EXIT_CRITERION = 6
EXIT_BENCH = 7

ENV_WAREHOUSE = "CANCERDW_WAREHOUSE"
EMPTY_TABLE_CELL = "·"
AUDIT_LOG = "audit.log"
ETL_STATS = "etl_stats.json"

log = logging.getLogger("cancerdw")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def format_number(v: float | None, fmt: str) -> str:
    if v is None:
        return "" if fmt == "csv" else EMPTY_TABLE_CELL
    return f"{v:.12g}" if fmt == "csv" else f"{v:.10g}"


def render_rows(header: list[str], rows: list[list[str]], fmt: str, numeric_from: int = 1) -> str:
    """Aligned text table or RFC 4180 CSV (CRLF line endings, minimal quoting)."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = []
    for k, r in enumerate([header, *rows]):
        cells = [c.ljust(w) if i < numeric_from else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))]
        lines.append("  ".join(cells).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_grid(grid: ResultGrid, fmt: str) -> str:
    header = ["", *grid.column_headers]
    rows = [[rh, *(format_number(v, fmt) for v in line)] for rh, line in zip(grid.row_headers, grid.cells)]
    return render_rows(header, rows, fmt)


def render_stats(stats: LoadStats, fmt: str) -> str:
    cols = list(LoadStats.COUNTS)
    rows = [[name, *(str(getattr(s, c)) for c in cols)] for name, s in stats.per_source.items()]
    rows.append(["total", *(str(getattr(stats, c)) for c in cols)])
    return render_rows(["source", *cols], rows, fmt)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


@contextlib.contextmanager
def locked(directory: Path, exclusive: bool):
    """Single writer, many readers: flock on ``<dir>/.lock``."""
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / ".lock", "a+") as fh:
        fcntl.flock(fh.fileno(), fcntl.LOCK_EX if exclusive else fcntl.LOCK_SH)
        try:
            yield
        finally:
            fcntl.flock(fh.fileno(), fcntl.LOCK_UN)


def _warehouse_dir(args) -> Path:
    d = args.warehouse or os.environ.get(ENV_WAREHOUSE)
    if not d:
        raise CliError(f"no warehouse directory: pass --warehouse or set {ENV_WAREHOUSE}", EXIT_INPUT)
    return Path(d)


def _open(directory: Path) -> Warehouse:
    if not (directory / MANIFEST).exists():
        raise CliError(f"{directory}: not an initialized warehouse (run `cancerdw init`)", EXIT_INPUT)
    try:
        return open_warehouse(directory)
    except CorruptWarehouseError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None


def _schema_text(args) -> str:
    if args.schema is None:
        return reference_schema_text()
    try:
        return Path(args.schema).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read schema: {exc}", EXIT_INPUT) from None


def _threshold(args) -> float:
    t = DEFAULT_THRESHOLD if args.threshold is None else args.threshold
    if not 0 < t <= 1:
        raise CliError(f"threshold must lie in (0, 1], got {t}", EXIT_INPUT)
    return t


def _emit(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


def report_ids() -> list[str]:
    folder = resources.files("cancerdw.data").joinpath("reports")
    return sorted(p.name[:-4] for p in folder.iterdir() if p.name.endswith(".mdx"))


def report_text(report_id: str) -> str:
    if report_id not in report_ids():
        raise CliError(f"unknown report {report_id!r}; available: {', '.join(report_ids())}", EXIT_INPUT)
    return resources.files("cancerdw.data").joinpath("reports", f"{report_id}.mdx").read_text("utf-8")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_init(args) -> int:
    directory = _warehouse_dir(args)
    text = _schema_text(args)
    try:
        schema = parse_schema(text)
    except SchemaError as exc:
        raise CliError(f"schema error: {exc}", EXIT_INPUT) from None
    if (directory / MANIFEST).exists():
        raise CliError(f"{directory}: already holds a warehouse", EXIT_EXISTS)
    with locked(directory, exclusive=True):
        try:
            init_warehouse(schema, directory)
        except StoreError as exc:
            raise CliError(str(exc), EXIT_EXISTS) from None
    print(f"initialized {directory}", file=sys.stderr)
    return EXIT_OK


def _run_etl(directory: Path, sources: list[str], mapping_path, threshold: float) -> LoadStats:
    with locked(directory, exclusive=True):
        wh = _open(directory)
        try:
            mapping = load_mapping(mapping_path)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise CliError(f"cannot read mapping: {exc}", EXIT_INPUT) from None
        stats = run_pipeline(sources, wh, mapping, threshold, audit_log=directory / AUDIT_LOG)
        path = directory / ETL_STATS
        history = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {"runs": []}
        history["runs"].append({**stats.to_dict(), "fact_count": wh.fact_count})
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(history, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        os.replace(tmp, path)
    return stats


def cmd_etl(args) -> int:
    directory = _warehouse_dir(args)
    stats = _run_etl(directory, args.sources, args.mapping, _threshold(args))
    _emit(render_stats(stats, args.format))
    for name, err in stats.errors.items():
        print(f"aborted {name}: {err}", file=sys.stderr)
    return EXIT_ABORTED if stats.errors else EXIT_OK


def _execute(args, text: str) -> int:
    try:
        q = parse_mdx(text)
    except MdxSyntaxError as exc:
        raise CliError(f"syntax error: {exc}\n{exc.caret()}", EXIT_INPUT) from None
    directory = _warehouse_dir(args)
    with locked(directory, exclusive=False):
        wh = _open(directory)
        try:
            grid = execute_mdx(q, wh)
        except (MdxBindError, CubeError) as exc:
            raise CliError(f"query error: {exc}", EXIT_BIND) from None
    _emit(render_grid(grid, args.format))
    return EXIT_OK


def cmd_query(args) -> int:
    if (args.mdx is None) == (args.file is None):
        raise CliError("pass exactly one of an MDX text or --file", EXIT_INPUT)
    if args.file is not None:
        try:
            text = Path(args.file).read_text(encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot read query: {exc}", EXIT_INPUT) from None
    else:
        text = args.mdx
    return _execute(args, text)


def cmd_report(args) -> int:
    if args.report_id is None:
        _emit("".join(f"{r}\n" for r in report_ids()))
        return EXIT_OK
    return _execute(args, report_text(args.report_id))


def _dataset_spec(args):
    from .evalharness import SyntheticDatasetSpec

    kw = {}
    for name in ("patients", "facts", "typo_rate", "dup_rate", "seed"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    try:
        if getattr(args, "start", None):
            kw["start"] = date.fromisoformat(args.start)
        if getattr(args, "end", None):
            kw["end"] = date.fromisoformat(args.end)
        return SyntheticDatasetSpec(**kw)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None


def cmd_generate(args) -> int:
    from .evalharness import generate_dataset

    spec = _dataset_spec(args)
    try:
        ds = generate_dataset(spec, args.out)
    except OSError as exc:
        raise CliError(f"cannot write dataset: {exc}", EXIT_INPUT) from None
    for p in [*ds.sources, ds.truth]:
        print(p)
    return EXIT_OK


def render_criteria(results, fmt: str) -> str:
    rows = []
    for r in results:
        metrics = " ".join(f"{k}={v:.6g}" for k, v in r.metrics.items())
        rows.append([r.criterion, r.name, "pass" if r.passed else "FAIL", metrics, r.narrative])
    return render_rows(["id", "criterion", "result", "metrics", "narrative"], rows, fmt, numeric_from=99)


def cmd_evaluate(args) -> int:
    from .evalharness import check_criteria, generate_dataset, load_dataset

    threshold = _threshold(args)
    with contextlib.ExitStack() as stack:
        if args.full:
            dataset_dir = Path(args.dataset) if args.dataset else Path(stack.enter_context(tempfile.TemporaryDirectory()))
            ds = generate_dataset(_dataset_spec(args), dataset_dir)
            if args.warehouse or os.environ.get(ENV_WAREHOUSE):
                directory = _warehouse_dir(args)
            else:
                directory = Path(stack.enter_context(tempfile.TemporaryDirectory())) / "wh"
            if (directory / MANIFEST).exists():
                raise CliError(f"{directory}: already holds a warehouse", EXIT_EXISTS)
            with locked(directory, exclusive=True):
                init_warehouse(parse_schema(_schema_text(args)), directory)
            stats = _run_etl(directory, [str(p) for p in ds.sources], None, threshold)
            if stats.errors:
                for name, err in stats.errors.items():
                    print(f"aborted {name}: {err}", file=sys.stderr)
        else:
            if not args.dataset:
                raise CliError("evaluate needs --dataset (or --full)", EXIT_INPUT)
            ds = load_dataset(args.dataset)
            directory = _warehouse_dir(args)
        path = directory / ETL_STATS
        if not path.exists():
            raise CliError(f"{directory}: no ETL statistics; run `cancerdw etl` first", EXIT_INPUT)
        runs = json.loads(path.read_text(encoding="utf-8"))["runs"]
        with locked(directory, exclusive=False):
            wh = _open(directory)
            results = check_criteria(wh, LoadStats.from_dict(runs[-1]), directory / AUDIT_LOG, ds.truth,
                                     ds.directory, fact_count_history=[r["fact_count"] for r in runs])
    _emit(render_criteria(results, args.format))
    return EXIT_OK if all(r.passed for r in results) else EXIT_CRITERION


def render_bench(report, fmt: str) -> str:
    d = report.to_dict()
    env = d.pop("environment")
    rows = [[k, f"{v:.6g}" if isinstance(v, float) else str(v)] for k, v in d.items()]
    rows += [[f"env.{k}", str(v)] for k, v in env.items()]
    return render_rows(["key", "value"], rows, fmt, numeric_from=99)


def cmd_bench(args) -> int:
    from .evalharness import (BenchmarkInvalid, SyntheticDatasetSpec, bench_figure3, build_oltp_emulation,
                              generate_dataset, warehouse_from_oltp)

    patients = args.patients or max(1, min(5000, args.facts // 20))
    try:
        spec = SyntheticDatasetSpec(patients=patients, facts=args.facts, typo_rate=0.0, dup_rate=0.0,
                                    seed=args.seed if args.seed is not None else 42)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    with tempfile.TemporaryDirectory() as tmp:
        ds = generate_dataset(spec, tmp)
        oltp = build_oltp_emulation(ds.directory)
        wh = warehouse_from_oltp(oltp)
        try:
            report = bench_figure3(wh, oltp, args.query, args.reps)
        except (BenchmarkInvalid, KeyError) as exc:
            raise CliError(f"benchmark invalid: {exc}", EXIT_BENCH) from None
    _emit(render_bench(report, args.format))
    if report.asserted and not report.ordering_holds:
        print("warehouse path was slower than the row store", file=sys.stderr)
        return EXIT_CRITERION
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress: bool) -> argparse.ArgumentParser:
        # subcommand copies use SUPPRESS so they never clobber flags given before the subcommand
        def d(v):
            return argparse.SUPPRESS if suppress else v

        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--warehouse", "-w", default=d(None),
                       help=f"warehouse directory (default: ${ENV_WAREHOUSE})")
        g.add_argument("--schema", default=d(None), help="schema file (default: bundled reference schema)")
        g.add_argument("--format", choices=("table", "csv"), default=d("table"), help="output format")
        g.add_argument("--threshold", type=float, default=d(None),
                       help=f"fuzzy-match threshold in (0, 1] (default {DEFAULT_THRESHOLD})")
        g.add_argument("--seed", type=int, default=d(None), help="random seed for generated data")
        g.add_argument("--verbose", "-v", action="count", default=d(0), help="more logging on stderr")
        return g

    common = global_flags(suppress=True)
    p = argparse.ArgumentParser(prog="cancerdw", description=__doc__.split("\n\n")[0], parents=[global_flags(False)],
                                epilog=__doc__.split("\n\n", 1)[1], formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("init", parents=[common], help="create an empty warehouse")
    s.set_defaults(func=cmd_init)

    s = sub.add_parser("etl", parents=[common], help="load source files through the ETL pipeline")
    s.add_argument("sources", nargs="+", help="CSV exports, loaded in the order given")
    s.add_argument("--mapping", help="source mapping JSON (default: bundled mapping)")
    s.set_defaults(func=cmd_etl)

    s = sub.add_parser("query", parents=[common], help="run an MDX query")
    s.add_argument("mdx", nargs="?", help="MDX text")
    s.add_argument("--file", "-f", help="read the MDX text from a file")
    s.set_defaults(func=cmd_query)

    s = sub.add_parser("report", parents=[common], help="run a canned report (no id lists them)")
    s.add_argument("report_id", nargs="?")
    s.set_defaults(func=cmd_report)

    def dataset_args(s):
        s.add_argument("--patients", type=int)
        s.add_argument("--facts", type=int)
        s.add_argument("--typo-rate", type=float, dest="typo_rate")
        s.add_argument("--dup-rate", type=float, dest="dup_rate")
        s.add_argument("--start", help="first treatment date (YYYY-MM-DD)")
        s.add_argument("--end", help="last treatment date (YYYY-MM-DD)")

    s = sub.add_parser("generate", parents=[common], help="write a synthetic dataset")
    s.add_argument("out", help="output directory")
    dataset_args(s)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("evaluate", parents=[common], help="check the eight quality criteria")
    s.add_argument("--full", action="store_true", help="generate, load and check in one go")
    s.add_argument("--dataset", help="generated dataset directory")
    dataset_args(s)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("bench", parents=[common], help="time the warehouse against the row store")
    s.add_argument("--facts", type=int, default=100_000)
    s.add_argument("--patients", type=int)
    s.add_argument("--reps", type=int, default=10)
    s.add_argument("--query", default="Q1", help="benchmark query id (Q1, Q2)")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"cancerdw: {exc}", file=sys.stderr)
        return exc.code
    except SchemaSyntaxError as exc:
        print(f"cancerdw: schema error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
