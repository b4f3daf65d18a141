"""Warehouse versus row-store timing on fixed analytical queries."""

from __future__ import annotations

import math
import platform
import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import _kernels
from ..cube import Cube
from ..store import Warehouse
from .oltp import LogicalQuery, OltpEmulation

MIN_REPS = 10
MIN_ASSERT_FACTS = 100_000
REL_TOL = 1e-9

QUERIES = {
    # two hierarchy levels on the group-by, one filter on each other dimension
    "Q1": LogicalQuery(
        "Q1",
        axes=(("DimCancerType", "organ"), ("DimCancerType", "cancerName")),
        slicers=(("DimPatient", "sex", "F"), ("DimProcedure", "kind", "Chemotherapy"), ("DimDate", "year", 2011)),
        measures=("cost", "deaths", "patients", "deathRate"),
    ),
    "Q2": LogicalQuery(
        "Q2",
        axes=(("DimDate", "year"), ("DimDate", "quarter")),
        slicers=(("DimPatient", "sex", "M"), ("DimProcedure", "kind", "Surgery"), ("DimCancerType", "organ", "Lung")),
        measures=("cost", "deathRate"),
    ),
}


class BenchmarkInvalid(Exception):
    """The two backends disagreed, or the run was too small to mean anything."""


@dataclass
class BenchReport:
    query_id: str
    n_facts: int
    reps: int
    warehouse_median: float
    warehouse_spread: float
    oltp_median: float
    oltp_spread: float
    warehouse_cold_median: float
    result_cells: int
    asserted: bool
    ordering_holds: bool
    note: str = ""
    environment: dict = field(default_factory=dict)

    @property
    def speedup(self) -> float:
        return self.oltp_median / self.warehouse_median if self.warehouse_median > 0 else math.inf

    def to_dict(self) -> dict:
        d = asdict(self)
        d["speedup"] = self.speedup
        return d


def _normalize(cells: dict) -> dict:
    return {tuple(str(v) for v in k): v for k, v in cells.items()}


def results_equal(a: dict, b: dict, rel: float = REL_TOL) -> bool:
    a, b = _normalize(a), _normalize(b)
    if a.keys() != b.keys():
        return False
    for k, ca in a.items():
        cb = b[k]
        if ca.keys() != cb.keys():
            return False
        for m, v in ca.items():
            if not math.isclose(v, cb[m], rel_tol=rel, abs_tol=1e-12):
                return False
    return True


def _spread(xs: list[float]) -> float:
    q = np.percentile(xs, [25, 75])
    return float(q[1] - q[0])


def environment() -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "machine": platform.machine(),
        "kernels": _kernels.backend,
    }


def bench_figure3(wh: Warehouse, oltp: OltpEmulation, query_id: str = "Q1", reps: int = MIN_REPS,
                  query: LogicalQuery | None = None) -> BenchReport:
    """Time ``query_id`` on both backends after checking they agree.

    The first run of each backend is a discarded warm-up and doubles as the
    result-equality gate; every timed repetition is compared again. Warehouse
    timings use a warm memo; a cold variant that clears the memo before every
    repetition is reported alongside.
    """
    if reps < MIN_REPS:
        raise BenchmarkInvalid(f"need at least {MIN_REPS} repetitions, got {reps}")
    q = query or QUERIES[query_id]
    if wh.fact_count != oltp.n_events:
        raise BenchmarkInvalid(f"warehouse holds {wh.fact_count} facts but row store holds {oltp.n_events}")
    cube = Cube(wh)

    def run_wh():
        return cube.aggregate(q.axes, q.slicers, q.measures).cells

    expected = oltp.query(q)
    got = run_wh()
    if not results_equal(got, expected):
        raise BenchmarkInvalid(f"{q.query_id}: warehouse and row-store results differ")

    wh_times, oltp_times, cold_times = [], [], []
    for _ in range(reps):
        t0 = time.perf_counter()
        got = run_wh()
        wh_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        ref = oltp.query(q)
        oltp_times.append(time.perf_counter() - t0)
        cube.clear()
        t0 = time.perf_counter()
        run_wh()
        cold_times.append(time.perf_counter() - t0)
        if not results_equal(got, ref):
            raise BenchmarkInvalid(f"{q.query_id}: results diverged during timing")

    n = wh.fact_count
    wm, om = statistics.median(wh_times), statistics.median(oltp_times)
    asserted = n >= MIN_ASSERT_FACTS
    return BenchReport(
        query_id=q.query_id, n_facts=n, reps=reps,
        warehouse_median=wm, warehouse_spread=_spread(wh_times),
        oltp_median=om, oltp_spread=_spread(oltp_times),
        warehouse_cold_median=statistics.median(cold_times),
        result_cells=len(expected), asserted=asserted, ordering_holds=wm <= om,
        note="" if asserted else "below assertion size",
        environment=environment(),
    )
