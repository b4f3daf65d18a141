"""Synthetic data, baseline row store, quality checks and benchmarks."""

from .bench import QUERIES, BenchmarkInvalid, BenchReport, bench_figure3
from .criteria import CRITERIA, THRESHOLDS, CriterionResult, check_criteria
from .generate import Dataset, SyntheticDatasetSpec, TruthEntry, generate_dataset, load_dataset, read_truth
from .golden import GOLDEN_QUERIES
from .oltp import LogicalQuery, OltpEmulation, build_oltp_emulation
from .warehouse import warehouse_from_oltp

__all__ = [
    "QUERIES", "BenchmarkInvalid", "BenchReport", "bench_figure3",
    "CRITERIA", "THRESHOLDS", "CriterionResult", "check_criteria",
    "Dataset", "SyntheticDatasetSpec", "TruthEntry", "generate_dataset", "load_dataset", "read_truth",
    "GOLDEN_QUERIES", "LogicalQuery", "OltpEmulation", "build_oltp_emulation", "warehouse_from_oltp",
]
