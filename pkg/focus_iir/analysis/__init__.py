from .filters import FilterReport, inspect_filters
from .bench import (
    DEFAULT_LENGTHS,
    BENCH_COLUMNS,
    focus_forward_flops,
    attention_matmul_flops,
    loglog_slope,
    run_bench,
    width_ratio,
    summarize,
)

__all__ = [
    "FilterReport",
    "inspect_filters",
    "DEFAULT_LENGTHS",
    "BENCH_COLUMNS",
    "focus_forward_flops",
    "attention_matmul_flops",
    "loglog_slope",
    "run_bench",
    "width_ratio",
    "summarize",
]
