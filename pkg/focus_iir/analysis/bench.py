"""
Forward-pass scaling measurements for the Focus layer and a full-attention reference.
"""
import logging
import math
import time
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch
from torch.utils.flop_counter import FlopCounterMode

from ..config import FocusConfig
from ..errors import ConfigError
from ..model.attention import full_causal_attention
from ..model.layer import FocusLayer
from ..tensor.ops import REAL

logger = logging.getLogger(__name__)

DEFAULT_LENGTHS = (1024, 2048, 4096, 8192, 16384)
BENCH_COLUMNS = ["L", "focus_seconds", "focus_flops", "attention_seconds", "attention_flops"]


def _fft_flops(n: int) -> float:
    return 5.0 * n * math.log2(max(n, 2))


def count_flops(fn: Callable[[], torch.Tensor]) -> float:
    """Matmul FLOPs of one call to ``fn`` as recorded by torch's flop counter; FFTs are not counted."""
    with torch.no_grad(), FlopCounterMode(display=False) as counter:
        fn()
    return float(counter.get_total_flops())


def focus_fft_flops(config: FocusConfig, batch: int = 1) -> float:
    """Radix-2 cost of the FFTs in one ``FocusLayer`` forward: global conv plus per-bin transforms."""
    L, D = config.L, config.width
    gconv = 3 * _fft_flops(2 * L) / 2
    spectral = 2 * config.nbins * _fft_flops(config.nfft)
    return float(batch * D * (gconv + spectral))


def focus_forward_flops(layer: FocusLayer, x: torch.Tensor) -> float:
    """Counted matmul FLOPs of ``layer(x)`` plus the analytic FFT term."""
    batch = int(np.prod(x.shape[:-2])) if x.dim() > 2 else 1
    return count_flops(lambda: layer(x)) + focus_fft_flops(layer.config, batch)


def attention_matmul_flops(L: int, width: int, d_att: Optional[int] = None) -> float:
    """Closed-form matmul FLOPs of the full-attention reference on one sequence."""
    A = d_att or width
    return float(3 * 2 * L * width * A + 4 * L * L * A)


def time_forward(fn: Callable[[], torch.Tensor], repeats: int = 3) -> float:
    """Best wall time of ``repeats`` calls after one warm-up call."""
    fn()
    best = math.inf
    for _ in range(max(1, repeats)):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    ok = np.isfinite(ys) & (ys > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(xs[ok]), np.log(ys[ok]), 1)[0])


def bench_layer(L: int, width: int, chunk: int, seed: int = 0) -> FocusLayer:
    config = FocusConfig(L=L, width=width, chunk=min(chunk, L))
    layer = FocusLayer(config)
    layer.reset_parameters(torch.Generator().manual_seed(seed))
    return layer


def bench_focus(L: int, width: int, chunk: int, repeats: int = 3, seed: int = 0) -> Tuple[float, float]:
    """Best forward time and counted FLOPs of one Focus layer."""
    layer = bench_layer(L, width, chunk, seed)
    x = torch.randn(1, L, width, dtype=REAL, generator=torch.Generator().manual_seed(seed))
    with torch.no_grad():
        seconds = time_forward(lambda: layer(x), repeats)
    return seconds, focus_forward_flops(layer, x)


def bench_attention(L: int, width: int, repeats: int = 3, seed: int = 0) -> float:
    layer = bench_layer(L, width, L, seed)
    x = torch.randn(1, L, width, dtype=REAL, generator=torch.Generator().manual_seed(seed))
    with torch.no_grad():
        return time_forward(lambda: full_causal_attention(x, x, layer.q, layer.k, layer.v), repeats)


def run_bench(
    lengths: Sequence[int] = DEFAULT_LENGTHS,
    width: int = 64,
    chunk: int = 32,
    repeats: int = 3,
    attention_max_len: int = 4096,
    seed: int = 0,
    single_thread: bool = True,
) -> pd.DataFrame:
    """
    Time one Focus layer forward and the full-attention reference for each length.

    The reference is skipped (NaN time) above ``attention_max_len`` to bound its L x L memory.
    """
    if not lengths:
        raise ConfigError("bench needs at least one length")
    if single_thread:
        torch.set_num_threads(1)
    rows = []
    for L in lengths:
        focus_seconds, focus_flops = bench_focus(L, width, chunk, repeats, seed)
        if L <= attention_max_len:
            attention_seconds = bench_attention(L, width, repeats, seed)
        else:
            logger.warning(f"Skipping reference attention at L={L} (> attention_max_len={attention_max_len})")
            attention_seconds = math.nan
        rows.append({
            "L": L,
            "focus_seconds": focus_seconds,
            "focus_flops": focus_flops,
            "attention_seconds": attention_seconds,
            "attention_flops": attention_matmul_flops(L, width),
        })
        logger.info(f"L={L}: focus {focus_seconds:.4f}s, attention {attention_seconds:.4f}s")
    return pd.DataFrame(rows, columns=BENCH_COLUMNS)


def width_ratio(L: int, width: int, chunk: int = 32, repeats: int = 3, seed: int = 0) -> float:
    """Focus forward time at ``2*width`` over the time at ``width``."""
    return bench_focus(L, 2 * width, chunk, repeats, seed)[0] / bench_focus(L, width, chunk, repeats, seed)[0]


def summarize(frame: pd.DataFrame, ratio: Optional[float] = None) -> Dict[str, float]:
    summary = {
        "focus_slope": loglog_slope(frame["L"], frame["focus_seconds"]),
        "attention_slope": loglog_slope(frame["L"], frame["attention_seconds"]),
        "focus_flops_slope": loglog_slope(frame["L"], frame["focus_flops"]),
        "attention_flops_slope": loglog_slope(frame["L"], frame["attention_flops"]),
    }
    if ratio is not None:
        summary["width_doubling_ratio"] = ratio
    return summary


__all__ = [
    "DEFAULT_LENGTHS",
    "BENCH_COLUMNS",
    "count_flops",
    "focus_fft_flops",
    "focus_forward_flops",
    "attention_matmul_flops",
    "time_forward",
    "loglog_slope",
    "bench_layer",
    "bench_focus",
    "bench_attention",
    "run_bench",
    "width_ratio",
    "summarize",
]
