import math

import pytest
import torch

from focus_iir.analysis.bench import (
    BENCH_COLUMNS,
    DEFAULT_LENGTHS,
    attention_matmul_flops,
    bench_layer,
    count_flops,
    focus_fft_flops,
    focus_forward_flops,
    loglog_slope,
    run_bench,
    summarize,
    width_ratio,
)
from focus_iir.errors import ConfigError
from focus_iir.model.attention import full_causal_attention


def test_loglog_slope():
    xs = [1, 2, 4, 8, 16]
    assert loglog_slope(xs, [x * x for x in xs]) == pytest.approx(2.0)
    assert loglog_slope(xs, [3.0 * x for x in xs]) == pytest.approx(1.0)
    assert math.isnan(loglog_slope([1, 2], [1.0, math.nan]))


def test_counted_flops_of_a_small_layer():
    layer = bench_layer(16, 2, 4)
    x = torch.randn(1, 16, 2, dtype=torch.float64, generator=torch.Generator().manual_seed(0))
    # qkv 384, chunked scores and values 512, gates 512, coefficient MLP 768
    matmuls = 384 + 512 + 512 + 768
    assert focus_forward_flops(layer, x) == pytest.approx(matmuls + focus_fft_flops(layer.config))


def test_attention_closed_form_matches_counter():
    layer = bench_layer(32, 4, 32)
    x = torch.randn(1, 32, 4, dtype=torch.float64, generator=torch.Generator().manual_seed(0))
    counted = count_flops(lambda: full_causal_attention(x, x, layer.q, layer.k, layer.v))
    assert counted == attention_matmul_flops(32, 4)


def test_flop_counts_scale_as_claimed():
    lengths = [256, 512, 1024, 2048, 4096]
    focus = []
    for L in lengths:
        layer = bench_layer(L, 16, 32)
        focus.append(focus_forward_flops(layer, torch.zeros(1, L, 16, dtype=torch.float64)))
    attention = [attention_matmul_flops(L, 64) for L in DEFAULT_LENGTHS]
    assert loglog_slope(lengths, focus) < 1.4
    assert loglog_slope(DEFAULT_LENGTHS, attention) > 1.7


def test_small_run_schema():
    frame = run_bench(lengths=[32, 64], width=4, chunk=8, repeats=1, attention_max_len=32, single_thread=False)
    assert list(frame.columns) == BENCH_COLUMNS
    assert frame["L"].tolist() == [32, 64]
    assert (frame["focus_seconds"] > 0).all()
    assert frame["attention_seconds"].iloc[0] > 0
    assert math.isnan(frame["attention_seconds"].iloc[1])
    summary = summarize(frame, ratio=1.5)
    assert set(summary) == {
        "focus_slope", "attention_slope", "focus_flops_slope", "attention_flops_slope", "width_doubling_ratio",
    }
    assert math.isnan(summary["attention_slope"])


def test_empty_lengths():
    with pytest.raises(ConfigError):
        run_bench(lengths=[], single_thread=False)


@pytest.mark.slow
def test_forward_time_is_subquadratic():
    frame = run_bench(attention_max_len=8192)
    summary = summarize(frame)
    assert summary["focus_slope"] < 1.4
    assert summary["attention_slope"] > 1.7


@pytest.mark.slow
def test_width_doubling_roughly_doubles_time():
    assert 1.6 <= width_ratio(4096, 64) <= 2.6
