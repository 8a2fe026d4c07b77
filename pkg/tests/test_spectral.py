import numpy as np
import pytest
import torch
from torch.autograd import gradcheck

from focus_iir.errors import ConfigError, ContractError, DimensionError
from focus_iir.iir import impulse_response
from focus_iir.model.spectral import ChunkSpectrum, apply_filters, chunk_fft, ichunk_fft


def zero_theta(nbins, d, f=1):
    return torch.zeros(nbins, d, f, 2, dtype=torch.float64)


def test_constant_input_is_dc_only():
    x = torch.full((8, 2), 1.5, dtype=torch.float64)
    X = chunk_fft(x, 4)
    assert X.nbins == 2 and X.data.shape == (2, 4, 2)
    expected = torch.zeros(2, 4, 2, dtype=torch.complex128)
    expected[:, 0, :] = 6.0
    assert torch.allclose(X.data, expected)


def test_bins_are_ffts_of_halves(gen):
    x = torch.randn(8, 3, dtype=torch.float64, generator=gen)
    X = chunk_fft(x, 4)
    for r in range(2):
        assert torch.allclose(X.data[r], torch.fft.fft(x[4 * r:4 * r + 4].to(torch.complex128), dim=0))


def test_round_trip(gen):
    x = torch.randn(2, 64, 3, dtype=torch.float64, generator=gen)
    assert float((ichunk_fft(chunk_fft(x, 8)) - x).abs().max()) < 1e-10


def test_indivisible_length_needs_padding(gen):
    x = torch.randn(30, 2, dtype=torch.float64, generator=gen)
    with pytest.raises(ConfigError):
        chunk_fft(x, 8)
    X = chunk_fft(x, 8, pad=True)
    assert X.nbins == 4 and X.padded
    back = ichunk_fft(X)
    assert back.shape == (30, 2)
    assert float((back - x).abs().max()) < 1e-10


def test_identity_filter(gen):
    x = torch.randn(32, 4, dtype=torch.float64, generator=gen)
    y = apply_filters(chunk_fft(x, 8), zero_theta(4, 4))
    assert float((y - x).abs().max()) < 1e-10


def test_filter_bank_is_summed(gen):
    x = torch.randn(16, 2, dtype=torch.float64, generator=gen)
    y = apply_filters(chunk_fft(x, 4), zero_theta(4, 2, f=2))
    assert float((y - 2 * x).abs().max()) < 1e-10


def test_single_bin_is_circular_correlation_with_periodized_response():
    rng = np.random.default_rng(3)
    N = 8
    x = rng.normal(size=N)
    theta = tuple(rng.uniform(0.05, 0.9, size=2))
    h = impulse_response(theta, 250 * N)
    h_periodic = h.reshape(-1, N).sum(axis=0)
    expected = np.array([sum(h_periodic[m] * x[(n + m) % N] for m in range(N)) for n in range(N)])
    y = apply_filters(
        chunk_fft(torch.tensor(x).reshape(N, 1), N),
        torch.tensor(theta, dtype=torch.float64).reshape(1, 1, 1, 2),
    )
    assert np.max(np.abs(y.reshape(-1).numpy() - expected)) < 1e-9


def test_linearity(gen):
    theta = torch.rand(2, 3, 1, 2, dtype=torch.float64, generator=gen)
    x1 = torch.randn(16, 3, dtype=torch.float64, generator=gen)
    x2 = torch.randn(16, 3, dtype=torch.float64, generator=gen)
    lhs = apply_filters(chunk_fft(0.3 * x1 - 2.0 * x2, 8), theta)
    rhs = 0.3 * apply_filters(chunk_fft(x1, 8), theta) - 2.0 * apply_filters(chunk_fft(x2, 8), theta)
    assert float((lhs - rhs).abs().max()) < 1e-10


def test_bin_locality(gen):
    theta = torch.rand(4, 2, 1, 2, dtype=torch.float64, generator=gen)
    x = torch.randn(16, 2, dtype=torch.float64, generator=gen)
    bumped = x.clone()
    bumped[9, 1] += 1.0  # inside bin 2
    diff = (apply_filters(chunk_fft(bumped, 4), theta) - apply_filters(chunk_fft(x, 4), theta)).abs()
    assert float(diff[:8].max()) < 1e-13
    assert float(diff[12:].max()) < 1e-13
    assert float(diff[8:12].max()) > 0.0


def test_gradients_wrt_input_and_theta(gen):
    x = torch.randn(8, 2, dtype=torch.float64, generator=gen, requires_grad=True)
    theta = (0.1 + 0.8 * torch.rand(1, 2, 1, 2, dtype=torch.float64, generator=gen)).requires_grad_()
    assert gradcheck(lambda a, t: apply_filters(chunk_fft(a, 8), t), (x, theta), eps=1e-5, atol=1e-8, rtol=1e-4)


def test_bin_count_mismatch(gen):
    X = chunk_fft(torch.randn(16, 2, dtype=torch.float64, generator=gen), 4)
    with pytest.raises(DimensionError):
        apply_filters(X, zero_theta(3, 2))
    with pytest.raises(DimensionError):
        apply_filters(X, zero_theta(4, 3))


def test_imaginary_residual_is_reported(gen):
    data = torch.randn(1, 4, 1, dtype=torch.complex128, generator=gen)
    X = ChunkSpectrum(data=data, nbins=1, nfft=4, length=4)
    with pytest.raises(ContractError):
        apply_filters(X, zero_theta(1, 1))
    apply_filters(X, zero_theta(1, 1), check_residual=False)


def test_batched_theta_broadcasts(gen):
    x = torch.randn(3, 16, 2, dtype=torch.float64, generator=gen)
    theta = torch.rand(3, 2, 2, 1, 2, dtype=torch.float64, generator=gen)
    y = apply_filters(chunk_fft(x, 8), theta)
    assert y.shape == x.shape
    single = apply_filters(chunk_fft(x[1], 8), theta[1])
    assert float((y[1] - single).abs().max()) < 1e-12
