"""
Order-2 IIR filter mathematics.

A filter is described by its feedback pair ``theta = (theta0, theta1)`` with transfer function

    H(z) = 1 / (1 + theta0 * z^-1 + theta1 * z^-2)

so its poles are the roots of ``z^2 + theta0*z + theta1``. Runtime filtering is discrete; the
continuous-time quantities in ``impulse_params`` are analysis diagnostics only.
"""
import math
from typing import Literal, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from pydantic import BaseModel
from scipy.signal import lfilter

from ..tensor.ops import REAL

Theta = Tuple[float, float]


class SSMScalars(BaseModel):
    """Per-channel parameters of a diagonal SSM: s[t] = A s[t-1] + B x[t], y[t] = C s[t] + D x[t]."""
    A: float
    B: float
    C: float
    D: float


class ImpulseParams(BaseModel):
    """Decay and oscillation diagnostics of a single filter."""
    pole_moduli: Tuple[float, float]
    pole_angles: Tuple[float, float]
    spectral_radius: float
    decay_rate: float  # -ln(spectral_radius) per step
    oscillation_frequency: float  # cycles per step, 0 for real poles
    damping: Literal["underdamped", "critically_damped", "overdamped"]
    discriminant: float
    envelope_rate: Optional[float] = None
    omega: Optional[float] = None


def freq_response(theta: Theta, f: Union[float, np.ndarray]) -> Union[complex, np.ndarray]:
    """Evaluate H at normalized frequency ``f`` (cycles per sample), scalar or array."""
    theta0, theta1 = theta
    z = np.exp(-2j * np.pi * np.asarray(f, dtype=float))
    h = 1.0 / (1.0 + theta0 * z + theta1 * z * z)
    return complex(h) if np.ndim(h) == 0 else h


def poles(theta: Theta) -> Tuple[complex, complex]:
    """Roots of z^2 + theta0*z + theta1 by the quadratic formula."""
    theta0, theta1 = theta
    root = np.emath.sqrt(theta0 * theta0 - 4.0 * theta1)
    return complex((-theta0 + root) / 2.0), complex((-theta0 - root) / 2.0)


def max_pole_modulus(theta: Theta) -> float:
    return max(abs(p) for p in poles(theta))


def is_underdamped(theta: Theta) -> bool:
    theta0, theta1 = theta
    return theta0 * theta0 < 4.0 * theta1


def in_stability_triangle(theta: Theta) -> bool:
    """|theta1| < 1 and |theta0| < 1 + theta1: both poles inside the unit circle."""
    theta0, theta1 = theta
    return abs(theta1) < 1.0 and abs(theta0) < 1.0 + theta1


def impulse_response(theta: Theta, n_steps: int) -> np.ndarray:
    """h[0] = 1, h[t] = -theta0*h[t-1] - theta1*h[t-2]."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    impulse = np.zeros(n_steps)
    impulse[0] = 1.0
    return lfilter([1.0], [1.0, theta[0], theta[1]], impulse)


def apply_iir_recurrent(b0: float, b1: float, b2: float, a1: float, a2: float, x: Sequence[float]) -> np.ndarray:
    """
    y[t] = b0 x[t] + b1 x[t-1] + b2 x[t-2] - a1 y[t-1] - a2 y[t-2], zero initial conditions.
    """
    return lfilter([b0, b1, b2], [1.0, a1, a2], np.asarray(x, dtype=float))


def ssm_to_iir(s: SSMScalars) -> Tuple[float, float, float]:
    """
    Map a diagonal SSM to IIR coefficients ``(b0, b1, a1)`` with ``b2 = a2 = 0``.

    Eliminating the state gives y[t] = A y[t-1] + (CB + D) x[t] - AD x[t-1].
    """
    return s.C * s.B + s.D, -s.A * s.D, -s.A


def simulate_ssm(s: SSMScalars, x: Sequence[float]) -> np.ndarray:
    """Run the SSM recurrence step by step from a zero state."""
    state = 0.0
    out = np.empty(len(x))
    for t, xt in enumerate(x):
        state = s.A * state + s.B * xt
        out[t] = s.C * state + s.D * xt
    return out


def impulse_params(theta: Theta) -> ImpulseParams:
    theta0, theta1 = theta
    p = poles(theta)
    moduli = (abs(p[0]), abs(p[1]))
    angles = (math.atan2(p[0].imag, p[0].real), math.atan2(p[1].imag, p[1].real))
    radius = max(moduli)
    discriminant = theta0 * theta0 - 4.0 * theta1
    if discriminant < 0:
        damping = "underdamped"
        oscillation = abs(angles[0]) / (2.0 * math.pi)
    elif discriminant == 0:
        damping = "critically_damped"
        oscillation = 0.0
    else:
        damping = "overdamped"
        oscillation = 0.0
    envelope_rate = theta0 / (2.0 * theta1) if theta1 > 0 else None
    omega = math.sqrt(-discriminant) / (2.0 * theta1) if discriminant < 0 and theta1 > 0 else None
    return ImpulseParams(
        pole_moduli=moduli,
        pole_angles=angles,
        spectral_radius=radius,
        decay_rate=-math.log(radius) if radius > 0 else math.inf,
        oscillation_frequency=oscillation,
        damping=damping,
        discriminant=discriminant,
        envelope_rate=envelope_rate,
        omega=omega,
    )


def response_bank(theta: torch.Tensor, nfft: int) -> torch.Tensor:
    """
    Differentiable frequency response of every filter in ``theta``.

    Args:
        theta: ``(..., 2)`` real coefficients.
        nfft: number of evenly spaced frequencies k/nfft, k = 0..nfft-1.

    Returns:
        complex ``(..., nfft)`` tensor.
    """
    k = torch.arange(nfft, dtype=REAL, device=theta.device)
    angle = -2.0 * math.pi * k / nfft
    z1 = torch.polar(torch.ones_like(angle), angle)
    z2 = torch.polar(torch.ones_like(angle), 2.0 * angle)
    den = 1.0 + theta[..., 0:1] * z1 + theta[..., 1:2] * z2
    return 1.0 / den


__all__ = [
    "Theta",
    "SSMScalars",
    "ImpulseParams",
    "freq_response",
    "poles",
    "max_pole_modulus",
    "is_underdamped",
    "in_stability_triangle",
    "impulse_response",
    "apply_iir_recurrent",
    "ssm_to_iir",
    "simulate_ssm",
    "impulse_params",
    "response_bank",
]
