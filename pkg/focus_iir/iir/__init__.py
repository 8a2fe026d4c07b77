
from .core import (
    Theta,
    SSMScalars,
    ImpulseParams,
    freq_response,
    poles,
    max_pole_modulus,
    is_underdamped,
    in_stability_triangle,
    impulse_response,
    apply_iir_recurrent,
    ssm_to_iir,
    simulate_ssm,
    impulse_params,
    response_bank,
)
from .export import impulse_response_frame, freq_response_frame, write_csv

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
    "impulse_response_frame",
    "freq_response_frame",
    "write_csv",
]
