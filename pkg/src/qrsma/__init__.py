"""Quantized downlink MU-MIMO rate-splitting precoding under a power budget.

A numerical-optimization library plus Monte Carlo harness for joint
precoding, antenna selection and transmit power control at a base station
with per-antenna arbitrary-resolution DACs, imperfect transmitter-side CSI
and a total (transmit + circuit) power budget.
"""

from .sysmodel import ConfigError, QuantizationProfile, SystemConfig, distortion_factor
from .channel import ChannelSet, draw_channels, draw_geometry, one_ring_covariance
from .power import PowerModel, circuit_power, dac_power, smooth_antenna_power
from .rates import (
    assemble_rate_matrices,
    instantaneous_rates,
    lagrangian_value,
    logsumexp_softmin,
    lower_bound_rates,
)
from .optimizer import InfeasibleBudgetError, PrecoderSolution, qpcas, verify_solution
from .baselines import ALGORITHMS, qgpirs, qpcas_sdma, qrzf, solve

__version__ = "0.1.0"
