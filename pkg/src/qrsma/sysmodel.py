"""Scenario configuration and the additive quantization-noise model.

The DAC nonlinearity is replaced by its linear surrogate
``x_q = Phi_alpha x + q`` with ``q ~ CN(0, Phi_alpha Phi_beta diag(P F F^H))``,
where ``Phi_alpha = I - Phi_beta`` and ``beta_i`` is the normalized MSE of an
MMSE scalar quantizer with ``b_i`` bits.  Everything downstream of the
optimizer treats quantization statistically through these diagonals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "ConfigError",
    "SystemConfig",
    "QuantizationProfile",
    "distortion_factor",
    "quantize_signal",
    "quantization_noise_cov",
    "dbm_to_watts",
    "watts_to_dbm",
    "thermal_noise_watts",
]


class ConfigError(ValueError):
    """Raised for invalid scenario parameters or malformed config input."""


# MMSE (Lloyd-Max) distortion of a unit-variance Gaussian for 2^b levels,
# b = 1..5.  Generated by the centroid/boundary fixed-point oracle in
# tests/test_sysmodel.py (converged to 1e-14 centroid movement); the widely
# quoted four-digit table agrees to <0.25%.
_LLOYD_MAX_BETA = {
    1: 0.3633802276324186,
    2: 0.11748184782932913,
    3: 0.034547760788503634,
    4: 0.009501008008191869,
    5: 0.002504668355674644,
}

# Asymptotic distortion coefficient for the b >= 6 regime: beta = c * 4^-b.
_HIGH_RES_COEFF = math.pi * math.sqrt(3.0) / 2.0


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0.0:
        raise ConfigError(f"power must be positive to express in dBm, got {watts}")
    return 10.0 * math.log10(watts) + 30.0


def thermal_noise_watts(bandwidth_hz: float, noise_figure_db: float = 0.0) -> float:
    """Receiver noise power: -174 dBm/Hz + 10 log10(B) + NF."""
    dbm = -174.0 + 10.0 * math.log10(bandwidth_hz) + noise_figure_db
    return dbm_to_watts(dbm)


def distortion_factor(bits: int) -> float:
    """Normalized MSE quantization distortion beta for a b-bit MMSE DAC.

    Tabulated Lloyd-Max values for b <= 5, the asymptotic formula
    ``(pi*sqrt(3)/2) * 2^(-2b)`` for b >= 6.
    """
    if bits != int(bits) or bits < 1:
        raise ConfigError(f"DAC resolution must be an integer >= 1, got {bits!r}")
    bits = int(bits)
    if bits <= 5:
        return _LLOYD_MAX_BETA[bits]
    return _HIGH_RES_COEFF * 2.0 ** (-2 * bits)


@dataclass(frozen=True)
class QuantizationProfile:
    """Per-antenna DAC resolutions and the derived loss/distortion diagonals."""

    bits: np.ndarray   # (N,) int
    beta: np.ndarray   # (N,) distortion, in (0, 1) for finite bits
    alpha: np.ndarray  # (N,) loss = 1 - beta

    @classmethod
    def from_bits(cls, bits) -> "QuantizationProfile":
        bits = np.asarray(bits, dtype=int)
        if bits.ndim != 1 or bits.size == 0:
            raise ConfigError("bits must be a non-empty 1-D sequence")
        beta = np.array([distortion_factor(int(b)) for b in bits])
        return cls(bits=bits, beta=beta, alpha=1.0 - beta)

    def __post_init__(self):
        if not (self.beta.shape == self.alpha.shape == self.bits.shape):
            raise ConfigError("bits/beta/alpha length mismatch")
        if np.any(self.alpha <= 0.0) or np.any(self.alpha > 1.0):
            raise ConfigError("quantization loss alpha must lie in (0, 1]")

    @property
    def n_antennas(self) -> int:
        return self.bits.size

    def restrict(self, mask: np.ndarray) -> "QuantizationProfile":
        """Profile of the antennas selected by a boolean mask."""
        return QuantizationProfile(
            bits=self.bits[mask], beta=self.beta[mask], alpha=self.alpha[mask]
        )


def quantize_signal(
    x: np.ndarray, profile: QuantizationProfile, noise_draw: np.ndarray
) -> np.ndarray:
    """Linear-surrogate quantization of the baseband vector x.

    The caller supplies the additive noise realization, drawn with the
    covariance from :func:`quantization_noise_cov`.  Used for Monte Carlo
    validation only; the optimizer works with statistics.
    """
    x = np.asarray(x)
    noise_draw = np.asarray(noise_draw)
    if x.shape != noise_draw.shape:
        raise ConfigError(f"signal/noise shape mismatch: {x.shape} vs {noise_draw.shape}")
    if x.shape[0] != profile.n_antennas:
        raise ConfigError(
            f"signal has {x.shape[0]} entries but profile covers {profile.n_antennas} antennas"
        )
    return profile.alpha.reshape(-1, *([1] * (x.ndim - 1))) * x + noise_draw


def quantization_noise_cov(
    F: np.ndarray, p_max: float, profile: QuantizationProfile
) -> np.ndarray:
    """Diagonal covariance of the DAC quantization noise for precoder F.

    Returns ``Phi_alpha Phi_beta diag(P F F^H)`` as a length-N vector of the
    (real, nonnegative) diagonal entries.
    """
    F = np.asarray(F)
    if F.shape[0] != profile.n_antennas:
        raise ConfigError(
            f"precoder has {F.shape[0]} rows but profile covers {profile.n_antennas} antennas"
        )
    row_power = np.sum(np.abs(F) ** 2, axis=1)
    return profile.alpha * profile.beta * p_max * row_power


@dataclass(frozen=True)
class SystemConfig:
    """All scenario scalars: array size, powers, quantization, channel model
    constants and solver tolerances.  Immutable; safe to share across workers.
    """

    n_antennas: int = 16
    n_users: int = 4
    bits: tuple = (4, 8, 12, 16)          # tiled over antennas when shorter than N
    p_max_dbm: float = 30.0               # maximum transmit power P
    p_total_dbm: float = 40.0             # base-station power budget P_tot
    pa_efficiency: float = 0.27
    kappa: float = 0.4                    # CSIT quality, 0 = perfect
    sampling_rate_hz: float = 150e6
    bandwidth_hz: float = 150e6
    noise_figure_db: float = 5.0
    noise_power_w: float | None = None    # default: thermal at bandwidth + NF

    # circuit power constants (watts)
    p_lo_w: float = 22.5e-3
    p_lp_w: float = 14e-3
    p_m_w: float = 0.3e-3
    p_h_w: float = 3e-3

    # channel / geometry model
    carrier_hz: float = 2.4e9
    cell_radius_m: float = 1000.0
    min_distance_m: float = 100.0
    pathloss_exponent: float = 4.0
    pathloss_ref_m: float = 100.0
    shadowing_std_db: float = math.sqrt(8.7)
    scatter_spread_rad: float = 0.0175    # one-ring local scatterer half-angle
    aod_window_rad: float = 0.1           # max AoD difference across users

    # smoothing / indicator constants
    smoothing_a: float = 0.1
    indicator_rho: float = 1e-12

    # solver tolerances and iteration caps
    eps_gpi: float = 0.01
    t_max_gpi: int = 20
    eps_f: float = 0.01
    t_max_f: int = 20
    eps_tau: float = 0.001
    t_max_tau: int = 20
    t_max_mu: int = 20
    eps_as: float = 0.1
    step_gd: float = 1.0
    step_bm: float = 1.0
    tau_min: float = 1e-6
    armijo_c: float = 1e-4
    max_backtracks: int = 30

    low_complexity: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        n, k = self.n_antennas, self.n_users
        if n < 1 or k < 1 or n < k + 1:
            raise ConfigError(f"need N >= K+1 antennas, got N={n}, K={k}")
        if not (0.0 <= self.kappa <= 1.0):
            raise ConfigError(f"kappa must lie in [0, 1], got {self.kappa}")
        if not (0.0 < self.pa_efficiency <= 1.0):
            raise ConfigError(f"PA efficiency must lie in (0, 1], got {self.pa_efficiency}")
        if self.smoothing_a <= 0.0 or self.indicator_rho <= 0.0:
            raise ConfigError("smoothing_a and indicator_rho must be positive")
        for name in ("eps_gpi", "eps_f", "eps_tau", "eps_as", "step_gd", "step_bm", "tau_min"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")
        for name in ("p_max_dbm", "p_total_dbm"):
            # any dBm value maps to positive watts; nothing to validate here
            float(getattr(self, name))
        for name in ("p_lo_w", "p_lp_w", "p_m_w", "p_h_w"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"{name} must be nonnegative")
        if len(self.bits) == 0 or n % len(self.bits) != 0:
            raise ConfigError(
                f"bits pattern of length {len(self.bits)} does not tile N={n} antennas"
            )
        if self.noise_power_w is not None and self.noise_power_w <= 0.0:
            raise ConfigError("noise_power_w must be positive when given")
        if self.rng_seed < 0 or self.rng_seed >= 2 ** 64:
            raise ConfigError("rng_seed must fit in 64 unsigned bits")

    @property
    def p_max_w(self) -> float:
        return dbm_to_watts(self.p_max_dbm)

    @property
    def p_total_w(self) -> float:
        return dbm_to_watts(self.p_total_dbm)

    @property
    def noise_w(self) -> float:
        if self.noise_power_w is not None:
            return self.noise_power_w
        return thermal_noise_watts(self.bandwidth_hz, self.noise_figure_db)

    def bits_vector(self) -> np.ndarray:
        """Per-antenna DAC resolutions, the pattern tiled across the array."""
        reps = self.n_antennas // len(self.bits)
        return np.tile(np.asarray(self.bits, dtype=int), reps)

    def quantization_profile(self) -> QuantizationProfile:
        return QuantizationProfile.from_bits(self.bits_vector())

    def with_(self, **kwargs) -> "SystemConfig":
        return replace(self, **kwargs)
