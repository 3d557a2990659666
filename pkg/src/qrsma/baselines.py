"""Reference schemes the joint solver is compared against.

* quantization-aware regularized zero forcing on the effective channel
  (plain SDMA linear precoding);
* plain power scaling, which burns the budget remainder after the full
  circuit cost as transmit power;
* the transmit-power-only power-iteration solver (no budget awareness,
  all antennas on);
* the SDMA variant of the joint solver (no common stream).
"""

from __future__ import annotations

import math

import numpy as np

from .channel import ChannelSet
from .optimizer import (
    InfeasibleBudgetError,
    PrecoderSolution,
    qpcas,
    solve_direction,
)
from .power import PowerModel, circuit_power
from .sysmodel import QuantizationProfile, SystemConfig

__all__ = [
    "qrzf_precoder",
    "qrzf_direction",
    "plain_power_scaling",
    "qrzf",
    "qgpirs",
    "qpcas_sdma",
    "ALGORITHMS",
    "solve",
]


def qrzf_precoder(
    H_hat: np.ndarray,
    profile: QuantizationProfile,
    p_max: float,
    noise_w: float,
    common: bool = True,
) -> np.ndarray:
    """Quantization-aware RZF precoder on the effective channel.

    Private columns follow Heff (Heff^H Heff + delta I)^-1 with the standard
    MMSE regularizer delta = K sigma^2 / P and equal per-user power; with a
    common stream, its column is the dominant left singular vector of Heff
    carrying 10% of the power.  Normalized so Tr(Phi_alpha F F^H) = 1.
    """
    n, k = H_hat.shape
    h_eff = profile.alpha[:, None] * H_hat
    delta = k * noise_w / p_max
    gram = h_eff.conj().T @ h_eff + delta * np.eye(k)
    try:
        priv = h_eff @ np.linalg.inv(gram)
    except np.linalg.LinAlgError:
        priv = h_eff @ np.linalg.inv(gram + 10.0 * delta * np.eye(k))

    def unit_power(col):
        # scale so that col^H Phi_alpha col == 1
        w = float(np.real(col.conj() @ (profile.alpha * col)))
        return col / math.sqrt(w)

    cols = []
    if common:
        u0 = np.linalg.svd(h_eff, full_matrices=False)[0][:, 0]
        cols.append(math.sqrt(0.10) * unit_power(u0))
        share = 0.90 / k
    else:
        cols.append(np.zeros(n, dtype=complex))
        share = 1.0 / k
    for j in range(k):
        cols.append(math.sqrt(share) * unit_power(priv[:, j]))
    return np.stack(cols, axis=1)


def qrzf_direction(
    H_hat: np.ndarray,
    profile: QuantizationProfile,
    p_max: float,
    noise_w: float,
    common: bool = True,
) -> np.ndarray:
    """Unit-norm direction W = Phi_alpha^{1/2} F of the RZF precoder.

    Without a common stream the zero column is dropped, so W is (N, K).
    """
    F = qrzf_precoder(H_hat, profile, p_max, noise_w, common=common)
    W = np.sqrt(profile.alpha)[:, None] * F
    if not common:
        W = W[:, 1:]
    return W / np.linalg.norm(W)


def plain_power_scaling(
    mask: np.ndarray, model: PowerModel, p_max: float, p_total: float
) -> float:
    """Largest feasible power scale with the given antennas all active."""
    p_cir = circuit_power(mask, model)
    if p_total <= p_cir:
        raise InfeasibleBudgetError(
            f"budget {p_total:.3f} W does not cover the circuit power {p_cir:.3f} W"
        )
    return min(1.0, model.pa_efficiency * (p_total - p_cir) / p_max)


def _scaled_solution(W, tau, profile, mask, algorithm, **counters) -> PrecoderSolution:
    F = math.sqrt(tau) * W / np.sqrt(profile.alpha)[:, None]
    return PrecoderSolution(
        W=W, F=F, tau=tau, mu=0.0, active_mask=mask, algorithm=algorithm, **counters
    )


def qrzf(channels: ChannelSet, config: SystemConfig) -> PrecoderSolution:
    """RZF directions with plain power scaling (no common stream).

    The regularizer sees the power actually radiated after plain scaling, so
    the directions (and the sum SE) stay constant once the budget binds.
    """
    profile = config.quantization_profile()
    pm = PowerModel.from_config(config, profile)
    mask = np.ones(config.n_antennas, dtype=bool)
    tau = plain_power_scaling(mask, pm, config.p_max_w, config.p_total_w)
    F = qrzf_precoder(channels.H_hat, profile, tau * config.p_max_w, config.noise_w, common=False)
    W = np.sqrt(profile.alpha)[:, None] * F
    W /= np.linalg.norm(W)
    return _scaled_solution(W, tau, profile, mask, "qrzf")


def qgpirs(channels: ChannelSet, config: SystemConfig) -> PrecoderSolution:
    """Budget-unaware rate-splitting solver: all antennas stay active, the
    power scale comes from plain scaling, and a single direction solve runs
    with the budget multiplier removed."""
    profile = config.quantization_profile()
    pm = PowerModel.from_config(config, profile)
    mask = np.ones(config.n_antennas, dtype=bool)
    tau = plain_power_scaling(mask, pm, config.p_max_w, config.p_total_w)
    W0 = qrzf_direction(channels.H_hat, profile, config.p_max_w, config.noise_w, common=True)
    from .rates import ChannelTerms

    terms = ChannelTerms.build(channels.H_hat, channels.R_err, profile, common=True)
    rm = terms.with_ridge(tau, config.p_max_w, config.noise_w)
    W, iters, _ = solve_direction(
        W0, tau, 0.0, rm, profile, pm, config.p_total_w, config,
        low_complexity=config.low_complexity,
    )
    return _scaled_solution(W, tau, profile, mask, "qgpirs", gpi_iters=iters)


def qpcas_sdma(channels: ChannelSet, config: SystemConfig, **kwargs) -> PrecoderSolution:
    """Joint solver without message splitting (common stream removed)."""
    return qpcas(channels, config, common=False, **kwargs)


ALGORITHMS = {
    "qpcas": lambda ch, cfg: qpcas(ch, cfg),
    "qpcas_low": lambda ch, cfg: qpcas(ch, cfg, low_complexity=True),
    "qpcas_sdma": qpcas_sdma,
    "qgpirs": qgpirs,
    "qrzf": qrzf,
}


def solve(algorithm: str, channels: ChannelSet, config: SystemConfig) -> PrecoderSolution:
    """Dispatch one of the named schemes."""
    try:
        fn = ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}")
    solution = fn(channels, config)
    solution.algorithm = algorithm
    return solution
