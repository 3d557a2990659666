"""Channel generation: one-ring spatial covariance, log-distance pathloss,
imperfect CSIT estimates and the channel-error covariance matrices.

True channels follow h_k ~ CN(0, rho_k R_gk) with R_gk the one-ring
covariance of a half-wavelength ULA.  The transmitter observes
hhat_k = sqrt(1 - kappa^2) h_k + q_k with q_k ~ CN(0, kappa^2 rho_k R_gk),
which yields the error covariance R_err_k = (2 - 2 sqrt(1 - kappa^2)) rho_k R_gk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sysmodel import ConfigError, SystemConfig

__all__ = [
    "UserGeometry",
    "ChannelSet",
    "one_ring_covariance",
    "log_distance_pathloss_db",
    "draw_geometry",
    "draw_channels",
    "iid_error_variance",
    "conditional_channel_draws",
    "save_channels",
    "load_channels",
]

_SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class UserGeometry:
    """Placement of one user: distance, departure angle, shadowing, pathloss."""

    distance_m: float
    aod_rad: float
    shadowing_db: float
    pathloss: float  # linear power gain rho_k


@dataclass(frozen=True)
class ChannelSet:
    """One realization of true channels, CSIT estimates and error statistics."""

    H: np.ndarray             # (N, K) true channels, columns h_k
    H_hat: np.ndarray         # (N, K) transmitter-side estimates
    R_err: np.ndarray         # (K, N, N) Hermitian PSD error covariances
    R_err_iid_var: np.ndarray  # (K,) scalar IID-approximation variances
    R_h: np.ndarray           # (K, N, N) channel covariances rho_k R_gk
    pathloss: np.ndarray      # (K,)
    kappa: float

    @property
    def n_antennas(self) -> int:
        return self.H.shape[0]

    @property
    def n_users(self) -> int:
        return self.H.shape[1]

    def restrict(self, mask: np.ndarray) -> "ChannelSet":
        """Channel data of the antennas selected by a boolean mask."""
        mask = np.asarray(mask, dtype=bool)
        return ChannelSet(
            H=self.H[mask],
            H_hat=self.H_hat[mask],
            R_err=self.R_err[:, mask][:, :, mask],
            R_err_iid_var=self.R_err_iid_var,
            R_h=self.R_h[:, mask][:, :, mask],
            pathloss=self.pathloss,
            kappa=self.kappa,
        )


def one_ring_covariance(aod_rad: float, angular_spread_rad: float, n_antennas: int) -> np.ndarray:
    """Spatial covariance of a half-wavelength ULA with a uniform ring of local
    scatterers over [aod - spread, aod + spread].

    [R]_{m,n} = (1 / 2*spread) * int exp(j*pi*(m - n)*sin(phi)) dphi, evaluated
    with a 200-node Gauss-Legendre rule.  PSD Toeplitz with unit diagonal.
    """
    if n_antennas < 1:
        raise ConfigError("need at least one antenna")
    if angular_spread_rad <= 0.0:
        raise ConfigError(f"angular spread must be positive, got {angular_spread_rad}")
    nodes, weights = np.polynomial.legendre.leggauss(200)
    phi = aod_rad + angular_spread_rad * nodes
    # steering vectors at the quadrature nodes, (nodes, N)
    a = np.exp(1j * math.pi * np.outer(np.sin(phi), np.arange(n_antennas)))
    R = (a.T * (0.5 * weights)) @ a.conj()
    R = 0.5 * (R + R.conj().T)
    return R


def log_distance_pathloss_db(
    distance_m: float,
    carrier_hz: float,
    ref_distance_m: float,
    exponent: float,
    shadowing_db: float = 0.0,
) -> float:
    """Log-distance pathloss with free-space intercept at the reference distance."""
    if distance_m < ref_distance_m:
        raise ConfigError(f"distance {distance_m} m below reference {ref_distance_m} m")
    wavelength = _SPEED_OF_LIGHT / carrier_hz
    intercept = 20.0 * math.log10(4.0 * math.pi * ref_distance_m / wavelength)
    return intercept + 10.0 * exponent * math.log10(distance_m / ref_distance_m) + shadowing_db


def draw_geometry(config: SystemConfig, rng: np.random.Generator) -> list[UserGeometry]:
    """Place users uniformly in range, with AoDs inside a common window."""
    center = rng.uniform(-math.pi / 3.0, math.pi / 3.0)
    geometry = []
    for _ in range(config.n_users):
        d = rng.uniform(config.min_distance_m, config.cell_radius_m)
        aod = center + rng.uniform(-0.5, 0.5) * config.aod_window_rad
        shadow = rng.normal(0.0, config.shadowing_std_db)
        pl_db = log_distance_pathloss_db(
            d, config.carrier_hz, config.pathloss_ref_m, config.pathloss_exponent, shadow
        )
        geometry.append(
            UserGeometry(distance_m=d, aod_rad=aod, shadowing_db=shadow, pathloss=10.0 ** (-pl_db / 10.0))
        )
    return geometry


def _psd_factor(R: np.ndarray) -> np.ndarray:
    """A with A A^H = R for Hermitian PSD R (eigenvalue clipping at 0)."""
    vals, vecs = np.linalg.eigh(R)
    vals = np.clip(vals, 0.0, None)
    return vecs * np.sqrt(vals)


def _cn_draw(factor: np.ndarray, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Circular complex Gaussian with covariance factor @ factor^H."""
    n = factor.shape[1]
    shape = (n,) if size is None else (size, n)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    return z @ factor.T if size is not None else factor @ z


def iid_error_variance(pathloss: float, kappa: float) -> float:
    """Scalar variance of the IID approximation R_err ~ sigma^2 I."""
    if not (0.0 <= kappa <= 1.0):
        raise ConfigError(f"kappa must lie in [0, 1], got {kappa}")
    return pathloss * (2.0 - 2.0 * math.sqrt(1.0 - kappa ** 2))


def draw_channels(
    geometry: list[UserGeometry], config: SystemConfig, rng: np.random.Generator
) -> ChannelSet:
    """Draw true channels and CSIT estimates for one trial."""
    n, k = config.n_antennas, config.n_users
    if len(geometry) != k:
        raise ConfigError(f"geometry covers {len(geometry)} users, config expects {k}")
    kappa = config.kappa
    err_scale = 2.0 - 2.0 * math.sqrt(1.0 - kappa ** 2)

    H = np.zeros((n, k), dtype=complex)
    H_hat = np.zeros((n, k), dtype=complex)
    R_h = np.zeros((k, n, n), dtype=complex)
    R_err = np.zeros((k, n, n), dtype=complex)
    iid_var = np.zeros(k)
    pathloss = np.zeros(k)

    for i, user in enumerate(geometry):
        R_g = one_ring_covariance(user.aod_rad, config.scatter_spread_rad, n)
        R = user.pathloss * R_g
        factor = _psd_factor(R)
        h = _cn_draw(factor, rng)
        if kappa == 0.0:
            h_hat = h.copy()
        else:
            q = kappa * _cn_draw(factor, rng)
            h_hat = math.sqrt(1.0 - kappa ** 2) * h + q
        H[:, i] = h
        H_hat[:, i] = h_hat
        R_h[i] = R
        R_err[i] = err_scale * R
        iid_var[i] = iid_error_variance(user.pathloss, kappa)
        pathloss[i] = user.pathloss

    return ChannelSet(
        H=H, H_hat=H_hat, R_err=R_err, R_err_iid_var=iid_var, R_h=R_h,
        pathloss=pathloss, kappa=kappa,
    )


def conditional_channel_draws(
    channels: ChannelSet, n_draws: int, rng: np.random.Generator
) -> np.ndarray:
    """Sample true channels consistent with the estimate and error statistics.

    Draws h = hhat + e with e ~ CN(0, R_err_k), i.e. the zero-mean
    uncorrelated-error model that underlies the rate lower bounds.  Returns
    an (n_draws, N, K) array.  With kappa = 0 every draw equals H_hat.
    """
    n, k = channels.n_antennas, channels.n_users
    out = np.empty((n_draws, n, k), dtype=complex)
    for i in range(k):
        if channels.kappa == 0.0:
            out[:, :, i] = channels.H_hat[:, i]
            continue
        factor = _psd_factor(channels.R_err[i])
        out[:, :, i] = channels.H_hat[:, i] + _cn_draw(factor, rng, size=n_draws)
    return out


def save_channels(path, channels: ChannelSet, seed: int = 0) -> None:
    """Binary dump of a channel realization for regression fixtures."""
    np.savez(
        path,
        H=channels.H,
        H_hat=channels.H_hat,
        R_err=channels.R_err,
        R_err_iid_var=channels.R_err_iid_var,
        R_h=channels.R_h,
        pathloss=channels.pathloss,
        meta=np.array([channels.n_antennas, channels.n_users, seed], dtype=np.uint64),
        kappa=np.array([channels.kappa]),
    )


def load_channels(path) -> ChannelSet:
    data = np.load(path)
    return ChannelSet(
        H=data["H"],
        H_hat=data["H_hat"],
        R_err=data["R_err"],
        R_err_iid_var=data["R_err_iid_var"],
        R_h=data["R_h"],
        pathloss=data["pathloss"],
        kappa=float(data["kappa"][0]),
    )
