"""Spectral-efficiency arithmetic.

Two equivalent views of the per-user rate lower bounds are implemented and
cross-checked by the tests:

* direct formulas in precoder coordinates F (interference, error and
  quantization terms built from the channel estimate and error covariance);
* ratio-of-quadratic-forms in the normalized direction W with the
  sigma^2/(tau P) ridge, which the power-iteration solver consumes.

All quadratic forms exploit the block structure: per user only an N x N mix
matrix, a rank-one signal outer product and a diagonal quantization vector
exist; nothing of size N(K+1) is ever materialized.  Every denominator is
accumulated from nonnegative pieces so the two views agree to ~1e-14 even at
high SINR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .power import PowerModel, smooth_antenna_power
from .sysmodel import QuantizationProfile

__all__ = [
    "ChannelTerms",
    "RateMatrices",
    "QuadForms",
    "SmoothObjective",
    "assemble_rate_matrices",
    "instantaneous_rates",
    "instantaneous_rates_batch",
    "lower_bound_rates",
    "logsumexp_softmin",
    "softmin_weights",
    "lagrangian_value",
]

_LN2 = math.log(2.0)


def _log2_1p(x):
    return np.log1p(x) / _LN2


# ---------------------------------------------------------------------------
# true-channel instantaneous rates


def instantaneous_rates_batch(
    F: np.ndarray, H: np.ndarray, profile: QuantizationProfile, p_max: float, noise_w: float
):
    """Common and private stream rates for a batch of true channels.

    F is (N, K+1) with the common precoder in column 0; H is (M, N, K).
    Returns (R_c (M,), R_k (M, K)).
    """
    H = np.asarray(H)
    if H.ndim == 2:
        H = H[None]
    m, n, k = H.shape
    alpha = profile.alpha
    PhiF = alpha[:, None] * F                              # (N, S)
    # sig[m, k, s] = P |h_k^H Phi_a f_s|^2
    sig = p_max * np.abs(np.einsum("mnk,ns->mks", H.conj(), PhiF)) ** 2
    # quantization noise: qe[m, k] = h_k^H R_q h_k with diagonal R_q
    rq = profile.alpha * profile.beta * p_max * np.sum(np.abs(F) ** 2, axis=1)
    qe = np.einsum("mnk,n->mk", np.abs(H) ** 2, rq).real

    # common stream: interference from every private stream
    iui_c = np.sum(sig[:, :, 1:], axis=2)
    sinr_c = sig[:, :, 0] / (iui_c + qe + noise_w)
    r_c = np.min(_log2_1p(sinr_c), axis=1)

    # private streams after SIC of the common stream
    r_k = np.empty((m, k))
    for j in range(k):
        others = [s for s in range(1, k + 1) if s != j + 1]
        iui = np.sum(sig[:, j, others], axis=1)
        r_k[:, j] = _log2_1p(sig[:, j, j + 1] / (iui + qe[:, j] + noise_w))
    return r_c, r_k


def instantaneous_rates(
    F: np.ndarray, H: np.ndarray, profile: QuantizationProfile, p_max: float, noise_w: float
):
    """Single-realization version of :func:`instantaneous_rates_batch`."""
    r_c, r_k = instantaneous_rates_batch(F, H[None], profile, p_max, noise_w)
    return float(r_c[0]), r_k[0]


# ---------------------------------------------------------------------------
# conditional-average lower bounds, direct form


def lower_bound_rates(
    F: np.ndarray,
    H_hat: np.ndarray,
    R_err: np.ndarray,
    profile: QuantizationProfile,
    p_max: float,
    noise_w: float,
):
    """Per-user common/private rate lower bounds given (H_hat, R_err).

    F is (N, K+1) with column 0 the common precoder (all-zero column for
    plain SDMA).  Returns (R_ck_lb (K,), R_k_lb (K,)) in bits.
    """
    n, s = F.shape
    k = H_hat.shape[1]
    alpha = profile.alpha
    PhiF = alpha[:, None] * F
    ridge = noise_w / p_max

    sig = np.abs(H_hat.conj().T @ PhiF) ** 2               # (K, S)
    r_ck = np.empty(k)
    r_k = np.empty(k)
    for j in range(k):
        R = R_err[j]
        # error-fluctuation and quantization terms per stream
        errq = np.einsum("ns,nm,ms->s", PhiF.conj(), R, PhiF).real
        dvec = profile.beta * (np.abs(H_hat[:, j]) ** 2 + np.diag(R).real)
        qe = np.einsum("n,ns->s", alpha * dvec, np.abs(F) ** 2).real
        qe_tot = float(np.sum(qe))

        iui_c = float(np.sum(sig[j, 1:]) + np.sum(errq[1:]) + errq[0])
        r_ck[j] = _log2_1p(sig[j, 0] / (iui_c + qe_tot + ridge))

        others = [i for i in range(1, s) if i != j + 1]
        iui_p = float(np.sum(sig[j, others]) + np.sum(errq[others]) + errq[j + 1])
        r_k[j] = _log2_1p(sig[j, j + 1] / (iui_p + qe_tot + ridge))
    return r_ck, r_k


# ---------------------------------------------------------------------------
# quadratic-form view


@dataclass(frozen=True)
class ChannelTerms:
    """Scale-parameter-independent ingredients of the rate quadratic forms.

    Per user k the mix matrix G_k splits into a rank-one signal part
    u_k u_k^H, an error part Phi^{1/2} R_err Phi^{1/2} and a diagonal
    quantization part; only the pieces are stored.
    """

    steer: np.ndarray          # (N, K) columns u_k = Phi_a^{1/2} hhat_k
    err_dense: np.ndarray | None   # (K, N, N) or None in IID mode
    err_diag: np.ndarray | None    # (K, N) diagonal of the error part (IID mode)
    dq: np.ndarray             # (K, N) diagonal quantization part of G_k
    common: bool

    @classmethod
    def build(cls, H_hat, R_err, profile, common=True, iid_var=None) -> "ChannelTerms":
        n, k = H_hat.shape
        root = np.sqrt(profile.alpha)
        steer = root[:, None] * H_hat
        if iid_var is not None:
            err_dense = None
            err_diag = np.asarray(iid_var)[:, None] * profile.alpha[None, :]
            diag_r = np.repeat(np.asarray(iid_var)[:, None], n, axis=1)
        else:
            err_dense = root[None, :, None] * np.asarray(R_err) * root[None, None, :]
            err_diag = None
            diag_r = np.stack([np.diag(R_err[j]).real for j in range(k)])
        dq = profile.beta[None, :] * (np.abs(H_hat.T) ** 2 + diag_r)
        return cls(steer=steer, err_dense=err_dense, err_diag=err_diag, dq=dq, common=common)

    @property
    def n_antennas(self) -> int:
        return self.steer.shape[0]

    @property
    def n_users(self) -> int:
        return self.steer.shape[1]

    @property
    def n_slots(self) -> int:
        return self.n_users + (1 if self.common else 0)

    def err_apply(self, W: np.ndarray) -> np.ndarray:
        """Error-part matvecs: (K, N, S) array of ErrPart_k @ W."""
        if self.err_dense is not None:
            return np.einsum("knm,ms->kns", self.err_dense, W)
        return self.err_diag[:, :, None] * W[None, :, :]

    def gain_matrix(self, k: int) -> np.ndarray:
        """Dense mix matrix G_k (tests and block materialization only)."""
        u = self.steer[:, k]
        err = self.err_dense[k] if self.err_dense is not None else np.diag(self.err_diag[k])
        return np.outer(u, u.conj()) + err + np.diag(self.dq[k])

    def with_ridge(self, tau, p_max, noise_w) -> "RateMatrices":
        return RateMatrices(terms=self, tau=tau, p_max=p_max, noise_w=noise_w)


@dataclass(frozen=True)
class QuadForms:
    """Per-user quadratic forms of one direction W, positively accumulated."""

    cmag: np.ndarray   # (K, S) |u_k^H w_s|^2
    errf: np.ndarray   # (K, S) w_s^H ErrPart_k w_s
    dqf: np.ndarray    # (K, S) quantization forms
    q_ac: np.ndarray | None  # (K,) common-rate numerator forms
    q_bc: np.ndarray | None  # (K,) common-rate denominator forms
    q_a: np.ndarray    # (K,) private numerator forms
    q_b: np.ndarray    # (K,) private denominator forms

    @property
    def rates_common(self) -> np.ndarray | None:
        if self.q_ac is None:
            return None
        k = self.cmag.shape[0]
        return _log2_1p(self.cmag[np.arange(k), 0] / self.q_bc)

    @property
    def rates_private(self) -> np.ndarray:
        k = self.cmag.shape[0]
        off = self.cmag.shape[1] - k
        return _log2_1p(self.cmag[np.arange(k), np.arange(k) + off] / self.q_b)


@dataclass(frozen=True)
class RateMatrices:
    """Quadratic-form rate representation at a fixed power scale tau.

    ``log2(wbar^H A wbar / wbar^H B wbar)`` over the numerator/denominator
    block families reproduces :func:`lower_bound_rates` for
    ``F = sqrt(tau) Phi_a^{-1/2} W`` on every unit-norm direction.
    """

    terms: ChannelTerms
    tau: float
    p_max: float
    noise_w: float

    @property
    def ridge(self) -> float:
        return self.noise_w / (self.tau * self.p_max)

    @property
    def common(self) -> bool:
        return self.terms.common

    @property
    def n_slots(self) -> int:
        return self.terms.n_slots

    def quad_forms(self, W: np.ndarray) -> QuadForms:
        t = self.terms
        k, s = t.n_users, t.n_slots
        off = s - k
        cmag = np.abs(t.steer.conj().T @ W) ** 2
        errf = np.einsum("ns,kns->ks", W.conj(), t.err_apply(W)).real
        dqf = t.dq @ (np.abs(W) ** 2)
        # identity-term quadratic form; equals self.ridge on the unit sphere
        ridge = self.ridge * float(np.sum(np.abs(W) ** 2))

        ed = errf + dqf
        q_a = np.empty(k)
        q_b = np.empty(k)
        q_ac = np.empty(k) if t.common else None
        q_bc = np.empty(k) if t.common else None
        for j in range(k):
            own = j + off
            others = [i for i in range(off, s) if i != own]
            inter = float(np.sum(cmag[j, others]))
            if t.common:
                # denominator of the common rate: everything but the slot-0 signal
                q_bc[j] = float(np.sum(ed[j])) + inter + cmag[j, own] + ridge
                q_ac[j] = q_bc[j] + cmag[j, 0]
                # slot 0 of the private family only keeps the quantization part
                base = float(np.sum(ed[j, 1:])) + dqf[j, 0]
            else:
                base = float(np.sum(ed[j]))
            q_b[j] = base + inter + ridge
            q_a[j] = q_b[j] + cmag[j, own]
            if not (q_b[j] > 0.0) or (t.common and not (q_bc[j] > 0.0)):
                raise FloatingPointError("rate denominator collapsed despite ridge")
        return QuadForms(cmag=cmag, errf=errf, dqf=dqf, q_ac=q_ac, q_bc=q_bc, q_a=q_a, q_b=q_b)

    # -- dense block materialization (oracle tests; not used by the solver) --

    def block(self, family: str, k: int, slot: int) -> np.ndarray:
        """One N x N diagonal block of the named quadratic-form family.

        family is one of "common_num", "common_den", "priv_num", "priv_den";
        slot runs over 0..S-1 (slot 0 is the common stream when present).
        """
        t = self.terms
        n = t.n_antennas
        off = t.n_slots - t.n_users
        g = t.gain_matrix(k) + self.ridge * np.eye(n)
        u = t.steer[:, k]
        sig = np.outer(u, u.conj())
        if family == "common_num":
            return g
        if family == "common_den":
            return g - sig if slot == 0 else g
        err = t.err_dense[k] if t.err_dense is not None else np.diag(t.err_diag[k])
        a = g - (sig + err) if (t.common and slot == 0) else g
        if family == "priv_num":
            return a
        if family == "priv_den":
            return a - sig if slot == k + off else a
        raise ValueError(f"unknown block family {family!r}")

    def block_family(self, family: str, k: int) -> list[np.ndarray]:
        return [self.block(family, k, s) for s in range(self.n_slots)]


def assemble_rate_matrices(
    H_hat: np.ndarray,
    R_err: np.ndarray,
    profile: QuantizationProfile,
    tau: float,
    p_max: float,
    noise_w: float,
    common: bool = True,
    iid_var=None,
) -> RateMatrices:
    """Build the quadratic-form rate representation for a given scenario."""
    terms = ChannelTerms.build(H_hat, R_err, profile, common=common, iid_var=iid_var)
    return terms.with_ridge(tau, p_max, noise_w)


# ---------------------------------------------------------------------------
# smoothing and the Lagrangian


def logsumexp_softmin(values, a: float) -> float:
    """Smooth minimum -a * ln(sum exp(-v/a)); tight from below as a -> 0+."""
    if a <= 0.0:
        raise ValueError(f"smoothing constant must be positive, got {a}")
    v = np.asarray(values, dtype=float)
    m = float(np.min(v))
    return m - a * math.log(float(np.sum(np.exp(-(v - m) / a))))


def softmin_weights(values, a: float) -> np.ndarray:
    """Gradient weights of the softmin: softmax of -v/a (sums to one)."""
    v = np.asarray(values, dtype=float)
    e = np.exp(-(v - np.min(v)) / a)
    return e / np.sum(e)


@dataclass(frozen=True)
class SmoothObjective:
    """Value of the smoothed Lagrangian and its exponential-form counterpart."""

    value: float          # L = l1 + l2 + l3
    lam: float            # product form; ln(lam) == value up to roundoff
    l1: float             # smoothed common-rate term (0 without a common stream)
    l2: float             # sum of private rates
    l3: float             # power-budget multiplier term
    xi1: np.ndarray | None  # (K,) common-rate denominator forms
    xi2: np.ndarray       # (K,) private denominator forms
    weights: np.ndarray | None  # (K,) softmin weights of the common rates


def lagrangian_value(
    W: np.ndarray,
    tau: float,
    mu: float,
    matrices: RateMatrices,
    profile: QuantizationProfile,
    power_model: PowerModel,
    p_total: float,
    smoothing_a: float,
    rho: float,
) -> SmoothObjective:
    """Smoothed Lagrangian of a unit direction at (tau, mu).

    Also assembles the equivalent product form lam explicitly so tests can
    confirm ln(lam) == L; the solver itself only consumes L and the weights.
    """
    qf = matrices.quad_forms(W)
    p_max = matrices.p_max

    if matrices.common:
        rc = qf.rates_common
        l1 = logsumexp_softmin(rc, smoothing_a)
        weights = softmin_weights(rc, smoothing_a)
        softmin_factor = float(np.sum((qf.q_ac / qf.q_bc) ** (-1.0 / (smoothing_a * _LN2)))) ** (-smoothing_a)
    else:
        l1 = 0.0
        weights = None
        softmin_factor = 1.0
    l2 = float(np.sum(qf.rates_private))

    p_ant_smooth = smooth_antenna_power(W, profile, model=power_model, rho=rho)
    budget_gap = tau * p_max / power_model.pa_efficiency + power_model.p_lo + p_ant_smooth - p_total
    l3 = -mu * budget_gap

    value = l1 + l2 + l3
    if not np.isfinite(value):
        raise FloatingPointError("non-finite Lagrangian value; ill-conditioned input")

    # explicit product form of exp(L)
    gains = np.sum(np.abs(W) ** 2, axis=1) / profile.alpha
    equad = float(np.sum(np.abs(W) ** 2)) + gains / rho
    expo = mu * power_model.p_ant / (_LN2 * math.log2(1.0 + 1.0 / rho))
    lam = (
        softmin_factor
        * math.exp(-mu * (tau * p_max / power_model.pa_efficiency - p_total + power_model.p_lo))
        * float(np.prod((qf.q_a / qf.q_b) ** (1.0 / _LN2)))
        / float(np.prod(equad ** expo))
    )
    return SmoothObjective(
        value=value, lam=lam, l1=l1, l2=l2, l3=l3,
        xi1=qf.q_bc, xi2=qf.q_b, weights=weights,
    )
