"""Core solvers.

* :func:`solve_direction`: generalized power iteration on the stationarity
  operator pair (a nonlinear eigenvalue problem with eigenvector dependency):
  repeat ``wbar <- normalize(B^-1 A wbar)`` until the step norm drops below
  the threshold.
* :func:`solve_tau`: projected gradient ascent with Armijo backtracking on
  the power-scale parameter.
* :func:`update_mu_bisection`: halving-step search for the budget multiplier.
* :func:`qpcas`: the joint precoding / antenna selection / power control
  driver: alternate tau and direction until the precoder settles, prune
  antennas with negligible effective gain, bisect the multiplier, then maximize
  the transmit power for the surviving antenna set and re-solve the direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet
from .power import PowerModel, circuit_power, smooth_antenna_power
from .rates import ChannelTerms, RateMatrices, logsumexp_softmin, softmin_weights
from .sysmodel import ConfigError, QuantizationProfile, SystemConfig

__all__ = [
    "InfeasibleBudgetError",
    "KktOperator",
    "PrecoderSolution",
    "build_kkt_operator",
    "gpi_step",
    "stationarity_residual",
    "solve_direction",
    "tau_gradient",
    "solve_tau",
    "select_antennas",
    "update_mu_bisection",
    "qpcas",
    "verify_solution",
]

_LN2 = math.log(2.0)


class InfeasibleBudgetError(RuntimeError):
    """Power budget cannot cover even the cheapest operating point."""


# ---------------------------------------------------------------------------
# KKT operator pair


@dataclass
class KktOperator:
    """Stationarity operator pair at one iterate.

    Both operators are Hermitian block diagonal over the stream slots.  The
    numerator side has one distinguished slot-0 block (common stream) and a
    shared block for every private slot; the denominator side is a shared
    core minus one rank-one signal downdate per private slot.
    """

    a_block0: np.ndarray        # (N, N) numerator block of slot 0, unscaled
    a_rest: np.ndarray          # (N, N) numerator block of slots >= offset
    b_blocks: np.ndarray | None  # (S, N, N) dense denominator blocks
    sm: "object | None"         # low-complexity solver (SmBlockInverse)
    lam_log: float              # objective value; lam_num = exp(lam_log)
    offset: int                 # 1 when a common stream is present, else 0
    n_slots: int
    weights_c1: np.ndarray      # (N,)
    weights_c2: np.ndarray | None  # (K,)
    weights_c3: np.ndarray      # (K,)
    softmin: np.ndarray | None  # (K,)
    quad: "object"              # QuadForms at the build point

    # The update direction is invariant to how the objective's exponential is
    # split across the pair, so the solver works with the unscaled operators;
    # exp(lam_log) can under/overflow at extreme multiplier values and is only
    # materialized for the contract accessors below.
    @property
    def lam_num(self) -> float:
        return math.exp(self.lam_log)

    @property
    def lam_den(self) -> float:
        return 1.0

    @property
    def lam(self) -> float:
        return self.lam_num / self.lam_den

    def a_apply(self, W: np.ndarray) -> np.ndarray:
        out = np.empty_like(W)
        if self.offset:
            out[:, 0] = self.a_block0 @ W[:, 0]
            out[:, 1:] = self.a_rest @ W[:, 1:]
        else:
            out[:] = self.a_rest @ W
        return out

    def b_solve(self, Z: np.ndarray) -> np.ndarray:
        if self.sm is not None:
            return self.sm.solve_all(Z)
        rhs = Z.T[:, :, None]                      # (S, N, 1)
        sol = np.linalg.solve(self.b_blocks, rhs)  # (S, N, 1)
        return sol[:, :, 0].T

    def a_blocks(self) -> list[np.ndarray]:
        """Materialized numerator blocks, carrying the exp(L) scale."""
        blocks = [self.lam_num * self.a_rest for _ in range(self.n_slots)]
        if self.offset:
            blocks[0] = self.lam_num * self.a_block0
        return blocks

    def b_blocks_dense(self) -> list[np.ndarray]:
        if self.b_blocks is not None:
            return [self.b_blocks[s].copy() for s in range(self.n_slots)]
        return self.sm.dense_blocks()


def build_kkt_operator(
    W: np.ndarray,
    tau: float,
    mu: float,
    matrices: RateMatrices,
    profile: QuantizationProfile,
    power_model: PowerModel,
    p_total: float,
    smoothing_a: float,
    rho: float,
    low_complexity: bool = False,
) -> KktOperator:
    """Assemble the stationarity operator pair at the current direction.

    The numerator collects softmin-weighted common-rate blocks plus private
    blocks, each normalized by its own quadratic form and scaled by the
    exponential of the objective (lam_num = exp(L), lam_den = 1); the other side
    collects the matching denominator blocks plus the multiplier-weighted
    antenna-power terms.
    """
    terms = matrices.terms
    n, k = terms.n_antennas, terms.n_users
    s = terms.n_slots
    off = s - k
    ridge = matrices.ridge
    qf = matrices.quad_forms(W)
    if not np.all(np.isfinite(qf.q_b)):
        raise FloatingPointError("non-finite quadratic form in operator assembly")

    # antenna-power weights (zero when the multiplier is zero)
    norm_sq = float(np.sum(np.abs(W) ** 2))
    gains = np.sum(np.abs(W) ** 2, axis=1) / profile.alpha
    equad = norm_sq + gains / rho
    log2_inv_rho = math.log2(1.0 + 1.0 / rho)
    c1 = mu * power_model.p_ant / (log2_inv_rho * equad)

    if terms.common:
        rc = qf.rates_common
        wt = softmin_weights(rc, smoothing_a)
        l1 = logsumexp_softmin(rc, smoothing_a)
        c2 = wt / qf.q_bc
        d = wt / qf.q_ac + 1.0 / qf.q_a
    else:
        wt = None
        l1 = 0.0
        c2 = None
        d = 1.0 / qf.q_a
    c3 = 1.0 / qf.q_b
    l2 = float(np.sum(qf.rates_private))
    p_ant_smooth = float(np.sum(power_model.p_ant / (_LN2 * log2_inv_rho) * np.log(equad)))
    l3 = -mu * (
        tau * matrices.p_max / power_model.pa_efficiency
        + power_model.p_lo + p_ant_smooth - p_total
    )
    lam_log = l1 + l2 + l3

    U = terms.steer
    gamma = (c2 + c3) if terms.common else c3

    def mix_sum(coeff, include_signal=True, include_err=True):
        """sum_k coeff_k * (selected parts of G_k) as a dense (N, N) matrix."""
        out = np.zeros((n, n), dtype=complex)
        if include_err:
            if terms.err_dense is not None:
                out += np.einsum("k,knm->nm", coeff, terms.err_dense)
            else:
                out += np.diag(coeff @ terms.err_diag)
        out += np.diag(coeff @ terms.dq)
        if include_signal:
            out += (U * coeff) @ U.conj().T
        return out

    # numerator side
    a_rest = mix_sum(d) + (float(np.sum(d)) * ridge) * np.eye(n)
    if terms.common:
        a_block0 = a_rest - (
            mix_sum(1.0 / qf.q_a, include_signal=True, include_err=True)
            - np.diag((1.0 / qf.q_a) @ terms.dq)
        )
    else:
        a_block0 = a_rest

    sm = None
    b_blocks = None
    if low_complexity:
        from .lowcomplexity import SmBlockInverse, SmWeights

        sm = SmBlockInverse.build(
            SmWeights(c1=c1, c2=c2, c3=c3), profile.alpha, matrices, rho
        )
    else:
        e_base = float(np.sum(c1))
        e_spike = c1 / (rho * profile.alpha)
        core = mix_sum(gamma) + np.diag(e_spike)
        core += (float(np.sum(gamma)) * ridge + e_base) * np.eye(n)
        b_blocks = np.empty((s, n, n), dtype=complex)
        for j in range(k):
            b_blocks[j + off] = core - c3[j] * np.outer(U[:, j], U[:, j].conj())
        if off:
            block0 = mix_sum(c2, include_signal=False) + np.diag(c3 @ terms.dq)
            block0 += np.diag(e_spike)
            block0 += (float(np.sum(gamma)) * ridge + e_base) * np.eye(n)
            b_blocks[0] = block0

    return KktOperator(
        a_block0=a_block0, a_rest=a_rest, b_blocks=b_blocks, sm=sm,
        lam_log=lam_log, offset=off, n_slots=s,
        weights_c1=c1, weights_c2=c2, weights_c3=c3, softmin=wt, quad=qf,
    )


def gpi_step(W: np.ndarray, operator: KktOperator) -> np.ndarray:
    """One normalized power-iteration update of the direction."""
    y = operator.b_solve(operator.a_apply(W))
    if not np.all(np.isfinite(y)):
        raise FloatingPointError("power-iteration update produced non-finite values")
    nrm = np.linalg.norm(y)
    if nrm == 0.0:
        raise FloatingPointError("power-iteration update collapsed to zero")
    return y / nrm


def stationarity_residual(W: np.ndarray, operator: KktOperator) -> float:
    """Scale-free first-order optimality residual ||B^-1 A w - lam w|| / lam.

    The raw residual scales with lam = exp(L); dividing by lam reduces it to
    the unscaled-operator form computed here, which is zero exactly at a
    stationary point and immune to exp(L) under/overflow.
    """
    y = operator.b_solve(operator.a_apply(W))
    return float(np.linalg.norm(y - W))


def solve_direction(
    W0: np.ndarray,
    tau: float,
    mu: float,
    matrices: RateMatrices,
    profile: QuantizationProfile,
    power_model: PowerModel,
    p_total: float,
    config: SystemConfig,
    low_complexity: bool = False,
):
    """Iterate the normalized power-iteration update until the step norm is
    below eps_gpi or t_max_gpi is reached.  Returns (W, iterations, last step).
    """
    W = W0
    step = math.inf
    prev_steps = []
    average = False
    iters = 0
    for _ in range(config.t_max_gpi):
        op = build_kkt_operator(
            W, tau, mu, matrices, profile, power_model, p_total,
            config.smoothing_a, config.indicator_rho, low_complexity=low_complexity,
        )
        W_next = gpi_step(W, op)
        if average:
            W_next = W + W_next
            W_next /= np.linalg.norm(W_next)
        step = float(np.linalg.norm(W_next - W))
        prev_steps.append(step)
        # a step norm that stopped shrinking flags a period-2 cycle of the
        # self-consistent map; averaged updates share its fixed points and
        # damp the oscillating mode
        if not average and len(prev_steps) >= 4 and step > 0.97 * prev_steps[-3]:
            average = True
        W = W_next
        iters += 1
        if step <= config.eps_gpi:
            break
    return W, iters, step


# ---------------------------------------------------------------------------
# power-scale subproblem


@dataclass(frozen=True)
class TauForms:
    """tau-independent pieces of the objective as a function of tau alone."""

    num_c: np.ndarray | None  # (K,) common signal forms
    den_c: np.ndarray | None  # (K,) common denominators less the ridge
    num_p: np.ndarray         # (K,)
    den_p: np.ndarray         # (K,)
    noise_over_p: float       # sigma^2 / P
    budget_fixed: float       # P_LO + smooth antenna power - P_tot
    p_over_eff: float         # P / pa_efficiency


def tau_forms(
    W: np.ndarray,
    matrices: RateMatrices,
    profile: QuantizationProfile,
    power_model: PowerModel,
    p_total: float,
    rho: float,
) -> TauForms:
    qf = matrices.quad_forms(W)
    ridge = matrices.ridge * float(np.sum(np.abs(W) ** 2))
    k = matrices.terms.n_users
    off = matrices.terms.n_slots - k
    num_p = qf.cmag[np.arange(k), np.arange(k) + off]
    if matrices.common:
        num_c = qf.cmag[:, 0]
        den_c = qf.q_bc - ridge
    else:
        num_c = None
        den_c = None
    p_ant = smooth_antenna_power(W, profile, power_model, rho)
    return TauForms(
        num_c=num_c, den_c=den_c, num_p=num_p, den_p=qf.q_b - ridge,
        noise_over_p=matrices.noise_w / matrices.p_max,
        budget_fixed=power_model.p_lo + p_ant - p_total,
        p_over_eff=matrices.p_max / power_model.pa_efficiency,
    )


def _tau_objective(tau: float, tf: TauForms, mu: float, smoothing_a: float) -> float:
    ridge = tf.noise_over_p / tau
    l1 = 0.0
    if tf.num_c is not None:
        rc = np.log1p(tf.num_c / (tf.den_c + ridge)) / _LN2
        l1 = logsumexp_softmin(rc, smoothing_a)
    l2 = float(np.sum(np.log1p(tf.num_p / (tf.den_p + ridge)))) / _LN2
    l3 = -mu * (tau * tf.p_over_eff + tf.budget_fixed)
    return l1 + l2 + l3


def tau_gradient(tau: float, tf: TauForms, mu: float, smoothing_a: float) -> float:
    """Analytic derivative of the objective with respect to the power scale."""
    ridge = tf.noise_over_p / tau
    scale = tf.noise_over_p / (tau * tau * _LN2)
    g = 0.0
    if tf.num_c is not None:
        xi1 = tf.den_c + ridge
        rc = np.log1p(tf.num_c / xi1) / _LN2
        wt = softmin_weights(rc, smoothing_a)
        g += scale * float(np.sum(wt * tf.num_c / (xi1 * (xi1 + tf.num_c))))
    xi2 = tf.den_p + ridge
    g += scale * float(np.sum(tf.num_p / (xi2 * (xi2 + tf.num_p))))
    g -= mu * tf.p_over_eff
    return g


def solve_tau(
    tau0: float,
    tf: TauForms,
    mu: float,
    config: SystemConfig,
):
    """Projected gradient ascent on tau with Armijo backtracking.

    Each update starts from the configured step size and halves it until the
    sufficient-increase condition holds; tau is clamped to [tau_min, 1].
    """
    tau = tau0
    iters = 0
    for _ in range(config.t_max_tau):
        g = tau_gradient(tau, tf, mu, config.smoothing_a)
        base = _tau_objective(tau, tf, mu, config.smoothing_a)
        step = config.step_gd
        cand = tau
        for _ in range(config.max_backtracks):
            trial = min(1.0, max(config.tau_min, tau + step * g))
            if _tau_objective(trial, tf, mu, config.smoothing_a) >= base + config.armijo_c * g * (trial - tau):
                cand = trial
                break
            step *= 0.5
        rel = abs(cand - tau) / abs(tau)
        tau = cand
        iters += 1
        if rel <= config.eps_tau:
            break
    return tau, iters


# ---------------------------------------------------------------------------
# antenna selection and the budget multiplier


def select_antennas(W: np.ndarray, profile: QuantizationProfile, eps_as: float) -> np.ndarray:
    """Boolean mask of antennas with noticeable effective gain.

    Row gains ||W[i,:]||^2 / alpha_i are normalized by their maximum; rows at
    or above eps_as stay active.  Scale invariant; the best row always stays.
    """
    W = np.asarray(W)
    gains = np.sum(np.abs(W) ** 2, axis=1) / profile.alpha
    top = float(np.max(gains))
    if top == 0.0:
        raise ConfigError("cannot select antennas from an all-zero direction")
    return gains / top >= eps_as


def update_mu_bisection(mu: float, delta_bm: float, feasible: bool):
    """Halving-step multiplier update: move opposite the constraint slack."""
    mu_next = max(0.0, mu - delta_bm) if feasible else mu + delta_bm
    return mu_next, delta_bm / 2.0


# ---------------------------------------------------------------------------
# joint driver


@dataclass
class PrecoderSolution:
    """Converged output of one solver run, embedded back onto the full array."""

    W: np.ndarray             # (N, S) unit-norm direction, zero rows off-mask
    F: np.ndarray             # (N, S) precoder, zero rows off-mask
    tau: float
    mu: float
    active_mask: np.ndarray   # (N,) bool
    algorithm: str = ""
    iters_f: int = 0
    iters_f_per_round: list = field(default_factory=list)
    iters_mu: int = 0
    gpi_iters: int = 0
    converged: bool = True

    @property
    def w_bar(self) -> np.ndarray:
        return self.W.reshape(-1, order="F")

    @property
    def n_active(self) -> int:
        return int(np.sum(self.active_mask))


@dataclass
class _ActiveSystem:
    """Problem data restricted to the currently active antennas."""

    channels: ChannelSet
    profile: QuantizationProfile
    power_model: PowerModel
    terms: ChannelTerms
    config: SystemConfig
    common: bool
    iid: bool

    @classmethod
    def build(cls, channels: ChannelSet, config: SystemConfig, common: bool, iid: bool):
        profile = config.quantization_profile()
        pm = PowerModel.from_config(config, profile)
        terms = ChannelTerms.build(
            channels.H_hat, channels.R_err, profile, common=common,
            iid_var=channels.R_err_iid_var if iid else None,
        )
        return cls(channels=channels, profile=profile, power_model=pm, terms=terms,
                   config=config, common=common, iid=iid)

    def restrict(self, keep: np.ndarray) -> "_ActiveSystem":
        ch = self.channels.restrict(keep)
        profile = self.profile.restrict(keep)
        pm = self.power_model.restrict(keep)
        terms = ChannelTerms.build(
            ch.H_hat, ch.R_err, profile, common=self.common,
            iid_var=ch.R_err_iid_var if self.iid else None,
        )
        return _ActiveSystem(channels=ch, profile=profile, power_model=pm, terms=terms,
                             config=self.config, common=self.common, iid=self.iid)

    def matrices(self, tau: float) -> RateMatrices:
        return self.terms.with_ridge(tau, self.config.p_max_w, self.config.noise_w)


def _assemble_precoder(W: np.ndarray, tau: float, profile: QuantizationProfile) -> np.ndarray:
    """F = sqrt(tau) Phi_alpha^{-1/2} W."""
    return math.sqrt(tau) * W / np.sqrt(profile.alpha)[:, None]


def _renormalize(W: np.ndarray) -> np.ndarray:
    return W / np.linalg.norm(W)


def _embed(rows: np.ndarray, mask: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, rows.shape[1]), dtype=rows.dtype)
    out[mask] = rows
    return out


def _inner_precoder_loop(sys: _ActiveSystem, W, tau, mu, low_complexity):
    """Alternate tau ascent and direction solves until the precoder settles."""
    cfg = sys.config
    F_prev = _assemble_precoder(W, tau, sys.profile)
    gpi_total = 0
    iters = 0
    converged = False
    for _ in range(cfg.t_max_f):
        rm = sys.matrices(tau)
        tf = tau_forms(W, rm, sys.profile, sys.power_model, cfg.p_total_w, cfg.indicator_rho)
        tau, _ = solve_tau(tau, tf, mu, cfg)
        rm = sys.matrices(tau)
        W, it, _ = solve_direction(
            W, tau, mu, rm, sys.profile, sys.power_model, cfg.p_total_w, cfg,
            low_complexity=low_complexity,
        )
        gpi_total += it
        F = _assemble_precoder(W, tau, sys.profile)
        rel = float(np.linalg.norm(F - F_prev) / np.linalg.norm(F_prev))
        F_prev = F
        iters += 1
        if rel <= cfg.eps_f:
            converged = True
            break
    return W, tau, iters, gpi_total, converged


def qpcas(
    channels: ChannelSet,
    config: SystemConfig,
    common: bool = True,
    low_complexity: bool | None = None,
    initial_W: np.ndarray | None = None,
) -> PrecoderSolution:
    """Joint precoding, antenna selection and power control under the budget.

    Outer loop bisects the budget multiplier; each round alternates the
    power-scale ascent with direction solves until the precoder is stable,
    then prunes antennas whose relative effective gain falls below eps_as.
    Afterwards the transmit power is maximized for the surviving antennas and
    the direction is re-solved once with the multiplier removed.
    """
    from .baselines import qrzf_direction

    cfg = config
    lowc = cfg.low_complexity if low_complexity is None else low_complexity
    n = cfg.n_antennas
    full_profile = cfg.quantization_profile()
    full_pm = PowerModel.from_config(cfg, full_profile)
    if cfg.p_total_w < full_pm.p_lo + float(np.min(full_pm.p_ant)):
        raise InfeasibleBudgetError(
            f"budget {cfg.p_total_w:.3f} W below the cheapest single-antenna "
            f"circuit cost {full_pm.p_lo + float(np.min(full_pm.p_ant)):.3f} W"
        )

    sys = _ActiveSystem.build(channels, cfg, common=common, iid=lowc)
    mask = np.ones(n, dtype=bool)
    if initial_W is None:
        W = qrzf_direction(channels.H_hat, full_profile, cfg.p_max_w, cfg.noise_w, common=common)
    else:
        W = _renormalize(initial_W.copy())
    tau, mu, delta = 1.0, 0.0, cfg.step_bm

    # the direction keeps its full dimension through the multiplier rounds;
    # the per-round selection is recomputed from the current row gains and
    # only the final one binds, so antennas suppressed by transiently large
    # multipliers can recover in later rounds
    iters_f_per_round = []
    gpi_total = 0
    converged = True
    for _ in range(cfg.t_max_mu):
        W, tau, n_f, n_gpi, ok = _inner_precoder_loop(sys, W, tau, mu, lowc)
        iters_f_per_round.append(n_f)
        gpi_total += n_gpi
        converged = ok
        mask = select_antennas(W, sys.profile, cfg.eps_as)

        p_smooth = (
            tau * cfg.p_max_w / cfg.pa_efficiency
            + sys.power_model.p_lo
            + smooth_antenna_power(W, sys.profile, sys.power_model, cfg.indicator_rho)
        )
        mu, delta = update_mu_bisection(mu, delta, feasible=p_smooth <= cfg.p_total_w)

    # reduce to the selected antennas for the final power update and
    # readjustment
    if not np.all(mask):
        sys = sys.restrict(mask)
        W = _renormalize(W[mask])

    # transmit power to the budget boundary for the selected antennas,
    # pruning weakest rows if even tau_min does not fit
    while True:
        p_cir = sys.power_model.p_lo + float(np.sum(sys.power_model.p_ant))
        tau_budget = cfg.pa_efficiency * (cfg.p_total_w - p_cir) / cfg.p_max_w
        if tau_budget >= cfg.tau_min or mask.sum() <= 1:
            break
        gains = np.sum(np.abs(W) ** 2, axis=1) / sys.profile.alpha
        keep = np.ones(W.shape[0], dtype=bool)
        keep[int(np.argmin(gains))] = False
        mask[mask] = keep
        sys = sys.restrict(keep)
        W = _renormalize(W[keep])
    if tau_budget < cfg.tau_min:
        raise InfeasibleBudgetError(
            f"budget {cfg.p_total_w:.3f} W cannot power any transmit amplitude"
        )
    tau = min(1.0, max(cfg.tau_min, tau_budget))

    rm = sys.matrices(tau)
    W, it, _ = solve_direction(
        W, tau, 0.0, rm, sys.profile, sys.power_model, cfg.p_total_w, cfg,
        low_complexity=lowc,
    )
    gpi_total += it

    if common:
        # a zero common column is itself a feasible rate-splitting precoder;
        # the smoothed common-rate surrogate can strand the iteration a hair
        # below that no-split special case at low SNR, so re-solve the
        # restriction and keep whichever evaluates better on the exact bound
        qf = rm.quad_forms(W)
        se_split = float(np.min(qf.rates_common)) + float(np.sum(qf.rates_private))
        sys_ns = _ActiveSystem(
            channels=sys.channels, profile=sys.profile, power_model=sys.power_model,
            terms=ChannelTerms.build(
                sys.channels.H_hat, sys.channels.R_err, sys.profile, common=False,
                iid_var=sys.channels.R_err_iid_var if lowc else None,
            ),
            config=cfg, common=False, iid=lowc,
        )
        rm_ns = sys_ns.matrices(tau)
        W_ns, it_ns, _ = solve_direction(
            _renormalize(W[:, 1:]), tau, 0.0, rm_ns, sys.profile, sys.power_model,
            cfg.p_total_w, cfg, low_complexity=lowc,
        )
        gpi_total += it_ns
        se_nosplit = float(np.sum(rm_ns.quad_forms(W_ns).rates_private))
        if se_nosplit > se_split:
            W = np.hstack([np.zeros((W_ns.shape[0], 1), dtype=complex), W_ns])

    F_rows = _assemble_precoder(W, tau, sys.profile)
    if not common:
        # keep the (N, K+1) layout: an all-zero common column
        zero = np.zeros((W.shape[0], 1), dtype=complex)
        W = np.hstack([zero, W])
        F_rows = np.hstack([zero, F_rows])
    return PrecoderSolution(
        W=_embed(W, mask, n),
        F=_embed(F_rows, mask, n),
        tau=tau,
        mu=mu,
        active_mask=mask,
        algorithm="qpcas" if common else "qpcas_sdma",
        iters_f=int(np.sum(iters_f_per_round)),
        iters_f_per_round=iters_f_per_round,
        iters_mu=cfg.t_max_mu,
        gpi_iters=gpi_total,
        converged=converged,
    )


def verify_solution(solution: PrecoderSolution, config: SystemConfig, atol: float = 1e-9) -> dict:
    """Check the power-budget and scale constraints of a returned solution.

    Raises AssertionError on violation; returns the audited numbers.
    """
    profile = config.quantization_profile()
    pm = PowerModel.from_config(config, profile)
    p_tx = solution.tau * config.p_max_w
    p_cir = circuit_power(solution.active_mask, pm)
    total = p_tx / config.pa_efficiency + p_cir
    assert p_tx <= config.p_max_w + atol, "transmit power exceeds the maximum"
    assert solution.tau <= 1.0 + 1e-12 and solution.tau > 0.0, "tau outside (0, 1]"
    assert total <= config.p_total_w + atol, (
        f"budget violated: {total} W > {config.p_total_w} W"
    )
    inactive = ~solution.active_mask
    assert np.all(solution.F[inactive] == 0.0), "inactive antenna rows must be exactly zero"
    # trace identity Tr(Phi_alpha F F^H) == tau on the active set
    trace = float(np.sum(profile.alpha[:, None] * np.abs(solution.F) ** 2))
    assert abs(trace - solution.tau) <= 1e-6 * max(1.0, solution.tau), "power-scale trace identity broken"
    return {"p_tx_w": p_tx, "p_cir_w": p_cir, "total_w": total}
