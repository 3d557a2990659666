"""Experiment orchestration: config files, seeded Monte Carlo sweeps,
parallel trial execution and CSV/JSON result emission.

One task = one (antenna count, power, bits pattern, kappa, trial) grid point;
every algorithm in the run sees the same channel realization of that task, so
scheme comparisons are paired.  Records are sorted by a canonical key before
emission, which makes output bytes independent of worker count (wall-clock
timings are the one intentionally nondeterministic column).
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .baselines import ALGORITHMS, solve
from .channel import ChannelSet, conditional_channel_draws, draw_channels, draw_geometry
from .optimizer import InfeasibleBudgetError, PrecoderSolution, verify_solution
from .power import PowerModel, circuit_power
from .rates import instantaneous_rates_batch, lower_bound_rates
from .sysmodel import ConfigError, SystemConfig

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "CSV_HEADER",
    "run_experiment",
    "mc_ergodic_se",
    "evaluate_solution",
    "emit_results",
    "load_records",
]

CSV_HEADER = (
    "seed,algorithm,N,K,P_dBm,Ptot_dBm,kappa,bits,sum_se_lb,common_se,private_se,"
    "sum_se_mc,mc_stderr,n_active,active_mask,p_tx_W,p_cir_W,tau,mu,"
    "iters_F,iters_mu,wall_ms"
)

# SystemConfig fields a config file may override under "solver"
_SOLVER_KEYS = {
    "smoothing_a", "indicator_rho", "eps_gpi", "t_max_gpi", "eps_f", "t_max_f",
    "eps_tau", "t_max_tau", "t_max_mu", "eps_as", "step_gd", "step_bm", "tau_min",
    "armijo_c", "max_backtracks", "noise_figure_db", "bandwidth_hz", "noise_power_w",
    "sampling_rate_hz", "pa_efficiency", "p_lo_w", "p_lp_w", "p_m_w", "p_h_w",
    "carrier_hz", "cell_radius_m", "min_distance_m", "pathloss_exponent",
    "pathloss_ref_m", "shadowing_std_db", "scatter_spread_rad", "aod_window_rad",
}

_TOP_KEYS = {
    "n_antennas", "n_users", "p_dbm", "p_total_dbm", "bits", "kappa",
    "algorithms", "n_trials", "seed", "mc_draws", "low_complexity", "solver",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """A sweep grid over (N, P, bits pattern, kappa) times trials times schemes."""

    n_antennas: tuple = (16,)
    n_users: int = 4
    p_dbm: tuple = (30.0,)
    p_total_dbm: float = 40.0
    bits: tuple = ((4, 8, 12, 16),)
    kappa: tuple = (0.4,)
    algorithms: tuple = ("qpcas",)
    n_trials: int = 1
    seed: int = 0
    mc_draws: int = 0
    low_complexity: bool = False
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        for axis in ("n_antennas", "p_dbm", "bits", "kappa", "algorithms"):
            if len(getattr(self, axis)) == 0:
                raise ConfigError(f"sweep axis {axis} must not be empty")
        unknown = set(self.solver) - _SOLVER_KEYS
        if unknown:
            raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
        for alg in self.algorithms:
            if alg not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {alg!r}; choose from {sorted(ALGORITHMS)}")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        unknown = set(raw) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

        def as_tuple(value, kind=float):
            if isinstance(value, (list, tuple)):
                return tuple(kind(v) for v in value)
            return (kind(value),)

        out = {}
        if "n_antennas" in raw:
            out["n_antennas"] = as_tuple(raw["n_antennas"], int)
        if "n_users" in raw:
            out["n_users"] = int(raw["n_users"])
        if "p_dbm" in raw:
            out["p_dbm"] = as_tuple(raw["p_dbm"], float)
        if "p_total_dbm" in raw:
            out["p_total_dbm"] = float(raw["p_total_dbm"])
        if "bits" in raw:
            b = raw["bits"]
            if not isinstance(b, (list, tuple)) or len(b) == 0:
                raise ConfigError("bits must be a pattern or a list of patterns")
            if isinstance(b[0], (list, tuple)):
                out["bits"] = tuple(tuple(int(x) for x in pat) for pat in b)
            else:
                out["bits"] = (tuple(int(x) for x in b),)
        if "kappa" in raw:
            out["kappa"] = as_tuple(raw["kappa"], float)
        if "algorithms" in raw:
            out["algorithms"] = as_tuple(raw["algorithms"], str)
        if "n_trials" in raw:
            out["n_trials"] = int(raw["n_trials"])
        if "seed" in raw:
            out["seed"] = int(raw["seed"])
        if "mc_draws" in raw:
            out["mc_draws"] = int(raw["mc_draws"])
        if "low_complexity" in raw:
            out["low_complexity"] = bool(raw["low_complexity"])
        if "solver" in raw:
            if not isinstance(raw["solver"], dict):
                raise ConfigError("solver must be a table of SystemConfig overrides")
            out["solver"] = dict(raw["solver"])
        return cls(**out)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as err:
                raise ConfigError(f"{path}: not valid JSON: {err}") from err
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(raw)

    def system_config(self, n: int, p_dbm: float, bits: tuple, kappa: float) -> SystemConfig:
        return SystemConfig(
            n_antennas=n, n_users=self.n_users, bits=bits, p_max_dbm=p_dbm,
            p_total_dbm=self.p_total_dbm, kappa=kappa,
            low_complexity=self.low_complexity, rng_seed=self.seed,
            **self.solver,
        )

    def tasks(self):
        for i_n, n in enumerate(self.n_antennas):
            for i_p, p in enumerate(self.p_dbm):
                for i_b, bits in enumerate(self.bits):
                    for i_k, kappa in enumerate(self.kappa):
                        for trial in range(self.n_trials):
                            yield (i_n, i_p, i_b, i_k, trial)


@dataclass
class TrialRecord:
    """One optimization run's metrics, mirroring the CSV schema."""

    seed: int
    algorithm: str
    n: int
    k: int
    p_dbm: float
    ptot_dbm: float
    kappa: float
    bits: str
    sum_se_lb: float
    common_se: float
    private_se: float
    sum_se_mc: float
    mc_stderr: float
    n_active: int
    active_mask: str
    p_tx_w: float
    p_cir_w: float
    tau: float
    mu: float
    iters_f: int
    iters_mu: int
    wall_ms: float

    def row(self) -> list:
        return [
            self.seed, self.algorithm, self.n, self.k, self.p_dbm, self.ptot_dbm,
            self.kappa, self.bits, self.sum_se_lb, self.common_se, self.private_se,
            self.sum_se_mc, self.mc_stderr, self.n_active, self.active_mask,
            self.p_tx_w, self.p_cir_w, self.tau, self.mu, self.iters_f,
            self.iters_mu, self.wall_ms,
        ]

    def sort_key(self):
        return (self.n, self.p_dbm, self.kappa, self.bits, self.seed, self.algorithm)


def bits_summary(bits_vector: np.ndarray) -> str:
    """Compact group encoding, e.g. '8' or '4x4+8x4+12x4+16x4'."""
    vals = list(dict.fromkeys(int(b) for b in bits_vector))
    if len(vals) == 1:
        return str(vals[0])
    counts = {v: int(np.sum(bits_vector == v)) for v in vals}
    return "+".join(f"{v}x{counts[v]}" for v in vals)


def mc_ergodic_se(
    solution: PrecoderSolution,
    channels: ChannelSet,
    config: SystemConfig,
    n_draws: int,
    rng: np.random.Generator,
):
    """Monte Carlo ergodic sum rate over conditional channel draws.

    Returns (mean, standard error) of the true-channel sum rate evaluated on
    draws h | hhat; with kappa = 0 the draws collapse onto the estimate and
    the standard error is zero.
    """
    profile = config.quantization_profile()
    draws = conditional_channel_draws(channels, n_draws, rng)
    has_common = bool(np.any(np.abs(solution.F[:, 0]) > 0))
    r_c, r_k = instantaneous_rates_batch(solution.F, draws, profile, config.p_max_w, config.noise_w)
    total = (r_c if has_common else 0.0) + np.sum(r_k, axis=1)
    mean = float(np.mean(total))
    stderr = float(np.std(total, ddof=1) / math.sqrt(n_draws)) if n_draws > 1 else 0.0
    return mean, stderr


def evaluate_solution(
    solution: PrecoderSolution, channels: ChannelSet, config: SystemConfig
):
    """Lower-bound sum SE split into common and private parts (bits/s/Hz)."""
    profile = config.quantization_profile()
    r_c, r_k = lower_bound_rates(
        solution.F, channels.H_hat, channels.R_err, profile, config.p_max_w, config.noise_w
    )
    has_common = bool(np.any(np.abs(solution.F[:, 0]) > 0))
    common = float(np.min(r_c)) if has_common else 0.0
    private = float(np.sum(r_k))
    return common + private, common, private


def _task_seed(exp: ExperimentConfig, task) -> int:
    i_n, i_p, i_b, i_k, trial = task
    # channels depend on the trial, array size and CSIT quality only, so the
    # same physical channel is reused across powers, bits and algorithms
    ss = np.random.SeedSequence((exp.seed, trial, i_n, i_k))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _run_task(exp: ExperimentConfig, task) -> list:
    i_n, i_p, i_b, i_k, trial = task
    n = exp.n_antennas[i_n]
    p_dbm = exp.p_dbm[i_p]
    bits = exp.bits[i_b]
    kappa = exp.kappa[i_k]
    seed = _task_seed(exp, task)

    records = []
    try:
        cfg = exp.system_config(n, p_dbm, bits, kappa)
    except ConfigError:
        raise
    rng = np.random.default_rng(seed)
    ch = draw_channels(draw_geometry(cfg, rng), cfg, rng)
    pm = PowerModel.from_config(cfg)

    for i_alg, alg in enumerate(exp.algorithms):
        base = dict(
            seed=seed, algorithm=alg, n=n, k=cfg.n_users, p_dbm=p_dbm,
            ptot_dbm=exp.p_total_dbm, kappa=kappa,
            bits=bits_summary(cfg.bits_vector()),
        )
        t0 = time.perf_counter()
        try:
            sol = solve(alg, ch, cfg)
        except InfeasibleBudgetError:
            records.append(TrialRecord(
                **base, sum_se_lb=math.nan, common_se=math.nan, private_se=math.nan,
                sum_se_mc=math.nan, mc_stderr=math.nan, n_active=0,
                active_mask="0" * n, p_tx_w=math.nan, p_cir_w=math.nan,
                tau=math.nan, mu=math.nan, iters_f=0, iters_mu=0,
                wall_ms=(time.perf_counter() - t0) * 1e3,
            ))
            continue
        wall_ms = (time.perf_counter() - t0) * 1e3
        audit = verify_solution(sol, cfg)
        se, common, private = evaluate_solution(sol, ch, cfg)
        if exp.mc_draws > 0:
            mc_rng = np.random.default_rng(
                np.random.SeedSequence((exp.seed, trial, i_n, i_k, i_p, i_b, i_alg, 7))
            )
            mc_mean, mc_err = mc_ergodic_se(sol, ch, cfg, exp.mc_draws, mc_rng)
        else:
            mc_mean, mc_err = math.nan, math.nan
        records.append(TrialRecord(
            **base, sum_se_lb=se, common_se=common, private_se=private,
            sum_se_mc=mc_mean, mc_stderr=mc_err, n_active=sol.n_active,
            active_mask="".join("1" if b else "0" for b in sol.active_mask),
            p_tx_w=audit["p_tx_w"], p_cir_w=audit["p_cir_w"], tau=sol.tau, mu=sol.mu,
            iters_f=sol.iters_f, iters_mu=sol.iters_mu, wall_ms=wall_ms,
        ))
    return records


def run_experiment(config: ExperimentConfig, workers: int = 1) -> list:
    """Execute the whole grid; deterministic output order for any worker count."""
    tasks = list(config.tasks())
    records = []
    if workers <= 1:
        for task in tasks:
            records.extend(_run_task(config, task))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(_run_task, [config] * len(tasks), tasks, chunksize=1):
                records.extend(chunk)
    records.sort(key=TrialRecord.sort_key)
    return records


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_results(records: list, path, fmt: str = "csv") -> None:
    """Write records as CSV (pinned header) or JSON (same field names)."""
    try:
        if fmt == "csv":
            lines = [CSV_HEADER]
            lines.extend(",".join(_fmt(v) for v in r.row()) for r in records)
            text = "\n".join(lines) + "\n"
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        elif fmt == "json":
            cols = CSV_HEADER.split(",")
            payload = []
            for r in records:
                row = {}
                for name, value in zip(cols, r.row()):
                    if isinstance(value, float) and math.isnan(value):
                        value = None
                    row[name] = value
                payload.append(row)
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, indent=1)
                fh.write("\n")
        else:
            raise ConfigError(f"unknown output format {fmt!r}")
    except OSError as err:
        raise OSError(f"cannot write results to {path}: {err}") from err


def load_records(path) -> list:
    """Read back a CSV produced by emit_results (round-trip helper)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ConfigError(f"{path}: unexpected CSV header")
        out = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            out.append(TrialRecord(
                seed=int(parts[0]), algorithm=parts[1], n=int(parts[2]), k=int(parts[3]),
                p_dbm=float(parts[4]), ptot_dbm=float(parts[5]), kappa=float(parts[6]),
                bits=parts[7], sum_se_lb=float(parts[8]), common_se=float(parts[9]),
                private_se=float(parts[10]), sum_se_mc=float(parts[11]),
                mc_stderr=float(parts[12]), n_active=int(parts[13]), active_mask=parts[14],
                p_tx_w=float(parts[15]), p_cir_w=float(parts[16]), tau=float(parts[17]),
                mu=float(parts[18]), iters_f=int(parts[19]), iters_mu=int(parts[20]),
                wall_ms=float(parts[21]),
            ))
    return out
