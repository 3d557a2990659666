"""Timing harness for the recursive-inverse denominator path vs dense solves.

Per-solve costs are measured on batches of independent instances so the
interpreter overhead amortizes and the asymptotic exponents are visible at
moderate N; the production power-iteration step is also timed unbatched for
the end-to-end comparison.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .channel import draw_channels, draw_geometry
from .optimizer import build_kkt_operator, gpi_step
from .power import PowerModel
from .rates import assemble_rate_matrices
from .sysmodel import SystemConfig

__all__ = [
    "BenchRow",
    "batched_chain_solve",
    "batched_dense_solve",
    "run_benchmark",
    "scaling_exponent",
    "time_gpi_step",
]

BENCH_HEADER = "N,K,mode,ms_per_solve,ms_per_step"


@dataclass(frozen=True)
class BenchRow:
    n: int
    k: int
    mode: str          # "sm" or "dense"
    ms_per_solve: float  # block-inverse application, batched average
    ms_per_step: float   # full production power-iteration step

    def row(self):
        return [self.n, self.k, self.mode, self.ms_per_solve, self.ms_per_step]


def _random_problem(rng, m, n, k):
    """Random diagonal-plus-rank-ones instances with guaranteed PD downdates."""
    D = rng.uniform(0.5, 2.0, size=(m, n))
    U = (rng.standard_normal((m, n, k)) + 1j * rng.standard_normal((m, n, k))) / math.sqrt(n)
    gamma = rng.uniform(0.5, 1.5, size=(m, k))
    c3 = 0.5 * gamma  # strictly below the chain coefficient keeps every block PD
    rhs = rng.standard_normal((m, n, k)) + 1j * rng.standard_normal((m, n, k))
    return D, U, gamma, c3, rhs


def batched_chain_solve(D, U, gamma, c3, rhs):
    """Rank-one-chain inverses applied to one right-hand side per private slot.

    D (M, N) diagonal cores, U (M, N, K) update vectors, gamma (M, K) chain
    coefficients, c3 (M, K) per-slot downdate coefficients, rhs (M, N, K).
    Returns (B_slot^-1 rhs_slot) for every slot of every instance.
    """
    m, n, k = U.shape
    z_inv = np.zeros((m, n, n), dtype=complex)
    idx = np.arange(n)
    z_inv[:, idx, idx] = 1.0 / D
    for j in range(k):
        u = U[:, :, j]
        v = np.einsum("mnp,mp->mn", z_inv, u)
        denom = 1.0 + gamma[:, j] * np.real(np.einsum("mn,mn->m", u.conj(), v))
        z_inv -= (gamma[:, j] / denom)[:, None, None] * np.einsum("mn,mp->mnp", v, v.conj())
    V = np.einsum("mnp,mpk->mnk", z_inv, U)
    q = np.real(np.einsum("mnk,mnk->mk", U.conj(), V))
    Y = np.einsum("mnp,mpk->mnk", z_inv, rhs)
    inner = np.einsum("mnk,mnk->mk", U.conj(), Y)
    corr = c3 / (1.0 - c3 * q)
    return Y + corr[:, None, :] * V * inner[:, None, :]


def batched_dense_solve(D, U, gamma, c3, rhs):
    """Direct per-slot assembly and LAPACK solve of the same blocks."""
    m, n, k = U.shape
    core = np.zeros((m, n, n), dtype=complex)
    idx = np.arange(n)
    core[:, idx, idx] = D
    core += np.einsum("mk,mnk,mpk->mnp", gamma, U, U.conj())
    blocks = core[:, None, :, :] - np.einsum("mk,mnk,mpk->mknp", c3, U, U.conj())
    sol = np.linalg.solve(
        blocks.reshape(m * k, n, n), rhs.transpose(0, 2, 1).reshape(m * k, n, 1)
    )
    return sol.reshape(m, k, n).transpose(0, 2, 1)


_CHUNK_BYTES = 4 << 20  # per-matrix-stack footprint kept cache-resident


def _chunked(fn, args):
    """Apply fn over cache-sized sub-batches so every N runs in the same
    memory regime; large stacked arrays would otherwise push big-N timings
    into the bandwidth-bound regime and distort the fitted exponent."""
    D, U, gamma, c3, rhs = args
    m, n, _ = U.shape
    step = max(1, _CHUNK_BYTES // (16 * n * n))
    outs = []
    for lo in range(0, m, step):
        sl = slice(lo, lo + step)
        outs.append(fn(D[sl], U[sl], gamma[sl], c3[sl], rhs[sl]))
    return np.concatenate(outs, axis=0)


def _time_batched(fn, args, repeats, budget_s=0.3):
    """Median chunked run time after one untimed warm-up call."""
    _chunked(fn, args)
    times = []
    spent = 0.0
    while len(times) < repeats or (spent < budget_s and len(times) < 10 * repeats):
        t0 = time.perf_counter()
        _chunked(fn, args)
        dt = time.perf_counter() - t0
        times.append(dt)
        spent += dt
    return float(np.median(times))


def time_gpi_step(n, k, repeats, seed, low_complexity):
    """Median production step time (operator build + solve + normalize), ms."""
    bits = (4, 8, 12, 16)
    cfg = SystemConfig(n_antennas=n, n_users=k, bits=bits, p_max_dbm=40.0, p_total_dbm=50.0)
    rng = np.random.default_rng(seed)
    ch = draw_channels(draw_geometry(cfg, rng), cfg, rng)
    prof = cfg.quantization_profile()
    pm = PowerModel.from_config(cfg, prof)
    rm = assemble_rate_matrices(
        ch.H_hat, ch.R_err, prof, 0.8, cfg.p_max_w, cfg.noise_w,
        iid_var=ch.R_err_iid_var,
    )
    W = rng.standard_normal((n, k + 1)) + 1j * rng.standard_normal((n, k + 1))
    W /= np.linalg.norm(W)

    def one_step():
        op = build_kkt_operator(
            W, 0.8, 0.3, rm, prof, pm, cfg.p_total_w, cfg.smoothing_a,
            cfg.indicator_rho, low_complexity=low_complexity,
        )
        gpi_step(W, op)

    one_step()  # warm caches
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        one_step()
        times.append(time.perf_counter() - t0)
    return 1e3 * float(np.median(times))


def run_benchmark(n_list, k=4, batch=24, repeats=5, seed=0, passes=3) -> list:
    """Per-solve and per-step times for every array size and both paths.

    Batched instances amortize the interpreter overhead so the asymptotic
    cost exponents are visible already at N = 32.  Timings are interleaved
    over several passes and the per-point minimum is kept, which keeps slow
    scheduler windows from skewing any single array size.
    """
    problems = {}
    for n in n_list:
        rng = np.random.default_rng(seed + n)
        problems[n] = _random_problem(rng, batch, n, k)
    best = {(n, mode): [math.inf, math.inf] for n in n_list for mode in ("sm", "dense")}
    for _ in range(passes):
        for n in n_list:
            args = problems[n]
            sm = best[(n, "sm")]
            de = best[(n, "dense")]
            sm[0] = min(sm[0], _time_batched(batched_chain_solve, args, repeats) / batch)
            de[0] = min(de[0], _time_batched(batched_dense_solve, args, repeats) / batch)
            sm[1] = min(sm[1], time_gpi_step(n, k, max(3, repeats), seed, low_complexity=True))
            de[1] = min(de[1], time_gpi_step(n, k, max(3, repeats), seed, low_complexity=False))
    rows = []
    for n in n_list:
        for mode in ("sm", "dense"):
            solve_s, step_ms = best[(n, mode)]
            rows.append(BenchRow(n=n, k=k, mode=mode, ms_per_solve=1e3 * solve_s,
                                 ms_per_step=step_ms))
    return rows


def scaling_exponent(rows, mode="sm") -> float:
    """Log-log slope of the batched per-solve time against the array size."""
    pts = [(r.n, r.ms_per_solve) for r in rows if r.mode == mode]
    if len(pts) < 2:
        raise ValueError("need at least two array sizes to fit an exponent")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


def emit_bench(rows, path) -> None:
    lines = [BENCH_HEADER]
    lines.extend(",".join(repr(v) if isinstance(v, float) else str(v) for v in r.row())
                 for r in rows)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
