"""Figure builders over the result-CSV schema.

Pure views: every panel is an aggregation (mean and standard error across
seeds) of the delimited results; nothing is recomputed from channel physics.
Styling is pinned so byte-identical PNGs come out of identical CSVs.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "SchemaError",
    "NoDataError",
    "FIGURE_KINDS",
    "load_rows",
    "plot",
    "dominance_note",
]

CSV_HEADER = (
    "seed,algorithm,N,K,P_dBm,Ptot_dBm,kappa,bits,sum_se_lb,common_se,private_se,"
    "sum_se_mc,mc_stderr,n_active,active_mask,p_tx_W,p_cir_W,tau,mu,"
    "iters_F,iters_mu,wall_ms"
)

STYLE = {
    "figure.dpi": 150,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "lines.markersize": 4.5,
    "legend.fontsize": 8,
    "figure.autolayout": True,
}

_ALG_STYLE = {
    "qpcas": ("tab:blue", "o"),
    "qpcas_low": ("tab:cyan", "v"),
    "qpcas_sdma": ("tab:orange", "s"),
    "qgpirs": ("tab:green", "^"),
    "qrzf": ("tab:red", "d"),
}


class SchemaError(ValueError):
    """The CSV does not carry the published result schema."""


class NoDataError(ValueError):
    """The CSV carries no rows usable for the requested figure."""


def load_rows(path) -> list[dict]:
    """Read a results CSV, enforcing the published header."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = CSV_HEADER.split(",")
        got = reader.fieldnames or []
        missing = [c for c in expected if c not in got]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = []
        for raw in reader:
            row = dict(raw)
            for col in ("P_dBm", "Ptot_dBm", "kappa", "sum_se_lb", "common_se",
                        "private_se", "sum_se_mc", "mc_stderr", "p_tx_W", "p_cir_W",
                        "tau", "mu", "wall_ms"):
                row[col] = float(raw[col]) if raw[col] not in ("", "None") else math.nan
            for col in ("seed", "N", "K", "n_active", "iters_F", "iters_mu"):
                row[col] = int(raw[col])
            rows.append(row)
    if not rows:
        raise NoDataError(f"{path}: no data rows")
    return rows


def _mean_stderr(values):
    v = np.asarray(values, dtype=float)
    v = v[~np.isnan(v)]
    if v.size == 0:
        return math.nan, math.nan
    err = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(np.mean(v)), err


def _style_for(alg):
    return _ALG_STYLE.get(alg, ("tab:gray", "x"))


def _curves(rows, x_col):
    """mean +- stderr of the bound per algorithm along a numeric axis."""
    by = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if math.isnan(r["sum_se_lb"]):
            continue
        by[r["algorithm"]][r[x_col]].append(r["sum_se_lb"])
    out = {}
    for alg, series in by.items():
        xs = sorted(series)
        stats = [_mean_stderr(series[x]) for x in xs]
        out[alg] = (xs, [s[0] for s in stats], [s[1] for s in stats])
    return out


def dominance_note(rows) -> str | None:
    """Annotation text when the joint solver dominates plain RZF everywhere."""
    curves = _curves(rows, "P_dBm")
    if "qpcas" not in curves or "qrzf" not in curves:
        return None
    xs, means, _ = curves["qpcas"]
    xr, mr, _ = curves["qrzf"]
    shared = sorted(set(xs) & set(xr))
    if not shared:
        return None
    qp = dict(zip(xs, means))
    rz = dict(zip(xr, mr))
    if all(qp[x] >= rz[x] for x in shared):
        return "qpcas above qrzf at every grid point"
    return None


def _fig_se_vs_p(rows):
    curves = _curves(rows, "P_dBm")
    if not curves:
        raise NoDataError("no sum-SE rows with a P_dBm axis")
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    for alg in sorted(curves):
        xs, means, errs = curves[alg]
        color, marker = _style_for(alg)
        ax.errorbar(xs, means, yerr=errs, label=alg, color=color, marker=marker, capsize=2)
    ax.set_xlabel("maximum transmit power P (dBm)")
    ax.set_ylabel("sum spectral efficiency (bits/s/Hz)")
    note = dominance_note(rows)
    if note:
        ax.set_title(note, fontsize=8)
    ax.legend()
    return fig


def _bits_groups(bits_label):
    """Parse the bits summary ('8' or '4x4+8x4') into [(bits, count)]."""
    groups = []
    for part in bits_label.split("+"):
        if "x" in part:
            b, c = part.split("x")
            groups.append((int(b), int(c)))
        else:
            groups.append((int(part), None))
    return groups


def _selection_by_group(rows, algorithm="qpcas"):
    """Active fraction per DAC group and P for one algorithm."""
    acc = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if r["algorithm"] != algorithm or not r["active_mask"]:
            continue
        groups = _bits_groups(r["bits"])
        mask = np.array([c == "1" for c in r["active_mask"]])
        if len(mask) != r["N"]:
            continue
        if any(c is None for _, c in groups):
            acc[r["P_dBm"]][groups[0][0]].append(float(np.mean(mask)))
            continue
        pattern = [b for b, _ in groups]
        bits_vec = np.array([pattern[i % len(pattern)] for i in range(r["N"])])
        for b in pattern:
            acc[r["P_dBm"]][b].append(float(np.mean(mask[bits_vec == b])))
    return acc


def _fig_selection(rows):
    acc = _selection_by_group(rows)
    if not acc:
        raise NoDataError("no qpcas rows with antenna masks")
    ps = sorted(acc)
    groups = sorted({b for p in acc for b in acc[p]})
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    width = 0.8 / max(1, len(groups))
    for i, b in enumerate(groups):
        xs = np.arange(len(ps)) + (i - (len(groups) - 1) / 2) * width
        ys = [float(np.mean(acc[p].get(b, [np.nan]))) for p in ps]
        ax.bar(xs, ys, width=width, label=f"{b}-bit")
    ax.set_xticks(np.arange(len(ps)))
    ax.set_xticklabels([f"{p:g}" for p in ps])
    ax.set_xlabel("maximum transmit power P (dBm)")
    ax.set_ylabel("active-antenna ratio")
    ax.set_ylim(0, 1.05)
    ax.legend(ncol=min(4, len(groups)))
    return fig


def _fig_se_vs_bits(rows):
    per_bits = defaultdict(list)
    active = defaultdict(list)
    for r in rows:
        if math.isnan(r["sum_se_lb"]):
            continue
        label = r["bits"]
        key = int(label) if label.isdigit() else label
        per_bits[key].append(r["sum_se_lb"])
        active[key].append(r["n_active"] / r["N"])
    if not per_bits:
        raise NoDataError("no rows with a usable DAC-resolution axis")
    keys = sorted(per_bits, key=str)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(4.6, 4.4), sharex=True)
    stats = [_mean_stderr(per_bits[k]) for k in keys]
    xs = np.arange(len(keys))
    ax1.errorbar(xs, [s[0] for s in stats], yerr=[s[1] for s in stats],
                 color="tab:blue", marker="o", capsize=2)
    ax1.set_ylabel("sum SE (bits/s/Hz)")
    ax2.bar(xs, [float(np.mean(active[k])) for k in keys], color="tab:gray", width=0.6)
    ax2.set_xticks(xs)
    ax2.set_xticklabels([str(k) for k in keys], rotation=0 if len(str(keys[-1])) < 4 else 45)
    ax2.set_ylabel("active ratio")
    ax2.set_ylim(0, 1.05)
    ax2.set_xlabel("DAC resolution (bits)")
    return fig


def _fig_convergence(rows):
    iters = [r["iters_F"] for r in rows if r["iters_F"] > 0]
    mus = [r["mu"] for r in rows if not math.isnan(r["mu"])]
    if not iters and not mus:
        raise NoDataError("no convergence columns populated")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(5.6, 2.8))
    if iters:
        xs = np.sort(np.asarray(iters, dtype=float))
        ax1.step(xs, np.arange(1, xs.size + 1) / xs.size, where="post", color="tab:blue")
    ax1.set_xlabel("total precoder-loop iterations")
    ax1.set_ylabel("empirical CDF")
    ax1.set_ylim(0, 1.02)
    if mus:
        ax2.hist(mus, bins=20, color="tab:orange")
    ax2.set_xlabel("final multiplier value")
    ax2.set_ylabel("trials")
    return fig


def _fig_se_vs_kappa(rows):
    curves = _curves(rows, "kappa")
    if not curves:
        raise NoDataError("no sum-SE rows with a kappa axis")
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    for alg in sorted(curves):
        xs, means, errs = curves[alg]
        color, marker = _style_for(alg)
        ax.errorbar(xs, means, yerr=errs, label=alg, color=color, marker=marker, capsize=2)
    ax.set_xlabel("channel quality parameter kappa")
    ax.set_ylabel("sum spectral efficiency (bits/s/Hz)")
    ax.legend()
    return fig


def _fig_speedup(rows):
    walls = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if not math.isnan(r["wall_ms"]):
            walls[r["algorithm"]][r["N"]].append(r["wall_ms"])
    if not walls:
        raise NoDataError("no wall-clock columns populated")
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    if "qpcas" in walls and "qpcas_low" in walls:
        shared = sorted(set(walls["qpcas"]) & set(walls["qpcas_low"]))
        if not shared:
            raise NoDataError("no shared array sizes between the two solver paths")
        red = [100.0 * (1.0 - np.mean(walls["qpcas_low"][n]) / np.mean(walls["qpcas"][n]))
               for n in shared]
        ax.plot(shared, red, color="tab:blue", marker="o")
        ax.set_ylabel("computation time reduction (%)")
    else:
        for alg in sorted(walls):
            ns = sorted(walls[alg])
            color, marker = _style_for(alg)
            ax.plot(ns, [float(np.mean(walls[alg][n])) for n in ns],
                    label=alg, color=color, marker=marker)
        ax.set_ylabel("mean solve time (ms)")
        ax.legend()
    ax.set_xlabel("number of antennas N")
    return fig


FIGURE_KINDS = {
    "se_vs_p": _fig_se_vs_p,
    "selection": _fig_selection,
    "se_vs_bits": _fig_se_vs_bits,
    "convergence": _fig_convergence,
    "se_vs_kappa": _fig_se_vs_kappa,
    "speedup": _fig_speedup,
}


def plot(csv_path, figure_kind: str, out_path) -> str:
    """Render one figure kind from a results CSV to an image file."""
    if figure_kind not in FIGURE_KINDS:
        raise ValueError(f"unknown figure kind {figure_kind!r}; choose from {sorted(FIGURE_KINDS)}")
    rows = load_rows(csv_path)
    with plt.rc_context(STYLE):
        fig = FIGURE_KINDS[figure_kind](rows)
        try:
            fig.savefig(out_path, metadata={"Software": None})
        finally:
            plt.close(fig)
    return str(out_path)
