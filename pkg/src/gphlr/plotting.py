"""Matplotlib renderings for study outputs.

Figures are written as SVG with a fixed hash salt and no date stamp so the
bytes depend only on the input.
"""

from __future__ import annotations

import math
from collections import OrderedDict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import DataError  # noqa: E402

KL_COLUMNS = ("method", "rank", "n", "alpha", "beta", "nu", "tau2", "seed", "kl")

# line styles after the usual figure convention for the five schemes
METHOD_STYLE = {
    "ind": dict(linestyle=(0, (8, 3)), color="0.45"),
    "nn": dict(linestyle="-.", color="tab:blue"),
    "sum": dict(linestyle="--", color="tab:orange"),
    "nnsum": dict(linestyle=":", color="tab:green"),
    "hlr": dict(linestyle="-", color="black"),
    "exact": dict(linestyle="-", color="tab:red"),
}

RC = {
    "svg.hashsalt": "gphlr",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
}


def _save(fig, out) -> None:
    fmt = str(out).rsplit(".", 1)[-1].lower()
    meta = {"Date": None} if fmt == "svg" else None
    fig.savefig(out, format=fmt if fmt in ("svg", "png", "pdf") else "svg", metadata=meta)
    plt.close(fig)


def _grid(count: int):
    ncols = 1 if count == 1 else 2
    nrows = math.ceil(count / ncols)
    return nrows, ncols


def plot_kl_study(records: list[dict], out) -> int:
    """One panel per parameter setting, one line per method (mean KL over seeds).

    ``records`` are dicts with the kl-study CSV columns (strings or numbers).
    Returns the number of panels drawn.
    """
    if not records:
        raise DataError("kl-study table is empty")
    for col in KL_COLUMNS:
        if col not in records[0]:
            raise DataError(f"schema mismatch: missing column {col!r}")
    panels: OrderedDict = OrderedDict()
    for rec in records:
        try:
            kl = float(rec["kl"]) if str(rec["kl"]).strip() else math.nan
            key = tuple(float(rec[c]) for c in ("n", "alpha", "beta", "nu", "tau2"))
            rank = int(rec["rank"])
        except ValueError as exc:
            raise DataError(f"schema mismatch: {exc}") from None
        if math.isnan(kl):
            continue
        panels.setdefault(key, OrderedDict()).setdefault(rec["method"], {}).setdefault(rank, []).append(kl)
    if not panels:
        raise DataError("kl-study table has no finite KL values")
    with plt.rc_context(RC):
        nrows, ncols = _grid(len(panels))
        fig, axes = plt.subplots(nrows, ncols, figsize=(3.4 * ncols, 2.6 * nrows), squeeze=False)
        for i, (key, methods) in enumerate(panels.items()):
            ax = axes.flat[i]
            ax.set_gid(f"panel-{i}")
            n, alpha, beta, nu, tau2 = key
            for method, by_rank in methods.items():
                ranks = sorted(by_rank)
                vals = [float(np.mean(by_rank[r])) for r in ranks]
                (line,) = ax.plot(ranks, vals, marker="o", markersize=3, label=method.upper(),
                                  **METHOD_STYLE.get(method, {}))
                line.set_gid(f"panel-{i}-{method}")
            if all(v > 0 for m in methods.values() for vs in m.values() for v in vs):
                ax.set_yscale("log")
            ax.set_title(f"n={n:g}, beta={beta:g}, nu={nu:g}, tau2={tau2:g}")
            ax.set_xlabel("rank r")
            ax.set_ylabel("KL divergence")
            ax.legend(frameon=False)
        for ax in axes.flat[len(panels):]:
            ax.set_visible(False)
        fig.tight_layout()
        _save(fig, out)
    return len(panels)


def plot_sim_study(rows, truth, out) -> None:
    """Boxplots of the sill and range estimates per method with the truth marked."""
    methods = list(OrderedDict.fromkeys(r.method for r in rows))
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 2, figsize=(7, 3))
        for ax, name, true in ((axes[0], "alpha_hat", truth.alpha), (axes[1], "beta_hat", truth.beta)):
            data = [[getattr(r, name) for r in rows if r.method == m and not r.error] for m in methods]
            ax.boxplot(data, labels=[m.upper() for m in methods])
            ax.axhline(true, color="black", linewidth=0.8)
            ax.set_title(name.replace("_hat", " estimates"))
        fig.tight_layout()
        _save(fig, out)


def plot_variogram(table, out) -> None:
    """Polar image of semivariance by direction and distance (mirrored through pi)."""
    g = table.grid()
    theta = np.linspace(0.0, 2 * math.pi, 2 * table.n_dir_bins + 1)
    radius = np.linspace(0.0, table.max_dist, table.n_dist_bins + 1)
    vals = np.vstack([g, g])
    with plt.rc_context(RC):
        fig = plt.figure(figsize=(4, 3.6))
        ax = fig.add_subplot(projection="polar")
        mesh = ax.pcolormesh(theta, radius, np.ma.masked_invalid(vals).T, shading="flat")
        fig.colorbar(mesh, ax=ax, label="semivariance")
        fig.tight_layout()
        _save(fig, out)
