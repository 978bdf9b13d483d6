"""Static SVG figures rendered next to the delimited outputs."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .engine import FiniteMixture, MixingVector
from .errors import DataFormatError, DomainError
from .kernels import Family

RATE_METRICS = ("err_f", "err_l1", "kl_contrast")


def read_bench_cells(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(path, None, "bench cells file not found")
    with open(path, "r", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataFormatError(path, None, "bench cells file has no rows")
    return rows


def save_rate_plots(cells: list[dict], out_dir, reference_slopes: bool = True) -> list[Path]:
    """One log-log figure per error metric, a curve per gamma."""
    if not cells:
        raise DomainError("no benchmark cells to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gammas = sorted({float(r["gamma"]) for r in cells})
    ns = sorted({int(r["n"]) for r in cells})
    if not ns:
        raise DomainError("no checkpoints to plot")
    paths = []
    for metric in RATE_METRICS:
        fig, ax = plt.subplots(figsize=(6, 4))
        for gamma in gammas:
            med = []
            for n in ns:
                vals = [float(r[metric]) for r in cells
                        if float(r["gamma"]) == gamma and int(r["n"]) == n]
                med.append(np.median(vals))
            ax.loglog(ns, med, marker="o", label=f"gamma={gamma:g}")
            if reference_slopes:
                ref = -(1.0 - 1.0 / (2.0 * gamma))
                if metric == "kl_contrast":
                    ref *= 2.0
                anchor = med[len(med) // 2]
                n0 = ns[len(ns) // 2]
                ax.loglog(ns, [anchor * (n / n0) ** ref for n in ns],
                          linestyle="--", linewidth=0.8,
                          label=f"ref slope {ref:.3f}")
        ax.set_xlabel("n")
        ax.set_ylabel(metric)
        ax.set_title(f"median {metric} vs sample size")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / f"rate_{metric}.svg"
        fig.savefig(path)
        plt.close(fig)
        paths.append(path)
    return paths


def save_mixing_plot(mixing: MixingVector, path) -> Path:
    """Stem plot of the estimated mixing weights."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.stem(mixing.support.points, mixing.weights, basefmt=" ")
    ax.set_xlabel("support point")
    ax.set_ylabel("weight")
    ax.set_title("estimated mixing distribution")
    ax.set_ylim(bottom=0)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def save_mixture_plot(mixture: FiniteMixture, data, path) -> Path:
    """Estimated mixture density over a histogram of the data."""
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise DomainError("no data to plot")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if mixture.kernel.family is Family.GAUSSIAN:
        pad = 4.0 * mixture.kernel.scale
        xs = np.linspace(data.min() - pad, data.max() + pad, 600)
        ax.hist(data, bins=min(50, max(10, data.size // 4)), density=True,
                alpha=0.4, color="steelblue", label="data")
        ax.plot(xs, mixture.density(xs), color="firebrick", label="estimate")
    else:
        hi = int(max(data.max(), mixture.support.points.max()) + 3)
        ys = np.arange(hi + 1)
        freq = np.bincount(data.astype(int), minlength=hi + 1) / data.size
        ax.bar(ys - 0.2, freq, width=0.4, alpha=0.5, color="steelblue", label="data")
        ax.bar(ys + 0.2, mixture.density(ys.astype(float)), width=0.4,
               alpha=0.7, color="firebrick", label="estimate")
    ax.set_xlabel("y")
    ax.set_ylabel("density")
    ax.set_title("estimated mixture vs data")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
