"""Static log-log SVG charts rendered from experiment CSVs."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def _read(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _col(rows: list[dict], key: str) -> np.ndarray:
    return np.array([float(r[key]) if r.get(key) not in (None, "", "None") else np.nan for r in rows])


def _overlay_fit(ax, x: np.ndarray, y: np.ndarray, color: str, label: str) -> None:
    ok = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if ok.sum() < 2:
        return
    slope, icpt = np.polyfit(np.log10(x[ok]), np.log10(y[ok]), 1)
    xs = np.logspace(np.log10(x[ok].min()), np.log10(x[ok].max()), 50)
    ax.plot(xs, 10 ** (icpt + slope * np.log10(xs)), "--", color=color, lw=1, label=f"{label} fit, slope {slope:.2f}")


def plot_csv(csv_path: str | Path, svg_path: str | Path) -> Path:
    """Render the chart matching the CSV columns (accuracy, shots-vs-p or LEP comparison)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = _read(csv_path)
    if not rows:
        raise ValueError(f"{csv_path}: no rows to plot")
    cols = set(rows[0])
    fig, ax = plt.subplots(figsize=(5, 4))
    if "tau_median" in cols:
        n, med = _col(rows, "shots"), _col(rows, "tau_median")
        lo, hi = _col(rows, "tau_q25"), _col(rows, "tau_q75")
        ax.errorbar(n, med, yerr=[med - lo, hi - med], fmt="o", color="C0", label="median tau")
        _overlay_fit(ax, n, med, "C0", "median")
        ax.set_xlabel("shots N")
        ax.set_ylabel("tau = max relative error")
    elif "shots_needed" in cols:
        p, need = _col(rows, "p"), _col(rows, "shots_needed")
        ax.plot(p, need, "o", color="C0", label="shots to target")
        _overlay_fit(ax, p, need, "C1", "shots")
        ax.set_xlabel("physical rate p")
        ax.set_ylabel("shots N")
    elif "rel_err_sampled" in cols:
        n = _col(rows, "shots")
        for key, color in (("rel_err_predicted", "C0"), ("rel_err_sampled", "C3")):
            y = _col(rows, key)
            ok = np.isfinite(y)
            name = key.split("_")[-1]
            ax.plot(n[ok], y[ok], "o", color=color, label=f"{name} LEP")
            _overlay_fit(ax, n[ok], y[ok], color, name)
        ax.axhline(0.1, color="grey", lw=0.8)
        ax.set_xlabel("shots N")
        ax.set_ylabel("relative std of LEP estimate")
    else:
        plt.close(fig)
        raise ValueError(f"{csv_path}: unrecognized columns {sorted(cols)}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    svg_path = Path(svg_path)
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return svg_path
