"""SVG plot emission. Every plot is derived from the CSV it accompanies."""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


def stability_curve(csv_path, out_path) -> None:
    """log-log sup-difference vs the fitted envelope over delta."""
    rows = [r for r in _read_csv(csv_path) if r["status"] == "ok"]
    delta = np.array([float(r["delta"]) for r in rows])
    sup = np.array([float(r["sup_diff"]) for r in rows])
    rhs = np.array([float(r["envelope_rhs"]) for r in rows])
    order = np.argsort(delta)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(delta[order], sup[order], "o-", label="sup |v2 - v1|")
    ax.loglog(delta[order], rhs[order], "s--", label="fitted envelope")
    ax.set_xlabel("data difference (L2 norm)")
    ax.set_ylabel("sup norm")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)


def rate_fit(csv_path, out_path, xkey, ykey, xlabel, ylabel) -> None:
    """Generic log-log scatter with least-squares slope annotation."""
    rows = _read_csv(csv_path)
    x = np.array([float(r[xkey]) for r in rows])
    y = np.array([float(r[ykey]) for r in rows])
    good = (x > 0) & (y > 0)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(x[good], y[good], "o")
    if good.sum() >= 2:
        slope, intercept = np.polyfit(np.log(x[good]), np.log(y[good]), 1)
        xs = np.linspace(x[good].min(), x[good].max(), 50)
        ax.loglog(xs, np.exp(intercept) * xs**slope, "-", alpha=0.7,
                  label=f"slope {slope:.2f}")
        ax.legend()
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)


def recon_heatmap(csv_path, out_path) -> None:
    """Scatter heat map of the pointwise reconstruction at the largest
    spectral parameter in the CSV."""
    rows = _read_csv(csv_path)
    lam_max = max(float(r["lam"]) for r in rows)
    rows = [r for r in rows if float(r["lam"]) == lam_max]
    x = np.array([float(r["z0_re"]) for r in rows])
    y = np.array([float(r["z0_im"]) for r in rows])
    val = np.array([float(r["estimate"]) for r in rows])
    fig, ax = plt.subplots(figsize=(5, 4.2))
    sc = ax.scatter(x, y, c=val, s=180, marker="s", cmap="viridis")
    fig.colorbar(sc, ax=ax, label=f"estimate at |lam| = {lam_max:g}")
    ax.set_aspect("equal")
    ax.set_xlabel("Re z0")
    ax.set_ylabel("Im z0")
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)
