"""Figures written next to the CSV output of each CLI command."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "font.size": 10,
}
# keeps the PNG bytes free of version strings
_META = {"Software": None}


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def plot_encoding(rows: list[dict], path) -> None:
    """Grouped bars of target and achieved probability per class."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        x = np.arange(len(rows))
        ax.bar(x - 0.2, [r["target"] for r in rows], 0.4, label="target", color="0.6")
        ax.bar(x + 0.2, [r["achieved"] for r in rows], 0.4, label="achieved", color="C0")
        ax.set_xticks(x, [f"{r['class_id']}\n({r['role']})" for r in rows])
        ax.set_xlabel("class")
        ax.set_ylabel("probability")
        ax.legend()
        _save(fig, path)


def plot_counting(rows: list[dict], path) -> None:
    """Counted size against true size, with the error bound as an error bar."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        true = np.array([r["true_size"] for r in rows], dtype=float)
        est = np.array([r["estimate_real"] for r in rows], dtype=float)
        bound = np.array([r["error_bound"] for r in rows], dtype=float)
        ax.errorbar(true, est, yerr=bound, fmt="o", capsize=3, label="estimate")
        top = max(true.max(initial=0.0), est.max(initial=0.0)) + 1
        ax.plot([0, top], [0, top], "k--", lw=0.8, label="exact")
        ax.set_xlabel("true class size")
        ax.set_ylabel("counted size")
        ax.legend()
        _save(fig, path)


def plot_training(returns, path, window: int = 50) -> None:
    """Episode returns with a trailing moving average."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        returns = np.asarray(returns, dtype=float)
        ep = np.arange(returns.size)
        ax.plot(ep, returns, color="0.75", lw=0.6, label="return")
        if returns.size >= window:
            avg = np.convolve(returns, np.ones(window) / window, mode="valid")
            ax.plot(ep[window - 1 :], avg, color="C0", label=f"mean of last {window}")
        ax.set_xlabel("episode")
        ax.set_ylabel("return")
        ax.legend()
        _save(fig, path)


def plot_sweep(rows: list[dict], path) -> None:
    """Encoding error and iteration count against N on log-log axes."""
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.8))
        n = np.array([r["n_values"] for r in rows], dtype=float)
        err = np.array([r["mean_max_class_error"] for r in rows])
        its = np.array([r["median_grover_iterations"] for r in rows])
        ax1.loglog(n, err, "o-", label="mean worst class error")
        ax1.loglog(n, err[0] * np.sqrt(n[0] / n), "k--", lw=0.8, label="1/sqrt(N)")
        ax1.set_xlabel("N")
        ax1.set_ylabel("error")
        ax1.legend()
        ax2.loglog(n, np.maximum(its, 1e-1), "o-", color="C1", label="median iterations")
        ax2.loglog(n, max(its[0], 1.0) * np.sqrt(n / n[0]), "k--", lw=0.8, label="sqrt(N)")
        ax2.set_xlabel("N")
        ax2.set_ylabel("Grover iterations")
        ax2.legend()
        _save(fig, path)
