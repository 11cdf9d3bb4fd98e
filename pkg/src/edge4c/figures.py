"""Matplotlib renderings of a finished run, written next to the CSVs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_convergence_figure(trace, path) -> None:
    """Objective and surrogate value against the iteration counter."""
    fig, ax = plt.subplots(figsize=(6, 4))
    iters = range(len(trace.proximal_per_iter))
    ax.plot(iters, trace.proximal_per_iter, label="surrogate value", lw=1.8)
    ax.plot(iters, trace.objective_per_iter, label="objective", lw=1.0, ls="--")
    ax.set_xlabel("iteration")
    ax.set_ylabel("value")
    ax.set_title(f"convergence ({trace.rule_used})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_delay_cdf_figure(delay_stats, path) -> None:
    """Empirical CDF of realized per-task delay, median and mean marked."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if delay_stats.cdf:
        xs = [p[0] for p in delay_stats.cdf]
        ys = [p[1] for p in delay_stats.cdf]
        ax.step(xs, ys, where="post", lw=1.8)
    ax.axvline(delay_stats.median, color="tab:blue", ls="-", lw=1.0, label="median")
    ax.axvline(delay_stats.mean, color="black", ls="--", lw=1.0, label="mean")
    ax.set_xlabel("delay (s)")
    ax.set_ylabel("F(delay)")
    ax.set_title("realized delay CDF")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_cache_figure(per_epoch, path) -> None:
    """Per-epoch hit ratio and cumulative bandwidth saving."""
    fig, ax1 = plt.subplots(figsize=(6, 4))
    epochs = [row["epoch"] for row in per_epoch]
    ratios = [row["hit_ratio"] for row in per_epoch]
    savings = []
    acc = 0.0
    for row in per_epoch:
        acc += row["saving_bits"]
        savings.append(acc / 8e9)
    ax1.plot(epochs, ratios, marker="o", color="tab:blue", label="hit ratio")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("hit ratio", color="tab:blue")
    ax1.set_ylim(0, 1)
    ax2 = ax1.twinx()
    ax2.plot(epochs, savings, marker="s", color="tab:orange", label="saved (GB)")
    ax2.set_ylabel("cumulative bandwidth saving (GB)", color="tab:orange")
    ax1.set_title("cache performance")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_run_figures(report, metrics, out_dir) -> None:
    out = Path(out_dir)
    save_convergence_figure(report.trace, out / "fig_convergence.png")
    save_delay_cdf_figure(metrics.delay_stats, out / "fig_delay_cdf.png")
    save_cache_figure(metrics.per_epoch, out / "fig_cache.png")


def render_rule_comparison(traces: dict, path) -> None:
    """Overlay the surrogate traces of several selection rules."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for rule, trace in traces.items():
        ax.plot(
            range(len(trace.proximal_per_iter)),
            trace.proximal_per_iter,
            label=rule,
            lw=1.5,
        )
    ax.set_xlabel("iteration")
    ax.set_ylabel("surrogate value")
    ax.set_title("selection rules")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
