"""Evaluation quantities of a finished run: throughputs, delay
statistics, cache performance."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .costmodel import DecisionVector, ModelContext


@dataclass
class DelayStats:
    mean: float
    median: float
    p5: float
    p95: float
    cdf: list[tuple[float, float]] = field(default_factory=list)


@dataclass
class RunMetrics:
    network_throughput_bps: float
    computation_throughput_mips: np.ndarray   # per station
    delay_stats: DelayStats
    hit_ratio: float
    bandwidth_saving_bits: float
    per_epoch: list[dict] = field(default_factory=list)


def network_throughput(
    dv: DecisionVector, alloc, ctx: ModelContext, window_s: float = 1.0
) -> float:
    """Bits moved over the radio, inter-station, and backhaul legs per
    window second."""
    y_fwd = dv.y_fwd * ctx.nbr_mask
    radio = np.sum(dv.x * ctx.s)
    x2 = np.sum((dv.x * ctx.s)[:, None] * y_fwd)
    dc = np.sum(dv.x * ctx.s * dv.y_dc)
    return float((radio + x2 + dc) / window_s)


def computation_throughput(
    dv: DecisionVector,
    ctx: ModelContext,
    cpu_width_bits: float = 64.0,
    word_bits: float = 64.0,
) -> np.ndarray:
    """Per-station executed instruction rate in MIPS.

    Cycles per second actually allocated are converted to instructions
    with the configured width-to-word ratio.
    """
    k = ctx.n_tasks
    used = np.zeros(ctx.n_stations)
    home_p = ctx.alloc.p[np.arange(k), ctx.home]
    np.add.at(used, ctx.home, dv.x * dv.y_local * home_p)
    fwd = dv.x[:, None] * (dv.y_fwd * ctx.nbr_mask) * ctx.alloc.p
    used += fwd.sum(axis=0)
    return used * (cpu_width_bits / word_bits) / 1e6


def delay_distribution(per_task_delays) -> DelayStats:
    """Summary statistics and the empirical CDF of realized delays."""
    delays = np.asarray(per_task_delays, dtype=float)
    if delays.size == 0:
        raise ValueError("no delays to summarize")
    srt = np.sort(delays)
    n = srt.size
    cdf = [(float(v), float(i + 1) / n) for i, v in enumerate(srt)]
    return DelayStats(
        mean=float(np.mean(srt)),
        median=float(np.median(srt)),
        p5=float(np.percentile(srt, 5)),
        p95=float(np.percentile(srt, 95)),
        cdf=cdf,
    )


def metrics_to_dict(metrics: RunMetrics) -> dict:
    return {
        "network_throughput_bps": metrics.network_throughput_bps,
        "computation_throughput_mips": [
            float(v) for v in metrics.computation_throughput_mips
        ],
        "delay": {
            "mean_s": metrics.delay_stats.mean,
            "median_s": metrics.delay_stats.median,
            "p5_s": metrics.delay_stats.p5,
            "p95_s": metrics.delay_stats.p95,
        },
        "hit_ratio": metrics.hit_ratio,
        "bandwidth_saving_bits": metrics.bandwidth_saving_bits,
        "per_epoch": metrics.per_epoch,
    }


def write_metrics_csv(metrics: RunMetrics, path) -> None:
    """One row per epoch plus a summary block."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "requests", "hits", "misses", "hit_ratio",
                         "saving_bits"])
        for row in metrics.per_epoch:
            writer.writerow([
                row["epoch"], row["requests"], row["hits"], row["misses"],
                row["hit_ratio"], row["saving_bits"],
            ])
        writer.writerow([])
        writer.writerow(["summary", "", "", "", "", ""])
        writer.writerow(["network_throughput_bps", metrics.network_throughput_bps])
        writer.writerow(["hit_ratio", metrics.hit_ratio])
        writer.writerow(["bandwidth_saving_bits", metrics.bandwidth_saving_bits])
        writer.writerow(["delay_mean_s", metrics.delay_stats.mean])
        writer.writerow(["delay_median_s", metrics.delay_stats.median])
        writer.writerow(["delay_p5_s", metrics.delay_stats.p5])
        writer.writerow(["delay_p95_s", metrics.delay_stats.p95])


def write_metrics_json(metrics: RunMetrics, path) -> None:
    with open(path, "w") as fh:
        json.dump(metrics_to_dict(metrics), fh, indent=2, sort_keys=True)
