"""Threshold rounding of relaxed decisions, violation accounting, and a
penalized binary repair search.

Rounding maps every relaxed entry through a threshold, then repairs each
task so that exactly one execution site remains whenever the task is
offloaded.  Capacity overruns that survive rounding are measured as
max-with-zero violations and driven down by a local search over per-task
route and cache moves that minimizes objective + xi * violation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costmodel import BINARY, DecisionVector, ModelContext
from .solver import SolverParams


@dataclass
class ViolationReport:
    """Aggregate capacity overruns of a binary decision vector."""

    delta_a: float      # spectrum (dimensionless fractions)
    delta_p: float      # compute (cycles/s)
    delta_m: float      # cache (bits)
    delta_total: float
    xi: float

    def __post_init__(self):
        for name in ("delta_a", "delta_p", "delta_m", "delta_total"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def _positive_part(residual: np.ndarray, scale: float) -> float:
    # excesses below fp noise (allocations often sum to capacity exactly)
    # count as zero
    snapped = np.where(residual > 1e-9 * max(scale, 1.0), residual, 0.0)
    return float(np.sum(np.maximum(0.0, snapped)))


def violations(
    binary: DecisionVector, alloc, ctx: ModelContext, xi: float = 0.14285
) -> ViolationReport:
    """Max-with-zero excess over spectrum, compute, and cache capacity,
    summed over stations."""
    res = ctx.constraint_residuals(binary, alloc)
    da = _positive_part(res.spectrum, 1.0)
    dp = _positive_part(res.compute, float(np.max(ctx.compute_hz)))
    dm = _positive_part(res.cache, float(np.max(ctx.cache_bits, initial=1.0)))
    return ViolationReport(da, dp, dm, da + dp + dm, xi)


def _route_order_delays(ctx: ModelContext, dv: DecisionVector) -> np.ndarray:
    d = ctx.route_delays(dv)
    return np.column_stack([d["local"], d["fwd"], d["dc"]])


def threshold_round(
    relaxed: DecisionVector, theta: float, ctx: ModelContext
) -> DecisionVector:
    """Round a relaxed vector at threshold theta and repair per task.

    Repair keeps exactly one execution site for offloaded tasks: among
    routes that rounded to one, the largest relaxed value wins, ties go
    to the lower modeled delay and then to the route order (home, then
    stations by id, then data center).  A task whose routes all rounded
    to zero gets the route with the largest relaxed value.  Cache flags
    survive only at the chosen execution station.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie strictly between 0 and 1")
    k, m = ctx.n_tasks, ctx.n_stations
    mask = ctx.route_mask()
    yrel = ctx.stack_y(relaxed) * mask
    delays = _route_order_delays(ctx, relaxed)
    out = ctx.zeros(mode=BINARY)

    for i in range(k):
        if relaxed.x[i] < theta:
            continue
        out.x[i] = 1.0
        valid = np.nonzero(mask[i])[0]
        vals = yrel[i, valid]
        hit = valid[vals >= theta]
        pool = hit if hit.size else valid
        # largest relaxed value; ties by lower delay, then route order
        pv = yrel[i, pool]
        best = pv.max()
        near = pool[pv >= best - 1e-15]
        if near.size > 1:
            dnear = delays[i, near]
            near = near[dnear <= dnear.min() + 1e-15]
        col = int(near[0])

        exec_station = None
        if col == 0:
            out.y_local[i] = 1.0
            exec_station = ctx.home[i]
        elif col == m + 1:
            out.y_dc[i] = 1.0
        else:
            out.y_fwd[i, col - 1] = 1.0
            exec_station = col - 1
        if exec_station is not None and relaxed.w[i, exec_station] >= theta:
            out.w[i, exec_station] = 1.0
        if relaxed.w_dc[i] >= theta:
            out.w_dc[i] = 1.0
    return out


def _task_slice(dv: DecisionVector, k: int):
    return (
        dv.x[k],
        dv.y_local[k],
        dv.y_fwd[k].copy(),
        dv.y_dc[k],
        dv.w[k].copy(),
        dv.w_dc[k],
    )


def _restore_task(dv: DecisionVector, k: int, saved) -> None:
    dv.x[k], dv.y_local[k], dv.y_fwd[k], dv.y_dc[k], dv.w[k], dv.w_dc[k] = saved


def apply_task_route(dv: DecisionVector, k: int, col: int | None, cache: bool, ctx) -> None:
    """Rewrite one task's decision entries canonically: col None keeps
    the task on the device; otherwise col picks the stacked route column
    and ``cache`` places the data at the executing station."""
    m = ctx.n_stations
    dv.y_fwd[k] = 0.0
    dv.w[k] = 0.0
    dv.y_local[k] = 0.0
    dv.y_dc[k] = 0.0
    dv.w_dc[k] = 0.0
    if col is None:
        dv.x[k] = 0.0
        return
    dv.x[k] = 1.0
    if col == 0:
        dv.y_local[k] = 1.0
        if cache:
            dv.w[k, ctx.home[k]] = 1.0
    elif col == m + 1:
        dv.y_dc[k] = 1.0
    else:
        dv.y_fwd[k, col - 1] = 1.0
        if cache:
            dv.w[k, col - 1] = 1.0


def penalized_resolve(
    binary: DecisionVector,
    ctx: ModelContext,
    params: SolverParams,
    xi: float = 0.14285,
    max_passes: int = 50,
) -> DecisionVector:
    """Drive capacity violations out of a rounded vector.

    Local search over per-task reassignments (keep local, or execute at
    any reachable site with or without caching) accepting only moves
    that reduce objective + xi * violation.  Stops when violations no
    longer decrease or a full pass finds no improving move.
    """
    dv = binary.copy()
    mask = ctx.route_mask()

    def penalized(v: DecisionVector) -> tuple[float, float]:
        rep = violations(v, ctx.alloc, ctx, xi)
        return ctx.objective(v) + xi * rep.delta_total, rep.delta_total

    score, delta = penalized(dv)
    if delta == 0:
        return dv

    for _ in range(max_passes):
        delta_before = delta
        improved = False
        for k in range(ctx.n_tasks):
            saved = _task_slice(dv, k)
            best_move = None
            moves = [(None, False)]
            for col in np.nonzero(mask[k])[0]:
                moves.append((int(col), False))
                if col != ctx.n_stations + 1:
                    moves.append((int(col), True))
            for col, cache in moves:
                apply_task_route(dv, k, col, cache, ctx)
                trial_score, trial_delta = penalized(dv)
                if trial_score < score - 1e-12:
                    score, delta = trial_score, trial_delta
                    best_move = (col, cache)
                _restore_task(dv, k, saved)
            if best_move is not None:
                apply_task_route(dv, k, best_move[0], best_move[1], ctx)
                improved = True
        if not improved or delta == 0 or delta >= delta_before:
            break
    return dv


def integrality_gap(
    relaxed_obj: float,
    rounded_obj: float,
    delta_total: float = 0.0,
    tol: float = 1e-9,
) -> float:
    """Ratio of the relaxed objective to the penalized rounded one.

    ``rounded_obj`` already includes the xi-weighted violation term.
    Returns exactly 1.0 when rounding kept the objective and left no
    violations, and NaN when the denominator is not positive (the raw
    values are then the meaningful report).
    """
    if rounded_obj <= 0:
        return float("nan")
    if delta_total == 0 and abs(relaxed_obj - rounded_obj) <= tol * max(
        1.0, abs(rounded_obj)
    ):
        return 1.0
    return relaxed_obj / rounded_obj
