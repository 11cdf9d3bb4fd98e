"""Proximal block-coordinate minimization of the relaxed objective.

Each iteration picks one block (x, y, or w), builds the proximal
surrogate -- the objective plus a quadratic penalty anchored at the
current iterate -- and minimizes it over that block's feasible set:
the unit box for x and w, and a per-task routing simplex for y.  The
surrogate touches the objective at the anchor and upper-bounds it
everywhere else, so accepting block minimizers can never increase the
objective; the per-iteration surrogate values form a non-increasing
trace that doubles as the stopping signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .costmodel import RELAXED, DecisionVector, ModelContext, build_context
from .errors import SolverError
from .scenario import Scenario

BLOCKS = ("x", "y", "w")
_RULE_ALIASES = {
    "cyclic": "cyclic",
    "gauss_southwell": "gauss_southwell",
    "gs": "gauss_southwell",
    "randomized": "randomized",
    "random": "randomized",
}


@dataclass
class SolverParams:
    rho: float = 1.0
    epsilon: float = 1e-4
    max_iters: int = 500
    rule: str = "cyclic"
    seed: int = 0
    subproblem_iters: int = 40
    subproblem_tol: float = 1e-10

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be > 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rule not in _RULE_ALIASES:
            raise ValueError(f"unknown rule {self.rule!r}")
        self.rule = _RULE_ALIASES[self.rule]


@dataclass
class SolveTrace:
    objective_per_iter: list[float] = field(default_factory=list)
    proximal_per_iter: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    rule_used: str = "cyclic"


def project_rows_to_simplex(y: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Project each row of y onto the probability simplex over its valid
    columns; invalid columns are forced to zero.  Every row must have at
    least one valid column."""
    neg = -1e30
    u = np.where(mask, y, neg)
    srt = -np.sort(-u, axis=1)
    css = np.cumsum(srt, axis=1) - 1.0
    j = np.arange(1, y.shape[1] + 1)
    cond = srt - css / j > 0
    rho_idx = y.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(y.shape[0]), rho_idx] / (rho_idx + 1)
    return np.maximum(y - theta[:, None], 0.0) * mask


def _block_distance_sq(a: DecisionVector, b: DecisionVector) -> float:
    return float(
        np.sum((a.x - b.x) ** 2)
        + np.sum((a.y_local - b.y_local) ** 2)
        + np.sum((a.y_fwd - b.y_fwd) ** 2)
        + np.sum((a.y_dc - b.y_dc) ** 2)
        + np.sum((a.w - b.w) ** 2)
        + np.sum((a.w_dc - b.w_dc) ** 2)
    )


def proximal_value(
    block_candidate: DecisionVector,
    current_iterate: DecisionVector,
    rho: float,
    scenario_or_ctx: Scenario | ModelContext,
) -> float:
    """Surrogate value at a candidate: objective plus the quadratic
    anchor penalty.  The candidate is expected to differ from the
    iterate only within the active block."""
    ctx = _as_context(scenario_or_ctx)
    return ctx.objective(block_candidate) + 0.5 * rho * _block_distance_sq(
        block_candidate, current_iterate
    )


def _as_context(scenario_or_ctx) -> ModelContext:
    if isinstance(scenario_or_ctx, ModelContext):
        return scenario_or_ctx
    return build_context(scenario_or_ctx)


def _solve_x(dv: DecisionVector, params: SolverParams, ctx: ModelContext) -> None:
    # the objective is affine in the x block, so the box-constrained
    # proximal minimizer is a single clipped gradient step of size 1/rho
    g = ctx.grad_x(dv)
    dv.x = np.clip(dv.x - g / params.rho, 0.0, 1.0)


def _solve_w(dv: DecisionVector, params: SolverParams, ctx: ModelContext) -> None:
    g_w, g_wdc = ctx.grad_w(dv)
    w_mask = ctx._home_onehot.astype(bool) | ctx.nbr_mask
    dv.w = np.clip(dv.w - g_w / params.rho, 0.0, 1.0) * w_mask
    dv.w_dc = np.clip(dv.w_dc - g_wdc / params.rho, 0.0, 1.0)


def _solve_y(dv: DecisionVector, params: SolverParams, ctx: ModelContext) -> None:
    anchor = dv.copy()
    mask = ctx.route_mask()
    y = ctx.stack_y(dv)
    y_anchor = y.copy()
    lip = params.rho + ctx.y_lipschitz_bound()
    h_start = proximal_value(dv, anchor, params.rho, ctx)

    for _ in range(params.subproblem_iters):
        g = ctx.grad_y_stacked(dv) + params.rho * (y - y_anchor)
        y_new = project_rows_to_simplex(y - g / lip, mask)
        step = float(np.max(np.abs(y_new - y)))
        y = y_new
        ctx.unstack_y(dv, y)
        if step <= params.subproblem_tol:
            break

    h_end = proximal_value(dv, anchor, params.rho, ctx)
    if h_end > h_start + 1e-9 * max(1.0, abs(h_start)):
        raise SolverError(
            f"y subproblem ascended: {h_start} -> {h_end} (lip={lip})"
        )

    # cap routing weights at the offload level; keep the cap only when it
    # does not push the surrogate uphill
    capped = np.minimum(y, dv.x[:, None])
    if not np.array_equal(capped, y):
        trial = dv.copy()
        ctx.unstack_y(trial, capped)
        if proximal_value(trial, anchor, params.rho, ctx) <= h_end + 1e-12:
            ctx.unstack_y(dv, capped)


def solve_block(
    block_id: str,
    iterate: DecisionVector,
    params: SolverParams,
    scenario_or_ctx: Scenario | ModelContext,
) -> DecisionVector:
    """Minimize the proximal surrogate over one block, returning a new
    iterate that differs only in that block."""
    ctx = _as_context(scenario_or_ctx)
    dv = iterate.copy()
    if block_id == "x":
        _solve_x(dv, params, ctx)
    elif block_id == "y":
        _solve_y(dv, params, ctx)
    elif block_id == "w":
        _solve_w(dv, params, ctx)
    else:
        raise ValueError(f"unknown block {block_id!r}")
    return dv


def select_block(
    rule: str,
    iterate: DecisionVector,
    t: int,
    seed: int,
    scenario_or_ctx: Scenario | ModelContext,
) -> str:
    """Pick the block to update at iteration t.

    The greedy rule ranks blocks by the projected partial gradient (the
    feasible movement a unit gradient step could make); the raw gradient
    of a block pinned at its bounds carries no achievable descent and
    would stall the sweep.
    """
    rule = _RULE_ALIASES[rule]
    if rule == "cyclic":
        return BLOCKS[t % 3]
    if rule == "randomized":
        rng = np.random.default_rng((seed, t))
        return BLOCKS[int(rng.integers(3))]
    ctx = _as_context(scenario_or_ctx)
    mask = ctx.route_mask()

    g_x = ctx.grad_x(iterate)
    move_x = np.clip(iterate.x - g_x, 0.0, 1.0) - iterate.x

    y = ctx.stack_y(iterate)
    move_y = project_rows_to_simplex(y - ctx.grad_y_stacked(iterate), mask) - y

    g_w, g_wdc = ctx.grad_w(iterate)
    move_w = np.clip(iterate.w - g_w, 0.0, 1.0) - iterate.w
    move_wdc = np.clip(iterate.w_dc - g_wdc, 0.0, 1.0) - iterate.w_dc

    norms = np.array(
        [
            float(np.linalg.norm(move_x)),
            float(np.linalg.norm(move_y)),
            float(np.sqrt(np.sum(move_w**2) + np.sum(move_wdc**2))),
        ]
    )
    return BLOCKS[int(np.argmax(norms))]


def initial_point(scenario_or_ctx: Scenario | ModelContext) -> DecisionVector:
    """Feasible starting point: capable devices keep their task, the
    rest offload toward their home server (falling back to the data
    center when the home CPU is already fully committed)."""
    ctx = _as_context(scenario_or_ctx)
    dv = ctx.zeros(mode=RELAXED)
    dv.x = (ctx.alpha == 0).astype(float)
    dv.y_local = np.ones(ctx.n_tasks)

    committed = np.zeros(ctx.n_stations)
    p_home = ctx.alloc.p[np.arange(ctx.n_tasks), ctx.home]
    for k in range(ctx.n_tasks):
        if dv.x[k] == 0:
            continue
        m = ctx.home[k]
        if committed[m] + p_home[k] <= ctx.compute_hz[m] + 1e-9:
            committed[m] += p_home[k]
        elif ctx.dc_cap[m] > 0:
            dv.y_local[k] = 0.0
            dv.y_dc[k] = 1.0
    return dv


def run_bsum(
    scenario_or_ctx: Scenario | ModelContext, params: SolverParams
) -> tuple[DecisionVector, SolveTrace]:
    """Iterate block solves until the surrogate trace flattens.

    Convergence requires the relative surrogate change to stay within
    epsilon for one full sweep of the three blocks, so a single stalled
    block cannot stop the run early.
    """
    ctx = _as_context(scenario_or_ctx)
    ctx.check_transmittable()
    dv = initial_point(ctx)

    b0 = ctx.objective(dv)
    trace = SolveTrace(
        objective_per_iter=[b0],
        proximal_per_iter=[b0],
        rule_used=params.rule,
    )
    small_streak = 0
    for t in range(params.max_iters):
        block = select_block(params.rule, dv, t, params.seed, ctx)
        prev = dv
        dv = solve_block(block, dv, params, ctx)
        bj = proximal_value(dv, prev, params.rho, ctx)
        trace.objective_per_iter.append(ctx.objective(dv))
        trace.proximal_per_iter.append(bj)
        trace.iterations = t + 1

        prev_bj = trace.proximal_per_iter[-2]
        rel = abs(prev_bj - bj) / max(abs(prev_bj), 1e-12)
        if rel <= params.epsilon:
            small_streak += 1
            if small_streak >= 3:
                trace.converged = True
                break
        else:
            small_streak = 0
    return dv, trace


def write_trace_csv(trace: SolveTrace, path) -> None:
    """Dump the convergence trace as iter,B,B_j rows."""
    with open(path, "w") as fh:
        fh.write("iter,B,B_j\n")
        for i, (b, bj) in enumerate(
            zip(trace.objective_per_iter, trace.proximal_per_iter)
        ):
            fh.write(f"{i},{b!r},{bj!r}\n")
