"""Exhaustive ground truth for tiny instances.

Enumerates every binary routing/caching assignment that respects the
single-site rule and the capacity constraints, and returns the exact
objective minimum.  Intended for instances of a handful of tasks; the
search space is the product of per-task options (keep local, or execute
at any reachable site with or without caching there).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .costmodel import BINARY, DecisionVector, ModelContext, build_context
from .errors import InfeasibleScenarioError
from .scenario import Scenario

MAX_TASKS = 6
MAX_STATIONS = 3
MAX_CONTENTS = 4
MAX_COMBOS = 10_000_000


@dataclass
class TinyInstance:
    """A scenario small enough to enumerate exhaustively."""

    scenario: Scenario

    def __post_init__(self):
        n_tasks = len(self.scenario.tasks)
        n_stations = len(self.scenario.stations)
        n_contents = self.scenario.demands.rates.shape[1]
        if n_tasks > MAX_TASKS:
            raise ValueError(f"too many tasks for enumeration: {n_tasks}")
        if n_stations > MAX_STATIONS:
            raise ValueError(f"too many stations for enumeration: {n_stations}")
        if n_contents > MAX_CONTENTS:
            raise ValueError(f"too many contents for enumeration: {n_contents}")


def _task_options(ctx: ModelContext, k: int):
    """Canonical per-task moves: keep local, then each execution site in
    route order with cache off/on (no caching at the data center)."""
    m = ctx.n_stations
    opts = [("local", None, False)]
    mask = ctx.route_mask()[k]
    for col in range(m + 2):
        if not mask[col]:
            continue
        if col == m + 1:
            opts.append(("route", col, False))
        else:
            opts.append(("route", col, False))
            opts.append(("route", col, True))
    return opts


def brute_force_solve(
    instance: TinyInstance, eta: float | None = None
) -> tuple[DecisionVector, float]:
    """Enumerate all feasible binary assignments and minimize the
    objective.  Ties resolve to the lexicographically first assignment
    in canonical option order."""
    ctx = build_context(instance.scenario)
    if eta is None:
        eta = ctx.eta
    m = ctx.n_stations
    k = ctx.n_tasks

    options = [_task_options(ctx, i) for i in range(k)]
    n_combos = 1
    for o in options:
        n_combos *= len(o)
    if n_combos > MAX_COMBOS:
        raise ValueError(f"{n_combos} combinations exceed the enumeration bound")

    # per-task constants as plain floats for the inner loop
    tau_loc = ctx.tau_loc.tolist()
    t_tx = ctx.t_tx.tolist()
    s = ctx.s.tolist()
    reward = (ctx.s * ctx.lam).tolist()
    home = ctx.home.tolist()
    exec_bs = ctx.exec_bs.tolist()
    exec_dc = ctx.exec_dc.tolist()
    x2_cap = ctx.x2_cap
    dc_cap = ctx.dc_cap
    a = ctx.alloc.a.tolist()
    p_home = ctx.alloc.p[range(k), ctx.home].tolist()
    cache_cap = ctx.cache_bits.tolist()
    compute_cap = ctx.compute_hz.tolist()

    best_obj = None
    best_choice = None
    tol = 1e-9

    for choice in itertools.product(*(range(len(o)) for o in options)):
        x2_load = {}
        dc_load = [0.0] * m
        cache_load = [0.0] * m
        spec_load = [0.0] * m
        comp_load = [0.0] * m
        theta = 0.0
        saving = 0.0
        for i in range(k):
            kind, col, cached = options[i][choice[i]]
            if kind == "local":
                theta += tau_loc[i]
                continue
            hm = home[i]
            spec_load[hm] += a[i]
            theta += t_tx[i]
            if col == 0:
                theta += exec_bs[i][hm]
                comp_load[hm] += p_home[i]
                site = hm
            elif col == m + 1:
                theta += exec_dc[i]
                dc_load[hm] += s[i]
                site = None
            else:
                site = col - 1
                theta += exec_bs[i][site]
                x2_load[(hm, site)] = x2_load.get((hm, site), 0.0) + s[i]
            if cached and site is not None:
                cache_load[site] += s[i]
                saving += reward[i]

        feasible = True
        for j in range(m):
            if spec_load[j] > 1.0 + tol:
                feasible = False
                break
            if comp_load[j] > compute_cap[j] + tol:
                feasible = False
                break
            if cache_load[j] > cache_cap[j] + tol:
                feasible = False
                break
        if not feasible:
            continue

        # shared queue delays, once per loaded link
        for (hm, site), bits in x2_load.items():
            q = bits / x2_cap[hm, site]
            for i in range(k):
                kind, col, _ = options[i][choice[i]]
                if kind == "route" and col == site + 1 and home[i] == hm:
                    theta += q
        for hm in range(m):
            if dc_load[hm] > 0:
                q = dc_load[hm] / dc_cap[hm]
                for i in range(k):
                    kind, col, _ = options[i][choice[i]]
                    if kind == "route" and col == m + 1 and home[i] == hm:
                        theta += q

        obj = theta - eta * saving
        if best_obj is None or obj < best_obj:
            best_obj = obj
            best_choice = choice

    if best_choice is None:
        raise InfeasibleScenarioError(-1, "no feasible binary assignment exists")

    dv = ctx.zeros(mode=BINARY)
    for i in range(k):
        kind, col, cached = options[i][best_choice[i]]
        if kind == "local":
            continue
        dv.x[i] = 1.0
        if col == 0:
            dv.y_local[i] = 1.0
            if cached:
                dv.w[i, home[i]] = 1.0
        elif col == m + 1:
            dv.y_dc[i] = 1.0
        else:
            dv.y_fwd[i, col - 1] = 1.0
            if cached:
                dv.w[i, col - 1] = 1.0
    return dv, float(best_obj)
