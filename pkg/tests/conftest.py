"""Shared scenario factories for the test suite."""

import numpy as np
import pytest

from edge4c.scenario import (
    ModelParams,
    Scenario,
    WorkloadSpec,
    generate_contents,
    generate_demands,
    generate_tasks,
    zipf_popularity,
)
from edge4c.topology import BaseStation, CollaborationSpace


def make_stations(
    n_bs=2,
    bandwidth=28e6,
    compute=2.25e9,
    cache_bytes=12000.0,
    x2=2.2e6,
    dc=3e5,
    spacing=300.0,
):
    """Stations on a line, fully meshed with X2 links, one shared space."""
    stations = [
        BaseStation(
            id=i,
            position=(i * spacing, 0.0),
            bandwidth_hz=bandwidth,
            compute_hz=compute,
            cache_bytes=cache_bytes,
        )
        for i in range(n_bs)
    ]
    for s in stations:
        s.dc_capacity_bps = dc
        for t in stations:
            if t.id != s.id:
                s.x2_capacity_bps[t.id] = x2
    centroid = (np.mean([s.position[0] for s in stations]), 0.0)
    space = CollaborationSpace(frozenset(s.id for s in stations), centroid)
    return stations, [space]


def make_scenario(
    n_bs=2,
    users_per_bs=2,
    seed=0,
    n_contents=4,
    total_requests=100,
    zipf_a=0.8,
    eta=1e-7,
    energy_budget=(0.001, 0.01),
    data_bits=(1.6e4, 5.6e4),
    deadline_s=(0.02, 12.0),
    cache_bytes=12000.0,
    x2=2.2e6,
    dc=3e5,
    dc_compute_hz=25e9,
) -> Scenario:
    """A compact synthetic scenario with deterministic workload."""
    stations, spaces = make_stations(
        n_bs=n_bs, cache_bytes=cache_bytes, x2=x2, dc=dc
    )
    spec = WorkloadSpec(
        users_per_bs=users_per_bs,
        n_contents=n_contents,
        zipf_a=zipf_a,
        total_requests=total_requests,
        data_bits=data_bits,
        deadline_s=deadline_s,
        energy_budget_j=energy_budget,
    )
    sizes = generate_contents(spec, (seed, 1))
    tasks, users = generate_tasks(spec, stations, (seed, 2), sizes)
    pop = zipf_popularity(zipf_a, n_contents)
    demands = generate_demands(pop, total_requests, stations, (seed, 3), zipf_a)
    params = ModelParams(eta=eta, dc_compute_hz=dc_compute_hz)
    return Scenario(
        stations=stations,
        spaces=spaces,
        users=users,
        tasks=tasks,
        demands=demands,
        params=params,
        content_sizes=sizes,
    )


def random_scenario(seed: int, max_bs=12, max_users=10) -> Scenario:
    """Randomly sized scenario in the desk-scale regime."""
    rng = np.random.default_rng((seed, 77))
    n_bs = int(rng.integers(2, max_bs + 1))
    users = int(rng.integers(2, max_users + 1))
    return make_scenario(
        n_bs=n_bs,
        users_per_bs=users,
        seed=seed,
        n_contents=int(rng.integers(4, 20)),
        total_requests=int(rng.integers(100, 800)),
        zipf_a=float(rng.uniform(0.5, 1.1)),
        eta=float(rng.uniform(2e-8, 2e-7)),
        energy_budget=(0.001, 0.3),
        cache_bytes=float(rng.uniform(8000, 20000)),
    )


def random_relaxed_dv(ctx, seed: int, on_simplex=True):
    """Random box point; routing rows optionally normalized."""
    from edge4c.solver import project_rows_to_simplex

    rng = np.random.default_rng((seed, 5))
    dv = ctx.zeros()
    dv.x = rng.uniform(0, 1, ctx.n_tasks)
    y = rng.uniform(0, 1, (ctx.n_tasks, ctx.n_stations + 2))
    mask = ctx.route_mask()
    if on_simplex:
        y = project_rows_to_simplex(y, mask)
    else:
        y = y * mask
    ctx.unstack_y(dv, y)
    w_mask = ctx._home_onehot.astype(bool) | ctx.nbr_mask
    dv.w = rng.uniform(0, 1, dv.w.shape) * w_mask
    dv.w_dc = rng.uniform(0, 1, ctx.n_tasks)
    return dv


@pytest.fixture
def small_scenario():
    return make_scenario(n_bs=3, users_per_bs=3, seed=11)
