"""End-to-end orchestration: build the topology and workload, solve the
relaxed problem, round to binary decisions, simulate the caching plane,
and write the report bundle (JSON + CSV + figures)."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import figures
from .cachesim import (
    CacheState,
    HitCounters,
    RequestEvent,
    cache_insert,
    demand_stream,
    hit_ratio,
    rat_exchange,
    realized_bandwidth_saving,
    replay_requests,
)
from .config import ScenarioConfig
from .costmodel import BINARY, DecisionVector, ModelContext, build_context
from .metrics import (
    RunMetrics,
    computation_throughput,
    delay_distribution,
    metrics_to_dict,
    network_throughput,
    write_metrics_csv,
)
from .rounding import (
    ViolationReport,
    apply_task_route,
    integrality_gap,
    penalized_resolve,
    threshold_round,
    violations,
)
from .scenario import (
    ModelParams,
    Scenario,
    generate_contents,
    generate_demands,
    generate_tasks,
    zipf_popularity,
)
from .solver import SolveTrace, run_bsum, write_trace_csv
from .topology import BaseStation, import_stations, run_okm_cs


@dataclass
class SolveReport:
    """Everything a run produces besides the simulation metrics."""

    name: str
    seed: int
    rule: str
    eta: float
    converged: bool
    iterations: int
    trace: SolveTrace
    relaxed_objective: float
    rounded_objective: float
    penalized_objective: float
    final_objective: float
    beta: float
    violations: ViolationReport
    decisions: DecisionVector
    deadline_reroutes: int
    infeasible_tasks: list[int]
    clusters: list[dict] = field(default_factory=list)
    scenario: Scenario | None = None
    context: ModelContext | None = None


def _mid(rng_pair) -> float:
    return 0.5 * (rng_pair[0] + rng_pair[1])


def build_stations(config: ScenarioConfig) -> list[BaseStation]:
    topo = config.topology
    rng = np.random.default_rng((config.seed, 101))
    if topo.source == "file":
        defaults = {
            "B_hz": _mid(topo.bandwidth_hz),
            "P_hz": _mid(topo.compute_hz),
            "C_bytes": _mid(topo.cache_bytes),
        }
        return import_stations(topo.path, defaults)
    stations = []
    for i in range(topo.n_stations):
        pos = tuple(rng.uniform(0.0, topo.area_m, size=2))
        stations.append(
            BaseStation(
                id=i,
                position=pos,
                bandwidth_hz=rng.uniform(*topo.bandwidth_hz),
                compute_hz=rng.uniform(*topo.compute_hz),
                cache_bytes=rng.uniform(*topo.cache_bytes),
            )
        )
    return stations


def link_collaborators(stations, spaces, config: ScenarioConfig) -> None:
    """Attach symmetric inter-station links between space mates and a
    backhaul link per station."""
    topo = config.topology
    rng = np.random.default_rng((config.seed, 102))
    by_id = {s.id: s for s in stations}
    pairs = set()
    for sp in spaces:
        members = sorted(sp.member_ids)
        for i, m in enumerate(members):
            for n in members[i + 1 :]:
                pairs.add((m, n))
    for m, n in sorted(pairs):
        cap = rng.uniform(*topo.x2_bps)
        by_id[m].x2_capacity_bps[n] = cap
        by_id[n].x2_capacity_bps[m] = cap
    for s in stations:
        s.dc_capacity_bps = rng.uniform(*topo.dc_bps)


def resolve_eta(config: ScenarioConfig, scenario: Scenario) -> float:
    """Explicit eta wins; otherwise scale the saving reward so that a
    typical cached task weighs about one delay unit."""
    if config.eta is not None:
        return config.eta
    mean_s = float(np.mean([t.data_bits for t in scenario.tasks]))
    mean_lam = scenario.demands.total / scenario.demands.rates.size
    if mean_s * mean_lam <= 0:
        return 0.0
    return 1.0 / (mean_s * mean_lam)


def build_scenario(config: ScenarioConfig) -> Scenario:
    stations = build_stations(config)
    topo = config.topology
    r = min(topo.r, len(stations))
    spaces = run_okm_cs(
        stations, r, topo.okm_t_max, topo.okm_epsilon, seed=config.seed
    )
    link_collaborators(stations, spaces, config)

    wl = config.workload
    sizes = generate_contents(wl, (config.seed, 103))
    tasks, users = generate_tasks(wl, stations, (config.seed, 104), sizes)
    pop = zipf_popularity(wl.zipf_a, wl.n_contents)
    demands = generate_demands(
        pop, wl.total_requests, stations, (config.seed, 105), wl.zipf_a
    )

    params = ModelParams(
        nu=config.model.nu,
        phi_wait_factor=config.model.phi_wait_factor,
        dc_compute_hz=config.model.dc_compute_hz,
        pathloss_exponent=config.model.pathloss_exponent,
        eta=0.0,
        routing_eq_tol=config.model.routing_eq_tol,
        cpu_width_bits=config.model.cpu_width_bits,
        mips_word_bits=config.model.mips_word_bits,
    )
    scenario = Scenario(
        stations=stations,
        spaces=spaces,
        users=users,
        tasks=tasks,
        demands=demands,
        params=params,
        content_sizes=sizes,
    )
    scenario.params.eta = resolve_eta(config, scenario)
    return scenario


def enforce_deadlines(
    dv: DecisionVector, ctx: ModelContext, max_passes: int = 10
) -> tuple[int, list[int]]:
    """Reroute tasks that miss their deadline to their fastest route;
    tasks with no deadline-feasible route at all are flagged infeasible.

    Mutates ``dv`` in place and returns (reroute count, infeasible ids).
    """
    mask = ctx.route_mask()
    reroutes = 0
    infeasible: set[int] = set()
    for _ in range(max_passes):
        delays = ctx.realized_delays(dv)
        violating = [
            k
            for k in range(ctx.n_tasks)
            if k not in infeasible and delays[k] > ctx.deadline[k] + 1e-12
        ]
        if not violating:
            break
        changed = False
        for k in violating:
            d = ctx.route_delays(dv)
            options: list[tuple[float, int | None]] = []
            if ctx.alpha[k] > 0:
                options.append((ctx.tau_loc[k], None))
            for col in np.nonzero(mask[k])[0]:
                if col == 0:
                    options.append((float(d["local"][k]), 0))
                elif col == ctx.n_stations + 1:
                    options.append((float(d["dc"][k]), ctx.n_stations + 1))
                else:
                    options.append((float(d["fwd"][k, col - 1]), int(col)))
            best_delay, best_col = min(options, key=lambda o: (o[0], -1 if o[1] is None else o[1]))
            if best_delay > ctx.deadline[k] + 1e-12:
                infeasible.add(k)
                continue
            apply_task_route(dv, k, best_col, False, ctx)
            reroutes += 1
            changed = True
        if not changed:
            break
    delays = ctx.realized_delays(dv)
    for k in range(ctx.n_tasks):
        if k not in infeasible and delays[k] > ctx.deadline[k] + 1e-12:
            infeasible.add(k)
    return reroutes, sorted(infeasible)


def run_cache_plane(
    config: ScenarioConfig, scenario: Scenario, ctx: ModelContext, dv: DecisionVector
):
    """Prefetch solver placements and replay the demand stream epoch by
    epoch against LFU caches."""
    state = CacheState.from_stations(scenario.stations)
    sizes = {c: float(scenario.content_sizes[c]) for c in range(len(scenario.content_sizes))}
    neighbors = {s.id: set(scenario.neighbors_of(s.id)) for s in scenario.stations}
    x2_map = {
        (s.id, n): cap for s in scenario.stations for n, cap in s.x2_capacity_bps.items()
    }

    # resource snapshot inputs for the periodic exchange
    used_mips_input = np.zeros(ctx.n_stations)
    home_p = ctx.alloc.p[np.arange(ctx.n_tasks), ctx.home]
    np.add.at(used_mips_input, ctx.home, dv.x * dv.y_local * home_p)
    used_mips_input += (dv.x[:, None] * (dv.y_fwd * ctx.nbr_mask) * ctx.alloc.p).sum(axis=0)
    spectrum_used = np.zeros(ctx.n_stations)
    np.add.at(spectrum_used, ctx.home, dv.x * ctx.alloc.a)
    for s in scenario.stations:
        i = ctx.station_index[s.id]
        state.caches[s.id].reserved_compute_hz = float(used_mips_input[i])
        state.caches[s.id].reserved_spectrum = float(spectrum_used[i])

    placements = []
    for k in range(ctx.n_tasks):
        for j in np.nonzero(dv.w[k] > 0)[0]:
            placements.append((ctx.station_ids[int(j)], scenario.tasks[k].content_id))
    placements.sort()

    events: list[RequestEvent] = []
    totals = HitCounters()
    per_epoch = []
    snapshots = []
    for epoch in range(config.epochs):
        for bs_id, content in placements:
            if sizes[content] <= state.caches[bs_id].capacity_bits:
                cache_insert(state, bs_id, content, sizes[content])
        stream = demand_stream(scenario.demands, epoch, config.seed)
        trace, counters = replay_requests(
            state, stream, epoch, neighbors, sizes, x2_map
        )
        events.extend(trace)
        totals.hits += counters.hits
        totals.misses += counters.misses
        per_epoch.append(
            {
                "epoch": epoch,
                "requests": counters.hits + counters.misses,
                "hits": counters.hits,
                "misses": counters.misses,
                "hit_ratio": hit_ratio(counters),
                "saving_bits": realized_bandwidth_saving(trace, sizes),
            }
        )
        snapshots.append(rat_exchange(state, scenario.stations, epoch))
    return events, totals, per_epoch, snapshots, sizes


def _encode_decisions(dv: DecisionVector, ctx: ModelContext, scenario: Scenario) -> list[dict]:
    rows = []
    for k in range(ctx.n_tasks):
        if dv.x[k] == 0:
            rows.append({"task": k, "offloaded": False, "route": "device", "cached_at": None})
            continue
        cached = [ctx.station_ids[int(j)] for j in np.nonzero(dv.w[k] > 0)[0]]
        if dv.y_local[k] > 0:
            route = f"home:{ctx.station_ids[ctx.home[k]]}"
        elif dv.y_dc[k] > 0:
            route = "dc"
        else:
            j = int(np.argmax(dv.y_fwd[k]))
            route = f"fwd:{ctx.station_ids[j]}"
        rows.append(
            {
                "task": k,
                "offloaded": True,
                "route": route,
                "cached_at": cached[0] if cached else None,
            }
        )
    return rows


def report_to_dict(report: SolveReport, metrics: RunMetrics, config: ScenarioConfig) -> dict:
    beta = report.beta
    return {
        "name": report.name,
        "seed": report.seed,
        "rule": report.rule,
        "eta": report.eta,
        "converged": report.converged,
        "iterations": report.iterations,
        "relaxed_objective": report.relaxed_objective,
        "rounded_objective": report.rounded_objective,
        "penalized_objective": report.penalized_objective,
        "final_objective": report.final_objective,
        "beta": None if (beta is None or math.isnan(beta)) else beta,
        "violations": {
            "delta_a": report.violations.delta_a,
            "delta_p": report.violations.delta_p,
            "delta_m": report.violations.delta_m,
            "delta_total": report.violations.delta_total,
            "xi": report.violations.xi,
        },
        "deadline": {
            "reroutes": report.deadline_reroutes,
            "infeasible_tasks": report.infeasible_tasks,
        },
        "decisions": _encode_decisions(report.decisions, report.context, report.scenario),
        "clusters": report.clusters,
        "metrics": metrics_to_dict(metrics),
        "config": config.raw,
    }


def write_report(
    report: SolveReport, metrics: RunMetrics, config: ScenarioConfig,
    events, out_dir,
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = report_to_dict(report, metrics, config)
    payload["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    with open(out / "report.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    write_trace_csv(report.trace, out / "trace.csv")
    write_metrics_csv(metrics, out / "metrics.csv")
    with open(out / "hits.csv", "w") as fh:
        fh.write("epoch,bs,content,outcome,served_by\n")
        for ev in events:
            served = "" if ev.served_by is None else ev.served_by
            fh.write(f"{ev.epoch},{ev.bs},{ev.content},{ev.outcome},{served}\n")
    figures.render_run_figures(report, metrics, out)


def run_pipeline(
    config: ScenarioConfig,
    out_dir=None,
    rule: str | None = None,
    scenario: Scenario | None = None,
) -> tuple[SolveReport, RunMetrics]:
    """Execute the full chain and optionally write the artifact bundle."""
    if scenario is None:
        scenario = build_scenario(config)
    ctx = build_context(scenario)

    params = config.solver
    if rule is not None:
        params = replace(params, rule=rule)

    relaxed, trace = run_bsum(ctx, params)
    relaxed_obj = ctx.objective(relaxed)

    xi = config.rounding.xi
    binary = threshold_round(relaxed, config.rounding.theta, ctx)
    binary = penalized_resolve(binary, ctx, params, xi)
    rounded_obj = ctx.objective(binary)
    report_v = violations(binary, ctx.alloc, ctx, xi)
    penalized_obj = rounded_obj + xi * report_v.delta_total
    beta = integrality_gap(relaxed_obj, penalized_obj, report_v.delta_total)

    reroutes, infeasible = enforce_deadlines(binary, ctx)
    binary.mode = BINARY
    binary.validate()
    final_obj = ctx.objective(binary)

    events, totals, per_epoch, _, sizes = run_cache_plane(config, scenario, ctx, binary)

    delays = ctx.realized_delays(binary)
    feasible_mask = np.ones(ctx.n_tasks, dtype=bool)
    feasible_mask[infeasible] = False
    delay_pool = delays[feasible_mask] if feasible_mask.any() else delays
    metrics = RunMetrics(
        network_throughput_bps=network_throughput(binary, ctx.alloc, ctx),
        computation_throughput_mips=computation_throughput(
            binary, ctx, config.model.cpu_width_bits, config.model.mips_word_bits
        ),
        delay_stats=delay_distribution(delay_pool),
        hit_ratio=hit_ratio(totals),
        bandwidth_saving_bits=realized_bandwidth_saving(events, sizes),
        per_epoch=per_epoch,
    )

    clusters = [
        {"members": sorted(sp.member_ids), "centroid": list(sp.centroid)}
        for sp in scenario.spaces
    ]
    report = SolveReport(
        name=config.name,
        seed=config.seed,
        rule=params.rule,
        eta=scenario.params.eta,
        converged=trace.converged,
        iterations=trace.iterations,
        trace=trace,
        relaxed_objective=relaxed_obj,
        rounded_objective=rounded_obj,
        penalized_objective=penalized_obj,
        final_objective=final_obj,
        beta=beta,
        violations=report_v,
        decisions=binary,
        deadline_reroutes=reroutes,
        infeasible_tasks=infeasible,
        clusters=clusters,
        scenario=scenario,
        context=ctx,
    )
    if out_dir is not None:
        write_report(report, metrics, config, events, out_dir)
    return report, metrics


def compare_rules(config: ScenarioConfig, out_dir=None) -> list[dict]:
    """Run all three selection rules on the identical scenario and
    tabulate {rule, iterations, final objective, violation, beta}."""
    scenario = build_scenario(config)
    rows = []
    traces = {}
    for rule in ("cyclic", "gauss_southwell", "randomized"):
        sub = Path(out_dir) / rule if out_dir is not None else None
        report, _ = run_pipeline(config, out_dir=sub, rule=rule, scenario=scenario)
        traces[rule] = report.trace
        rows.append(
            {
                "rule": rule,
                "iterations": report.iterations,
                "final_objective": report.trace.objective_per_iter[-1],
                "delta_total": report.violations.delta_total,
                "beta": report.beta,
            }
        )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "comparison.csv", "w") as fh:
            fh.write("rule,iterations,final_objective,delta_total,beta\n")
            for r in rows:
                fh.write(
                    f"{r['rule']},{r['iterations']},{r['final_objective']!r},"
                    f"{r['delta_total']!r},{r['beta']!r}\n"
                )
        figures.render_rule_comparison(traces, out / "fig_rules.png")
    return rows
