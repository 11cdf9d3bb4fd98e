"""Run configuration: JSON loading, schema validation, and defaults.

Defaults reproduce the standard evaluation setup for this system class
(channel bandwidth 25-32 MHz, server CPUs 2-2.5 GHz, caches 100-500 TB,
inter-station links 20-25 Mbps, backhaul 50-120 Mbps, 2-7 GB inputs,
50 users per station).  Bundled configs under ``edge4c/configs`` scale
these down to desk-size runs.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema

from .errors import ConfigError
from .scenario import BITS_PER_GB, ModelParams, WorkloadSpec
from .solver import SolverParams

DEFAULT_CONFIG = {
    "name": "default",
    "seed": 0,
    "epochs": 5,
    "eta": None,
    "topology": {
        "source": "synthetic",
        "path": None,
        "n_stations": 12,
        "area_m": 2000.0,
        "r": 3,
        "okm_t_max": 100,
        "okm_epsilon": 1e-6,
        "bandwidth_hz": [25e6, 32e6],
        "compute_hz": [2e9, 2.5e9],
        "cache_bytes": [100e12, 500e12],
        "x2_bps": [20e6, 25e6],
        "dc_bps": [50e6, 120e6],
    },
    "workload": {
        "users_per_bs": 50,
        "n_contents": 50,
        "zipf_a": 0.8,
        "total_requests": 2000,
        "data_bits": [2 * BITS_PER_GB, 7 * BITS_PER_GB],
        "deadline_s": [0.02, 12.0],
        "workload_cpb": [452.5, 737.5],
        "user_compute_hz": [0.5e9, 1.0e9],
        "energy_budget_j": [0.5, 2.0],
        "user_distance_m": [20.0, 150.0],
        "tx_power_dbm": 27.0,
        "noise_power_w": 1e-13,
    },
    "model": {
        "nu": 1e-26,
        "phi_wait_factor": 10.0,
        "dc_compute_hz": 25e9,
        "pathloss_exponent": 4.0,
        "routing_eq_tol": 1e-6,
        "cpu_width_bits": 64,
        "mips_word_bits": 64,
    },
    "solver": {
        "rho": 1.0,
        "epsilon": 1e-4,
        "max_iters": 500,
        "rule": "cyclic",
        "subproblem_iters": 40,
        "subproblem_tol": 1e-10,
    },
    "rounding": {
        "theta": 0.7,
        "xi": 0.14285,
    },
}


@dataclass
class TopologySpec:
    source: str = "synthetic"
    path: str | None = None
    n_stations: int = 12
    area_m: float = 2000.0
    r: int = 3
    okm_t_max: int = 100
    okm_epsilon: float = 1e-6
    bandwidth_hz: tuple[float, float] = (25e6, 32e6)
    compute_hz: tuple[float, float] = (2e9, 2.5e9)
    cache_bytes: tuple[float, float] = (100e12, 500e12)
    x2_bps: tuple[float, float] = (20e6, 25e6)
    dc_bps: tuple[float, float] = (50e6, 120e6)


@dataclass
class RoundingSpec:
    theta: float = 0.7
    xi: float = 0.14285


@dataclass
class ScenarioConfig:
    """Validated run configuration."""

    name: str
    seed: int
    epochs: int
    eta: float | None
    topology: TopologySpec
    workload: WorkloadSpec
    model: ModelParams
    solver: SolverParams
    rounding: RoundingSpec
    raw: dict = field(default_factory=dict, repr=False)


def _schema() -> dict:
    text = resources.files("edge4c.configs").joinpath("config.schema.json").read_text()
    return json.loads(text)


def _deep_merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def config_from_dict(data: dict) -> ScenarioConfig:
    """Merge onto defaults, validate against the shipped schema, and
    build the typed configuration."""
    merged = _deep_merge(DEFAULT_CONFIG, data)
    try:
        jsonschema.validate(merged, _schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise ConfigError(f"config invalid at '{path}': {exc.message}") from exc

    topo = merged["topology"]
    wl = merged["workload"]
    md = merged["model"]
    sv = merged["solver"]
    rd = merged["rounding"]
    try:
        topology = TopologySpec(
            source=topo["source"],
            path=topo.get("path"),
            n_stations=topo["n_stations"],
            area_m=topo["area_m"],
            r=topo["r"],
            okm_t_max=topo["okm_t_max"],
            okm_epsilon=topo["okm_epsilon"],
            bandwidth_hz=tuple(topo["bandwidth_hz"]),
            compute_hz=tuple(topo["compute_hz"]),
            cache_bytes=tuple(topo["cache_bytes"]),
            x2_bps=tuple(topo["x2_bps"]),
            dc_bps=tuple(topo["dc_bps"]),
        )
        workload = WorkloadSpec(
            users_per_bs=wl["users_per_bs"],
            n_contents=wl["n_contents"],
            zipf_a=wl["zipf_a"],
            total_requests=wl["total_requests"],
            data_bits=tuple(wl["data_bits"]),
            deadline_s=tuple(wl["deadline_s"]),
            workload_cpb=tuple(wl["workload_cpb"]),
            user_compute_hz=tuple(wl["user_compute_hz"]),
            energy_budget_j=tuple(wl["energy_budget_j"]),
            user_distance_m=tuple(wl["user_distance_m"]),
            tx_power_dbm=wl["tx_power_dbm"],
            noise_power_w=wl["noise_power_w"],
        )
        model = ModelParams(
            nu=md["nu"],
            phi_wait_factor=md["phi_wait_factor"],
            dc_compute_hz=md["dc_compute_hz"],
            pathloss_exponent=md["pathloss_exponent"],
            eta=merged["eta"] if merged["eta"] is not None else 0.0,
            routing_eq_tol=md["routing_eq_tol"],
            cpu_width_bits=md["cpu_width_bits"],
            mips_word_bits=md["mips_word_bits"],
        )
        solver = SolverParams(
            rho=sv["rho"],
            epsilon=sv["epsilon"],
            max_iters=sv["max_iters"],
            rule=sv["rule"],
            seed=merged["seed"],
            subproblem_iters=sv["subproblem_iters"],
            subproblem_tol=sv["subproblem_tol"],
        )
        rounding = RoundingSpec(theta=rd["theta"], xi=rd["xi"])
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc

    if topology.source == "synthetic" and topology.r > topology.n_stations:
        raise ConfigError("topology.r must not exceed topology.n_stations")
    if topology.source == "file" and not topology.path:
        raise ConfigError("topology.source 'file' requires topology.path")

    return ScenarioConfig(
        name=merged["name"],
        seed=merged["seed"],
        epochs=merged["epochs"],
        eta=merged["eta"],
        topology=topology,
        workload=workload,
        model=model,
        solver=solver,
        rounding=rounding,
        raw=merged,
    )


def builtin_config_names() -> list[str]:
    names = []
    for entry in resources.files("edge4c.configs").iterdir():
        if entry.name.endswith(".json") and not entry.name.endswith("schema.json"):
            names.append(entry.name[: -len(".json")])
    return sorted(names)


def load_config(path_or_name: str) -> ScenarioConfig:
    """Load a config from a JSON file path or a bundled name
    ('tiny', 'reference')."""
    candidate = resources.files("edge4c.configs").joinpath(f"{path_or_name}.json")
    try:
        if candidate.is_file():
            data = json.loads(candidate.read_text())
            return config_from_dict(data)
    except (OSError, ValueError):
        pass
    try:
        with open(path_or_name) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path_or_name!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path_or_name!r} is not valid JSON: {exc}") from exc
    return config_from_dict(data)
