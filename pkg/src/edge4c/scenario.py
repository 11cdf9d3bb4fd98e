"""Workload synthesis: users, tasks, content catalog, and demand matrices.

All quantities use one canonical unit system: sizes in bits, rates in
bits/s, compute in CPU cycles/s, energy in joules, time in seconds.
1 GB is 8e9 bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .topology import BaseStation, CollaborationSpace

BITS_PER_GB = 8e9


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


@dataclass
class UserDevice:
    """An end device attached to a home base station."""

    id: int
    home_bs: int
    compute_hz: float
    energy_budget_j: float
    tx_power_w: float
    noise_power_w: float
    distance_m: float

    def __post_init__(self):
        if self.compute_hz <= 0:
            raise ValueError(f"user {self.id}: compute_hz must be > 0")
        if self.tx_power_w <= 0:
            raise ValueError(f"user {self.id}: tx_power_w must be > 0")
        if self.noise_power_w <= 0:
            raise ValueError(f"user {self.id}: noise_power_w must be > 0")
        if self.distance_m <= 0:
            raise ValueError(f"user {self.id}: distance_m must be > 0")


@dataclass
class Task:
    """One offloadable unit of work: input data, deadline, and CPU
    intensity.  A zero deadline together with zero workload marks a
    store-only request (the user just wants its data held at the edge).
    """

    user: int
    data_bits: float
    deadline_s: float
    workload_cpb: float
    content_id: int

    def __post_init__(self):
        if self.data_bits <= 0:
            raise ValueError("data_bits must be > 0")
        if self.deadline_s < 0 or self.workload_cpb < 0:
            raise ValueError("deadline_s and workload_cpb must be >= 0")
        if (self.deadline_s == 0) != (self.workload_cpb == 0):
            raise ValueError(
                "store-only tasks need both deadline_s == 0 and workload_cpb == 0"
            )


@dataclass
class DemandMatrix:
    """Per-station, per-content request rates for one epoch."""

    rates: np.ndarray          # shape (n_stations, n_contents)
    zipf_a: float
    bs_ids: list[int]

    def __post_init__(self):
        self.rates = np.asarray(self.rates, dtype=float)
        if np.any(self.rates < 0):
            raise ValueError("demand rates must be >= 0")
        self._row = {b: i for i, b in enumerate(self.bs_ids)}

    def rate(self, bs_id: int, content_id: int) -> float:
        return float(self.rates[self._row[bs_id], content_id])

    @property
    def total(self) -> float:
        return float(self.rates.sum())


def zipf_popularity(a: float, n_contents: int) -> np.ndarray:
    """Zipf popularity vector over ranks 1..n: p_i proportional to i^-a."""
    if n_contents < 1:
        raise ValueError("n_contents must be >= 1")
    if a < 0:
        raise ValueError("a must be >= 0")
    ranks = np.arange(1, n_contents + 1, dtype=float)
    weights = ranks ** (-a)
    return weights / weights.sum()


def generate_demands(
    pop: np.ndarray,
    total_requests: int,
    stations: list[BaseStation],
    seed,
    zipf_a: float = 0.0,
) -> DemandMatrix:
    """Sample a demand matrix: a multinomial over (station, content)
    cells with stations weighted uniformly and contents by popularity."""
    if total_requests < 0:
        raise ValueError("total_requests must be >= 0")
    pop = np.asarray(pop, dtype=float)
    m = len(stations)
    probs = np.repeat(pop[None, :], m, axis=0) / m
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(total_requests, probs.ravel()).reshape(m, len(pop))
    return DemandMatrix(
        rates=counts.astype(float), zipf_a=zipf_a, bs_ids=[s.id for s in stations]
    )


@dataclass
class WorkloadSpec:
    """Ranges the workload generator draws from, plus radio constants.

    Defaults match the common evaluation setup for this class of system:
    2-7 GB inputs, 452.5-737.5 cycles/bit, 0.02-12 s deadlines,
    0.5-1 GHz handsets, and a 27 dBm uplink.
    """

    users_per_bs: int = 50
    n_contents: int = 50
    zipf_a: float = 0.8
    total_requests: int = 2000
    data_bits: tuple[float, float] = (2 * BITS_PER_GB, 7 * BITS_PER_GB)
    deadline_s: tuple[float, float] = (0.02, 12.0)
    workload_cpb: tuple[float, float] = (452.5, 737.5)
    user_compute_hz: tuple[float, float] = (0.5e9, 1.0e9)
    energy_budget_j: tuple[float, float] = (0.5, 2.0)
    user_distance_m: tuple[float, float] = (20.0, 150.0)
    tx_power_dbm: float = 27.0
    noise_power_w: float = 1e-13

    def __post_init__(self):
        for name in (
            "data_bits",
            "deadline_s",
            "workload_cpb",
            "user_compute_hz",
            "energy_budget_j",
            "user_distance_m",
        ):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: range lo {lo} > hi {hi}")
        if self.users_per_bs < 1:
            raise ValueError("users_per_bs must be >= 1")
        if self.n_contents < 1:
            raise ValueError("n_contents must be >= 1")


def generate_contents(spec: WorkloadSpec, seed) -> np.ndarray:
    """Draw the content catalog sizes (bits), one entry per content."""
    rng = np.random.default_rng(seed)
    lo, hi = spec.data_bits
    return rng.uniform(lo, hi, size=spec.n_contents)


def generate_tasks(
    spec: WorkloadSpec,
    stations: list[BaseStation],
    seed,
    content_sizes: np.ndarray | None = None,
) -> tuple[list[Task], list[UserDevice]]:
    """Generate one task per user, users_per_bs users per station.

    Each task requests one catalog content chosen by popularity and
    inherits that content's size, so repeated contents stay cacheable.
    """
    rng = np.random.default_rng(seed)
    if content_sizes is None:
        content_sizes = generate_contents(spec, seed)
    pop = zipf_popularity(spec.zipf_a, spec.n_contents)
    tx_w = dbm_to_watts(spec.tx_power_dbm)

    tasks: list[Task] = []
    users: list[UserDevice] = []
    uid = 0
    for st in stations:
        for _ in range(spec.users_per_bs):
            users.append(
                UserDevice(
                    id=uid,
                    home_bs=st.id,
                    compute_hz=rng.uniform(*spec.user_compute_hz),
                    energy_budget_j=rng.uniform(*spec.energy_budget_j),
                    tx_power_w=tx_w,
                    noise_power_w=spec.noise_power_w,
                    distance_m=rng.uniform(*spec.user_distance_m),
                )
            )
            content = int(rng.choice(spec.n_contents, p=pop))
            tasks.append(
                Task(
                    user=uid,
                    data_bits=float(content_sizes[content]),
                    deadline_s=rng.uniform(*spec.deadline_s),
                    workload_cpb=rng.uniform(*spec.workload_cpb),
                    content_id=content,
                )
            )
            uid += 1
    return tasks, users


@dataclass
class ModelParams:
    """Physical and weighting constants of the cost model."""

    nu: float = 1e-26                 # CPU energy coefficient
    phi_wait_factor: float = 10.0     # local queueing wait, as a multiple of the deadline
    dc_compute_hz: float = 25e9       # data-center CPU dedicated to one task
    pathloss_exponent: float = 4.0
    eta: float = 1e-7                 # weight of the backhaul-saving reward
    routing_eq_tol: float = 1e-6      # tolerance on the single-site routing identity
    cpu_width_bits: float = 64.0
    mips_word_bits: float = 64.0


@dataclass
class Scenario:
    """Everything a solve needs: topology, workload, demand, constants."""

    stations: list[BaseStation]
    spaces: list[CollaborationSpace]
    users: list[UserDevice]
    tasks: list[Task]
    demands: DemandMatrix
    params: ModelParams = field(default_factory=ModelParams)
    content_sizes: np.ndarray | None = None

    def station_by_id(self, bs_id: int) -> BaseStation:
        for s in self.stations:
            if s.id == bs_id:
                return s
        raise KeyError(bs_id)

    def neighbors_of(self, bs_id: int) -> list[int]:
        """Stations sharing at least one collaboration space, with an X2 link."""
        st = self.station_by_id(bs_id)
        mates: set[int] = set()
        for sp in self.spaces:
            if bs_id in sp.member_ids:
                mates |= sp.member_ids
        mates.discard(bs_id)
        return sorted(m for m in mates if m in st.x2_capacity_bps)
