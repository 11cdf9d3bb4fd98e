"""Base stations and overlapping collaboration spaces.

Stations are grouped with an overlapping k-means variant: a station may
join several clusters, and its effective anchor is the mean of the
centroids of all clusters it belongs to.  Overlap lets a station at a
cluster boundary share resources with both neighborhoods.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageError, StationCsvError


@dataclass
class BaseStation:
    """One base station with its co-located edge server resources."""

    id: int
    position: tuple[float, float]
    bandwidth_hz: float
    compute_hz: float
    cache_bytes: float
    x2_capacity_bps: dict[int, float] = field(default_factory=dict)
    dc_capacity_bps: float = 0.0

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError(f"station {self.id}: bandwidth_hz must be > 0")
        if self.compute_hz <= 0:
            raise ValueError(f"station {self.id}: compute_hz must be > 0")
        if self.cache_bytes < 0:
            raise ValueError(f"station {self.id}: cache_bytes must be >= 0")
        self.position = (float(self.position[0]), float(self.position[1]))

    @property
    def cache_bits(self) -> float:
        return 8.0 * self.cache_bytes


@dataclass
class CollaborationSpace:
    """A (possibly overlapping) cluster of base stations."""

    member_ids: frozenset[int]
    centroid: tuple[float, float]

    def __post_init__(self):
        self.member_ids = frozenset(self.member_ids)
        if not self.member_ids:
            raise ValueError("collaboration space must have at least one member")
        self.centroid = (float(self.centroid[0]), float(self.centroid[1]))


def validate_x2_symmetry(stations: list[BaseStation]) -> None:
    """Check that inter-station links exist in both directions."""
    by_id = {s.id: s for s in stations}
    for s in stations:
        for n in s.x2_capacity_bps:
            if n not in by_id or s.id not in by_id[n].x2_capacity_bps:
                raise ValueError(f"x2 link {s.id}->{n} has no reverse direction")


def _anchor(centroids: np.ndarray, indices) -> np.ndarray:
    """Mean of the centroids a station is assigned to."""
    return centroids[sorted(indices)].mean(axis=0)


def okm_objective(
    spaces: list[CollaborationSpace], stations: list[BaseStation]
) -> float:
    """Clustering cost: squared anchor distance summed over every
    (space, member) pair, so stations in several spaces count once per
    space."""
    centroids = np.array([sp.centroid for sp in spaces], dtype=float)
    membership: dict[int, list[int]] = {s.id: [] for s in stations}
    for i, sp in enumerate(spaces):
        for m in sp.member_ids:
            membership[m].append(i)
    pos = {s.id: np.asarray(s.position, dtype=float) for s in stations}
    total = 0.0
    for s in stations:
        idx = membership[s.id]
        if not idx:
            raise CoverageError(f"station {s.id} belongs to no collaboration space")
        phi = _anchor(centroids, idx)
        total += len(idx) * float(np.sum((pos[s.id] - phi) ** 2))
    return total


def multi_assign(station: BaseStation, centroids: list[tuple[float, float]]) -> set[int]:
    """Greedy overlapping assignment for one station.

    Centroids are visited in ascending distance order (ties broken by
    lower index); each is appended while the squared distance to the
    running centroid mean strictly decreases.
    """
    if len(centroids) == 0:
        raise ValueError("centroids must be non-empty")
    pos = np.asarray(station.position, dtype=float)
    cents = np.asarray(centroids, dtype=float)
    d2 = np.sum((cents - pos) ** 2, axis=1)
    order = sorted(range(len(centroids)), key=lambda i: (d2[i], i))
    chosen = [order[0]]
    acc = cents[order[0]].copy()
    best = float(np.sum((pos - acc) ** 2))
    for i in order[1:]:
        trial = (acc * len(chosen) + cents[i]) / (len(chosen) + 1)
        cost = float(np.sum((pos - trial) ** 2))
        if cost < best:
            chosen.append(i)
            acc = trial
            best = cost
        else:
            break
    return set(chosen)


def _assignment_cost(pos: np.ndarray, centroids: np.ndarray, indices) -> float:
    """Contribution of one station to the clustering cost: multiplicity
    times squared distance to its anchor."""
    phi = _anchor(centroids, indices)
    return len(indices) * float(np.sum((pos - phi) ** 2))


def run_okm_cs_with_trace(
    stations: list[BaseStation],
    r: int,
    t_max: int = 100,
    epsilon: float = 1e-6,
    seed: int = 0,
) -> tuple[list[CollaborationSpace], list[float]]:
    """Overlapping k-means clustering, returning the per-iteration
    objective trace alongside the final spaces."""
    if not 1 <= r <= len(stations):
        raise ValueError(f"r={r} out of range [1, {len(stations)}]")
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if t_max < 1:
        raise ValueError("t_max must be >= 1")

    rng = np.random.default_rng(seed)
    pos = np.array([s.position for s in stations], dtype=float)
    init = rng.choice(len(stations), size=r, replace=False)
    centroids = pos[init].copy()

    assign = [multi_assign(s, centroids) for s in stations]
    obj = sum(_assignment_cost(pos[i], centroids, a) for i, a in enumerate(assign))
    trace = [obj]

    for _ in range(t_max):
        # centroid update: plain mean of member positions
        new_centroids = centroids.copy()
        for c in range(r):
            members = [i for i, a in enumerate(assign) if c in a]
            if members:
                new_centroids[c] = pos[members].mean(axis=0)
        # assignment update: keep the old set when it beats the greedy one
        new_assign = []
        for i, s in enumerate(stations):
            cand = multi_assign(s, new_centroids)
            if _assignment_cost(pos[i], new_centroids, cand) <= _assignment_cost(
                pos[i], new_centroids, assign[i]
            ):
                new_assign.append(cand)
            else:
                new_assign.append(assign[i])
        new_obj = sum(
            _assignment_cost(pos[i], new_centroids, a) for i, a in enumerate(new_assign)
        )
        if new_obj > obj:
            # the mean-based centroid step is heuristic; stop rather than
            # accept an uphill move
            break
        centroids, assign = new_centroids, new_assign
        trace.append(new_obj)
        if obj - new_obj < epsilon:
            obj = new_obj
            break
        obj = new_obj

    spaces = []
    for c in range(r):
        members = frozenset(stations[i].id for i, a in enumerate(assign) if c in a)
        if members:
            spaces.append(CollaborationSpace(members, tuple(centroids[c])))
    return spaces, trace


def run_okm_cs(
    stations: list[BaseStation],
    r: int,
    t_max: int = 100,
    epsilon: float = 1e-6,
    seed: int = 0,
) -> list[CollaborationSpace]:
    """Cluster stations into r overlapping collaboration spaces."""
    spaces, _ = run_okm_cs_with_trace(stations, r, t_max, epsilon, seed)
    return spaces


#: column defaults applied by import_stations when a CSV carries only id,x,y
DEFAULT_CAPACITIES = {
    "B_hz": 28.5e6,     # mid channel bandwidth
    "P_hz": 2.25e9,     # mid server compute
    "C_bytes": 300e12,  # mid cache capacity
}


def import_stations(
    path, defaults: dict | None = None
) -> list[BaseStation]:
    """Read stations from a CSV with columns id,x,y[,B_hz,P_hz,C_bytes].

    Missing capacity columns are filled from ``defaults`` (falling back
    to :data:`DEFAULT_CAPACITIES`).  Inter-station and backhaul links are
    attached later by the scenario builder.
    """
    fill = dict(DEFAULT_CAPACITIES)
    if defaults:
        fill.update(defaults)
    stations = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "x", "y"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise StationCsvError(1, f"header must contain columns {sorted(required)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                sid = int(row["id"])
                x = float(row["x"])
                y = float(row["y"])
            except (TypeError, ValueError) as exc:
                raise StationCsvError(line_no, f"bad id/x/y: {exc}") from exc
            caps = {}
            for col in ("B_hz", "P_hz", "C_bytes"):
                raw = row.get(col)
                if raw is None or raw == "":
                    caps[col] = fill[col]
                else:
                    try:
                        caps[col] = float(raw)
                    except ValueError as exc:
                        raise StationCsvError(line_no, f"bad {col}: {exc}") from exc
            stations.append(
                BaseStation(
                    id=sid,
                    position=(x, y),
                    bandwidth_hz=caps["B_hz"],
                    compute_hz=caps["P_hz"],
                    cache_bytes=caps["C_bytes"],
                )
            )
    return stations


def spaces_to_json(spaces: list[CollaborationSpace]) -> str:
    """Serialize spaces as a JSON array of {members, centroid}."""
    payload = [
        {"members": sorted(sp.member_ids), "centroid": list(sp.centroid)}
        for sp in spaces
    ]
    return json.dumps(payload, indent=2, sort_keys=True)
