"""Caching plane simulation: per-station LFU caches, request serving
inside a collaboration space, and resource snapshots exchanged between
stations.

Eviction is least-frequently-used: the entry with the fewest recorded
hits goes first, with insertion order breaking ties (older first).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CacheItemTooLarge

HIT_LOCAL = "hit_local"
HIT_NEIGHBOR = "hit_neighbor"
MISS = "miss"


@dataclass
class CacheEntry:
    size_bits: float
    hit_count: int = 0
    seq: int = 0


@dataclass
class BsCache:
    """One station's cache: capacity, occupancy, and LFU bookkeeping."""

    capacity_bits: float
    occupancy_bits: float = 0.0
    entries: dict[int, CacheEntry] = field(default_factory=dict)
    next_seq: int = 0
    reserved_compute_hz: float = 0.0
    reserved_spectrum: float = 0.0


@dataclass
class CacheState:
    """Caches of every station in the simulation."""

    caches: dict[int, BsCache]

    @classmethod
    def from_stations(cls, stations) -> "CacheState":
        return cls({s.id: BsCache(capacity_bits=s.cache_bits) for s in stations})


@dataclass
class RatSnapshot:
    """Free resources a station advertises to its collaboration space."""

    bs_id: int
    free_compute_hz: float
    free_cache_bits: float
    free_spectrum_fraction: float
    epoch: int


@dataclass
class HitCounters:
    hits: int = 0
    misses: int = 0


def cache_insert(state: CacheState, bs: int, content: int, size_bits: float) -> CacheState:
    """Place a content at a station, evicting least-frequently-used
    entries (ties: oldest first) until it fits."""
    cache = state.caches[bs]
    if size_bits > cache.capacity_bits:
        raise CacheItemTooLarge(
            f"content {content} ({size_bits} bits) exceeds cache {bs} "
            f"({cache.capacity_bits} bits)"
        )
    existing = cache.entries.get(content)
    if existing is not None:
        cache.occupancy_bits -= existing.size_bits
        existing.size_bits = size_bits
    else:
        cache.entries[content] = CacheEntry(size_bits, 0, cache.next_seq)
        cache.next_seq += 1
    while cache.occupancy_bits + size_bits > cache.capacity_bits:
        victim = min(
            (c for c in cache.entries if c != content),
            key=lambda c: (cache.entries[c].hit_count, cache.entries[c].seq),
        )
        cache.occupancy_bits -= cache.entries[victim].size_bits
        del cache.entries[victim]
    cache.occupancy_bits += size_bits
    return state


def serve_request(
    state: CacheState,
    bs: int,
    content: int,
    collaboration: set[int],
    x2_bps: dict[tuple[int, int], float] | None = None,
):
    """Resolve one request: the home cache first, then collaborating
    neighbors ordered by ascending transfer delay for the entry size
    (ascending id when no link map is given).  The serving entry's hit
    count is incremented.

    Returns (outcome, serving_bs) where outcome is one of hit_local,
    hit_neighbor, miss.
    """
    home = state.caches[bs]
    if content in home.entries:
        home.entries[content].hit_count += 1
        return HIT_LOCAL, bs

    def transfer_delay(n: int) -> tuple[float, int]:
        entry = state.caches[n].entries[content]
        if x2_bps is None:
            return (0.0, n)
        cap = x2_bps.get((bs, n), 0.0)
        if cap <= 0:
            return (float("inf"), n)
        return (entry.size_bits / cap, n)

    holders = [
        n
        for n in sorted(collaboration)
        if n != bs and n in state.caches and content in state.caches[n].entries
    ]
    if holders:
        best = min(holders, key=transfer_delay)
        state.caches[best].entries[content].hit_count += 1
        return HIT_NEIGHBOR, best
    return MISS, None


def hit_ratio(counters: HitCounters) -> float:
    """Fraction of requests served from some cache; 0 with no traffic."""
    total = counters.hits + counters.misses
    if total == 0:
        return 0.0
    return counters.hits / total


def realized_bandwidth_saving(trace, sizes: dict[int, float], demand=None) -> float:
    """Backhaul bits avoided: one content transfer saved per hit."""
    return float(
        sum(sizes[ev.content] for ev in trace if ev.outcome != MISS)
    )


def rat_exchange(state: CacheState, topo, epoch: int) -> list[RatSnapshot]:
    """Snapshot every station's free resources at an epoch boundary.

    All members of a space receive identical copies, so the returned
    list is the shared view.
    """
    by_id = {s.id: s for s in topo}
    snaps = []
    for bs_id in sorted(state.caches):
        cache = state.caches[bs_id]
        st = by_id[bs_id]
        snaps.append(
            RatSnapshot(
                bs_id=bs_id,
                free_compute_hz=max(0.0, st.compute_hz - cache.reserved_compute_hz),
                free_cache_bits=max(0.0, cache.capacity_bits - cache.occupancy_bits),
                free_spectrum_fraction=max(0.0, 1.0 - cache.reserved_spectrum),
                epoch=epoch,
            )
        )
    return snaps


@dataclass
class RequestEvent:
    """One served request in the replay trace."""

    epoch: int
    bs: int
    content: int
    outcome: str
    served_by: int | None = None


def demand_stream(demands, epoch: int, seed: int) -> list[tuple[int, int]]:
    """Expand a demand matrix into a shuffled (station, content) request
    list for one epoch."""
    rng = np.random.default_rng((seed, epoch))
    events = []
    for row, bs in enumerate(demands.bs_ids):
        for content in range(demands.rates.shape[1]):
            events.extend([(bs, content)] * int(round(demands.rates[row, content])))
    order = rng.permutation(len(events))
    return [events[i] for i in order]


def replay_requests(
    state: CacheState,
    requests: list[tuple[int, int]],
    epoch: int,
    neighbors_of: dict[int, set[int]],
    sizes: dict[int, float],
    x2_bps: dict[tuple[int, int], float] | None = None,
    insert_on_miss: bool = True,
) -> tuple[list[RequestEvent], HitCounters]:
    """Serve a request stream against the caches.

    A miss fetches the content from the data center and, when it fits at
    all, admits it into the home cache so the LFU state keeps tracking
    popularity.
    """
    counters = HitCounters()
    trace = []
    for bs, content in requests:
        outcome, served_by = serve_request(
            state, bs, content, neighbors_of.get(bs, set()), x2_bps
        )
        if outcome == MISS:
            counters.misses += 1
            if insert_on_miss and sizes[content] <= state.caches[bs].capacity_bits:
                cache_insert(state, bs, content, sizes[content])
        else:
            counters.hits += 1
        trace.append(RequestEvent(epoch, bs, content, outcome, served_by))
    return trace, counters
