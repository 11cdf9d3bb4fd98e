"""Clustering and station import tests."""

import itertools

import numpy as np
import pytest

from edge4c.errors import CoverageError, StationCsvError
from edge4c.topology import (
    BaseStation,
    CollaborationSpace,
    import_stations,
    multi_assign,
    okm_objective,
    run_okm_cs,
    run_okm_cs_with_trace,
    spaces_to_json,
)


def bs(i, x, y):
    return BaseStation(id=i, position=(x, y), bandwidth_hz=28e6,
                       compute_hz=2.2e9, cache_bytes=1e4)


def brute_force_assignment_cost(stations, centroids):
    """Best clustering cost over all assignments for fixed centroids,
    minimizing multiplicity * squared anchor distance per station."""
    cents = np.asarray(centroids, dtype=float)
    best_total = 0.0
    for s in stations:
        pos = np.asarray(s.position, dtype=float)
        best = None
        for r in range(1, len(cents) + 1):
            for combo in itertools.combinations(range(len(cents)), r):
                phi = cents[list(combo)].mean(axis=0)
                cost = len(combo) * float(np.sum((pos - phi) ** 2))
                if best is None or cost < best:
                    best = cost
        best_total += best
    return best_total


class TestOkmObjective:
    def test_single_space_two_stations(self):
        stations = [bs(0, 0, 0), bs(1, 2, 0)]
        space = CollaborationSpace({0, 1}, (1.0, 0.0))
        assert okm_objective([space], stations) == pytest.approx(2.0)

    def test_every_station_its_own_space(self):
        stations = [bs(i, float(i), 0) for i in range(4)]
        spaces = [CollaborationSpace({i}, (float(i), 0.0)) for i in range(4)]
        assert okm_objective(spaces, stations) == 0.0

    def test_unit_square_overlapping_fixture(self):
        # station 0 sits in both spaces; expected value evaluated by an
        # independent script: 115/72
        stations = [bs(0, 0, 0), bs(1, 0, 1), bs(2, 1, 0), bs(3, 1, 1)]
        spaces = [
            CollaborationSpace({0, 1}, (0.0, 0.5)),
            CollaborationSpace({0, 2, 3}, (2 / 3, 1 / 3)),
        ]
        assert okm_objective(spaces, stations) == pytest.approx(115 / 72, rel=1e-12)

    def test_uncovered_station_raises(self):
        stations = [bs(0, 0, 0), bs(1, 1, 0)]
        spaces = [CollaborationSpace({0}, (0.0, 0.0))]
        with pytest.raises(CoverageError):
            okm_objective(spaces, stations)


class TestMultiAssign:
    def test_coincident_centroid_singleton(self):
        station = bs(0, 3.0, 4.0)
        got = multi_assign(station, [(3.0, 4.0), (10.0, 10.0)])
        assert got == {0}

    def test_symmetric_pair_takes_both(self):
        station = bs(0, 0.0, 0.0)
        got = multi_assign(station, [(-1.0, 0.0), (1.0, 0.0)])
        assert got == {0, 1}

    def test_matches_exhaustive_search_on_random_fixture(self):
        rng = np.random.default_rng(42)
        station = bs(0, 0.0, 0.0)
        centroids = [tuple(c) for c in rng.normal(0, 1, size=(5, 2))]
        got = multi_assign(station, centroids)
        cents = np.asarray(centroids)
        best, best_cost = None, None
        for r in range(1, 6):
            for combo in itertools.combinations(range(5), r):
                phi = cents[list(combo)].mean(axis=0)
                cost = float(np.sum(phi**2))
                if best_cost is None or cost < best_cost - 1e-15:
                    best, best_cost = set(combo), cost
        got_phi = cents[sorted(got)].mean(axis=0)
        assert float(np.sum(got_phi**2)) == pytest.approx(best_cost, abs=1e-12)
        assert got == best

    def test_never_worse_than_nearest_singleton(self):
        rng = np.random.default_rng(7)
        for trial in range(25):
            pos = rng.normal(0, 2, size=2)
            station = bs(0, pos[0], pos[1])
            cents = rng.normal(0, 2, size=(6, 2))
            got = multi_assign(station, [tuple(c) for c in cents])
            phi = cents[sorted(got)].mean(axis=0)
            d_multi = float(np.sum((pos - phi) ** 2))
            d_single = float(np.min(np.sum((cents - pos) ** 2, axis=1)))
            assert d_multi <= d_single + 1e-12

    def test_empty_centroids_rejected(self):
        with pytest.raises(ValueError):
            multi_assign(bs(0, 0, 0), [])


class TestRunOkm:
    def test_r_one_single_space_with_mean_centroid(self):
        stations = [bs(i, float(i), float(i % 2)) for i in range(5)]
        spaces = run_okm_cs(stations, r=1, seed=3)
        assert len(spaces) == 1
        assert spaces[0].member_ids == frozenset(range(5))
        assert spaces[0].centroid[0] == pytest.approx(2.0)
        assert spaces[0].centroid[1] == pytest.approx(0.4)

    def test_two_separated_groups(self):
        left = [bs(i, float(i % 2), float(i // 2)) for i in range(3)]
        right = [bs(i + 3, 100.0 + (i % 2), float(i // 2)) for i in range(3)]
        stations = left + right
        spaces, trace = run_okm_cs_with_trace(stations, r=2, seed=1)
        groups = sorted(sorted(sp.member_ids) for sp in spaces)
        assert groups == [[0, 1, 2], [3, 4, 5]]
        # converged objective equals the brute-force optimum over all
        # overlapping assignments at the converged centroids
        cents = [sp.centroid for sp in spaces]
        assert trace[-1] == pytest.approx(
            brute_force_assignment_cost(stations, cents), rel=1e-12
        )

    def test_objective_trace_monotone(self):
        rng = np.random.default_rng(5)
        for seed in range(6):
            pts = rng.uniform(0, 1000, size=(12, 2))
            stations = [bs(i, *pts[i]) for i in range(12)]
            _, trace = run_okm_cs_with_trace(stations, r=3, seed=seed)
            for a, b in zip(trace, trace[1:]):
                assert b <= a + 1e-9

    def test_coverage_always_holds(self):
        rng = np.random.default_rng(9)
        pts = rng.uniform(0, 500, size=(10, 2))
        stations = [bs(i, *pts[i]) for i in range(10)]
        spaces = run_okm_cs(stations, r=4, seed=2)
        covered = set().union(*(sp.member_ids for sp in spaces))
        assert covered == set(range(10))

    def test_converged_state_is_fixed_point(self):
        rng = np.random.default_rng(13)
        pts = rng.uniform(0, 500, size=(8, 2))
        stations = [bs(i, *pts[i]) for i in range(8)]
        eps = 1e-6
        _, trace = run_okm_cs_with_trace(stations, r=3, epsilon=eps, seed=4)
        if len(trace) >= 2:
            assert trace[-2] - trace[-1] < eps or trace[-1] <= trace[-2]

    def test_r_out_of_range(self):
        stations = [bs(0, 0, 0)]
        with pytest.raises(ValueError):
            run_okm_cs(stations, r=2)
        with pytest.raises(ValueError):
            run_okm_cs(stations, r=0)

    def test_degenerate_r_equals_n(self):
        stations = [bs(i, float(3 * i), 0.0) for i in range(4)]
        spaces, trace = run_okm_cs_with_trace(stations, r=4, seed=0)
        assert trace[-1] == pytest.approx(0.0, abs=1e-18)


class TestImportStations:
    def test_well_formed(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("id,x,y\n0,0,0\n1,100,0\n2,0,100\n")
        stations = import_stations(p)
        assert len(stations) == 3
        assert stations[1].position == (100.0, 0.0)

    def test_defaults_fill_missing_capacities(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("id,x,y\n0,0,0\n")
        st = import_stations(p, defaults={"B_hz": 1e6, "P_hz": 2e9, "C_bytes": 5.0})[0]
        assert st.bandwidth_hz == 1e6
        assert st.compute_hz == 2e9
        assert st.cache_bytes == 5.0

    def test_explicit_capacity_columns(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("id,x,y,B_hz,P_hz,C_bytes\n0,0,0,1e6,2e9,7\n")
        st = import_stations(p)[0]
        assert st.cache_bytes == 7.0

    def test_bad_row_names_line(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("id,x,y\n0,0,0\n1,abc,0\n")
        with pytest.raises(StationCsvError) as err:
            import_stations(p)
        assert err.value.line_no == 3

    def test_missing_header(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("a,b\n0,0\n")
        with pytest.raises(StationCsvError):
            import_stations(p)


def test_spaces_json_roundtrip():
    import json

    spaces = [CollaborationSpace({2, 0}, (0.5, 1.0))]
    data = json.loads(spaces_to_json(spaces))
    assert data == [{"members": [0, 2], "centroid": [0.5, 1.0]}]


def test_station_invariants():
    with pytest.raises(ValueError):
        BaseStation(0, (0, 0), bandwidth_hz=0, compute_hz=1e9, cache_bytes=0)
    with pytest.raises(ValueError):
        BaseStation(0, (0, 0), bandwidth_hz=1e6, compute_hz=-1, cache_bytes=0)
    with pytest.raises(ValueError):
        CollaborationSpace(set(), (0, 0))
