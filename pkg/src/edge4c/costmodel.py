"""Delay, energy, reward, and constraint evaluation for offloading and
caching decisions.

The decision space has three blocks per task: offload-or-not (x), where
to execute among home server / collaborating neighbor / data center (y),
and whether to cache the task's data at the executing server (w).  The
scalarized objective is total completion delay minus a weighted backhaul
saving reward.  The objective is multilinear in the decision entries:
holding all but one entry fixed, it is affine in that entry, which is
what the block solver relies on.  Forwarding queues count a task's own
bits at full weight plus every other task's bits at its current routing
weight, so at binary points the relaxed evaluation coincides with the
literal shared-link delays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleScenarioError
from .scenario import Scenario, Task, UserDevice
from .topology import BaseStation

RELAXED = "relaxed"
BINARY = "binary"

#: stacked y-matrix columns: 0 = execute at home server, 1..M = forward to
#: station j-1, M+1 = forward to the data center
COL_LOCAL = 0


# ---------------------------------------------------------------------------
# scalar physics

def spectrum_efficiency(
    user: UserDevice, bs: BaseStation | None = None, pathloss_exponent: float = 4.0
) -> float:
    """Uplink spectral efficiency in bits/s/Hz via a log SNR law.

    The channel gain is pure path loss, (d / 1 m)^-exponent, with no
    fading term.
    """
    gain = user.distance_m ** (-pathloss_exponent)
    snr = user.tx_power_w * gain / user.noise_power_w
    return math.log2(1.0 + snr)


def local_energy(task: Task, user: UserDevice, nu: float = 1e-26) -> float:
    """CPU energy for computing the task on the device: s * nu * z * P^2."""
    return task.data_bits * nu * task.workload_cpb * user.compute_hz**2


def local_latency(task: Task, user: UserDevice) -> float:
    """Execution time for computing the task on the device: s * z / P."""
    return task.data_bits * task.workload_cpb / user.compute_hz


def device_status(task: Task, user: UserDevice, nu: float = 1e-26) -> int:
    """1 when the device can compute the task itself, 0 otherwise.

    The device fails when the per-bit workload exceeds its clock, the
    execution time strictly exceeds the deadline, or the energy strictly
    exceeds the budget.  Exact boundary values still count as capable.
    """
    if task.workload_cpb > user.compute_hz:
        return 0
    if local_latency(task, user) > task.deadline_s:
        return 0
    if local_energy(task, user, nu) > user.energy_budget_j:
        return 0
    return 1


def local_time(
    task: Task,
    user: UserDevice,
    x: float,
    phi_wait_factor: float = 10.0,
    nu: float = 1e-26,
) -> float:
    """Total local completion time.

    Capable devices that keep the task pay the bare execution time;
    incapable devices that keep it additionally wait phi (a deadline
    multiple) for resources to free up; offloaded tasks cost nothing
    locally.
    """
    if x >= 1:
        return 0.0
    lk = local_latency(task, user)
    if device_status(task, user, nu):
        return lk
    return lk + phi_wait_factor * task.deadline_s


def compute_share(task: Task, bs: BaseStation, cohort: list[Task]) -> float:
    """CPU cycles/s granted to the task at a server, splitting the
    server's capacity across the cohort proportionally to workload."""
    total = sum(t.workload_cpb for t in cohort)
    if total <= 0:
        return bs.compute_hz
    return bs.compute_hz * task.workload_cpb / total


# ---------------------------------------------------------------------------
# decision vector and allocation view

@dataclass
class DecisionVector:
    """Relaxed or binary routing/caching variables, as dense arrays.

    ``y_fwd`` and ``w`` are (n_tasks, n_stations); columns that are not
    collaboration neighbors of a task's home station must stay zero.
    """

    x: np.ndarray
    y_local: np.ndarray
    y_fwd: np.ndarray
    y_dc: np.ndarray
    w: np.ndarray
    w_dc: np.ndarray
    mode: str = RELAXED

    def copy(self) -> "DecisionVector":
        return DecisionVector(
            self.x.copy(),
            self.y_local.copy(),
            self.y_fwd.copy(),
            self.y_dc.copy(),
            self.w.copy(),
            self.w_dc.copy(),
            self.mode,
        )

    def _all_arrays(self):
        return (self.x, self.y_local, self.y_fwd, self.y_dc, self.w, self.w_dc)

    def validate(self, tol: float = 1e-9) -> None:
        for arr in self._all_arrays():
            if np.any(arr < -tol) or np.any(arr > 1 + tol):
                raise ValueError("decision entries must lie in [0, 1]")
        if self.mode == BINARY:
            for arr in self._all_arrays():
                if not np.all((np.abs(arr) <= tol) | (np.abs(arr - 1) <= tol)):
                    raise ValueError("binary mode requires entries in {0, 1}")
            ysum = self.y_local + self.y_fwd.sum(axis=1) + self.y_dc
            identity = (1 - self.x) + self.x * ysum
            if np.any(np.abs(identity - 1) > tol):
                raise ValueError("single-site routing identity violated")
            ymax = np.maximum(
                self.y_local, np.maximum(self.y_fwd.max(axis=1), self.y_dc)
            )
            if np.any(ymax > self.x + tol):
                raise ValueError("routing indicators must not exceed the offload flag")


@dataclass
class AllocationView:
    """Resource shares granted per task: uplink spectrum fraction,
    CPU cycles/s at every station and at the data center, cache bits."""

    a: np.ndarray        # (n_tasks,)
    p: np.ndarray        # (n_tasks, n_stations)
    p_dc: np.ndarray     # (n_tasks,)
    c: np.ndarray        # (n_tasks,) cache demand in bits

    def __post_init__(self):
        if np.any(self.a < 0) or np.any(self.a > 1 + 1e-12):
            raise ValueError("spectrum fractions must lie in [0, 1]")


@dataclass
class ConstraintResiduals:
    """Signed constraint slacks; <= 0 means satisfied.  The routing
    identity is an equality: satisfied when |residual| <= tolerance."""

    spectrum: np.ndarray           # per station: sum_k x*a - 1
    compute: np.ndarray            # per station: sum_k x*p*y_local - P_m
    cache: np.ndarray              # per station: cached load - C_m (bits)
    routing_identity: np.ndarray   # per task: (1-x) + x*sum(y) - 1
    dominance: np.ndarray          # per task: max(y) - x

    def satisfied(self, eq_tol: float = 1e-6, tol: float = 1e-9) -> bool:
        return bool(
            np.all(self.spectrum <= tol)
            and np.all(self.compute <= tol)
            and np.all(self.cache <= tol)
            and np.all(np.abs(self.routing_identity) <= eq_tol)
            and np.all(self.dominance <= tol)
        )


# ---------------------------------------------------------------------------
# vectorized evaluation context

@dataclass
class ModelContext:
    """Precomputed arrays for fast objective/gradient evaluation.

    Stations are reindexed to 0..M-1; ``station_index`` maps ids to
    positions.
    """

    scenario: Scenario
    station_index: dict[int, int]
    station_ids: list[int]
    home: np.ndarray          # (K,) home station index per task
    s: np.ndarray             # (K,) data bits
    z: np.ndarray             # (K,) cycles per bit
    lam: np.ndarray           # (K,) demand rate of the task's content at home
    deadline: np.ndarray      # (K,)
    alpha: np.ndarray         # (K,) device-capability flag
    tau_loc: np.ndarray       # (K,) local completion time when kept
    t_tx: np.ndarray          # (K,) uplink transmission time when offloaded
    gamma: np.ndarray         # (K,) spectral efficiency
    bandwidth: np.ndarray     # (M,)
    exec_bs: np.ndarray       # (K, M) execution latency at each station
    exec_dc: np.ndarray       # (K,)
    x2_cap: np.ndarray        # (M, M) bits/s, 0 where no link
    dc_cap: np.ndarray        # (M,)
    cache_bits: np.ndarray    # (M,)
    compute_hz: np.ndarray    # (M,)
    nbr_mask: np.ndarray      # (K, M) forwarding allowed
    alloc: AllocationView
    eta: float
    routing_eq_tol: float
    _home_onehot: np.ndarray = field(repr=False, default=None)

    # -- construction ------------------------------------------------------

    @classmethod
    def build(cls, scenario: Scenario) -> "ModelContext":
        params = scenario.params
        stations = scenario.stations
        ids = [st.id for st in stations]
        sidx = {b: i for i, b in enumerate(ids)}
        m = len(stations)
        tasks = scenario.tasks
        users = {u.id: u for u in scenario.users}
        k = len(tasks)

        home = np.array([sidx[users[t.user].home_bs] for t in tasks], dtype=int)
        s = np.array([t.data_bits for t in tasks])
        z = np.array([t.workload_cpb for t in tasks])
        deadline = np.array([t.deadline_s for t in tasks])
        lam = np.array(
            [scenario.demands.rate(users[t.user].home_bs, t.content_id) for t in tasks]
        )

        alpha = np.array(
            [device_status(t, users[t.user], params.nu) for t in tasks], dtype=float
        )
        l_user = np.array([local_latency(t, users[t.user]) for t in tasks])
        tau_loc = np.where(
            alpha > 0, l_user, l_user + params.phi_wait_factor * deadline
        )

        gamma = np.array(
            [
                spectrum_efficiency(users[t.user], None, params.pathloss_exponent)
                for t in tasks
            ]
        )

        # spectrum fractions: proportional to data size across the home
        # cohort, so they always sum to one per station
        cohort_bits = np.zeros(m)
        np.add.at(cohort_bits, home, s)
        a = s / cohort_bits[home]

        bandwidth = np.array([st.bandwidth_hz for st in stations])
        rate = a * bandwidth[home] * gamma
        t_tx = s / rate

        # compute shares: workload-proportional split of each server's CPU
        # across its home cohort
        cohort_z = np.zeros(m)
        np.add.at(cohort_z, home, z)
        compute_hz = np.array([st.compute_hz for st in stations])
        denom = np.where(cohort_z > 0, cohort_z, 1.0)
        p = compute_hz[None, :] * z[:, None] / denom[None, :]
        p[:, cohort_z <= 0] = np.broadcast_to(
            compute_hz[cohort_z <= 0][None, :], (k, int(np.sum(cohort_z <= 0)))
        )
        p = p * (z[:, None] > 0)
        exec_bs = np.where(
            z[:, None] > 0, s[:, None] * z[:, None] / np.maximum(p, 1e-300), 0.0
        )
        p_dc = np.where(z > 0, params.dc_compute_hz, 0.0)
        exec_dc = np.where(z > 0, s * z / params.dc_compute_hz, 0.0)

        x2_cap = np.zeros((m, m))
        for st in stations:
            for n, cap in st.x2_capacity_bps.items():
                if n in sidx:
                    x2_cap[sidx[st.id], sidx[n]] = cap
        dc_cap = np.array([st.dc_capacity_bps for st in stations])
        cache_bits = np.array([st.cache_bits for st in stations])

        nbr_mask = np.zeros((k, m), dtype=bool)
        for bs_id in ids:
            nbrs = [n for n in scenario.neighbors_of(bs_id) if x2_cap[sidx[bs_id], sidx[n]] > 0]
            cols = [sidx[n] for n in nbrs]
            rows = home == sidx[bs_id]
            if cols:
                nbr_mask[np.ix_(rows, cols)] = True

        alloc = AllocationView(a=a, p=p, p_dc=p_dc, c=s.copy())
        onehot = np.zeros((k, m))
        onehot[np.arange(k), home] = 1.0
        return cls(
            scenario=scenario,
            station_index=sidx,
            station_ids=ids,
            home=home,
            s=s,
            z=z,
            lam=lam,
            deadline=deadline,
            alpha=alpha,
            tau_loc=tau_loc,
            t_tx=t_tx,
            gamma=gamma,
            bandwidth=bandwidth,
            exec_bs=exec_bs,
            exec_dc=exec_dc,
            x2_cap=x2_cap,
            dc_cap=dc_cap,
            cache_bits=cache_bits,
            compute_hz=compute_hz,
            nbr_mask=nbr_mask,
            alloc=alloc,
            eta=params.eta,
            routing_eq_tol=params.routing_eq_tol,
            _home_onehot=onehot,
        )

    # -- small accessors ----------------------------------------------------

    @property
    def n_tasks(self) -> int:
        return len(self.s)

    @property
    def n_stations(self) -> int:
        return len(self.compute_hz)

    def zeros(self, mode: str = RELAXED) -> DecisionVector:
        k, m = self.n_tasks, self.n_stations
        return DecisionVector(
            x=np.zeros(k),
            y_local=np.zeros(k),
            y_fwd=np.zeros((k, m)),
            y_dc=np.zeros(k),
            w=np.zeros((k, m)),
            w_dc=np.zeros(k),
            mode=mode,
        )

    def route_mask(self) -> np.ndarray:
        """(K, M+2) validity of each stacked route column."""
        k, m = self.n_tasks, self.n_stations
        mask = np.zeros((k, m + 2), dtype=bool)
        mask[:, COL_LOCAL] = True
        mask[:, 1 : m + 1] = self.nbr_mask
        mask[:, m + 1] = self.dc_cap[self.home] > 0
        return mask

    def stack_y(self, dv: DecisionVector) -> np.ndarray:
        return np.column_stack([dv.y_local, dv.y_fwd, dv.y_dc])

    def unstack_y(self, dv: DecisionVector, ymat: np.ndarray) -> None:
        m = self.n_stations
        dv.y_local = ymat[:, COL_LOCAL].copy()
        dv.y_fwd = ymat[:, 1 : m + 1].copy()
        dv.y_dc = ymat[:, m + 1].copy()

    def y_lipschitz_bound(self) -> float:
        """Upper bound on the curvature of the objective within the y
        block, from the forwarding-queue cross terms."""
        m = self.n_stations
        cohort_bits = np.zeros(m)
        np.add.at(cohort_bits, self.home, self.s)
        bound = 0.0
        for j in range(m):
            caps = [c for c in self.x2_cap[j] if c > 0]
            if self.dc_cap[j] > 0:
                caps.append(self.dc_cap[j])
            if caps and cohort_bits[j] > 0:
                bound = max(bound, 2.0 * cohort_bits[j] / min(caps))
        return bound

    def check_transmittable(self) -> None:
        """Fail early when an incapable device has no uplink at all."""
        bad = np.nonzero((self.alpha == 0) & ~np.isfinite(self.t_tx))[0]
        if bad.size:
            raise InfeasibleScenarioError(
                int(bad[0]), "device incapable and uplink rate is zero"
            )

    # -- per-operation views -------------------------------------------------

    def data_rate(self, dv: DecisionVector, k: int) -> float:
        """Instantaneous uplink rate x * a * B * gamma in bits/s."""
        bw = self.bandwidth[self.home[k]]
        return float(dv.x[k] * self.alloc.a[k] * bw * self.gamma[k])

    def tx_delay(self, dv: DecisionVector, k: int) -> float:
        """Uplink transmission delay x * s / R; zero when not offloaded."""
        if dv.x[k] == 0:
            return 0.0
        r = self.data_rate(dv, k)
        if r <= 0:
            raise InfeasibleScenarioError(k, "offloaded with zero uplink rate")
        return float(dv.x[k] * self.s[k] / r)

    def x2_delay(self, dv: DecisionVector, m: int, n: int) -> float:
        """Shared forwarding delay on the m->n link: forwarded bits over
        link capacity."""
        y_fwd = dv.y_fwd * self.nbr_mask
        rows = self.home == m
        flow = float(np.sum(y_fwd[rows, n] * self.s[rows]))
        if flow == 0:
            return 0.0
        cap = self.x2_cap[m, n]
        if cap <= 0:
            raise InfeasibleScenarioError(-1, f"flow on missing link {m}->{n}")
        return flow / cap

    def dc_delay(self, dv: DecisionVector, m: int) -> float:
        """Shared backhaul delay from station m to the data center."""
        rows = self.home == m
        flow = float(np.sum(dv.y_dc[rows] * self.s[rows]))
        if flow == 0:
            return 0.0
        cap = self.dc_cap[m]
        if cap <= 0:
            raise InfeasibleScenarioError(-1, f"flow on missing backhaul at {m}")
        return flow / cap

    def route_delays(self, dv: DecisionVector) -> dict[str, np.ndarray]:
        """End-to-end delay of each offload route for every task, with
        the task's own bits at full weight in the shared queues."""
        y_fwd = dv.y_fwd * self.nbr_mask
        m = self.n_stations
        q_x2 = np.zeros((m, m))
        np.add.at(q_x2, self.home, y_fwd * self.s[:, None])
        q_dc = np.zeros(m)
        np.add.at(q_dc, self.home, dv.y_dc * self.s)

        safe_x2 = np.where(self.x2_cap > 0, self.x2_cap, 1.0)
        safe_dc = np.where(self.dc_cap > 0, self.dc_cap, 1.0)

        d_local = self.t_tx + self.exec_bs[np.arange(self.n_tasks), self.home]
        others_x2 = q_x2[self.home, :] - y_fwd * self.s[:, None]
        d_fwd = (
            self.t_tx[:, None]
            + (self.s[:, None] + others_x2) / safe_x2[self.home, :]
            + self.exec_bs
        )
        others_dc = q_dc[self.home] - dv.y_dc * self.s
        d_dc = self.t_tx + (self.s + others_dc) / safe_dc[self.home] + self.exec_dc
        return {"local": d_local, "fwd": d_fwd, "dc": d_dc}

    def exec_time_chain(self, dv: DecisionVector, k: int) -> float:
        """Offload completion time for one task: the routing-weighted
        combination of the home-execution, neighbor, and data-center
        chains."""
        d = self.route_delays(dv)
        y_fwd = dv.y_fwd[k] * self.nbr_mask[k]
        return float(
            dv.y_local[k] * d["local"][k]
            + np.sum(y_fwd * d["fwd"][k])
            + dv.y_dc[k] * d["dc"][k]
        )

    def offload_times(self, dv: DecisionVector) -> np.ndarray:
        """Vector of routing-weighted offload completion times."""
        d = self.route_delays(dv)
        y_fwd = dv.y_fwd * self.nbr_mask
        return (
            dv.y_local * d["local"]
            + np.sum(y_fwd * d["fwd"], axis=1)
            + dv.y_dc * d["dc"]
        )

    def realized_delays(self, dv: DecisionVector) -> np.ndarray:
        """Per-task completion time at the given decisions."""
        return (1 - dv.x) * self.tau_loc + dv.x * self.offload_times(dv)

    def total_delay(self, dv: DecisionVector) -> float:
        """Aggregate completion time over all tasks, offloaded or kept."""
        return float(np.sum(self.realized_delays(dv)))

    def bandwidth_saving(self, dv: DecisionVector) -> float:
        """Backhaul bits avoided by caching: data size times demand rate
        for every cached placement on the serving route."""
        y_fwd = dv.y_fwd * self.nbr_mask
        w_home = dv.w[np.arange(self.n_tasks), self.home]
        per_task = self.s * self.lam * dv.x * (
            dv.y_local * w_home + np.sum(y_fwd * dv.w, axis=1)
        )
        return float(np.sum(per_task))

    def objective(self, dv: DecisionVector) -> float:
        """Scalarized cost: total delay minus eta times backhaul saving."""
        return self.total_delay(dv) - self.eta * self.bandwidth_saving(dv)

    # -- gradients ------------------------------------------------------------

    def grad_x(self, dv: DecisionVector) -> np.ndarray:
        off = self.offload_times(dv)
        y_fwd = dv.y_fwd * self.nbr_mask
        w_home = dv.w[np.arange(self.n_tasks), self.home]
        reward = self.s * self.lam * (
            dv.y_local * w_home + np.sum(y_fwd * dv.w, axis=1)
        )
        return -self.tau_loc + off - self.eta * reward

    def grad_y(self, dv: DecisionVector) -> dict[str, np.ndarray]:
        d = self.route_delays(dv)
        y_fwd = dv.y_fwd * self.nbr_mask
        w_home = dv.w[np.arange(self.n_tasks), self.home]

        g_local = dv.x * d["local"] - self.eta * self.s * self.lam * dv.x * w_home

        # cross terms: this task's bits also sit in every home-mate's queue
        m = self.n_stations
        xq_x2 = np.zeros((m, m))
        np.add.at(xq_x2, self.home, y_fwd * dv.x[:, None])
        xq_dc = np.zeros(m)
        np.add.at(xq_dc, self.home, dv.y_dc * dv.x)
        safe_x2 = np.where(self.x2_cap > 0, self.x2_cap, 1.0)
        safe_dc = np.where(self.dc_cap > 0, self.dc_cap, 1.0)

        cross_fwd = (
            (xq_x2[self.home, :] - dv.x[:, None] * y_fwd)
            * self.s[:, None]
            / safe_x2[self.home, :]
        )
        g_fwd = (
            dv.x[:, None] * d["fwd"]
            + cross_fwd
            - self.eta * (self.s * self.lam * dv.x)[:, None] * dv.w
        ) * self.nbr_mask

        cross_dc = (xq_dc[self.home] - dv.x * dv.y_dc) * self.s / safe_dc[self.home]
        g_dc = dv.x * d["dc"] + cross_dc
        return {"local": g_local, "fwd": g_fwd, "dc": g_dc}

    def grad_y_stacked(self, dv: DecisionVector) -> np.ndarray:
        g = self.grad_y(dv)
        return np.column_stack([g["local"], g["fwd"], g["dc"]])

    def grad_w(self, dv: DecisionVector) -> tuple[np.ndarray, np.ndarray]:
        y_fwd = dv.y_fwd * self.nbr_mask
        coef = (self.s * self.lam * dv.x)[:, None]
        g = -self.eta * coef * (
            self._home_onehot * dv.y_local[:, None] + y_fwd
        )
        return g, np.zeros(self.n_tasks)

    # -- constraints -----------------------------------------------------------

    def cache_load(self, dv: DecisionVector) -> np.ndarray:
        """Cached bits placed at each station by the current decisions."""
        y_fwd = dv.y_fwd * self.nbr_mask
        route_here = self._home_onehot * dv.y_local[:, None] + y_fwd
        load = (dv.x * self.s)[:, None] * route_here * dv.w
        return load.sum(axis=0)

    def constraint_residuals(
        self, dv: DecisionVector, alloc: AllocationView | None = None
    ) -> ConstraintResiduals:
        alloc = alloc or self.alloc
        m = self.n_stations
        k = self.n_tasks

        spectrum = np.full(m, -1.0)
        np.add.at(spectrum, self.home, dv.x * alloc.a)

        compute = -self.compute_hz.copy()
        np.add.at(
            compute, self.home, dv.x * alloc.p[np.arange(k), self.home] * dv.y_local
        )

        cache = self.cache_load(dv) - self.cache_bits

        y_fwd = dv.y_fwd * self.nbr_mask
        ysum = dv.y_local + y_fwd.sum(axis=1) + dv.y_dc
        routing = (1 - dv.x) + dv.x * ysum - 1
        ymax = np.maximum(dv.y_local, np.maximum(y_fwd.max(axis=1), dv.y_dc))
        dominance = ymax - dv.x
        return ConstraintResiduals(spectrum, compute, cache, routing, dominance)


def build_context(scenario: Scenario) -> ModelContext:
    """Convenience wrapper around :meth:`ModelContext.build`."""
    return ModelContext.build(scenario)
