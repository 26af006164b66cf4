"""The MDP environment: time stepping, constraints, rewards, re-clustering.

Slot order: decode and apply movements, redraw fading, recompute gains,
derive decoding orders and power splits, score rates, reward, advance
users, and finally re-cluster when the period elapses. Constraint
violations are simulator bugs, so the trace carries enough to audit every
slot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channel, noma, world
from .agent import MOVEMENTS, ActionSpace, abstract_state
from .clustering import ClusteringConfig, rebalance_capacity, weighted_kmeans
from .noma import Association, DecodedCluster, PowerAllocation
from .world import GridMap, UserState

__all__ = [
    "SimConfig",
    "EpisodeTrace",
    "UavEnv",
    "CircularPolicy",
    "decode_action",
    "apply_movement",
    "reward",
    "run_episode",
    "audit_trace",
    "build_grid",
]

_DELTAS = {
    "up": (0.0, 0.0, 1.0),
    "down": (0.0, 0.0, -1.0),
    "forward": (0.0, 1.0, 0.0),
    "backward": (0.0, -1.0, 0.0),
    "left": (-1.0, 0.0, 0.0),
    "right": (1.0, 0.0, 0.0),
    "hover": (0.0, 0.0, 0.0),
}


@dataclass(frozen=True)
class SimConfig:
    """Scenario knobs; defaults follow the simulation-parameter table."""

    x_max: float = 1000.0
    y_max: float = 1000.0
    h_min: float = 20.0
    h_max: float = 150.0
    n_uavs: int = 3
    n_users: int = 6
    capacity: int = 3
    bandwidth_hz: float = 15e3
    fc_hz: float = 2e9
    noise_dbm_hz: float = -100.0
    fading_mode: str = "unit"
    user_v_max: float = 10.0
    uav_speed: float = 5.0
    p_max_dbm: float = 29.0
    qos_rate_bps: float = 150.0
    recluster_interval: float = 60.0
    recluster: bool = True
    dt: float = 1.0
    horizon: float = 180.0
    scheme: str = "noma"
    map_cells: int = 100
    cell_size: float = 10.0
    block_size: int = 3
    uav_init_h: tuple[float, float] = (80.0, 90.0)
    uav_init_xy: str = "uniform"  # "uniform" over the area or "origin" launch
    uav_init_radius: float = 100.0
    dest_mode: str = "uniform"  # per-user "uniform" or grouped "teams"
    dest_team_spread: int = 1  # ring cells between members of one team
    kmeans_max_iter: int = 50
    user_weight: float = 1.0
    uav_weight: float = 2.0

    def __post_init__(self):
        if self.n_uavs * self.capacity < self.n_users:
            raise ValueError(
                f"infeasible: {self.n_uavs} UAVs x capacity {self.capacity} "
                f"< {self.n_users} users"
            )
        if self.scheme not in ("noma", "oma"):
            raise ValueError(f"unknown multiple-access scheme {self.scheme!r}")
        if self.h_min <= 1.0 or self.h_max < self.h_min:
            raise ValueError("UAV height band is invalid")

    @property
    def p_max_watts(self) -> float:
        return 10.0 ** (self.p_max_dbm / 10.0) * 1e-3

    @property
    def noise_watts(self) -> float:
        return channel.noise_power_watts(self.noise_dbm_hz, self.bandwidth_hz)

    @property
    def slots(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def recluster_slots(self) -> int:
        return max(1, int(round(self.recluster_interval / self.dt)))

    def clustering_config(self) -> ClusteringConfig:
        return ClusteringConfig(
            n_clusters=self.n_uavs,
            capacity=self.capacity,
            max_iterations=self.kmeans_max_iter,
            user_weight=self.user_weight,
            uav_weight=self.uav_weight,
        )


@dataclass
class EpisodeTrace:
    """Append-only per-slot record of one episode.

    ``serving`` and ``orders`` describe the association the slot was scored
    under; ``reclustered`` marks slots after which the association changed.
    """

    dt: float
    times: list[float] = field(default_factory=list)
    uav_xyz: list[np.ndarray] = field(default_factory=list)
    actions: list[tuple[int, ...]] = field(default_factory=list)
    serving: list[tuple[int, ...]] = field(default_factory=list)
    orders: list[tuple[tuple[int, ...], ...]] = field(default_factory=list)
    user_xy: list[np.ndarray] = field(default_factory=list)
    rates: list[np.ndarray] = field(default_factory=list)
    equivalent_gains: list[np.ndarray] = field(default_factory=list)
    sinr: list[np.ndarray] = field(default_factory=list)
    rewards: list[np.ndarray] = field(default_factory=list)
    lam: list[int] = field(default_factory=list)
    reclustered: list[bool] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def slot_sum_rates(self) -> np.ndarray:
        return np.array([r.sum() for r in self.rates])

    def throughput_bits(self) -> float:
        """Delivered bits over the whole episode."""
        return float(self.slot_sum_rates.sum() * self.dt)

    def mean_rate_bps(self) -> float:
        return float(self.slot_sum_rates.mean()) if self.times else 0.0


def team_sizes(n_users: int, n_uavs: int) -> tuple[int, ...]:
    """Uneven team split, e.g. 6 users over 3 sites -> (3, 2, 1)."""
    base = [n_users // n_uavs + (1 if i < n_users % n_uavs else 0) for i in range(n_uavs)]
    if n_uavs >= 2 and base[-1] > 1:
        base[0] += 1
        base[-1] -= 1
    return tuple(base)


def default_destinations(config: SimConfig, grid: GridMap, rng: np.random.Generator):
    if config.dest_mode == "teams":
        return world.sample_team_destinations(
            grid, team_sizes(config.n_users, config.n_uavs), rng, spread=config.dest_team_spread
        )
    return world.sample_destinations(grid, config.n_users, rng)


def build_grid(config: SimConfig, layout_seed: int, cost_seed: int) -> GridMap:
    return world.build_map(
        config.map_cells,
        config.map_cells,
        layout_seed,
        cost_seed,
        v_max=config.user_v_max,
        cell_size=config.cell_size,
        block_size=config.block_size,
    )


def decode_action(index: int, action_space: ActionSpace) -> tuple[str, tuple[float, ...]]:
    """(movement name, power fractions) for a concatenated action index."""
    movement, fractions = action_space.decode(index)
    return MOVEMENTS[movement], fractions


def apply_movement(position: np.ndarray, movement: str, config: SimConfig) -> np.ndarray:
    """Axis-aligned displacement by one step length; boundary moves hover."""
    dx, dy, dh = _DELTAS[movement]
    step = config.uav_speed * config.dt
    target = position + np.array([dx * step, dy * step, dh * step])
    if not (
        0.0 <= target[0] <= config.x_max
        and 0.0 <= target[1] <= config.y_max
        and config.h_min <= target[2] <= config.h_max
    ):
        return position.copy()
    return target


def reward(slot_sum_rate: float, lam: int, n_uavs: int) -> np.ndarray:
    """Common per-UAV reward: system sum rate halved per QoS penalty count.

    The rate enters in kb/s, the unit the rest of the parameterization
    uses; bit-scale rewards leave Q values dominated by their common
    offset and stall action differentiation.
    """
    return np.full(n_uavs, slot_sum_rate / 1e3 / 2.0**lam)


class UavEnv:
    """One episode's worth of simulation state."""

    def __init__(
        self,
        config: SimConfig,
        action_space: ActionSpace,
        grid: GridMap,
        seed,
        destinations: list[tuple[int, int]] | None = None,
    ):
        self.config = config
        self.action_space = action_space
        self.grid = grid
        ss = np.random.SeedSequence(seed)
        s_dest, s_uav, s_fading, s_cluster = ss.spawn(4)
        self._fading_rng = np.random.default_rng(s_fading)
        self._cluster_rng = np.random.default_rng(s_cluster)

        if destinations is None:
            destinations = default_destinations(config, grid, np.random.default_rng(s_dest))
        elif len(destinations) != config.n_users:
            raise ValueError("one destination per user required")
        self.users: list[UserState] = [
            world.make_user(k, grid, destinations[k]) for k in range(config.n_users)
        ]

        uav_rng = np.random.default_rng(s_uav)
        h_lo, h_hi = config.uav_init_h
        if config.uav_init_xy == "origin":
            ox, oy = grid.cell_center(grid.origin)
            r = config.uav_init_radius
            xs = np.clip(uav_rng.uniform(ox - r, ox + r, config.n_uavs), 0.0, config.x_max)
            ys = np.clip(uav_rng.uniform(oy - r, oy + r, config.n_uavs), 0.0, config.y_max)
        else:
            xs = uav_rng.uniform(0.0, config.x_max, config.n_uavs)
            ys = uav_rng.uniform(0.0, config.y_max, config.n_uavs)
        self.uav_xyz = np.column_stack([xs, ys, uav_rng.uniform(h_lo, h_hi, config.n_uavs)])

        self.t_slot = 0
        self.association = self._recluster()
        self.gains = self._draw_gains()
        self.trace = EpisodeTrace(dt=config.dt)

    # -- snapshot helpers -------------------------------------------------

    def user_positions(self) -> np.ndarray:
        return np.array([u.position(self.grid) for u in self.users])

    def cluster_sizes(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.association.clusters)

    def agent_state(self, u: int) -> np.ndarray:
        return abstract_state(
            self.uav_xyz,
            self.gains,
            self.association.clusters,
            u,
            (self.config.x_max, self.config.y_max),
            self.config.h_max,
            self.config.capacity,
        )

    def agent_mask(self, u: int) -> np.ndarray:
        return self.action_space.mask(len(self.association.clusters[u]))

    @property
    def done(self) -> bool:
        return self.t_slot >= self.config.slots

    # -- internals --------------------------------------------------------

    def _recluster(self) -> Association:
        cfg = self.config.clustering_config()
        seed = int(self._cluster_rng.integers(0, 2**31))
        cs = weighted_kmeans(self.user_positions(), self.uav_xyz[:, :2], cfg, seed)
        return rebalance_capacity(cs, cfg.capacity).to_association()

    def _draw_gains(self) -> np.ndarray:
        cfg = self.config
        if cfg.fading_mode == "rayleigh":
            fading = self._fading_rng.exponential(1.0, size=(cfg.n_uavs, cfg.n_users))
        else:
            fading = np.ones((cfg.n_uavs, cfg.n_users))
        user_xy = self.user_positions()
        gains = np.empty((cfg.n_uavs, cfg.n_users))
        for u in range(cfg.n_uavs):
            x, y, h = self.uav_xyz[u]
            for k in range(cfg.n_users):
                d3d = channel.distance_3d(tuple(user_xy[k]), (x, y, h))
                _, _, l_exp = channel.path_loss(max(d3d, 1.0), h, cfg.fc_hz / 1e9)
                gains[u, k] = channel.channel_gain(l_exp, fading[u, k])
        return gains

    def _decoding_orders(self) -> tuple[tuple[int, ...], ...]:
        """Per-cluster SIC order; depends only on budgets, not gear choice."""
        cfg = self.config
        provisional = PowerAllocation(
            totals=tuple(cfg.p_max_watts for _ in range(cfg.n_uavs)),
            fractions=tuple(_uniform_fractions(len(c)) for c in self.association.clusters),
        )
        orders = []
        for u, members in enumerate(self.association.clusters):
            if not members:
                orders.append(())
                continue
            g_eq = {
                k: noma.equivalent_gain(k, u, self.gains, provisional, cfg.noise_watts)
                for k in members
            }
            orders.append(noma.decoding_order(members, g_eq))
        return tuple(orders)

    def _power_allocation(
        self, gear_fractions: list[tuple[float, ...]], orders
    ) -> PowerAllocation:
        """Gear fractions land on members by decoding position.

        Gears list the largest share first and the weakest user is decoded
        first, so the weakest user receives the largest share.
        """
        cfg = self.config
        fractions: list[tuple[float, ...]] = []
        for u, members in enumerate(self.association.clusters):
            if not members:
                fractions.append(())
                continue
            gear = gear_fractions[u]
            by_member = {orders[u][i]: gear[i] for i in range(len(orders[u]))}
            fractions.append(tuple(by_member[k] for k in members))
        return PowerAllocation(
            totals=tuple(cfg.p_max_watts for _ in range(cfg.n_uavs)),
            fractions=tuple(fractions),
        )

    def _cluster_outcomes(self, power: PowerAllocation) -> list[DecodedCluster]:
        cfg = self.config
        outcomes = []
        for u, members in enumerate(self.association.clusters):
            if not members:
                continue
            if cfg.scheme == "noma":
                outcomes.append(
                    noma.decode_cluster(
                        u, self.association, self.gains, power, cfg.noise_watts, cfg.bandwidth_hz
                    )
                )
            else:
                g_eq = {
                    k: noma.equivalent_gain(k, u, self.gains, power, cfg.noise_watts)
                    for k in members
                }
                order = noma.decoding_order(members, g_eq)
                sinr = {
                    k: noma.oma_sinr(k, u, self.association, self.gains, power, cfg.noise_watts)
                    for k in members
                }
                rates = noma.oma_rate(
                    u, self.association, self.gains, power, cfg.noise_watts, cfg.bandwidth_hz
                )
                outcomes.append(
                    DecodedCluster(uav=u, order=order, equivalent_gains=g_eq, sinr=sinr, rates=rates)
                )
        return outcomes

    def _qos_penalty(self, outcomes: list[DecodedCluster], power: PowerAllocation, orders) -> int:
        """Count QoS-violating users whose violation was avoidable.

        A violation counts only if some other power gear (at the current
        positions) would have met the user's rate floor.
        """
        cfg = self.config
        lam = 0
        for outcome in outcomes:
            u = outcome.uav
            violators = [k for k, r in outcome.rates.items() if r < cfg.qos_rate_bps]
            if not violators:
                continue
            members = self.association.clusters[u]
            for k in violators:
                for gear in self.action_space.gears.get(len(members), ()):
                    by_member = {orders[u][i]: gear[i] for i in range(len(orders[u]))}
                    trial_fr = list(power.fractions)
                    trial_fr[u] = tuple(by_member[m] for m in members)
                    trial = PowerAllocation(totals=power.totals, fractions=tuple(trial_fr))
                    if cfg.scheme == "noma":
                        rate = noma.decode_cluster(
                            u, self.association, self.gains, trial, cfg.noise_watts, cfg.bandwidth_hz
                        ).rates[k]
                    else:
                        rate = noma.oma_rate(
                            u, self.association, self.gains, trial, cfg.noise_watts, cfg.bandwidth_hz
                        )[k]
                    if rate >= cfg.qos_rate_bps:
                        lam += 1
                        break
        return lam

    def _resolve_movements(self, movements: list[str]) -> np.ndarray:
        """Apply all movements; exact position clashes make higher ids yield."""
        cfg = self.config
        committed: list[np.ndarray] = []
        for u in range(cfg.n_uavs):
            candidates = [apply_movement(self.uav_xyz[u], movements[u], cfg),
                          self.uav_xyz[u].copy()]
            # degenerate last resort: any free axis move
            candidates += [
                apply_movement(self.uav_xyz[u], name, cfg)
                for name in MOVEMENTS
                if name not in (movements[u], "hover")
            ]
            chosen = candidates[1]
            for cand in candidates:
                if not any(np.array_equal(cand, c) for c in committed):
                    chosen = cand
                    break
            committed.append(chosen)
        return np.vstack(committed)

    # -- stepping ---------------------------------------------------------

    def step(self, action_indices) -> tuple[np.ndarray, int]:
        """Advance one slot; returns (per-UAV rewards, penalty count)."""
        cfg = self.config
        if len(action_indices) != cfg.n_uavs:
            raise ValueError("one action per UAV required")
        movements: list[str] = []
        gear_fractions: list[tuple[float, ...]] = []
        for u, idx in enumerate(action_indices):
            if not self.agent_mask(u)[idx]:
                raise ValueError(f"action {idx} is masked for UAV {u}")
            movement, fractions = decode_action(int(idx), self.action_space)
            if not self.association.clusters[u]:
                fractions = ()
            movements.append(movement)
            gear_fractions.append(fractions)

        self.uav_xyz = self._resolve_movements(movements)
        self.gains = self._draw_gains()
        orders = self._decoding_orders()
        power = self._power_allocation(gear_fractions, orders)
        outcomes = self._cluster_outcomes(power)
        slot_rate = noma.slot_sum_rate(outcomes)
        lam = self._qos_penalty(outcomes, power, orders)
        rewards = reward(slot_rate, lam, cfg.n_uavs)

        serving = tuple(self.association.serving_uav(k) for k in range(cfg.n_users))
        rate_k = np.zeros(cfg.n_users)
        geq_k = np.zeros(cfg.n_users)
        sinr_k = np.zeros(cfg.n_users)
        for outcome in outcomes:
            for k, r in outcome.rates.items():
                rate_k[k] = r
                geq_k[k] = outcome.equivalent_gains[k]
                sinr_k[k] = outcome.sinr[k]

        self.users = [world.advance_user(u, self.grid, cfg.dt) for u in self.users]
        self.t_slot += 1
        reclustered = False
        if (
            cfg.recluster
            and self.t_slot < cfg.slots
            and self.t_slot % cfg.recluster_slots == 0
        ):
            self.association = self._recluster()
            reclustered = True

        tr = self.trace
        tr.times.append(self.t_slot * cfg.dt)
        tr.uav_xyz.append(self.uav_xyz.copy())
        tr.actions.append(tuple(int(i) for i in action_indices))
        tr.serving.append(serving)
        tr.orders.append(orders)
        tr.user_xy.append(self.user_positions())
        tr.rates.append(rate_k)
        tr.equivalent_gains.append(geq_k)
        tr.sinr.append(sinr_k)
        tr.rewards.append(rewards.copy())
        tr.lam.append(lam)
        tr.reclustered.append(reclustered)
        return rewards, lam


def _uniform_fractions(n: int) -> tuple[float, ...]:
    return tuple(1.0 / n for _ in range(n)) if n else ()


class CircularPolicy:
    """Orbit each cluster's user centroid at a fixed radius and height.

    No learning: the movement nearest to the next point on the circle is
    taken, and power uses the most balanced gear for the cluster size.
    """

    def __init__(self, action_space: ActionSpace, radius: float = 100.0, height: float = 85.0):
        self.action_space = action_space
        self.radius = radius
        self.height = height
        self._balanced = {
            size: min(range(len(table)), key=lambda i: float(np.var(table[i])))
            for size, table in action_space.gears.items()
        }

    def select(self, env: UavEnv) -> list[int]:
        cfg = env.config
        step = cfg.uav_speed * cfg.dt
        user_xy = env.user_positions()
        actions = []
        for u, members in enumerate(env.association.clusters):
            size = len(members)
            if not members:
                actions.append(
                    self.action_space.encode(MOVEMENTS.index("hover"), self.action_space.sizes[0], 0)
                )
                continue
            center = user_xy[list(members)].mean(axis=0)
            pos = env.uav_xyz[u]
            rel = pos[:2] - center
            angle = math.atan2(rel[1], rel[0]) + step / self.radius
            target = np.array(
                [
                    center[0] + self.radius * math.cos(angle),
                    center[1] + self.radius * math.sin(angle),
                    self.height,
                ]
            )
            best_m, best_d = 0, float("inf")
            for m, name in enumerate(MOVEMENTS):
                candidate = apply_movement(pos, name, cfg)
                d = float(np.linalg.norm(candidate - target))
                if d < best_d:
                    best_m, best_d = m, d
            actions.append(self.action_space.encode(best_m, size, self._balanced[size]))
        return actions


def run_episode(
    policy, config: SimConfig, grid: GridMap, seed, destinations=None
) -> EpisodeTrace:
    """Roll one full episode under a policy and return its trace."""
    env = UavEnv(config, policy.action_space, grid, seed, destinations)
    while not env.done:
        env.step(policy.select(env))
    return env.trace


def audit_trace(trace: EpisodeTrace, config: SimConfig) -> list[str]:
    """Check the per-slot constraints; returns a list of violation strings.

    Bounds, pairwise-distinct UAV positions, single association, capacity,
    the power cap implied by unit fraction sums, and decoding-order
    monotonicity must hold on every row.
    """
    problems = []
    for i, t in enumerate(trace.times):
        xyz = trace.uav_xyz[i]
        for u in range(config.n_uavs):
            x, y, h = xyz[u]
            if not (
                0.0 <= x <= config.x_max
                and 0.0 <= y <= config.y_max
                and config.h_min <= h <= config.h_max
            ):
                problems.append(f"t={t}: UAV {u} out of bounds {xyz[u]}")
        for a in range(config.n_uavs):
            for b in range(a + 1, config.n_uavs):
                if np.array_equal(xyz[a], xyz[b]):
                    problems.append(f"t={t}: UAVs {a} and {b} coincide")
        serving = trace.serving[i]
        if len(serving) != config.n_users or any(
            not 0 <= u < config.n_uavs for u in serving
        ):
            problems.append(f"t={t}: association does not cover every user")
        counts: dict[int, int] = {}
        for u in serving:
            counts[u] = counts.get(u, 0) + 1
        if any(c > config.capacity for c in counts.values()):
            problems.append(f"t={t}: cluster over capacity {counts}")
        for u, order in enumerate(trace.orders[i]):
            geq = [trace.equivalent_gains[i][k] for k in order]
            if any(geq[j] > geq[j + 1] for j in range(len(geq) - 1)):
                problems.append(f"t={t}: decoding order broken for UAV {u}")
            if sorted(order) != sorted(k for k, s in enumerate(serving) if s == u):
                problems.append(f"t={t}: order/association mismatch for UAV {u}")
    return problems
