"""Shared-DQN machinery: state abstraction, action masking, replay, targets.

Every UAV agent feeds the same network, so each one reshuffles its
observation into a fixed layout (own data first). Cluster sizes vary, so
the action space concatenates one segment per possible size and a boolean
mask hides every segment except the agent's current one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import neuralnet
from .neuralnet import QNetwork

__all__ = [
    "MOVEMENTS",
    "DEFAULT_POWER_GEARS",
    "ActionSpace",
    "HyperParams",
    "Experience",
    "ReplayMemory",
    "abstract_state",
    "state_length",
    "select_action",
    "td_target",
    "SdqnCore",
]

MOVEMENTS = ("up", "down", "forward", "backward", "left", "right", "hover")
HOVER = MOVEMENTS.index("hover")

# Power split presets per cluster size; fractions are listed largest first
# and are granted to members in ascending equivalent-gain order, so the
# weakest user always receives the largest share.
DEFAULT_POWER_GEARS: dict[int, tuple[tuple[float, ...], ...]] = {
    1: ((1.0,),),
    2: ((0.9, 0.1), (0.8, 0.2), (0.7, 0.3), (0.6, 0.4)),
    3: ((0.7, 0.2, 0.1), (0.6, 0.3, 0.1), (0.5, 0.3, 0.2), (0.4, 0.35, 0.25)),
}

GAIN_DB_FLOOR = -140.0  # linear gains are squashed to [0, 1] over this dB window
GAIN_DB_CEIL = -40.0


class ActionSpace:
    """Concatenated (movement, power-gear) index space over cluster sizes.

    Layout is one block per cluster size in ascending order; inside a block
    the movement is the major axis. An empty cluster falls back to the
    hover actions of the smallest block, which are no-ops power-wise.
    """

    def __init__(self, gears: dict[int, tuple[tuple[float, ...], ...]] | None = None):
        self.gears = dict(sorted((gears or DEFAULT_POWER_GEARS).items()))
        if not self.gears:
            raise ValueError("need at least one cluster size")
        for size, table in self.gears.items():
            if not table:
                raise ValueError(f"size {size} has no power gears")
            for fracs in table:
                if len(fracs) != size:
                    raise ValueError(f"gear {fracs} does not split power {size} ways")
                if not math.isclose(sum(fracs), 1.0, rel_tol=0, abs_tol=1e-9):
                    raise ValueError(f"gear {fracs} must sum to 1")

        self.sizes = tuple(self.gears)
        self._offsets: dict[int, int] = {}
        offset = 0
        for size in self.sizes:
            self._offsets[size] = offset
            offset += len(MOVEMENTS) * len(self.gears[size])
        self.n_actions = offset

        self.movement_of = np.empty(offset, dtype=np.int64)
        self.size_of = np.empty(offset, dtype=np.int64)
        self.gear_of = np.empty(offset, dtype=np.int64)
        for size in self.sizes:
            n_gears = len(self.gears[size])
            base = self._offsets[size]
            for m in range(len(MOVEMENTS)):
                for g in range(n_gears):
                    idx = base + m * n_gears + g
                    self.movement_of[idx] = m
                    self.size_of[idx] = size
                    self.gear_of[idx] = g

    def encode(self, movement: int, cluster_size: int, gear: int) -> int:
        n_gears = len(self.gears[cluster_size])
        if not 0 <= gear < n_gears:
            raise ValueError(f"gear {gear} out of range for size {cluster_size}")
        if not 0 <= movement < len(MOVEMENTS):
            raise ValueError(f"movement {movement} out of range")
        return self._offsets[cluster_size] + movement * n_gears + gear

    def decode(self, index: int) -> tuple[int, tuple[float, ...]]:
        """(movement, power fractions) for an action index."""
        if not 0 <= index < self.n_actions:
            raise ValueError(f"action index {index} out of range")
        size = int(self.size_of[index])
        return int(self.movement_of[index]), self.gears[size][int(self.gear_of[index])]

    def mask(self, cluster_size: int) -> np.ndarray:
        """Boolean mask enabling only the block for ``cluster_size``.

        Size 0 falls back to a movement-only view of the smallest block
        (first gear per movement): a UAV with no users can still fly, and
        its power split is moot.
        """
        valid = np.zeros(self.n_actions, dtype=bool)
        if cluster_size == 0:
            smallest = self.sizes[0]
            valid |= (self.size_of == smallest) & (self.gear_of == 0)
            return valid
        if cluster_size not in self.gears:
            raise ValueError(f"no action block for cluster size {cluster_size}")
        valid |= self.size_of == cluster_size
        return valid

    def mask_movements(self, base: np.ndarray, banned: tuple[str, ...]) -> np.ndarray:
        """Restrict a mask further by forbidding movement directions."""
        out = base.copy()
        for name in banned:
            out &= self.movement_of != MOVEMENTS.index(name)
        if not out.any():
            raise ValueError("mask must keep at least one action")
        return out


def state_length(n_uavs: int, n_users: int, capacity: int) -> int:
    return 3 * n_uavs + capacity + (n_users - 1)


def _gain_to_unit(gain: float) -> float:
    """Normalized decibel transform squashing linear gains to [0, 1]."""
    if gain <= 0.0:
        return 0.0
    db = 10.0 * math.log10(gain)
    return min(1.0, max(0.0, (db - GAIN_DB_FLOOR) / (GAIN_DB_CEIL - GAIN_DB_FLOOR)))


def abstract_state(
    uav_xyz: np.ndarray,
    gains: np.ndarray,
    clusters: tuple[tuple[int, ...], ...],
    self_uav: int,
    bounds_xy: tuple[float, float],
    h_max: float,
    capacity: int,
) -> np.ndarray:
    """Reshuffle a global snapshot into agent ``self_uav``'s input layout.

    [own xyz | other UAVs' xyz by id | own users' gains (cluster order,
    padded to the capacity) | remaining users' gains by id, padded to K-1].
    Positions scale by the area bounds and ceiling height; gains map
    through the dB squash. Every user's gain is taken to its serving UAV.
    """
    n_uavs, n_users = gains.shape
    vec = np.zeros(state_length(n_uavs, n_users, capacity))

    def scaled(u: int) -> tuple[float, float, float]:
        x, y, h = uav_xyz[u]
        return (x / bounds_xy[0], y / bounds_xy[1], h / h_max)

    vec[0:3] = scaled(self_uav)
    pos = 3
    for u in range(n_uavs):
        if u == self_uav:
            continue
        vec[pos : pos + 3] = scaled(u)
        pos += 3

    serving = {k: u for u, members in enumerate(clusters) for k in members}
    own = clusters[self_uav]
    for i, k in enumerate(own):
        vec[pos + i] = _gain_to_unit(gains[self_uav, k])
    pos += capacity

    others = [k for k in range(n_users) if k not in own]
    # an empty own cluster leaves K remaining users for K-1 slots; the
    # highest ids are dropped in that degenerate case
    for i, k in enumerate(others[: n_users - 1]):
        vec[pos + i] = _gain_to_unit(gains[serving[k], k])
    return vec


@dataclass(frozen=True)
class HyperParams:
    """RL knobs; defaults follow the simulation-parameter table."""

    discount: float = 1.0
    epsilon_start: float = 0.9
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.8
    learning_rate: float = 0.001
    target_update_period: int = 1500
    batch_size: int = 128
    replay_capacity: int = 10000

    def __post_init__(self):
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must lie in [0, 1]")
        if not 0.0 <= self.epsilon_start <= 0.9:
            raise ValueError("epsilon may not exceed 0.9")

    def epsilon_for(self, episode: int, total_episodes: int) -> float:
        """Linear decay over the first decay fraction of episodes, then flat."""
        span = max(1, int(total_episodes * self.epsilon_decay_fraction))
        frac = min(1.0, episode / span)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac


@dataclass(frozen=True)
class Experience:
    """One transition; masks ride along so replayed targets can be masked."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    mask: np.ndarray
    next_mask: np.ndarray
    terminal: bool = False


class ReplayMemory:
    """Fixed-capacity ring buffer; sampling is blocked until it first fills."""

    def __init__(self, capacity: int, state_dim: int, n_actions: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.masks = np.zeros((capacity, n_actions), dtype=bool)
        self.next_masks = np.zeros((capacity, n_actions), dtype=bool)
        self.terminals = np.zeros(capacity, dtype=bool)
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    @property
    def full(self) -> bool:
        return self._size == self.capacity

    def push(self, exp: Experience) -> None:
        if not exp.mask[exp.action]:
            raise ValueError("stored action must be valid under the stored mask")
        i = self._cursor
        self.states[i] = exp.state
        self.actions[i] = exp.action
        self.rewards[i] = exp.reward
        self.next_states[i] = exp.next_state
        self.masks[i] = exp.mask
        self.next_masks[i] = exp.next_mask
        self.terminals[i] = exp.terminal
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample_indices(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        if not self.full:
            raise RuntimeError("replay memory must be full before sampling")
        return rng.integers(0, self._size, size=batch)


def select_action(
    q_values: np.ndarray, mask: np.ndarray, epsilon: float, rng: np.random.Generator
) -> int:
    """Epsilon-greedy over the unmasked actions only.

    Masked entries are treated as -inf, so they can never win the argmax;
    exploration draws uniformly from the valid set. Ties go to the lowest
    index.
    """
    valid = np.flatnonzero(mask)
    if valid.size == 0:
        raise ValueError("mask leaves no valid action")
    if rng.random() < epsilon:
        return int(valid[rng.integers(valid.size)])
    masked = np.where(mask, q_values, -np.inf)
    return int(np.argmax(masked))


def td_target(
    reward: float,
    next_state: np.ndarray,
    target_net: QNetwork,
    next_mask: np.ndarray,
    discount: float,
) -> float:
    """Bootstrapped target: reward plus the discounted best valid next value."""
    q = neuralnet.forward(target_net, next_state)
    best = float(np.max(np.where(next_mask, q, -np.inf)))
    return reward + discount * best


class SdqnCore:
    """Evaluation/target network pair plus replay, shared by all agents.

    ``train_tick`` is called once per agent per environment step; with U
    agents the shared network therefore receives U updates per step, which
    is the whole point of sharing.
    """

    def __init__(self, state_dim: int, n_actions: int, hyper: HyperParams, seed: int):
        self.hyper = hyper
        seq = np.random.SeedSequence(seed)
        init_seed, sample_seed = seq.spawn(2)
        self.eval_net = QNetwork(state_dim, n_actions, seed=init_seed)
        self.target_net = QNetwork(state_dim, n_actions, seed=0)
        neuralnet.copy_params(self.eval_net, self.target_net)
        self.optimizer = neuralnet.AdamState(learning_rate=hyper.learning_rate).bind(self.eval_net)
        self.replay = ReplayMemory(hyper.replay_capacity, state_dim, n_actions)
        self.sample_rng = np.random.default_rng(sample_seed)
        self.ticks = 0

    def store(self, exp: Experience) -> None:
        self.replay.push(exp)

    def train_tick(self) -> float | None:
        """One minibatch update if the replay is full, else a no-op."""
        if not self.replay.full:
            return None
        idx = self.replay.sample_indices(self.hyper.batch_size, self.sample_rng)
        next_q = neuralnet.forward(self.target_net, self.replay.next_states[idx])
        best = np.max(np.where(self.replay.next_masks[idx], next_q, -np.inf), axis=1)
        # episodes end at the horizon, so terminal transitions do not bootstrap
        best = np.where(self.replay.terminals[idx], 0.0, best)
        targets = self.replay.rewards[idx] + self.hyper.discount * best
        loss = neuralnet.train_step(
            self.eval_net, self.optimizer, self.replay.states[idx], self.replay.actions[idx], targets
        )
        self.ticks += 1
        if self.ticks % self.hyper.target_update_period == 0:
            neuralnet.copy_params(self.eval_net, self.target_net)
        return loss
