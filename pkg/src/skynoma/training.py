"""Training orchestration for the shared DQN and its comparison schemes.

A scheme bundles the knobs that distinguish the proposed learner from its
baselines: whether agents share one network, which movements are allowed,
whether clusters are forced to equal sizes, whether re-clustering runs,
and which multiple-access scheme scores the rates.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import neuralnet
from .agent import (
    DEFAULT_POWER_GEARS,
    ActionSpace,
    Experience,
    HyperParams,
    SdqnCore,
    select_action,
    state_length,
)
from .env import (
    CircularPolicy,
    EpisodeTrace,
    SimConfig,
    UavEnv,
    build_grid,
    default_destinations,
    run_episode,
)
from .world import GridMap

__all__ = [
    "SCHEME_KEYS",
    "DqnPolicy",
    "EpisodeStats",
    "TrainedModel",
    "TrainResult",
    "train",
    "evaluate",
    "baseline_policy",
    "episodes_to_fraction_of_max",
    "smoothed",
    "final_level",
]


@dataclass(frozen=True)
class SchemeSpec:
    key: str
    share: bool = True
    banned_movements: tuple[str, ...] = ()
    equal_clusters: bool = False
    recluster: bool = True
    rate_scheme: str = "noma"
    learned: bool = True


_SCHEMES = {
    "sdqn3d": SchemeSpec("sdqn3d"),
    "sdqn3d-oma": SchemeSpec("sdqn3d-oma", rate_scheme="oma"),
    "sdqn2d": SchemeSpec("sdqn2d", banned_movements=("up", "down")),
    "mutual": SchemeSpec("mutual", equal_clusters=True),
    "private-dqn": SchemeSpec("private-dqn", share=False),
    "static-cluster": SchemeSpec("static-cluster", recluster=False),
    "circular": SchemeSpec("circular", learned=False),
}
SCHEME_KEYS = tuple(_SCHEMES)


def scheme_spec(key: str) -> SchemeSpec:
    try:
        return _SCHEMES[key]
    except KeyError:
        raise ValueError(f"unknown scheme {key!r} (have: {', '.join(SCHEME_KEYS)})") from None


def _seed_int(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(entropy=seed, spawn_key=key).generate_state(1)[0])


def _scheme_config(base: SimConfig, spec: SchemeSpec) -> SimConfig:
    cfg = replace(base, scheme=spec.rate_scheme, recluster=spec.recluster)
    if spec.equal_clusters:
        size = base.n_users // base.n_uavs
        if size * base.n_uavs != base.n_users:
            raise ValueError("equal clustering requires users divisible by UAV count")
        cfg = replace(cfg, capacity=size)
    return cfg


def _scheme_action_space(cfg: SimConfig, spec: SchemeSpec) -> ActionSpace:
    if spec.equal_clusters:
        size = cfg.capacity
        return ActionSpace({size: DEFAULT_POWER_GEARS[size]})
    return ActionSpace({s: DEFAULT_POWER_GEARS[s] for s in range(1, cfg.capacity + 1)})


class DqnPolicy:
    """Epsilon-greedy action selection from one shared or per-agent nets."""

    def __init__(self, action_space, nets, epsilon, rng, banned_movements=()):
        self.action_space = action_space
        self.nets = nets
        self.epsilon = epsilon
        self.rng = rng
        self.banned_movements = tuple(banned_movements)

    def _net(self, u: int):
        return self.nets[0] if len(self.nets) == 1 else self.nets[u]

    def mask_for(self, env: UavEnv, u: int) -> np.ndarray:
        mask = env.agent_mask(u)
        if self.banned_movements:
            mask = self.action_space.mask_movements(mask, self.banned_movements)
        return mask

    def select(self, env: UavEnv) -> list[int]:
        return [
            select_action(
                neuralnet.forward(self._net(u), env.agent_state(u)),
                self.mask_for(env, u),
                self.epsilon,
                self.rng,
            )
            for u in range(env.config.n_uavs)
        ]


@dataclass
class EpisodeStats:
    episode: int
    epsilon: float
    mean_loss: float
    throughput_bits: float


@dataclass
class TrainedModel:
    """Everything needed to act greedily after training."""

    spec: SchemeSpec
    config: SimConfig
    action_space: ActionSpace
    nets: list = field(default_factory=list)

    def policy(self, epsilon: float, rng) -> DqnPolicy:
        return DqnPolicy(self.action_space, self.nets, epsilon, rng, self.spec.banned_movements)

    def snapshot_nets(self) -> "TrainedModel":
        """Frozen parameter copy, for mid-training checkpoints."""
        copies = []
        for net in self.nets:
            copy = neuralnet.QNetwork(net.n_inputs, net.n_actions, seed=0, hidden=net.hidden)
            neuralnet.copy_params(net, copy)
            copies.append(copy)
        return TrainedModel(self.spec, self.config, self.action_space, copies)


@dataclass
class TrainResult:
    scheme: str
    seed: int
    stats: list[EpisodeStats]
    model: TrainedModel
    grid: GridMap
    config: SimConfig
    destinations: list = field(default_factory=list)
    checkpoints: dict[int, TrainedModel] = field(default_factory=dict)

    @property
    def throughputs(self) -> np.ndarray:
        return np.array([s.throughput_bits for s in self.stats])


def train(
    scheme_key: str,
    base_config: SimConfig,
    hyper: HyperParams,
    seed: int,
    episodes: int,
    checkpoint_at: tuple[int, ...] = (),
) -> TrainResult:
    """Train one scheme for a seed; fully deterministic in its arguments."""
    spec = scheme_spec(scheme_key)
    cfg = _scheme_config(base_config, spec)
    space = _scheme_action_space(cfg, spec)
    grid = build_grid(cfg, _seed_int(seed, 0), _seed_int(seed, 1))
    action_rng = np.random.default_rng(_seed_int(seed, 2))
    # one world per run: destinations are drawn once so episodes repeat the
    # same departure story; UAV starts and fading still vary per episode
    dest_rng = np.random.default_rng(_seed_int(seed, 7))
    destinations = default_destinations(cfg, grid, dest_rng)

    if not spec.learned:
        policy = CircularPolicy(space)
        stats = []
        model = TrainedModel(spec, cfg, space, nets=[])
        for ep in range(episodes):
            trace = run_episode(policy, cfg, grid, _seed_int(seed, 3, ep), destinations)
            stats.append(EpisodeStats(ep, 0.0, 0.0, trace.throughput_bits()))
        return TrainResult(scheme_key, seed, stats, model, grid, cfg, destinations)

    state_dim = state_length(cfg.n_uavs, cfg.n_users, cfg.capacity)
    n_cores = 1 if spec.share else cfg.n_uavs
    cores = [
        SdqnCore(state_dim, space.n_actions, hyper, _seed_int(seed, 4, i))
        for i in range(n_cores)
    ]
    model = TrainedModel(spec, cfg, space, [c.eval_net for c in cores])
    core_of = (lambda u: cores[0]) if spec.share else (lambda u: cores[u])

    stats: list[EpisodeStats] = []
    checkpoints: dict[int, TrainedModel] = {}
    for ep in range(episodes):
        epsilon = hyper.epsilon_for(ep, episodes)
        env = UavEnv(cfg, space, grid, _seed_int(seed, 3, ep), destinations)
        losses: list[float] = []
        while not env.done:
            states = [env.agent_state(u) for u in range(cfg.n_uavs)]
            masks = []
            actions = []
            for u in range(cfg.n_uavs):
                mask = env.agent_mask(u)
                if spec.banned_movements:
                    mask = space.mask_movements(mask, spec.banned_movements)
                q = neuralnet.forward(core_of(u).eval_net, states[u])
                actions.append(select_action(q, mask, epsilon, action_rng))
                masks.append(mask)
            rewards, _lam = env.step(actions)
            for u in range(cfg.n_uavs):
                next_mask = env.agent_mask(u)
                if spec.banned_movements:
                    next_mask = space.mask_movements(next_mask, spec.banned_movements)
                core = core_of(u)
                core.store(
                    Experience(
                        state=states[u],
                        action=actions[u],
                        reward=float(rewards[u]),
                        next_state=env.agent_state(u),
                        mask=masks[u],
                        next_mask=next_mask,
                        terminal=env.done,
                    )
                )
                loss = core.train_tick()
                if loss is not None:
                    losses.append(loss)
        stats.append(
            EpisodeStats(
                ep, epsilon, float(np.mean(losses)) if losses else 0.0,
                env.trace.throughput_bits(),
            )
        )
        if ep + 1 in checkpoint_at:
            checkpoints[ep + 1] = model.snapshot_nets()
    return TrainResult(scheme_key, seed, stats, model, grid, cfg, destinations, checkpoints)


def evaluate(
    result: TrainResult,
    eval_seed: int,
    *,
    model: TrainedModel | None = None,
    recluster: bool | None = None,
) -> EpisodeTrace:
    """Greedy rollout of a trained model; re-clustering can be toggled."""
    m = model if model is not None else result.model
    cfg = m.config if recluster is None else replace(m.config, recluster=recluster)
    rng = np.random.default_rng(_seed_int(eval_seed, 5))
    if not m.spec.learned:
        policy = CircularPolicy(m.action_space)
    else:
        policy = m.policy(epsilon=0.0, rng=rng)
    return run_episode(policy, cfg, result.grid, _seed_int(eval_seed, 6), result.destinations)


def baseline_policy(kind: str, model: TrainedModel | None = None, rng=None):
    """Ready-to-run policy for a benchmark kind.

    ``circular`` needs no model; the learned kinds wrap a trained model's
    greedy policy.
    """
    spec = scheme_spec(kind)
    if not spec.learned:
        space = model.action_space if model else ActionSpace()
        return CircularPolicy(space)
    if model is None:
        raise ValueError(f"scheme {kind!r} needs a trained model")
    return model.policy(epsilon=0.0, rng=rng or np.random.default_rng(0))


def smoothed(values, window: int = 9) -> np.ndarray:
    """Centered moving average with edge shrink."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return v
    half = window // 2
    return np.array([v[max(0, i - half) : i + half + 1].mean() for i in range(v.size)])


def final_level(values, tail: int = 15) -> float:
    """Mean of the last ``tail`` episodes; the curve's settled value."""
    v = np.asarray(values, dtype=float)
    return float(v[-min(tail, v.size) :].mean())


def episodes_to_fraction_of_max(values, fraction: float = 0.9, window: int = 9) -> int:
    """First episode at which the smoothed curve reaches the fraction of its max."""
    s = smoothed(values, window)
    target = fraction * float(s.max())
    hits = np.flatnonzero(s >= target)
    return int(hits[0]) if hits.size else len(s)
