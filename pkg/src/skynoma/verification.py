"""Named self-check properties behind ``skynoma verify``.

Each check returns (name, passed, detail) and is written against
independent re-derivations (explicit loops, finite differences, golden
files), never against the code path it validates. The acceptance test
suite drives the same functions with its stated tolerances.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import channel, neuralnet, noma, world
from .agent import ActionSpace, HyperParams, ReplayMemory, Experience, select_action, td_target
from .clustering import ClusteringConfig, rebalance_capacity, sse, weighted_kmeans
from .neuralnet import QNetwork

__all__ = ["CheckResult", "all_checks", "run_checks"]

REL_TOL_GOLDEN = 1e-9
REL_TOL_SINR = 1e-9
REL_TOL_GRAD = 1e-4


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _rel_err(got: float, want: float) -> float:
    if want == 0.0:
        return abs(got)
    return abs(got - want) / abs(want)


# -- channel ---------------------------------------------------------------


def load_golden_rows(path=None) -> list[dict[str, float]]:
    if path is None:
        source = resources.files("skynoma").joinpath("data/channel_goldens.csv")
        text = source.read_text()
    else:
        text = open(path).read()
    rows = []
    for row in csv.DictReader(text.splitlines()):
        rows.append({k: float(v) for k, v in row.items()})
    return rows


def check_channel_goldens(path=None) -> CheckResult:
    """Implementation matches the frozen high-precision table."""
    try:
        rows = load_golden_rows(path)
    except Exception as exc:  # unreadable golden file is a named failure
        return CheckResult("channel-golden-table", False, f"golden file unreadable: {exc}")
    if len(rows) != 50:
        return CheckResult("channel-golden-table", False, f"expected 50 rows, got {len(rows)}")
    worst = 0.0
    for row in rows:
        params = channel.los_params(row["h"])
        plos = channel.p_los(row["d3d"], row["h"])
        l_los, l_nlos, l_exp = channel.path_loss(row["d3d"], row["h"], row["fc_ghz"])
        gain = channel.channel_gain(l_exp, row["fading"])
        for got, want in (
            (params.d0, row["d0"]),
            (plos, row["p_los"]),
            (l_los, row["l_los"]),
            (l_nlos, row["l_nlos"]),
            (l_exp, row["l_exp"]),
            (gain, row["gain"]),
        ):
            worst = max(worst, _rel_err(got, want))
    return CheckResult(
        "channel-golden-table", worst <= REL_TOL_GOLDEN, f"max rel err {worst:.3e}"
    )


def check_channel_anchors() -> CheckResult:
    """The two hand-derived anchor values from the formula definitions."""
    d0 = channel.los_params(100.0).d0
    want_d0 = max(18.0, -432.94 + 294.05 * 2.0)
    l_los = channel.path_loss(100.0, 100.0, 2.0)[0]
    want_l = 30.9 + 2.0 * 21.5 + 20.0 * math.log10(2.0)
    ok = _rel_err(d0, want_d0) <= REL_TOL_GOLDEN and _rel_err(l_los, want_l) <= REL_TOL_GOLDEN
    return CheckResult("channel-anchors", ok, f"d0={d0:.6f} L_LoS={l_los:.6f}")


def check_plos_properties() -> CheckResult:
    """P_LoS lies in [0,1] and never increases with horizontal distance."""
    for h in (20.0, 50.0, 85.0, 120.0, 150.0):
        last = 1.0
        for r in np.linspace(0.0, 3000.0, 400):
            d3d = math.hypot(r, h)
            p = channel.p_los(d3d, h)
            if not 0.0 <= p <= 1.0:
                return CheckResult("plos-properties", False, f"P out of range at h={h} r={r}")
            if p > last + 1e-12:
                return CheckResult("plos-properties", False, f"P increased at h={h} r={r}")
            last = p
    return CheckResult("plos-properties", True, "monotone, bounded on 2000-point sweep")


def check_pathloss_bounds() -> CheckResult:
    """L_LoS <= expected <= L_NLoS over a geometry sweep."""
    for h in (20.0, 60.0, 100.0, 150.0):
        for r in (0.0, 30.0, 150.0, 700.0, 2500.0):
            d3d = math.hypot(r, h)
            if d3d < 1.0:
                continue
            l_los, l_nlos, l_exp = channel.path_loss(d3d, h, 2.0)
            if not (l_los - 1e-12 <= l_exp <= l_nlos + 1e-12):
                return CheckResult("pathloss-bounds", False, f"violated at h={h} r={r}")
    return CheckResult("pathloss-bounds", True, "expected loss bracketed everywhere")


def check_gain_monotone() -> CheckResult:
    """Gain decreases in loss and is linear in the fading coefficient."""
    losses = np.linspace(40.0, 130.0, 200)
    gains = [channel.channel_gain(l, 1.0) for l in losses]
    if any(gains[i + 1] >= gains[i] for i in range(len(gains) - 1)):
        return CheckResult("gain-monotone", False, "not decreasing in loss")
    for h_coef in (0.0, 0.5, 2.0, 7.5):
        if _rel_err(channel.channel_gain(83.0, h_coef), h_coef * channel.channel_gain(83.0, 1.0)) > 1e-12:
            return CheckResult("gain-monotone", False, "not linear in fading")
    return CheckResult("gain-monotone", True, "decreasing in L, linear in H")


# -- NOMA ------------------------------------------------------------------


def _random_scenario(rng: np.random.Generator):
    n_uavs = int(rng.integers(2, 4))
    sizes = [int(rng.integers(1, 4)) for _ in range(n_uavs)]
    n_users = sum(sizes)
    ids = list(rng.permutation(n_users))
    clusters, pos = [], 0
    for s in sizes:
        clusters.append(tuple(sorted(int(i) for i in ids[pos : pos + s])))
        pos += s
    assoc = noma.Association(clusters=tuple(clusters), n_users=n_users)
    gains = 10.0 ** rng.uniform(-12.0, -7.0, size=(n_uavs, n_users))
    totals = tuple(float(p) for p in rng.uniform(0.2, 1.0, size=n_uavs))
    fractions = []
    for s in sizes:
        f = rng.uniform(0.1, 1.0, size=s)
        f = f / f.sum()
        fractions.append(tuple(float(x) for x in f))
    power = noma.PowerAllocation(totals=totals, fractions=tuple(fractions))
    noise = float(10.0 ** rng.uniform(-10.0, -8.0))
    return assoc, gains, power, noise


def _oracle_cluster(u, assoc, gains, power, noise, bandwidth):
    """Term-by-term expansion of the SIC pipeline with plain Python sums."""
    members = assoc.clusters[u]
    frac = {k: power.fractions[u][i] for i, k in enumerate(members)}
    totals = []
    for s in range(len(assoc.clusters)):
        totals.append(power.totals[s] * sum(power.fractions[s]))

    def inter(k):
        acc = 0.0
        for s in range(len(assoc.clusters)):
            if s != u:
                acc += gains[s][k] * math.sqrt(totals[s])
        return acc

    g_eq = {k: gains[u][k] / (inter(k) + noise) for k in members}
    order = sorted(members, key=lambda k: (g_eq[k], k))
    out = {}
    for pos, k in enumerate(order):
        signal = gains[u][k] * math.sqrt(power.totals[u] * frac[k])
        intra = 0.0
        for later in order[pos + 1 :]:
            intra += gains[u][later] * math.sqrt(power.totals[u] * frac[later])
        gamma = signal / (intra + inter(k) + noise)
        out[k] = (g_eq[k], tuple(order), gamma, bandwidth * math.log2(1.0 + gamma))
    return out


def check_sinr_oracle(cases: int = 200, seed: int = 20240701) -> CheckResult:
    """Pipeline SINRs equal the brute-force expansion on random scenarios."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    bandwidth = 15e3
    for _ in range(cases):
        assoc, gains, power, noise = _random_scenario(rng)
        for u, members in enumerate(assoc.clusters):
            if not members:
                continue
            got = noma.decode_cluster(u, assoc, gains, power, noise, bandwidth)
            want = _oracle_cluster(u, assoc, gains.tolist(), power, noise, bandwidth)
            for k in members:
                w_geq, w_order, w_gamma, w_rate = want[k]
                worst = max(worst, _rel_err(got.equivalent_gains[k], w_geq))
                worst = max(worst, _rel_err(got.sinr[k], w_gamma))
                worst = max(worst, _rel_err(got.rates[k], w_rate))
                if got.order != w_order:
                    return CheckResult("sinr-brute-force", False, f"order mismatch {got.order} vs {w_order}")
    return CheckResult("sinr-brute-force", worst <= REL_TOL_SINR, f"max rel err {worst:.3e} over {cases} cases")


def check_interference_scaling() -> CheckResult:
    """Quadrupling every non-serving budget doubles the interference."""
    rng = np.random.default_rng(7)
    assoc, gains, power, noise = _random_scenario(rng)
    base = noma.inter_cluster_interference(0, assoc.serving_uav(0), gains, power)
    scaled_power = noma.PowerAllocation(
        totals=tuple(4.0 * t for t in power.totals), fractions=power.fractions
    )
    scaled = noma.inter_cluster_interference(0, assoc.serving_uav(0), gains, scaled_power)
    ok = _rel_err(scaled, 2.0 * base) <= 1e-12
    return CheckResult("interference-sqrt-scaling", ok, f"base {base:.3e} scaled {scaled:.3e}")


def check_rate_sums() -> CheckResult:
    """Slot sum equals the per-user sum; throughput is the dt-weighted total."""
    rng = np.random.default_rng(11)
    assoc, gains, power, noise = _random_scenario(rng)
    outcomes = [
        noma.decode_cluster(u, assoc, gains, power, noise, 15e3)
        for u in range(len(assoc.clusters))
        if assoc.clusters[u]
    ]
    total = noma.slot_sum_rate(outcomes)
    manual = sum(r for o in outcomes for r in o.rates.values())
    slot_rates = [total, 2.0 * total, 0.5 * total]
    thr = noma.episode_throughput(slot_rates, dt_seconds=2.0)
    ok = _rel_err(total, manual) <= 1e-12 and _rel_err(thr, sum(slot_rates) * 2.0) <= 1e-12
    return CheckResult("rate-sum-consistency", ok, f"slot sum {total:.1f} bits/s")


# -- clustering ------------------------------------------------------------


def _random_instance(rng: np.random.Generator, n_users: int, n_uavs: int):
    users = rng.uniform(0.0, 1000.0, size=(n_users, 2))
    uavs = rng.uniform(0.0, 1000.0, size=(n_uavs, 2))
    return users, uavs


def lloyd_sse_trace(users, uavs, config, seed) -> list[float]:
    """Weighted SSE after every assignment and update, re-run independently.

    Mirrors the Lloyd loop (same init rule) while recording the objective,
    so monotonicity can be audited without touching the implementation.
    """
    pool = np.vstack([users, uavs])
    rng = np.random.default_rng(seed)
    centroids = pool[rng.choice(len(pool), size=config.n_clusters, replace=False)].astype(float)
    trace = []

    def weighted_sse(members, cents):
        total = 0.0
        for u in range(config.n_clusters):
            mu = cents[u]
            for k in members[u]:
                total += config.user_weight * float(((users[k] - mu) ** 2).sum())
            total += config.uav_weight * float(((uavs[u] - mu) ** 2).sum())
        return total

    for _ in range(config.max_iterations):
        d2 = ((users[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        members = [list(np.flatnonzero(assign == u)) for u in range(config.n_clusters)]
        trace.append(weighted_sse(members, centroids))
        new_centroids = np.array(
            [
                (
                    config.user_weight * users[members[u]].sum(axis=0)
                    + config.uav_weight * uavs[u]
                )
                / (config.user_weight * len(members[u]) + config.uav_weight)
                for u in range(config.n_clusters)
            ]
        )
        trace.append(weighted_sse(members, new_centroids))
        if np.array_equal(new_centroids, centroids):
            break
        centroids = new_centroids
    return trace


def check_kmeans_monotone(instances: int = 100, seed: int = 5150) -> CheckResult:
    """Weighted SSE never increases across Lloyd assignment/update steps."""
    rng = np.random.default_rng(seed)
    cfg = ClusteringConfig(n_clusters=3, capacity=3)
    for i in range(instances):
        users, uavs = _random_instance(rng, int(rng.integers(3, 13)), 3)
        trace = lloyd_sse_trace(users, uavs, cfg, seed=i)
        for a, b in zip(trace, trace[1:]):
            if b > a + 1e-7 * max(1.0, abs(a)):
                return CheckResult("kmeans-sse-monotone", False, f"instance {i}: {a} -> {b}")
    return CheckResult("kmeans-sse-monotone", True, f"{instances} instances monotone")


def check_cluster_invariants(instances: int = 100, seed: int = 41) -> CheckResult:
    """Post-rebalance: capacity met and every user in exactly one cluster."""
    rng = np.random.default_rng(seed)
    for i in range(instances):
        n_users = int(rng.integers(3, 13))
        cfg = ClusteringConfig(n_clusters=3, capacity=max(1, (n_users + 2) // 3 + 1))
        users, uavs = _random_instance(rng, n_users, 3)
        cs = rebalance_capacity(weighted_kmeans(users, uavs, cfg, seed=i), cfg.capacity)
        sizes = cs.sizes()
        flat = sorted(k for m in cs.members for k in m)
        if any(s > cfg.capacity for s in sizes) or flat != list(range(n_users)):
            return CheckResult("cluster-invariants", False, f"instance {i}: sizes {sizes}")
    return CheckResult("cluster-invariants", True, f"{instances} instances feasible")


def exhaustive_optimum(users, uavs, capacity, user_w=1.0, uav_w=2.0) -> float:
    """Minimum weighted SSE over all capacity-feasible assignments."""
    n_users, n_uavs = len(users), len(uavs)
    best = math.inf
    for code in range(n_uavs**n_users):
        assign, c = [], code
        for _ in range(n_users):
            assign.append(c % n_uavs)
            c //= n_uavs
        counts = [assign.count(u) for u in range(n_uavs)]
        if any(cnt > capacity for cnt in counts):
            continue
        total = 0.0
        for u in range(n_uavs):
            pts = [users[k] for k in range(n_users) if assign[k] == u]
            wsum = user_w * len(pts) + uav_w
            mu = (user_w * np.sum(pts, axis=0) + uav_w * uavs[u]) / wsum if pts else uavs[u]
            for p in pts:
                total += user_w * float(((p - mu) ** 2).sum())
            total += uav_w * float(((uavs[u] - mu) ** 2).sum())
        best = min(best, total)
    return best


def check_kmeans_near_optimal(instances: int = 12, seed: int = 33) -> CheckResult:
    """Final SSE within 10% of the exhaustive optimum on small instances."""
    rng = np.random.default_rng(seed)
    cfg = ClusteringConfig(n_clusters=3, capacity=3)
    worst = 0.0
    for i in range(instances):
        n_users = int(rng.integers(6, 9))
        users, uavs = _random_instance(rng, n_users, 3)
        cs = rebalance_capacity(weighted_kmeans(users, uavs, cfg, seed=1000 + i), cfg.capacity)
        got = sse(cs)
        best = exhaustive_optimum(users, uavs, cfg.capacity)
        ratio = got / best if best > 0 else 1.0
        worst = max(worst, ratio)
        if ratio > 1.10:
            return CheckResult(
                "kmeans-near-optimal", False, f"instance {i}: SSE ratio {ratio:.3f}"
            )
    return CheckResult("kmeans-near-optimal", True, f"worst SSE ratio {worst:.3f}")


# -- learning machinery ----------------------------------------------------


def check_gradients(seed: int = 99) -> CheckResult:
    """Analytic gradients match central finite differences."""
    rng = np.random.default_rng(seed)
    net = QNetwork(n_inputs=6, n_actions=5, seed=3, hidden=9)
    batch = 7
    x = rng.normal(size=(batch, 6))
    # nudge inputs off exact ReLU kinks
    z1 = x @ net.w1 + net.b1
    x = x + 1e-3 * np.sign(rng.normal(size=x.shape)) * (np.abs(z1).min() < 1e-6)
    actions = rng.integers(0, 5, size=batch)
    targets = rng.normal(size=batch)

    from . import backend

    kern = backend.get_kernels("numpy")
    loss, *grads = kern.loss_and_grads(x, actions, targets, net.w1, net.b1, net.w2, net.b2)

    def loss_at(params):
        w1, b1, w2, b2 = params
        q = kern.qvalues(x, w1, b1, w2, b2)
        err = q[np.arange(batch), actions] - targets
        return float(np.mean(err * err))

    eps = 1e-6
    worst = 0.0
    params = [net.w1, net.b1, net.w2, net.b2]
    for pi, (p, g) in enumerate(zip(params, grads)):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + eps
            hi = loss_at(params)
            p[idx] = orig - eps
            lo = loss_at(params)
            p[idx] = orig
            fd = (hi - lo) / (2 * eps)
            denom = max(abs(fd), abs(g[idx]), 1e-8)
            worst = max(worst, abs(fd - g[idx]) / denom)
    return CheckResult("gradient-finite-difference", worst <= REL_TOL_GRAD, f"max rel err {worst:.2e}")


def check_mask_exclusion(draws: int = 100_000) -> CheckResult:
    """No masked action is ever selected across epsilon regimes."""
    space = ActionSpace()
    rng = np.random.default_rng(77)
    sizes = [0, 1, 2, 3]
    for trial in range(draws):
        size = sizes[trial % len(sizes)]
        mask = space.mask(size)
        q = rng.normal(size=space.n_actions)
        eps = (0.0, 0.3, 1.0)[trial % 3]
        a = select_action(q, mask, eps, rng)
        if not mask[a]:
            return CheckResult("mask-exclusion", False, f"masked action {a} chosen (size {size})")
    return CheckResult("mask-exclusion", True, f"{draws} draws, no masked pick")


def check_replay_uniformity(seed: int = 8) -> CheckResult:
    """Every stored index is sampled within 3 sigma of its expected rate."""
    capacity, batch, rounds = 256, 64, 4000
    mem = ReplayMemory(capacity, state_dim=2, n_actions=3)
    mask = np.array([True, True, False])
    for i in range(capacity):
        mem.push(
            Experience(
                state=np.zeros(2), action=0, reward=0.0,
                next_state=np.zeros(2), mask=mask, next_mask=mask,
            )
        )
    rng = np.random.default_rng(seed)
    counts = np.zeros(capacity)
    for _ in range(rounds):
        idx = mem.sample_indices(batch, rng)
        np.add.at(counts, idx, 1)
    p = 1.0 / capacity
    mean = rounds * batch * p
    sigma = math.sqrt(rounds * batch * p * (1 - p))
    dev = np.abs(counts - mean).max() / sigma
    return CheckResult("replay-uniformity", dev <= 3.0, f"max deviation {dev:.2f} sigma")


def check_td_target() -> CheckResult:
    """Target arithmetic is exact and respects the next-state mask."""
    net = QNetwork(n_inputs=3, n_actions=4, seed=5, hidden=6)
    state = np.array([0.2, -0.4, 0.9])
    q = neuralnet.forward(net, state)
    full = np.ones(4, dtype=bool)
    y0 = td_target(3.5, state, net, full, discount=0.0)
    y1 = td_target(2.0, state, net, full, discount=1.0)
    best = int(np.argmax(q))
    masked = full.copy()
    masked[best] = False
    y2 = td_target(2.0, state, net, masked, discount=1.0)
    want2 = 2.0 + float(np.max(q[masked]))
    ok = y0 == 3.5 and _rel_err(y1, 2.0 + float(q.max())) <= 1e-12 and _rel_err(y2, want2) <= 1e-12
    return CheckResult("td-target-arithmetic", ok, f"y0={y0} y1={y1:.4f} y2={y2:.4f}")


def check_action_bijection() -> CheckResult:
    """Every index decodes to one (movement, gear) and re-encodes to itself."""
    space = ActionSpace()
    seen = set()
    for idx in range(space.n_actions):
        movement, fractions = space.decode(idx)
        size = len(fractions)
        gear = space.gears[size].index(fractions)
        if space.encode(movement, size, gear) != idx:
            return CheckResult("action-bijection", False, f"index {idx} does not roundtrip")
        seen.add((movement, size, gear))
    ok = len(seen) == space.n_actions
    for bad in (-1, space.n_actions):
        try:
            space.decode(bad)
            return CheckResult("action-bijection", False, f"index {bad} accepted")
        except ValueError:
            pass
    return CheckResult("action-bijection", ok, f"{space.n_actions} actions roundtrip")


# -- world -----------------------------------------------------------------


def _route_time(grid, route) -> float:
    return sum(grid.cell_size / grid.speed_at(c) for c in route[1:])


def _all_simple_paths(grid, start, goal, limit=200000):
    paths = []
    stack = [(start, [start], {start})]
    while stack:
        cell, path, seen = stack.pop()
        if len(paths) > limit:
            raise RuntimeError("path explosion")
        if cell == goal:
            paths.append(path)
            continue
        x, y = cell
        for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if grid.is_road(nb) and nb not in seen:
                stack.append((nb, path + [nb], seen | {nb}))
    return paths


def check_dijkstra_optimal() -> CheckResult:
    """Route travel time equals the exhaustive minimum on small maps."""
    for seed in range(6):
        grid = world.build_map(6, 6, block_layout_seed=seed, cost_seed=seed + 50,
                               v_max=10.0, cell_size=10.0, block_size=2)
        roads = [tuple(c) for c in np.argwhere(~grid.blocked)]
        start, goal = roads[0], roads[-1]
        route = world.shortest_path(grid, start, goal)
        best = min(_route_time(grid, p) for p in _all_simple_paths(grid, start, goal))
        if _rel_err(_route_time(grid, route), best) > 1e-9:
            return CheckResult("dijkstra-optimal", False, f"seed {seed} suboptimal")
    return CheckResult("dijkstra-optimal", True, "6 maps match exhaustive search")


def check_advance_consistency() -> CheckResult:
    """Splitting dt into many substeps moves the final position < cell/100."""
    grid = world.build_map(20, 20, block_layout_seed=3, cost_seed=9, v_max=10.0,
                           cell_size=10.0, block_size=3)
    roads = [tuple(c) for c in np.argwhere(~grid.blocked)]
    user = world.make_user(0, grid, roads[-1])
    coarse = world.advance_user(user, grid, 10.0)
    fine = user
    for _ in range(1000):
        fine = world.advance_user(fine, grid, 0.01)
    cx, cy = coarse.position(grid)
    fx, fy = fine.position(grid)
    gap = math.hypot(cx - fx, cy - fy)
    return CheckResult("advance-consistency", gap < grid.cell_size / 100.0, f"gap {gap:.2e} m")


# -- registry ---------------------------------------------------------------


def all_checks(golden_path=None) -> list[CheckResult]:
    return [
        check_channel_goldens(golden_path),
        check_channel_anchors(),
        check_plos_properties(),
        check_pathloss_bounds(),
        check_gain_monotone(),
        check_sinr_oracle(),
        check_interference_scaling(),
        check_rate_sums(),
        check_kmeans_monotone(),
        check_cluster_invariants(),
        check_kmeans_near_optimal(),
        check_gradients(),
        check_mask_exclusion(),
        check_replay_uniformity(),
        check_td_target(),
        check_action_bijection(),
        check_dijkstra_optimal(),
        check_advance_consistency(),
    ]


def run_checks(golden_path=None, stream=None) -> bool:
    """Print one pass/fail line per property; True when everything passed."""
    import sys

    out = stream or sys.stdout
    results = all_checks(golden_path)
    ok = True
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"[{status}] {res.name}: {res.detail}", file=out)
        ok &= res.passed
    print(f"{sum(r.passed for r in results)}/{len(results)} properties passed", file=out)
    return ok
