"""Periodic weighted K-means UAV-user association with capacity limits.

Each cluster permanently contains its own UAV's 2D position as an anchor
point with a higher weight; users are the movable points. Centroids are
weighted vector means, so the sum of weighted squared errors never
increases across Lloyd iterations.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .noma import Association

__all__ = ["ClusteringConfig", "ClusterSet", "weighted_kmeans", "rebalance_capacity", "refine_partition", "cluster_pipeline", "sse"]


@dataclass(frozen=True)
class ClusteringConfig:
    n_clusters: int
    capacity: int
    max_iterations: int = 50
    user_weight: float = 1.0
    uav_weight: float = 2.0

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ValueError("need at least one cluster")
        if self.user_weight <= 0 or self.uav_weight <= 0:
            raise ValueError("weights must be positive")


@dataclass(frozen=True)
class ClusterSet:
    """A complete assignment of users to UAV-anchored clusters."""

    members: tuple[tuple[int, ...], ...]
    user_xy: np.ndarray
    uav_xy: np.ndarray
    user_weight: float
    uav_weight: float
    centroids: np.ndarray

    @property
    def n_clusters(self) -> int:
        return len(self.members)

    def to_association(self) -> Association:
        return Association(
            clusters=tuple(tuple(sorted(m)) for m in self.members),
            n_users=len(self.user_xy),
        )

    def sizes(self) -> tuple[int, ...]:
        return tuple(len(m) for m in self.members)


def _centroid(
    member_ids, user_xy: np.ndarray, uav_point: np.ndarray, user_w: float, uav_w: float
) -> np.ndarray:
    """Weighted vector mean of a cluster's users plus its UAV anchor."""
    total_w = user_w * len(member_ids) + uav_w
    acc = uav_w * uav_point
    if member_ids:
        acc = acc + user_w * user_xy[list(member_ids)].sum(axis=0)
    return acc / total_w


def _recomputed(cs: ClusterSet) -> ClusterSet:
    centroids = np.array(
        [
            _centroid(cs.members[u], cs.user_xy, cs.uav_xy[u], cs.user_weight, cs.uav_weight)
            for u in range(cs.n_clusters)
        ]
    )
    return replace(cs, centroids=centroids)


def _lloyd(
    user_xy: np.ndarray, uav_xy: np.ndarray, config: ClusteringConfig, centroids: np.ndarray
) -> ClusterSet:
    members: tuple[tuple[int, ...], ...] = tuple(() for _ in range(config.n_clusters))
    for _ in range(config.max_iterations):
        d2 = ((user_xy[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)  # ties resolve to the lowest cluster index
        members = tuple(
            tuple(int(k) for k in np.flatnonzero(assign == u))
            for u in range(config.n_clusters)
        )
        new_centroids = np.array(
            [
                _centroid(members[u], user_xy, uav_xy[u], config.user_weight, config.uav_weight)
                for u in range(config.n_clusters)
            ]
        )
        if np.array_equal(new_centroids, centroids):
            break
        centroids = new_centroids
    return ClusterSet(
        members=members,
        user_xy=user_xy,
        uav_xy=uav_xy,
        user_weight=config.user_weight,
        uav_weight=config.uav_weight,
        centroids=centroids,
    )


def weighted_kmeans(
    user_xy: np.ndarray,
    uav_xy: np.ndarray,
    config: ClusteringConfig,
    seed: int,
    n_init: int = 8,
) -> ClusterSet:
    """Lloyd iterations over users with one pinned UAV anchor per cluster.

    Runs ``n_init`` seeded restarts and keeps the lowest weighted SSE. The
    first restart starts centroids at the UAV anchors themselves; the rest
    draw initial centroids without replacement from the combined point set
    (users plus UAV positions). Each restart stops at a centroid fixed
    point or after the configured round limit.
    """
    user_xy = np.asarray(user_xy, dtype=float)
    uav_xy = np.asarray(uav_xy, dtype=float)
    n_users = len(user_xy)
    n_clusters = config.n_clusters
    if n_users == 0:
        raise ValueError("no users to cluster")
    if n_users < n_clusters:
        raise ValueError(f"cannot form {n_clusters} clusters from {n_users} users")
    if len(uav_xy) != n_clusters:
        raise ValueError("one UAV position required per cluster")
    if n_init < 1:
        raise ValueError("need at least one initialization")

    pool = np.vstack([user_xy, uav_xy])
    rng = np.random.default_rng(seed)
    starts = [uav_xy.copy()]
    starts += [
        pool[rng.choice(len(pool), size=n_clusters, replace=False)].astype(float)
        for _ in range(n_init - 1)
    ]
    best: ClusterSet | None = None
    best_sse = np.inf
    for centroids in starts:
        cs = _lloyd(user_xy, uav_xy, config, centroids)
        score = sse(cs)
        if score < best_sse:
            best, best_sse = cs, score
    return best


def _move(cs: ClusterSet, user: int, source: int, target: int) -> ClusterSet:
    members = list(cs.members)
    members[source] = tuple(k for k in members[source] if k != user)
    members[target] = members[target] + (user,)
    return _recomputed(replace(cs, members=tuple(members)))


def rebalance_capacity(cluster_set: ClusterSet, capacity: int) -> ClusterSet:
    """Shed members from over-full clusters until every size is within cap.

    The member farthest from its centroid moves to the nearest cluster with
    spare capacity; clusters left with no users are re-seeded from
    over-capacity ones first. At most one move per user is needed.
    """
    cs = cluster_set
    n_users = len(cs.user_xy)
    if cs.n_clusters * capacity < n_users:
        raise ValueError(
            f"capacity infeasible: {cs.n_clusters} clusters x {capacity} < {n_users} users"
        )

    def over_capacity() -> list[int]:
        return [u for u in range(cs.n_clusters) if len(cs.members[u]) > capacity]

    # Re-seed user-less clusters while others are over-full: the candidate
    # closest to the empty cluster's centroid moves in.
    while True:
        empties = [u for u in range(cs.n_clusters) if not cs.members[u]]
        crowded = over_capacity()
        if not empties or not crowded:
            break
        target = empties[0]
        best_user, best_src, best_d = -1, -1, np.inf
        for u in crowded:
            pts = cs.user_xy[list(cs.members[u])]
            d = np.linalg.norm(pts - cs.centroids[target], axis=1)
            i = int(np.argmin(d))
            if d[i] < best_d:
                best_user, best_src, best_d = cs.members[u][i], u, float(d[i])
        cs = _move(cs, best_user, best_src, target)

    guard = n_users + 1
    while (crowded := over_capacity()) and guard > 0:
        guard -= 1
        u = crowded[0]
        pts = cs.user_xy[list(cs.members[u])]
        d = np.linalg.norm(pts - cs.centroids[u], axis=1)
        user = cs.members[u][int(np.argmax(d))]
        open_clusters = [i for i in range(cs.n_clusters) if i != u and len(cs.members[i]) < capacity]
        dist_to = [float(np.linalg.norm(cs.user_xy[user] - cs.centroids[i])) for i in open_clusters]
        target = open_clusters[int(np.argmin(dist_to))]
        cs = _move(cs, user, u, target)
    if over_capacity():
        raise RuntimeError("rebalancing failed to terminate")
    return cs


def sse(cluster_set: ClusterSet) -> float:
    """Weighted squared distance of every point to its cluster centroid."""
    total = 0.0
    for u in range(cluster_set.n_clusters):
        mu = cluster_set.centroids[u]
        for k in cluster_set.members[u]:
            total += cluster_set.user_weight * float(((cluster_set.user_xy[k] - mu) ** 2).sum())
        total += cluster_set.uav_weight * float(((cluster_set.uav_xy[u] - mu) ** 2).sum())
    return total


def cluster_pipeline(
    user_xy: np.ndarray,
    uav_xy: np.ndarray,
    config: ClusteringConfig,
    seed: int,
    n_init: int = 8,
    refine_top: int = 3,
) -> ClusterSet:
    """Full association pipeline: Lloyd restarts, capacity repair, refinement.

    The ``refine_top`` best distinct Lloyd outcomes are each repaired and
    locally refined; the lowest weighted SSE wins. This is what the
    environment runs at every re-clustering instant.
    """
    user_xy = np.asarray(user_xy, dtype=float)
    uav_xy = np.asarray(uav_xy, dtype=float)
    pool = np.vstack([user_xy, uav_xy])
    rng = np.random.default_rng(seed)
    starts = [uav_xy.copy()] + [
        pool[rng.choice(len(pool), size=config.n_clusters, replace=False)].astype(float)
        for _ in range(max(0, n_init - 1))
    ]
    candidates: dict[tuple, ClusterSet] = {}
    for centroids in starts:
        cs = _lloyd(user_xy, uav_xy, config, centroids)
        candidates.setdefault(cs.members, cs)
    ranked = sorted(candidates.values(), key=sse)[:max(1, refine_top)]
    best: ClusterSet | None = None
    best_sse = np.inf
    for cs in ranked:
        refined = refine_partition(rebalance_capacity(cs, config.capacity), config.capacity)
        score = sse(refined)
        if score < best_sse:
            best, best_sse = refined, score
    return best


def _swap(cs: ClusterSet, user_a: int, cluster_a: int, user_b: int, cluster_b: int) -> ClusterSet:
    members = list(cs.members)
    members[cluster_a] = tuple(k for k in members[cluster_a] if k != user_a) + (user_b,)
    members[cluster_b] = tuple(k for k in members[cluster_b] if k != user_b) + (user_a,)
    return _recomputed(replace(cs, members=tuple(members)))


def refine_partition(cluster_set: ClusterSet, capacity: int, max_rounds: int = 50) -> ClusterSet:
    """Greedy local descent on the weighted SSE under the capacity limit.

    Anchored Lloyd converges to Voronoi-style assignments that the capacity
    repair can leave well above the best feasible partition, so this pass
    applies the best single-user move, pairwise swap, eviction chain, or
    three-way rotation until none improves. Capacity and the
    one-cluster-per-user invariant are preserved.
    """
    user_xy = cluster_set.user_xy
    uav_xy = cluster_set.uav_xy
    uw, vw = cluster_set.user_weight, cluster_set.uav_weight
    n_clusters = cluster_set.n_clusters
    members = [list(m) for m in cluster_set.members]

    def cost(u: int, mem: list[int]) -> float:
        mu = _centroid(mem, user_xy, uav_xy[u], uw, vw)
        total = vw * float(((uav_xy[u] - mu) ** 2).sum())
        for k in mem:
            total += uw * float(((user_xy[k] - mu) ** 2).sum())
        return total

    def delta(changes: dict[int, list[int]]) -> float:
        return sum(cost(u, mem) - costs[u] for u, mem in changes.items())

    costs = [cost(u, members[u]) for u in range(n_clusters)]
    for _ in range(max_rounds):
        tol = -1e-9 * max(1.0, sum(costs))
        best_changes: dict[int, list[int]] | None = None
        best_delta = tol
        for a in range(n_clusters):
            for k in members[a]:
                rest_a = [x for x in members[a] if x != k]
                for b in range(n_clusters):
                    if b == a:
                        continue
                    if len(members[b]) < capacity:
                        changes = {a: rest_a, b: members[b] + [k]}
                        d = delta(changes)
                        if d < best_delta:
                            best_changes, best_delta = changes, d
                    for j in members[b]:
                        rest_b = [x for x in members[b] if x != j]
                        changes = {a: rest_a + [j], b: rest_b + [k]}
                        d = delta(changes)
                        if d < best_delta:
                            best_changes, best_delta = changes, d
                        for c in range(n_clusters):
                            if c in (a, b):
                                continue
                            # eviction chain: k joins b while j vacates to c
                            if len(members[c]) < capacity:
                                changes = {a: rest_a, b: rest_b + [k], c: members[c] + [j]}
                                d = delta(changes)
                                if d < best_delta:
                                    best_changes, best_delta = changes, d
                            # rotation for full clusters: k->b, j->c, m->a
                            for m in members[c]:
                                rest_c = [x for x in members[c] if x != m]
                                changes = {a: rest_a + [m], b: rest_b + [k], c: rest_c + [j]}
                                d = delta(changes)
                                if d < best_delta:
                                    best_changes, best_delta = changes, d
        if best_changes is None:
            break
        for u, mem in best_changes.items():
            members[u] = mem
            costs[u] = cost(u, mem)

    final = tuple(tuple(sorted(m)) for m in members)
    return _recomputed(replace(cluster_set, members=final))
