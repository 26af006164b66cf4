"""NOMA downlink signal model: SIC decoding order, SINR, rates, OMA baseline.

Everything operates on a per-slot snapshot: a (U, K) linear gain matrix, an
association of users to UAVs, and a power allocation. Powers enter the SINR
expressions through their square roots; the amplitude-style form is kept
as-is throughout, and the tests mirror it term by term.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "Association",
    "PowerAllocation",
    "DecodedCluster",
    "total_power",
    "inter_cluster_interference",
    "equivalent_gain",
    "decoding_order",
    "sinr_decoded",
    "user_rate",
    "decode_cluster",
    "slot_sum_rate",
    "episode_throughput",
    "oma_sinr",
    "oma_rate",
]


@dataclass(frozen=True)
class Association:
    """Which UAV serves which users; one cluster per UAV.

    ``clusters[u]`` lists the member user ids in ascending order. Every user
    must appear in exactly one cluster.
    """

    clusters: tuple[tuple[int, ...], ...]
    n_users: int

    def __post_init__(self):
        seen: set[int] = set()
        for members in self.clusters:
            for k in members:
                if k in seen:
                    raise ValueError(f"user {k} appears in more than one cluster")
                seen.add(k)
        if seen != set(range(self.n_users)):
            raise ValueError("every user must be served by exactly one UAV")

    @property
    def n_uavs(self) -> int:
        return len(self.clusters)

    def serving_uav(self, k: int) -> int:
        for u, members in enumerate(self.clusters):
            if k in members:
                return u
        raise KeyError(k)

    def indicator(self) -> np.ndarray:
        """Boolean serving matrix v[u, k]."""
        v = np.zeros((self.n_uavs, self.n_users), dtype=bool)
        for u, members in enumerate(self.clusters):
            v[u, list(members)] = True
        return v


@dataclass(frozen=True)
class PowerAllocation:
    """Per-UAV power budget and the fraction each cluster member receives.

    ``fractions[u]`` aligns with ``Association.clusters[u]`` and sums to 1
    for non-empty clusters, so the budget is spent exactly.
    """

    totals: tuple[float, ...]
    fractions: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if len(self.totals) != len(self.fractions):
            raise ValueError("totals and fractions must cover the same UAVs")
        for u, fracs in enumerate(self.fractions):
            if fracs and not math.isclose(sum(fracs), 1.0, rel_tol=0, abs_tol=1e-9):
                raise ValueError(f"cluster {u} fractions must sum to 1, got {sum(fracs)}")
            if any(f < 0 for f in fracs):
                raise ValueError("power fractions must be non-negative")

    def user_power(self, u: int, position_in_cluster: int) -> float:
        return self.totals[u] * self.fractions[u][position_in_cluster]


def total_power(power: PowerAllocation, u: int) -> float:
    """Total transmitted power of UAV ``u`` (zero for an empty cluster)."""
    return power.totals[u] * sum(power.fractions[u])


def inter_cluster_interference(
    k: int, u: int, gains: np.ndarray, power: PowerAllocation
) -> float:
    """Cumulative interference at user ``k`` from every UAV other than ``u``."""
    n_uavs = gains.shape[0]
    return sum(
        gains[s, k] * math.sqrt(total_power(power, s)) for s in range(n_uavs) if s != u
    )


def equivalent_gain(
    k: int, u: int, gains: np.ndarray, power: PowerAllocation, noise: float
) -> float:
    """Serving gain normalized by inter-cluster interference plus noise.

    This is the quantity whose ordering fixes the SIC decoding order.
    """
    return gains[u, k] / (inter_cluster_interference(k, u, gains, power) + noise)


def decoding_order(members: Sequence[int], g_equiv: dict[int, float]) -> tuple[int, ...]:
    """Cluster members sorted by ascending equivalent gain, ids break ties.

    Position 0 is the weakest user: its signal is decoded (and cancelled)
    first at every stronger receiver.
    """
    if not members:
        raise ValueError("cluster must not be empty")
    return tuple(sorted(members, key=lambda k: (g_equiv[k], k)))


def sinr_decoded(
    position: int,
    order: Sequence[int],
    u: int,
    gains: np.ndarray,
    power: PowerAllocation,
    member_fraction: dict[int, float],
    noise: float,
) -> float:
    """SINR of the user decoded at ``position`` (0-based) in ``order``.

    Residual intra-cluster interference comes from later-decoded users;
    inter-cluster interference from all non-serving UAVs.
    """
    k = order[position]
    p_k = power.totals[u] * member_fraction[k]
    signal = gains[u, k] * math.sqrt(p_k)
    intra = sum(
        gains[u, order[i]] * math.sqrt(power.totals[u] * member_fraction[order[i]])
        for i in range(position + 1, len(order))
    )
    inter = inter_cluster_interference(k, u, gains, power)
    return signal / (intra + inter + noise)


def user_rate(sinr: float, bandwidth_hz: float) -> float:
    """Shannon rate in bits/s."""
    return bandwidth_hz * math.log2(1.0 + sinr)


@dataclass(frozen=True)
class DecodedCluster:
    """Per-cluster SIC outcome for one slot."""

    uav: int
    order: tuple[int, ...]
    equivalent_gains: dict[int, float] = field(repr=False)
    sinr: dict[int, float] = field(repr=False)
    rates: dict[int, float] = field(repr=False)

    @property
    def sum_rate(self) -> float:
        return sum(self.rates.values())


def decode_cluster(
    u: int,
    association: Association,
    gains: np.ndarray,
    power: PowerAllocation,
    noise: float,
    bandwidth_hz: float,
) -> DecodedCluster:
    """Run the full SIC pipeline for UAV ``u``'s cluster."""
    members = association.clusters[u]
    g_eq = {k: equivalent_gain(k, u, gains, power, noise) for k in members}
    order = decoding_order(members, g_eq)
    fractions = {k: power.fractions[u][i] for i, k in enumerate(members)}
    sinr = {
        order[pos]: sinr_decoded(pos, order, u, gains, power, fractions, noise)
        for pos in range(len(order))
    }
    rates = {k: user_rate(s, bandwidth_hz) for k, s in sinr.items()}
    return DecodedCluster(uav=u, order=order, equivalent_gains=g_eq, sinr=sinr, rates=rates)


def slot_sum_rate(clusters: Sequence[DecodedCluster]) -> float:
    """System sum rate for one slot, bits/s."""
    return sum(c.sum_rate for c in clusters)


def episode_throughput(per_slot_rates: Sequence[float], dt_seconds: float = 1.0) -> float:
    """Total delivered bits over an episode: sum of slot rates times dt."""
    return sum(per_slot_rates) * dt_seconds


def oma_sinr(
    k: int,
    u: int,
    association: Association,
    gains: np.ndarray,
    power: PowerAllocation,
    noise: float,
) -> float:
    """Sub-band SINR of user ``k`` under the orthogonal baseline."""
    n = len(association.clusters[u])
    p_user = power.totals[u] / n
    inter = inter_cluster_interference(k, u, gains, power)
    return gains[u, k] * math.sqrt(p_user) / (inter / n + noise / n)


def oma_rate(
    u: int,
    association: Association,
    gains: np.ndarray,
    power: PowerAllocation,
    noise: float,
    bandwidth_hz: float,
) -> dict[int, float]:
    """Orthogonal (FDMA) baseline rates for UAV ``u``'s cluster.

    Each of the n members gets bandwidth B/n and power P_u/n; there is no
    intra-cluster interference, and only a 1/n share of both the
    inter-cluster interference and the noise falls in each sub-band.
    """
    members = association.clusters[u]
    n = len(members)
    if n < 1:
        raise ValueError("cluster must not be empty")
    sub_band = bandwidth_hz / n
    return {
        k: sub_band * math.log2(1.0 + oma_sinr(k, u, association, gains, power, noise))
        for k in members
    }
