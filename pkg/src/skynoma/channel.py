"""Air-to-ground propagation: LoS probability, path loss, fading, channel gain.

All functions are pure; the only randomness (small-scale fading) is drawn by
the caller and passed in. Frequencies enter the path-loss intercepts in GHz,
so :class:`ChannelConfig` stores Hz and converts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "ChannelConfig",
    "LosParams",
    "distance_3d",
    "los_params",
    "p_los",
    "path_loss",
    "channel_gain",
    "noise_power_watts",
]


def noise_power_watts(density_dbm_hz: float, bandwidth_hz: float) -> float:
    """Linear noise power over ``bandwidth_hz`` from a dBm/Hz density."""
    return 10.0 ** (density_dbm_hz / 10.0) * 1e-3 * bandwidth_hz


@dataclass(frozen=True)
class ChannelConfig:
    """Static link-budget parameters shared by every UAV-user link."""

    fc_hz: float = 2.0e9
    bandwidth_hz: float = 15e3
    noise_dbm_hz: float = -100.0
    fading_mode: str = "unit"  # "unit" or "rayleigh"

    def __post_init__(self):
        if self.fc_hz <= 0:
            raise ValueError("carrier frequency must be positive")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")
        if self.fading_mode not in ("unit", "rayleigh"):
            raise ValueError(f"unknown fading mode {self.fading_mode!r}")

    @property
    def fc_ghz(self) -> float:
        return self.fc_hz / 1e9

    @property
    def noise_watts(self) -> float:
        """Noise power over the full channel bandwidth, in watts."""
        return noise_power_watts(self.noise_dbm_hz, self.bandwidth_hz)


@dataclass(frozen=True)
class LosParams:
    """Height-dependent coefficients of the LoS-probability curve."""

    d0: float
    p1: float


def los_params(h_uav: float) -> LosParams:
    """LoS curve coefficients for a UAV at height ``h_uav`` meters.

    d0 has an 18 m floor; p1 follows the same log-height form.
    """
    if h_uav <= 0:
        raise ValueError("UAV height must be positive")
    log_h = math.log10(h_uav)
    d0 = max(18.0, -432.94 + 294.05 * log_h)
    p1 = -0.95 + 233.98 * log_h
    return LosParams(d0=d0, p1=p1)


def distance_3d(user_xy: tuple[float, float], uav_xyz: tuple[float, float, float]) -> float:
    """Euclidean distance between a ground user and a UAV."""
    ux, uy = user_xy
    x, y, h = uav_xyz
    if h <= 0:
        raise ValueError("UAV height must be positive")
    return math.sqrt((ux - x) ** 2 + (uy - y) ** 2 + h * h)


def p_los(d3d: float, h_uav: float) -> float:
    """Probability of a line-of-sight link.

    Unity when the horizontal separation is within d0, otherwise the
    d0/r + exp(-(r - d0)/p1) tail, clamped to [0, 1].
    """
    if h_uav <= 0:
        raise ValueError("UAV height must be positive")
    if d3d < h_uav:
        raise ValueError("3D distance cannot be smaller than UAV height")
    params = los_params(h_uav)
    r = math.sqrt(d3d * d3d - h_uav * h_uav)
    if r <= params.d0:
        return 1.0
    prob = params.d0 / r + math.exp(-(r - params.d0) / params.p1)
    return min(1.0, max(0.0, prob))


def path_loss(d3d: float, h_uav: float, fc_ghz: float) -> tuple[float, float, float]:
    """(L_LoS, L_NLoS, expected L) in dB for one link.

    The NLoS line is floored at the LoS loss; the expected loss mixes the
    two by the LoS probability.
    """
    if d3d < 1.0:
        raise ValueError("3D distance below 1 m is outside the model domain")
    if h_uav <= 1.0:
        raise ValueError("UAV height below 1 m is outside the model domain")
    if fc_ghz <= 0:
        raise ValueError("carrier frequency must be positive")
    log_d = math.log10(d3d)
    log_h = math.log10(h_uav)
    log_f = math.log10(fc_ghz)
    l_los = 30.9 + log_d * (22.5 - 0.5 * log_h) + 20.0 * log_f
    l_nlos = max(l_los, 32.4 + (43.2 - 7.6 * log_h) * log_d + 20.0 * log_f)
    prob = p_los(d3d, h_uav)
    l_exp = (1.0 - prob) * l_nlos + prob * l_los
    return l_los, l_nlos, l_exp


def channel_gain(l_expected_db: float, fading: float = 1.0) -> float:
    """Linear power gain from an expected path loss and a fading draw."""
    if fading < 0:
        raise ValueError("fading coefficient must be non-negative")
    return fading / 10.0 ** (0.1 * l_expected_db)
