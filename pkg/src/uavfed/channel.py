"""Air-to-ground and inter-UAV channel gains and Shannon link rates.

The device-to-UAV link mixes line-of-sight and non-line-of-sight free-space
path loss, weighted by an elevation-angle sigmoid LoS probability (degree
domain). The UAV-to-UAV link is plain inverse-square free-space loss with a
constant gain. Gains are large-scale only; no small-scale fading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import ScenarioConfig

SPEED_OF_LIGHT = 3.0e8  # m/s, as used in the free-space term


@dataclass(frozen=True)
class LinkGain:
    gain_db: float
    gain_linear: float


def dbm_to_watt(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def noise_psd_w_hz(cfg: ScenarioConfig) -> float:
    """One-sided noise power spectral density in W/Hz."""
    return dbm_to_watt(cfg.noise_psd_dbm_hz)


def los_probability(elevation_deg: float, cfg: ScenarioConfig) -> float:
    """Sigmoid LoS probability as a function of the elevation angle in degrees."""
    a, b = cfg.d2u_a, cfg.d2u_b
    return 1.0 / (1.0 + a * math.exp(-b * (elevation_deg - a)))


def d2u_gain(d_m: float, cfg: ScenarioConfig) -> LinkGain:
    """Mean device-to-UAV channel gain at 3-D distance ``d_m``.

    The elevation angle is asin(altitude / distance), so the distance must be
    at least the hover altitude.
    """
    altitude = cfg.uav_altitude_m
    ratio = altitude / d_m
    if ratio > 1.0 + 1e-12:
        raise ValueError(f"d2u distance {d_m} m is below the UAV altitude {altitude} m")
    elevation_deg = math.degrees(math.asin(min(ratio, 1.0)))
    p_los = los_probability(elevation_deg, cfg)
    fs_db = 20.0 * math.log10(4.0 * math.pi * cfg.carrier_freq_hz * d_m / SPEED_OF_LIGHT)
    pl_los = fs_db + cfg.eta_los_db
    pl_nlos = fs_db + cfg.eta_nlos_db
    gain_db = -(p_los * pl_los + (1.0 - p_los) * pl_nlos)
    return LinkGain(gain_db=gain_db, gain_linear=db_to_linear(gain_db))


def u2u_gain(d_m: float, cfg: ScenarioConfig) -> LinkGain:
    """Inter-UAV free-space gain: constant gain times inverse-square distance."""
    if d_m <= 0:
        raise ValueError("u2u distance must be strictly positive")
    gain_linear = db_to_linear(cfg.u2u_gain_db) * d_m**-2
    return LinkGain(gain_db=10.0 * math.log10(gain_linear), gain_linear=gain_linear)


def link_rate(tx_power_w: float, gain: LinkGain, bandwidth_hz: float, cfg: ScenarioConfig) -> float:
    """Shannon rate in bit/s over an allocated bandwidth share.

    Noise power is the configured PSD integrated over the allocated share.
    """
    if tx_power_w <= 0 or bandwidth_hz <= 0:
        raise ValueError("transmit power and bandwidth must be strictly positive")
    noise_w = noise_psd_w_hz(cfg) * bandwidth_hz
    snr = tx_power_w * gain.gain_linear / noise_w
    return bandwidth_hz * math.log2(1.0 + snr)
