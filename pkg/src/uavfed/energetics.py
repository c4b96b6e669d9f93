"""Per-round time and energy accounting for every UAV-side cost component.

One communication round charges: local training time on devices, model
uploads over equal bandwidth shares, per-UAV aggregation compute, relay of
aggregated models to the designated UAV over equal shares, full-bandwidth
broadcast of the updated model, and hovering power over the critical path
(the sum of the five phase maxima). FedPer-style policies move only the
shared backbone; FedAvg-style policies move the full model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .channel import d2u_gain, dbm_to_watt, link_rate, u2u_gain
from .config import ScenarioConfig
from .geometry import Topology

if TYPE_CHECKING:
    from .scheduling import RoundSchedule


@dataclass
class RoundLedger:
    """Time/energy breakdown of one round plus the running energy total."""

    # phase maxima entering the hover critical path (seconds)
    t_local: float
    t_upload: float
    t_agg: float
    t_u2u: float
    t_broadcast: float
    t_hover: float
    # energies (joules); per-UAV arrays where the cost is per UAV
    e_hover_per_uav: float
    e_hover: float  # fleet total: U * hover_power * t_hover
    e_agg: np.ndarray
    e_u2u: np.ndarray
    e_broadcast: np.ndarray
    e_round: float
    cumulative_energy: float
    budget_exceeded: bool
    # per-entity detail for audit
    local_times: np.ndarray
    upload_times: dict
    agg_times: np.ndarray
    u2u_times: np.ndarray
    broadcast_times: np.ndarray


def model_bits(policy, cfg: ScenarioConfig) -> int:
    """Bits moved per model: full model for FedAvg-style, backbone otherwise."""
    from .scheduling import FEDAVG_FAMILY

    return cfg.total_model_bits if policy in FEDAVG_FAMILY else cfg.base_model_bits


def local_training_time(dataset_size: int, cfg: ScenarioConfig) -> float:
    """Seconds of local training: epochs * samples / throughput."""
    if dataset_size < 0:
        raise ValueError("dataset size must be non-negative")
    return cfg.local_epochs * dataset_size / cfg.device_throughput_sps


def aggregation_counts(schedule: "RoundSchedule") -> np.ndarray:
    """Models aggregated per UAV: own uploads plus, at the leader, relayed models."""
    uploads = schedule.rho_dev.sum(axis=0).astype(float)
    relayed = schedule.mu * schedule.rho_uav.sum(axis=0)
    return uploads + relayed


def aggregation_energy(schedule: "RoundSchedule", cfg: ScenarioConfig) -> np.ndarray:
    """Joules per UAV for aggregation compute: coeff * cycles * f^2 * count."""
    per_model = cfg.energy_coeff * cfg.uav_agg_cycles * cfg.uav_cpu_freq_hz**2
    return per_model * aggregation_counts(schedule)


def aggregation_time(schedule: "RoundSchedule", cfg: ScenarioConfig) -> np.ndarray:
    """Seconds per UAV for aggregation compute: cycles * count / frequency."""
    return cfg.uav_agg_cycles * aggregation_counts(schedule) / cfg.uav_cpu_freq_hz


def upload_times(schedule: "RoundSchedule", topology: Topology, cfg: ScenarioConfig) -> dict:
    """Seconds per scheduled device to upload its model on an equal bandwidth share."""
    if schedule.num_selected == 0:
        return {}
    bits = model_bits(schedule.policy, cfg)
    share = cfg.bandwidth_hz / schedule.num_selected
    power = dbm_to_watt(cfg.device_tx_power_dbm)
    out = {}
    for k in schedule.selected:
        u = int(topology.device_uav[k])
        gain = d2u_gain(float(topology.d2u_m[k, u]), cfg)
        out[int(k)] = bits / link_rate(power, gain, share, cfg)
    return out


def u2u_times(schedule: "RoundSchedule", topology: Topology, cfg: ScenarioConfig) -> np.ndarray:
    """Seconds per UAV to relay its aggregate to the leader (zero if nothing to send)."""
    U = schedule.num_uavs
    times = np.zeros(U)
    leader = schedule.designated_uav
    if leader is None:
        return times
    senders = [u for u in schedule.uavs_with_selected() if u != leader]
    if not senders:
        return times
    bits = model_bits(schedule.policy, cfg)
    share = cfg.bandwidth_hz / len(senders)
    for u in senders:
        gain = u2u_gain(float(topology.u2u_m[u, leader]), cfg)
        times[u] = bits / link_rate(cfg.uav_tx_power_w, gain, share, cfg)
    return times


def broadcast_times(schedule: "RoundSchedule", topology: Topology, cfg: ScenarioConfig) -> np.ndarray:
    """Seconds per UAV to synchronize the updated model, full bandwidth.

    With a designated leader the leader broadcasts to every device and
    re-distributes to each UAV that relayed to it. Without one (per-UAV
    aggregation), every UAV with devices broadcasts to its own devices.
    """
    U = schedule.num_uavs
    times = np.zeros(U)
    bits = model_bits(schedule.policy, cfg)
    B = cfg.bandwidth_hz
    leader = schedule.designated_uav
    if leader is not None:
        device_terms = [
            bits / link_rate(cfg.uav_tx_power_w, d2u_gain(float(topology.d2u_m[k, leader]), cfg), B, cfg)
            for k in range(topology.num_devices)
        ]
        relay_terms = [
            bits / link_rate(cfg.uav_tx_power_w, u2u_gain(float(topology.u2u_m[u, leader]), cfg), B, cfg)
            for u in range(U)
            if schedule.rho_uav[u, leader]
        ]
        times[leader] = max(device_terms, default=0.0) + (max(relay_terms) if relay_terms else 0.0)
        return times
    if schedule.num_selected == 0:
        return times
    for u in schedule.uavs_with_selected():
        terms = [
            bits / link_rate(cfg.uav_tx_power_w, d2u_gain(float(topology.d2u_m[k, u]), cfg), B, cfg)
            for k in topology.devices_of(u)
        ]
        times[u] = max(terms)
    return times


def u2u_gain_matrix(topology: Topology, cfg: ScenarioConfig) -> np.ndarray:
    """Linear inter-UAV gains, [U, U]; the diagonal is zero (no self link)."""
    U = topology.num_uavs
    gains = np.zeros((U, U))
    for u in range(U):
        for v in range(U):
            if u != v:
                gains[u, v] = u2u_gain(float(topology.u2u_m[u, v]), cfg).gain_linear
    return gains


def round_ledger(
    schedule: "RoundSchedule",
    topology: Topology,
    cfg: ScenarioConfig,
    dataset_sizes: np.ndarray,
    prev_cumulative: float,
) -> RoundLedger:
    """Assemble every time/energy component of one round and advance the total."""
    local = np.array([local_training_time(int(n), cfg) for n in dataset_sizes], dtype=float)
    uploads = upload_times(schedule, topology, cfg)
    agg_t = aggregation_time(schedule, cfg)
    agg_e = aggregation_energy(schedule, cfg)
    u2u_t = u2u_times(schedule, topology, cfg)
    bcast_t = broadcast_times(schedule, topology, cfg)

    t_local = float(local.max(initial=0.0))
    t_upload = max(uploads.values(), default=0.0)
    t_agg = float(agg_t.max(initial=0.0))
    t_u2u = float(u2u_t.max(initial=0.0))
    t_broadcast = float(bcast_t.max(initial=0.0))
    t_hover = t_local + t_upload + t_agg + t_u2u + t_broadcast

    e_hover_per_uav = cfg.hover_power_w * t_hover
    e_u2u = cfg.uav_tx_power_w * u2u_t
    e_broadcast = cfg.uav_tx_power_w * bcast_t
    e_hover = schedule.num_uavs * e_hover_per_uav
    e_round = e_hover + float(agg_e.sum() + e_u2u.sum() + e_broadcast.sum())
    cumulative = prev_cumulative + e_round

    return RoundLedger(
        t_local=t_local,
        t_upload=t_upload,
        t_agg=t_agg,
        t_u2u=t_u2u,
        t_broadcast=t_broadcast,
        t_hover=t_hover,
        e_hover_per_uav=e_hover_per_uav,
        e_hover=e_hover,
        e_agg=agg_e,
        e_u2u=e_u2u,
        e_broadcast=e_broadcast,
        e_round=e_round,
        cumulative_energy=cumulative,
        budget_exceeded=cumulative > cfg.energy_budget_j,
        local_times=local,
        upload_times=uploads,
        agg_times=agg_t,
        u2u_times=u2u_t,
        broadcast_times=bcast_t,
    )
