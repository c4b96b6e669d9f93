"""Per-round device scheduling and designated-UAV selection policies.

The main policy ranks devices by the l2-norm of their shared-part gradients
and keeps the top fraction. Leader selection is either uniform among UAVs
with scheduled devices, or a communication-aware argmin over a per-candidate
score that mixes relay/broadcast delay with a normalized device-importance
term. Round-robin, random, FedAvg-style, and local-only baselines share the
same schedule container.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import energetics
from .config import ScenarioConfig
from .errors import CoverageInfeasible
from .geometry import Topology

_EPS_NORM = 1e-6  # lower end of min-max normalized quantities


class Policy(str, Enum):
    TOP_ALPHA = "top-alpha"  # gradient-norm top fraction, random leader
    GRAD_ENERGY_TRADEOFF = "grad-energy-tradeoff"
    MAX_GRAD_ENERGY_OPT = "max-grad-energy-opt"
    ENERGY_OPT_ONLY = "energy-opt-only"
    RANDOM_FEDPER = "random-fedper"
    SEQUENTIAL_FEDPER = "sequential-fedper"
    GRAD_FEDAVG = "grad-fedavg"
    INTER_UAV_FEDAVG = "inter-uav-fedavg"
    INTRA_UAV_FEDAVG = "intra-uav-fedavg"
    LOCAL_ONLY = "local-only"


FEDAVG_FAMILY = frozenset({Policy.GRAD_FEDAVG, Policy.INTER_UAV_FEDAVG, Policy.INTRA_UAV_FEDAVG})

ALPHA_GOVERNED = frozenset(
    {
        Policy.TOP_ALPHA,
        Policy.GRAD_ENERGY_TRADEOFF,
        Policy.MAX_GRAD_ENERGY_OPT,
        Policy.ENERGY_OPT_ONLY,
        Policy.RANDOM_FEDPER,
        Policy.SEQUENTIAL_FEDPER,
    }
)


@dataclass
class RoundSchedule:
    """Who uploads, who relays, and who aggregates in one communication round."""

    policy: Policy
    num_devices: int
    num_uavs: int
    selected: list[int]  # ordered device indices
    designated_uav: int | None
    active_uavs: set[int] = field(default_factory=set)
    rho_dev: np.ndarray = None  # [K, U] device-uploads-to-UAV indicators
    rho_uav: np.ndarray = None  # [U, U] UAV-relays-to-UAV indicators
    mu: np.ndarray = None  # [U] designated-aggregator indicator

    @property
    def num_selected(self) -> int:
        return len(self.selected)

    def uavs_with_selected(self) -> list[int]:
        if self.rho_dev is None:
            return []
        return sorted(np.flatnonzero(self.rho_dev.any(axis=0)).tolist())


def make_schedule(
    policy: Policy,
    selected: list[int],
    designated_uav: int | None,
    topology: Topology,
    active_uavs: set[int] | None = None,
) -> RoundSchedule:
    """Assemble a schedule with consistent indicator matrices."""
    K, U = topology.num_devices, topology.num_uavs
    rho_dev = np.zeros((K, U), dtype=np.int8)
    for k in selected:
        rho_dev[k, topology.device_uav[k]] = 1
    rho_uav = np.zeros((U, U), dtype=np.int8)
    mu = np.zeros(U, dtype=np.int8)
    if designated_uav is not None:
        mu[designated_uav] = 1
        for u in np.flatnonzero(rho_dev.any(axis=0)):
            if u != designated_uav:
                rho_uav[u, designated_uav] = 1
    if active_uavs is None:
        active_uavs = set(np.flatnonzero(rho_dev.any(axis=0)).tolist())
        if designated_uav is not None:
            active_uavs.add(designated_uav)
    return RoundSchedule(
        policy=policy,
        num_devices=K,
        num_uavs=U,
        selected=list(selected),
        designated_uav=designated_uav,
        active_uavs=set(active_uavs),
        rho_dev=rho_dev,
        rho_uav=rho_uav,
        mu=mu,
    )


def selection_size(alpha: float, num_devices: int) -> int:
    return math.ceil(alpha * num_devices)


def rank_devices(grad_norms: np.ndarray) -> np.ndarray:
    """Device indices sorted by descending norm; ties break to the lower index."""
    k = len(grad_norms)
    return np.lexsort((np.arange(k), -np.asarray(grad_norms, dtype=float)))


def top_alpha_select(grad_norms: np.ndarray, alpha: float, num_devices: int | None = None) -> list[int]:
    """The ceil(alpha*K) devices with the largest gradient norms."""
    norms = np.asarray(grad_norms, dtype=float)
    k = num_devices if num_devices is not None else len(norms)
    m = selection_size(alpha, k)
    return rank_devices(norms)[:m].tolist()


def random_designated_uav(topology: Topology, selected: list[int], rng: np.random.Generator) -> int:
    """Uniform choice among UAVs that serve at least one scheduled device."""
    eligible = sorted({int(topology.device_uav[k]) for k in selected})
    if not eligible:
        raise ValueError("no aggregation this round: no UAV has a scheduled device")
    return int(eligible[rng.integers(len(eligible))])


def _minmax_unit(values: np.ndarray) -> np.ndarray:
    """Min-max map onto [eps, 1]; a constant vector maps to all ones."""
    v = np.asarray(values, dtype=float)
    lo, hi = v.min(), v.max()
    if hi - lo <= 0:
        return np.ones_like(v)
    return _EPS_NORM + (1.0 - _EPS_NORM) * (v - lo) / (hi - lo)


def _candidate_delay(
    selected: list[int], leader: int, topology: Topology, cfg: ScenarioConfig, policy: Policy
) -> float:
    """Relay-plus-broadcast delay of a candidate (leader, device set) pair."""
    sched = make_schedule(policy, selected, leader, topology)
    u2u = energetics.u2u_times(sched, topology, cfg)
    bcast = energetics.broadcast_times(sched, topology, cfg)
    return float(u2u.max(initial=0.0) + bcast[leader])


def _grow_cluster(order: list[int], leader: int, topology: Topology, needed: int) -> list[int]:
    """Greedily extend {leader} along ``order`` until enough devices are covered."""
    cluster = [leader]
    covered = len(topology.devices_of(leader))
    for u in order:
        if covered >= needed:
            break
        cluster.append(u)
        covered += len(topology.devices_of(u))
    if covered < needed:
        raise CoverageInfeasible(f"UAVs cover {covered} devices; {needed} required")
    return cluster


def _devices_by_rank(cluster: list[int], topology: Topology, ranks: np.ndarray, m: int) -> list[int]:
    pool = np.concatenate([topology.devices_of(u) for u in cluster])
    order = pool[np.lexsort((pool, ranks[pool]))]
    return order[:m].tolist()


def _devices_by_index(cluster: list[int], topology: Topology, m: int) -> list[int]:
    pool = np.sort(np.concatenate([topology.devices_of(u) for u in cluster]))
    return pool[:m].tolist()


def grad_energy_tradeoff_select(
    grad_norms: np.ndarray, topology: Topology, cfg: ScenarioConfig
) -> RoundSchedule:
    """Joint device and leader selection balancing gradient importance and delay.

    Per candidate leader:
      1. devices are ranked by descending gradient norm (rank 1 = largest);
      2. each UAV gets a cumulative importance score, the sum of its devices'
         ranks (smaller = more important);
      3. other UAVs are prioritized by normalized-channel / normalized-importance
         and greedily added until the cluster covers the selection quota;
      4. the candidate score is the worst relay time plus broadcast time plus
         the weighted normalized importance sum of the cluster (leader twice).
    The leader with the minimal score wins; ties break to the lower index.
    """
    norms = np.asarray(grad_norms, dtype=float)
    K, U = topology.num_devices, topology.num_uavs
    m = selection_size(cfg.alpha, K)
    order = rank_devices(norms)
    ranks = np.empty(K, dtype=int)
    ranks[order] = np.arange(1, K + 1)

    importance = np.array([ranks[topology.devices_of(u)].sum() for u in range(U)], dtype=float)
    imp_unit = _minmax_unit(importance)
    gains = energetics.u2u_gain_matrix(topology, cfg)

    best = None
    for leader in range(U):
        others = [u for u in range(U) if u != leader]
        if others:
            h_unit = _minmax_unit(gains[others, leader])
            psi = h_unit / imp_unit[others]
            psi_order = [others[i] for i in np.lexsort((others, -psi))]
        else:
            psi_order = []
        cluster = _grow_cluster(psi_order, leader, topology, m)
        selected = _devices_by_rank(cluster, topology, ranks, m)
        delay = _candidate_delay(selected, leader, topology, cfg, Policy.GRAD_ENERGY_TRADEOFF)
        importance_term = imp_unit[cluster].sum() + imp_unit[leader]
        score = delay + cfg.delay_importance_weight * importance_term
        if best is None or score < best[0]:
            best = (score, leader, cluster, selected)

    _, leader, cluster, selected = best
    return make_schedule(Policy.GRAD_ENERGY_TRADEOFF, selected, leader, topology, set(cluster))


def max_grad_energy_opt_select(
    grad_norms: np.ndarray, topology: Topology, cfg: ScenarioConfig
) -> RoundSchedule:
    """Top-fraction device selection, then the leader minimizing relay+broadcast delay."""
    selected = top_alpha_select(grad_norms, cfg.alpha)
    best_u, best_delay = None, None
    for leader in range(topology.num_uavs):
        delay = _candidate_delay(selected, leader, topology, cfg, Policy.MAX_GRAD_ENERGY_OPT)
        if best_delay is None or delay < best_delay:
            best_u, best_delay = leader, delay
    return make_schedule(Policy.MAX_GRAD_ENERGY_OPT, selected, best_u, topology)


def energy_opt_only_select(topology: Topology, cfg: ScenarioConfig) -> RoundSchedule:
    """Leader and cluster chosen purely for delay; devices filled in index order."""
    K, U = topology.num_devices, topology.num_uavs
    m = selection_size(cfg.alpha, K)
    gains = energetics.u2u_gain_matrix(topology, cfg)

    best = None
    for leader in range(U):
        others = [u for u in range(U) if u != leader]
        if others:
            h = gains[others, leader]
            psi_order = [others[i] for i in np.lexsort((others, -h))]
        else:
            psi_order = []
        cluster = _grow_cluster(psi_order, leader, topology, m)
        selected = _devices_by_index(cluster, topology, m)
        delay = _candidate_delay(selected, leader, topology, cfg, Policy.ENERGY_OPT_ONLY)
        if best is None or delay < best[0]:
            best = (delay, leader, cluster, selected)

    _, leader, cluster, selected = best
    return make_schedule(Policy.ENERGY_OPT_ONLY, selected, leader, topology, set(cluster))


def baseline_select(
    policy: Policy,
    grad_norms: np.ndarray,
    topology: Topology,
    cfg: ScenarioConfig,
    rng: np.random.Generator,
    round_index: int,
) -> RoundSchedule:
    """Schedules for the comparison policies that need no joint optimization."""
    K = topology.num_devices
    m = selection_size(cfg.alpha, K)

    if policy is Policy.LOCAL_ONLY:
        return make_schedule(policy, [], None, topology)

    if policy is Policy.RANDOM_FEDPER:
        selected = sorted(rng.choice(K, size=m, replace=False).tolist())
    elif policy is Policy.SEQUENTIAL_FEDPER:
        selected = [(round_index * m + i) % K for i in range(m)]
    elif policy is Policy.GRAD_FEDAVG:
        # top half by gradient norm, independent of the alpha setting
        selected = rank_devices(grad_norms)[: math.ceil(K / 2)].tolist()
    elif policy in (Policy.INTER_UAV_FEDAVG, Policy.INTRA_UAV_FEDAVG):
        selected = list(range(K))
    elif policy is Policy.TOP_ALPHA:
        selected = top_alpha_select(grad_norms, cfg.alpha)
    else:
        raise ValueError(f"policy {policy} is not a baseline")

    if policy is Policy.INTRA_UAV_FEDAVG:
        return make_schedule(policy, selected, None, topology)
    designated = random_designated_uav(topology, selected, rng)
    return make_schedule(policy, selected, designated, topology)


def build_schedule(
    policy: Policy,
    grad_norms: np.ndarray,
    topology: Topology,
    cfg: ScenarioConfig,
    rng: np.random.Generator,
    round_index: int,
) -> RoundSchedule:
    """Dispatch to the configured policy."""
    if policy is Policy.GRAD_ENERGY_TRADEOFF:
        return grad_energy_tradeoff_select(grad_norms, topology, cfg)
    if policy is Policy.MAX_GRAD_ENERGY_OPT:
        return max_grad_energy_opt_select(grad_norms, topology, cfg)
    if policy is Policy.ENERGY_OPT_ONLY:
        return energy_opt_only_select(topology, cfg)
    return baseline_select(policy, grad_norms, topology, cfg, rng, round_index)
