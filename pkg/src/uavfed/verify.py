"""Self-contained oracle suite: independent cross-checks of the core math.

Four families of checks, each pairing an implementation path with an
independently coded reference:
  * analytic gradients against central finite differences of the loss;
  * hierarchical (per-UAV then leader) aggregation against a directly
    computed flat sample-weighted average;
  * the per-round energy ledger against a frozen hand-computed ledger for a
    fixed 2-UAV / 4-device micro-scenario (see tests/oracle_micro_ledger.py
    for the standalone generator of these numbers);
  * the selection policies against brute-force enumeration (full sort for
    the top-fraction rule, exhaustive leader enumeration with inline-formula
    delay recomputation for the joint device/UAV selection).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import energetics, learning
from .config import ScenarioConfig, default_config, with_overrides
from .federation import inter_uav_update, intra_uav_aggregate
from .geometry import Topology
from .scheduling import (
    Policy,
    grad_energy_tradeoff_select,
    make_schedule,
    rank_devices,
    selection_size,
    top_alpha_select,
)

# Frozen output of tests/oracle_micro_ledger.py (hand-checked transcription of
# the per-round formulas; regenerate with `python tests/oracle_micro_ledger.py`).
MICRO_ORACLE = {
    "t_local": 1.0,
    "upload_times": {0: 0.0029565320470672633, 2: 0.004980983069990213},
    "t_upload": 0.004980983069990213,
    "agg_times": [1.3333333333333333e-05, 6.666666666666667e-06],
    "agg_energies": [0.00036, 0.00018],
    "t_agg": 1.3333333333333333e-05,
    "u2u_times": [0.0, 0.0012574168717208944],
    "u2u_energies": [0.0, 0.006287084358604472],
    "t_u2u": 0.0012574168717208944,
    "broadcast_times": [0.005765391064559418, 0.0],
    "broadcast_energies": [0.02882695532279709, 0.0],
    "t_broadcast": 0.005765391064559418,
    "t_hover": 1.0120171243396041,
    "e_hover_per_uav": 52.726092178093374,
    "e_hover": 105.45218435618675,
    "e_round": 105.48783839586815,
    "agg_energy_per_model": 0.00018,
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    tolerance: str
    detail: str


def micro_scenario():
    """The fixed hand-audited scenario behind MICRO_ORACLE."""
    cfg = with_overrides(
        default_config(), num_uavs=2, num_devices_per_uav=2, mobile_devices=False, seed=0
    )
    topo = Topology(
        uav_xy=np.array([[1000.0, 1000.0], [2000.0, 1000.0]]),
        uav_altitude_m=100.0,
        device_xy=np.array([[1000.0, 1100.0], [950.0, 1000.0], [2000.0, 1200.0], [2000.0, 1000.0]]),
        device_uav=np.array([0, 0, 1, 1]),
    )
    schedule = make_schedule(Policy.TOP_ALPHA, [0, 2], 0, topo)
    sizes = np.full(4, 500.0)
    return cfg, topo, schedule, sizes


def _rel_err(value: float, expected: float) -> float:
    if expected == 0.0:
        return abs(value)
    return abs(value - expected) / abs(expected)


def check_gradients(n_models: int = 20, n_coords: int = 100, step: float = 1e-6, tol: float = 1e-5) -> CheckResult:
    """Central finite differences of the loss vs. analytic backprop gradients.

    The denominator is floored at 1e-4 so that coordinates whose true gradient
    sits below the finite-difference roundoff floor (~1e-10 absolute at this
    step) are checked absolutely at 1e-9 instead of relatively.
    """
    rng = np.random.default_rng(7001)
    dims = learning.ModelDims(feature_dim=6, hidden_dim=8, num_classes=4)
    worst = 0.0
    for _ in range(n_models):
        base = rng.normal(0.0, 0.5, dims.base_size)
        head = rng.normal(0.0, 0.5, dims.head_size)
        x = rng.normal(size=(5, dims.feature_dim))
        y = rng.integers(0, dims.num_classes, size=5)
        _, g_base, g_head = learning.backprop(dims, base, head, x, y)
        full = np.concatenate([g_base, g_head])
        coords = rng.choice(dims.base_size + dims.head_size, size=n_coords, replace=False)
        for c in coords:
            bp, hp = base.copy(), head.copy()
            bm, hm = base.copy(), head.copy()
            if c < dims.base_size:
                bp[c] += step
                bm[c] -= step
            else:
                hp[c - dims.base_size] += step
                hm[c - dims.base_size] -= step
            fd = (
                learning.cross_entropy(dims, bp, hp, x, y) - learning.cross_entropy(dims, bm, hm, x, y)
            ) / (2 * step)
            denom = max(abs(fd), abs(full[c]), 1e-4)
            worst = max(worst, abs(fd - full[c]) / denom)
    return CheckResult(
        name="gradient-check",
        passed=worst < tol,
        tolerance=f"rel err < {tol:g} (abs floor 1e-9)",
        detail=f"max rel err {worst:.3e} over {n_models} models x {n_coords} coords",
    )


def check_aggregation_equivalence(
    n_rounds: int = 1000, tol: float = 1e-12, inter_update_fn=inter_uav_update
) -> CheckResult:
    """Hierarchical aggregation vs. a directly computed flat weighted average."""
    rng = np.random.default_rng(7002)
    worst = 0.0
    for _ in range(n_rounds):
        k = int(rng.integers(4, 25))
        u = int(rng.integers(2, 7))
        dim = int(rng.integers(8, 64))
        device_uav = rng.integers(0, u, size=k)
        sizes = rng.integers(1, 500, size=k).astype(float)
        grads = rng.normal(size=(k, dim))
        m = int(rng.integers(1, k + 1))
        selected = sorted(rng.choice(k, size=m, replace=False).tolist())
        topo = Topology(
            uav_xy=rng.uniform(0, 1000, size=(u, 2)),
            uav_altitude_m=100.0,
            device_xy=rng.uniform(0, 1000, size=(k, 2)),
            device_uav=device_uav,
        )
        schedule = make_schedule(Policy.TOP_ALPHA, selected, int(device_uav[selected[0]]), topo)
        theta = rng.normal(size=dim)
        eta = 0.05
        hier = inter_update_fn(theta, intra_uav_aggregate(grads, schedule, sizes), schedule, sizes, eta)
        # flat reference: naive loop over the selected set
        num = np.zeros(dim)
        den = 0.0
        for kk in selected:
            num += sizes[kk] * grads[kk]
            den += sizes[kk]
        flat = theta - eta * num / den
        dev = np.linalg.norm(hier - flat) / max(np.linalg.norm(flat - theta), 1e-300)
        worst = max(worst, dev)
    return CheckResult(
        name="aggregation-equivalence",
        passed=worst < tol,
        tolerance=f"rel dev < {tol:g}",
        detail=f"max rel deviation {worst:.3e} over {n_rounds} random rounds",
    )


def check_energy_ledger(tol: float = 1e-9) -> CheckResult:
    """Simulator ledger vs. the frozen hand-computed micro-scenario oracle."""
    cfg, topo, schedule, sizes = micro_scenario()
    ledger = energetics.round_ledger(schedule, topo, cfg, sizes, 0.0)
    oracle = MICRO_ORACLE
    errs = {
        "t_local": _rel_err(ledger.t_local, oracle["t_local"]),
        "t_upload": _rel_err(ledger.t_upload, oracle["t_upload"]),
        "t_agg": _rel_err(ledger.t_agg, oracle["t_agg"]),
        "t_u2u": _rel_err(ledger.t_u2u, oracle["t_u2u"]),
        "t_broadcast": _rel_err(ledger.t_broadcast, oracle["t_broadcast"]),
        "t_hover": _rel_err(ledger.t_hover, oracle["t_hover"]),
        "e_hover": _rel_err(ledger.e_hover, oracle["e_hover"]),
        "e_round": _rel_err(ledger.e_round, oracle["e_round"]),
    }
    for k, expected in oracle["upload_times"].items():
        errs[f"upload[{k}]"] = _rel_err(ledger.upload_times[int(k)], expected)
    for u in range(2):
        errs[f"agg_t[{u}]"] = _rel_err(ledger.agg_times[u], oracle["agg_times"][u])
        errs[f"agg_e[{u}]"] = _rel_err(ledger.e_agg[u], oracle["agg_energies"][u])
        errs[f"u2u_t[{u}]"] = _rel_err(ledger.u2u_times[u], oracle["u2u_times"][u])
        errs[f"u2u_e[{u}]"] = _rel_err(ledger.e_u2u[u], oracle["u2u_energies"][u])
        errs[f"bc_t[{u}]"] = _rel_err(ledger.broadcast_times[u], oracle["broadcast_times"][u])
        errs[f"bc_e[{u}]"] = _rel_err(ledger.e_broadcast[u], oracle["broadcast_energies"][u])
    per_model = cfg.energy_coeff * cfg.uav_agg_cycles * cfg.uav_cpu_freq_hz**2
    errs["agg_energy_per_model"] = _rel_err(per_model, oracle["agg_energy_per_model"])
    worst_key = max(errs, key=errs.get)
    worst = errs[worst_key]
    return CheckResult(
        name="energy-ledger",
        passed=worst < tol,
        tolerance=f"rel err < {tol:g}",
        detail=f"max rel err {worst:.3e} ({worst_key}) over {len(errs)} components",
    )


def _oracle_u2u_time(cfg: ScenarioConfig, d: float, share: float, bits: int) -> float:
    n0 = 10.0 ** ((cfg.noise_psd_dbm_hz - 30.0) / 10.0)
    gain = 10.0 ** (cfg.u2u_gain_db / 10.0) / d**2
    return bits / (share * math.log2(1.0 + cfg.uav_tx_power_w * gain / (n0 * share)))


def _oracle_d2u_time(cfg: ScenarioConfig, d: float, share: float, bits: int, power: float) -> float:
    n0 = 10.0 ** ((cfg.noise_psd_dbm_hz - 30.0) / 10.0)
    fs = 20.0 * math.log10(4.0 * math.pi * cfg.carrier_freq_hz * d / 3.0e8)
    elev = math.degrees(math.asin(cfg.uav_altitude_m / d))
    p_los = 1.0 / (1.0 + cfg.d2u_a * math.exp(-cfg.d2u_b * (elev - cfg.d2u_a)))
    gain_db = -(p_los * (fs + cfg.eta_los_db) + (1.0 - p_los) * (fs + cfg.eta_nlos_db))
    gain = 10.0 ** (gain_db / 10.0)
    return bits / (share * math.log2(1.0 + power * gain / (n0 * share)))


def _oracle_candidate_score(cfg, topo, norms, leader, lam):
    """Loop-coded rerun of the joint selection scoring for one candidate leader."""
    k_total, u_total = topo.num_devices, topo.num_uavs
    m = selection_size(cfg.alpha, k_total)
    order = sorted(range(k_total), key=lambda k: (-norms[k], k))
    ranks = {k: i + 1 for i, k in enumerate(order)}
    importance = []
    for u in range(u_total):
        importance.append(sum(ranks[k] for k in range(k_total) if topo.device_uav[k] == u))
    lo, hi = min(importance), max(importance)
    if hi > lo:
        imp_unit = [1e-6 + (1 - 1e-6) * (v - lo) / (hi - lo) for v in importance]
    else:
        imp_unit = [1.0] * u_total

    others = [u for u in range(u_total) if u != leader]
    if others:
        gains = [10.0 ** (cfg.u2u_gain_db / 10.0) / topo.u2u_m[u, leader] ** 2 for u in others]
        lo, hi = min(gains), max(gains)
        if hi > lo:
            g_unit = [1e-6 + (1 - 1e-6) * (g - lo) / (hi - lo) for g in gains]
        else:
            g_unit = [1.0] * len(others)
        psi = [(g_unit[i] / imp_unit[u], u) for i, u in enumerate(others)]
        psi_order = [u for _, u in sorted(psi, key=lambda t: (-t[0], t[1]))]
    else:
        psi_order = []

    cluster = [leader]
    covered = sum(1 for k in range(k_total) if topo.device_uav[k] == leader)
    for u in psi_order:
        if covered >= m:
            break
        cluster.append(u)
        covered += sum(1 for k in range(k_total) if topo.device_uav[k] == u)
    if covered < m:
        return None

    pool = [k for k in range(k_total) if topo.device_uav[k] in cluster]
    pool.sort(key=lambda k: (ranks[k], k))
    selected = pool[:m]

    bits = cfg.base_model_bits
    senders = sorted({int(topo.device_uav[k]) for k in selected} - {leader})
    if senders:
        share = cfg.bandwidth_hz / len(senders)
        relay_times = [_oracle_u2u_time(cfg, float(topo.u2u_m[u, leader]), share, bits) for u in senders]
        max_relay = max(relay_times)
    else:
        max_relay = 0.0
    bcast = max(
        _oracle_d2u_time(cfg, float(topo.d2u_m[k, leader]), cfg.bandwidth_hz, bits, cfg.uav_tx_power_w)
        for k in range(k_total)
    )
    if senders:
        bcast += max(
            _oracle_u2u_time(cfg, float(topo.u2u_m[u, leader]), cfg.bandwidth_hz, bits) for u in senders
        )
    importance_term = sum(imp_unit[u] for u in cluster) + imp_unit[leader]
    return max_relay + bcast + lam * importance_term, selected


def _random_instance(rng):
    u = int(rng.integers(1, 5))
    per = int(rng.integers(1, 4))
    cfg = with_overrides(
        default_config(),
        num_uavs=u,
        num_devices_per_uav=per,
        alpha=float(rng.choice([0.2, 0.34, 0.5, 0.8, 1.0])),
        mobile_devices=False,
    )
    uav_xy = rng.uniform(0, 5000, size=(u, 2))
    k = u * per
    offsets = rng.uniform(-200, 200, size=(k, 2))
    device_uav = np.repeat(np.arange(u), per)
    device_xy = uav_xy[device_uav] + offsets
    topo = Topology(uav_xy=uav_xy, uav_altitude_m=cfg.uav_altitude_m, device_xy=device_xy, device_uav=device_uav)
    norms = rng.uniform(0.1, 10.0, size=k)
    return cfg, topo, norms


def check_scheduling_oracles(
    n_sort: int = 1000, n_joint: int = 500, tradeoff_fn=grad_energy_tradeoff_select
) -> CheckResult:
    """Top-fraction rule vs. full-sort prefix; joint selection vs. exhaustive leaders."""
    rng = np.random.default_rng(7003)
    for i in range(n_sort):
        k = int(rng.integers(1, 40))
        norms = rng.uniform(0, 10, size=k)
        if rng.random() < 0.3:  # force ties sometimes
            norms = np.round(norms)
        alpha = float(rng.uniform(0.01, 1.0))
        got = top_alpha_select(norms, alpha)
        want = sorted(range(k), key=lambda j: (-norms[j], j))[: selection_size(alpha, k)]
        if got != want:
            return CheckResult(
                "scheduling-oracles", False, "exact", f"top-fraction mismatch on instance {i}"
            )

    for i in range(n_joint):
        cfg, topo, norms = _random_instance(rng)
        schedule = tradeoff_fn(norms, topo, cfg)
        scores = {}
        for leader in range(topo.num_uavs):
            out = _oracle_candidate_score(cfg, topo, norms, leader, cfg.delay_importance_weight)
            if out is not None:
                scores[leader] = out
        best_leader = min(scores, key=lambda u: (scores[u][0], u))
        best_score, best_selected = scores[best_leader]
        got_score = scores.get(schedule.designated_uav, (math.inf, None))[0]
        if schedule.designated_uav != best_leader and not math.isclose(
            got_score, best_score, rel_tol=1e-9
        ):
            return CheckResult(
                "scheduling-oracles",
                False,
                "exact",
                f"joint selection picked leader {schedule.designated_uav} (score {got_score}), "
                f"oracle minimum is {best_leader} (score {best_score}) on instance {i}",
            )
        if schedule.designated_uav == best_leader and schedule.selected != best_selected:
            return CheckResult(
                "scheduling-oracles", False, "exact", f"device set mismatch on instance {i}"
            )
    return CheckResult(
        "scheduling-oracles",
        True,
        "exact",
        f"{n_sort} top-fraction + {n_joint} exhaustive-leader instances matched",
    )


def run_all_checks(inter_update_fn=inter_uav_update, tradeoff_fn=grad_energy_tradeoff_select):
    return [
        check_gradients(),
        check_aggregation_equivalence(inter_update_fn=inter_update_fn),
        check_energy_ledger(),
        check_scheduling_oracles(tradeoff_fn=tradeoff_fn),
    ]
