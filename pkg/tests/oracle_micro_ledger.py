"""Standalone hand-computed ledger for the 2-UAV / 4-device micro-scenario.

This file is the committed independent oracle: every quantity below is a
direct transcription of the per-round time/energy formulas using only the
math module, with no imports from the simulator package. Running it prints
the oracle dict; the acceptance suite compares the simulator's ledger against
these values at 1e-9 relative tolerance.

Scenario (fixed by hand):
  UAV0 at (1000, 1000, 100) m, UAV1 at (2000, 1000, 100) m.
  Devices: k0 (1000, 1100) under UAV0, k1 (950, 1000) under UAV0,
           k2 (2000, 1200) under UAV1, k3 (2000, 1000) under UAV1 (nadir).
  Scheduled set {k0, k2}, aggregation leader UAV0, backbone-only transfer.
"""

import json
import math

# reference constants
F_HZ = 2.0e9
B_HZ = 80.0e6
NOISE_PSD_W = 10.0 ** ((-174.0 - 30.0) / 10.0)
A_LOS, B_LOS = 11.95, 0.14
ETA_LOS_DB, ETA_NLOS_DB = 3.0, 23.0
U2U_GAIN_DB = -31.5
Q_CYCLES = 20_000.0
CPU_HZ = 3.0e9
KAPPA = 1.0e-27
P_HOVER_W = 52.1
P_UAV_W = 5.0
P_DEV_W = 10.0 ** ((23.0 - 30.0) / 10.0)
BITS = 1_352_000
ALTITUDE = 100.0
C0 = 3.0e8
TAU, D_K, NU = 1, 500, 500.0

UAV_XY = [(1000.0, 1000.0), (2000.0, 1000.0)]
DEV_XY = [(1000.0, 1100.0), (950.0, 1000.0), (2000.0, 1200.0), (2000.0, 1000.0)]
DEV_UAV = [0, 0, 1, 1]
SELECTED = [0, 2]
LEADER = 0


def d3(dev, uav):
    dx = DEV_XY[dev][0] - UAV_XY[uav][0]
    dy = DEV_XY[dev][1] - UAV_XY[uav][1]
    return math.sqrt(dx * dx + dy * dy + ALTITUDE * ALTITUDE)


def d2u_gain_linear(d):
    fs_db = 20.0 * math.log10(4.0 * math.pi * F_HZ * d / C0)
    elev = math.degrees(math.asin(ALTITUDE / d))
    p_los = 1.0 / (1.0 + A_LOS * math.exp(-B_LOS * (elev - A_LOS)))
    gain_db = -(p_los * (fs_db + ETA_LOS_DB) + (1.0 - p_los) * (fs_db + ETA_NLOS_DB))
    return 10.0 ** (gain_db / 10.0)


def u2u_gain_linear(d):
    return 10.0 ** (U2U_GAIN_DB / 10.0) / (d * d)


def rate(p_w, gain, bw):
    return bw * math.log2(1.0 + p_w * gain / (NOISE_PSD_W * bw))


def compute():
    t_local = [TAU * D_K / NU for _ in range(4)]

    # uploads: equal bandwidth shares among the two scheduled devices
    share = B_HZ / len(SELECTED)
    uploads = {k: BITS / rate(P_DEV_W, d2u_gain_linear(d3(k, DEV_UAV[k])), share) for k in SELECTED}

    # aggregation: leader counts its own upload plus the relayed aggregate
    counts = [0.0, 0.0]
    for k in SELECTED:
        counts[DEV_UAV[k]] += 1.0
    counts[LEADER] += 1.0  # relay from UAV1
    agg_t = [Q_CYCLES * c / CPU_HZ for c in counts]
    agg_e = [KAPPA * Q_CYCLES * CPU_HZ**2 * c for c in counts]

    # relay: single sending UAV gets the full band
    d_uu = math.dist(UAV_XY[0], UAV_XY[1])
    u2u_t = [0.0, BITS / rate(P_UAV_W, u2u_gain_linear(d_uu), B_HZ)]
    u2u_e = [P_UAV_W * t for t in u2u_t]

    # broadcast from the leader: worst device plus worst relaying UAV, full band
    dev_terms = [BITS / rate(P_UAV_W, d2u_gain_linear(d3(k, LEADER)), B_HZ) for k in range(4)]
    relay_term = BITS / rate(P_UAV_W, u2u_gain_linear(d_uu), B_HZ)
    bcast_t = [max(dev_terms) + relay_term, 0.0]
    bcast_e = [P_UAV_W * t for t in bcast_t]

    t_hover = max(t_local) + max(uploads.values()) + max(agg_t) + max(u2u_t) + max(bcast_t)
    e_hover_per_uav = P_HOVER_W * t_hover
    e_round = 2 * e_hover_per_uav + sum(agg_e) + sum(u2u_e) + sum(bcast_e)

    return {
        "t_local": max(t_local),
        "upload_times": {str(k): uploads[k] for k in SELECTED},
        "t_upload": max(uploads.values()),
        "agg_times": agg_t,
        "agg_energies": agg_e,
        "t_agg": max(agg_t),
        "u2u_times": u2u_t,
        "u2u_energies": u2u_e,
        "t_u2u": max(u2u_t),
        "broadcast_times": bcast_t,
        "broadcast_energies": bcast_e,
        "t_broadcast": max(bcast_t),
        "t_hover": t_hover,
        "e_hover_per_uav": e_hover_per_uav,
        "e_hover": 2 * e_hover_per_uav,
        "e_round": e_round,
        "agg_energy_per_model": KAPPA * Q_CYCLES * CPU_HZ**2,
    }


if __name__ == "__main__":
    print(json.dumps(compute(), indent=2))
