"""UAV and device placement, device-to-UAV association, and pairwise distances.

UAVs hover at a fixed altitude on three lines (horizontal, vertical, diagonal)
inside a square area. Devices live on the ground inside their serving UAV's
coverage disk, either a fixed number per UAV or a Poisson point process
realization. All generation is deterministic given the seeded stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .errors import DegenerateTopology, PlacementInfeasible, ValidationError

_MAX_PLACEMENT_ATTEMPTS = 10_000
_SLOT_JITTER_FRACTION = 0.1  # of the slot spacing, along the line


@dataclass
class Topology:
    """Immutable snapshot of node positions and the device->UAV association."""

    uav_xy: np.ndarray  # [U, 2] meters
    uav_altitude_m: float
    device_xy: np.ndarray  # [K, 2] meters, ground level
    device_uav: np.ndarray  # [K] serving UAV index

    @property
    def num_uavs(self) -> int:
        return self.uav_xy.shape[0]

    @property
    def num_devices(self) -> int:
        return self.device_xy.shape[0]

    @property
    def d2u_m(self) -> np.ndarray:
        """3-D device-to-UAV distances, [K, U]."""
        horiz = np.linalg.norm(self.device_xy[:, None, :] - self.uav_xy[None, :, :], axis=2)
        return np.sqrt(horiz**2 + self.uav_altitude_m**2)

    @property
    def u2u_m(self) -> np.ndarray:
        """UAV-to-UAV distances, [U, U] (equal altitudes, so horizontal)."""
        return np.linalg.norm(self.uav_xy[:, None, :] - self.uav_xy[None, :, :], axis=2)

    def devices_of(self, u: int) -> np.ndarray:
        return np.flatnonzero(self.device_uav == u)

    def serving_distance(self, k: int) -> float:
        return float(self.d2u_m[k, self.device_uav[k]])

    def to_dict(self) -> dict:
        return {
            "uav_xy": self.uav_xy.tolist(),
            "uav_altitude_m": self.uav_altitude_m,
            "device_xy": self.device_xy.tolist(),
            "device_uav": self.device_uav.tolist(),
        }

    @staticmethod
    def from_dict(data: dict) -> "Topology":
        return Topology(
            uav_xy=np.asarray(data["uav_xy"], dtype=float),
            uav_altitude_m=float(data["uav_altitude_m"]),
            device_xy=np.asarray(data["device_xy"], dtype=float),
            device_uav=np.asarray(data["device_uav"], dtype=int),
        )


def _line_slots(count: int, side: float, line: str) -> np.ndarray:
    """Evenly spaced candidate slots on one of the three placement lines."""
    t = (np.arange(count) + 0.5) * side / count
    if line == "horizontal":
        return np.column_stack([t, np.full(count, 0.25 * side)])
    if line == "vertical":
        return np.column_stack([np.full(count, 0.75 * side), t])
    return np.column_stack([t, t])  # diagonal


def _jitter_direction(count: int, line: str) -> np.ndarray:
    if line == "horizontal":
        return np.tile(np.array([1.0, 0.0]), (count, 1))
    if line == "vertical":
        return np.tile(np.array([0.0, 1.0]), (count, 1))
    return np.tile(np.array([1.0, 1.0]) / np.sqrt(2.0), (count, 1))


def place_uavs_grid_lines(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Place UAVs on three lines with jittered slots and a pairwise separation floor.

    Splits the fleet as evenly as possible across a horizontal, a vertical, and
    a diagonal line, then retries jitters until every pairwise horizontal
    separation meets the configured minimum.
    """
    if cfg.num_uavs < 3:
        raise ValidationError("grid-lines placement requires at least 3 UAVs")
    side = cfg.area_side_m
    base, rem = divmod(cfg.num_uavs, 3)
    counts = [base + (i < rem) for i in range(3)]
    lines = ["horizontal", "vertical", "diagonal"]

    for _ in range(_MAX_PLACEMENT_ATTEMPTS):
        points = []
        for count, line in zip(counts, lines):
            if count == 0:
                continue
            slots = _line_slots(count, side, line)
            spacing = side / count
            offsets = rng.uniform(-1.0, 1.0, count) * _SLOT_JITTER_FRACTION * spacing
            points.append(slots + offsets[:, None] * _jitter_direction(count, line))
        xy = np.vstack(points)
        diff = xy[:, None, :] - xy[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        np.fill_diagonal(dist, np.inf)
        if dist.min() >= cfg.min_uav_separation_m:
            return xy
    raise PlacementInfeasible(
        f"could not place {cfg.num_uavs} UAVs with separation >= "
        f"{cfg.min_uav_separation_m} m in {_MAX_PLACEMENT_ATTEMPTS} attempts"
    )


def _uniform_disk(center: np.ndarray, radius: float, n: int, rng: np.random.Generator) -> np.ndarray:
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    return center + np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def associate_devices(device_xy: np.ndarray, uav_xy: np.ndarray, coverage_radius: float) -> np.ndarray:
    """Nearest covering UAV per device; ties break to the lower UAV index.

    Devices outside every coverage disk get index -1 (callers discard them).
    """
    horiz = np.linalg.norm(device_xy[:, None, :] - uav_xy[None, :, :], axis=2)
    covered = horiz <= coverage_radius + 1e-9
    masked = np.where(covered, horiz, np.inf)
    nearest = np.argmin(masked, axis=1)  # argmin returns the first (lowest) index on ties
    nearest[~covered.any(axis=1)] = -1
    return nearest


def place_devices_uniform(cfg: ScenarioConfig, uav_xy: np.ndarray, rng: np.random.Generator) -> Topology:
    """Fixed number of devices per UAV, uniform over each coverage disk."""
    per = cfg.num_devices_per_uav
    chunks = [_uniform_disk(uav_xy[u], cfg.uav_coverage_radius_m, per, rng) for u in range(len(uav_xy))]
    device_xy = np.vstack(chunks)
    device_uav = np.repeat(np.arange(len(uav_xy)), per)
    return Topology(uav_xy=uav_xy, uav_altitude_m=cfg.uav_altitude_m, device_xy=device_xy, device_uav=device_uav)


def place_devices_ppp(cfg: ScenarioConfig, uav_xy: np.ndarray, rng: np.random.Generator) -> Topology:
    """Poisson point process per coverage disk; association by nearest covering UAV."""
    if cfg.ppp_intensity <= 0:
        raise ValidationError("ppp_intensity must be strictly positive")
    radius = cfg.uav_coverage_radius_m
    mean = cfg.ppp_intensity * np.pi * radius**2
    counts = rng.poisson(mean, len(uav_xy))
    if counts.sum() == 0:
        raise DegenerateTopology("every coverage disk realized zero devices")
    chunks = [_uniform_disk(uav_xy[u], radius, int(counts[u]), rng) for u in range(len(uav_xy)) if counts[u] > 0]
    device_xy = np.vstack(chunks)
    device_uav = associate_devices(device_xy, uav_xy, radius)
    keep = device_uav >= 0
    return Topology(
        uav_xy=uav_xy,
        uav_altitude_m=cfg.uav_altitude_m,
        device_xy=device_xy[keep],
        device_uav=device_uav[keep],
    )


def build_topology(cfg: ScenarioConfig, rng: np.random.Generator) -> Topology:
    """Place UAVs and devices according to the configured placement mode."""
    uav_xy = place_uavs_grid_lines(cfg, rng)
    if cfg.placement_mode == "ppp":
        return place_devices_ppp(cfg, uav_xy, rng)
    return place_devices_uniform(cfg, uav_xy, rng)


def remobilize_devices(topology: Topology, cfg: ScenarioConfig, rng: np.random.Generator) -> Topology:
    """Resample device positions within each serving disk; association is kept.

    Returns the input unchanged when device mobility is disabled.
    """
    if not cfg.mobile_devices:
        return topology
    new_xy = np.empty_like(topology.device_xy)
    for k in range(topology.num_devices):
        center = topology.uav_xy[topology.device_uav[k]]
        new_xy[k] = _uniform_disk(center, cfg.uav_coverage_radius_m, 1, rng)[0]
    return Topology(
        uav_xy=topology.uav_xy,
        uav_altitude_m=topology.uav_altitude_m,
        device_xy=new_xy,
        device_uav=topology.device_uav.copy(),
    )
