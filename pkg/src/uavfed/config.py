"""Scenario configuration: one place for every physical, learning, and scheduling constant.

All dB/dBm quantities are stored exactly as configured; conversion to linear
units happens at the point of use (channel and energy models), never here.
A single JSON document fully determines a run.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .errors import ValidationError

PLACEMENT_MODES = ("grid-lines", "ppp")

SCHEDULER_POLICIES = (
    "top-alpha",
    "grad-energy-tradeoff",
    "max-grad-energy-opt",
    "energy-opt-only",
    "random-fedper",
    "sequential-fedper",
    "grad-fedavg",
    "inter-uav-fedavg",
    "intra-uav-fedavg",
    "local-only",
)


@dataclass(frozen=True)
class ScenarioConfig:
    """Immutable run parameterization. Field units are in the names or comments."""

    # fleet and area geometry
    num_uavs: int = 12
    num_devices_per_uav: int = 2
    area_side_m: float = 10_000.0
    uav_altitude_m: float = 100.0
    uav_coverage_radius_m: float = 200.0
    min_uav_separation_m: float = 600.0

    # radio
    carrier_freq_hz: float = 2.0e9
    bandwidth_hz: float = 80.0e6
    noise_psd_dbm_hz: float = -174.0
    d2u_a: float = 11.95  # LoS-probability sigmoid parameter (degree domain)
    d2u_b: float = 0.14  # LoS-probability sigmoid slope (per degree)
    eta_los_db: float = 3.0  # excess path loss, line-of-sight
    eta_nlos_db: float = 23.0  # excess path loss, non-line-of-sight
    u2u_gain_db: float = -31.5  # constant gain of the inter-UAV free-space model

    # UAV compute and power
    uav_agg_cycles: float = 20_000.0  # CPU cycles charged per aggregated model
    uav_cpu_freq_hz: float = 3.0e9
    energy_coeff: float = 1.0e-27  # effective switched-capacitance coefficient
    hover_power_w: float = 52.1
    uav_tx_power_w: float = 5.0
    device_tx_power_dbm: float = 23.0

    # model sizes on the wire
    base_model_bits: int = 1_352_000  # shared backbone (169,000 bytes)
    total_model_bits: int = 1_379_200  # backbone plus personalization head

    # local training
    device_throughput_sps: float = 500.0  # samples processed per second
    local_epochs: int = 1
    batch_size: int = 10
    lr_base: float = 0.005
    lr_head: float = 0.005

    # synthetic data
    heterogeneity_c: int = 6  # max distinct classes per device
    num_classes: int = 10
    samples_per_device: int = 500
    feature_dim: int = 32
    hidden_dim: int = 64

    # scheduling and run control
    alpha: float = 0.2
    max_rounds: int = 210
    energy_budget_j: float = 40_000.0
    placement_mode: str = "grid-lines"
    ppp_intensity: float = 0.5e-4  # devices per square meter
    mobile_devices: bool = True
    eval_interval: int = 1
    scheduler_policy: str = "top-alpha"
    delay_importance_weight: float = 1.0  # weight of the normalized rank term in leader scoring
    seed: int = 0


_INT_FIELDS = {
    "num_uavs",
    "num_devices_per_uav",
    "base_model_bits",
    "total_model_bits",
    "local_epochs",
    "batch_size",
    "heterogeneity_c",
    "num_classes",
    "samples_per_device",
    "feature_dim",
    "hidden_dim",
    "max_rounds",
    "eval_interval",
    "seed",
}

_POSITIVE_FIELDS = (
    "num_uavs",
    "num_devices_per_uav",
    "area_side_m",
    "uav_altitude_m",
    "uav_coverage_radius_m",
    "min_uav_separation_m",
    "carrier_freq_hz",
    "bandwidth_hz",
    "uav_agg_cycles",
    "uav_cpu_freq_hz",
    "energy_coeff",
    "uav_tx_power_w",
    "base_model_bits",
    "total_model_bits",
    "device_throughput_sps",
    "local_epochs",
    "batch_size",
    "lr_base",
    "lr_head",
    "heterogeneity_c",
    "num_classes",
    "samples_per_device",
    "feature_dim",
    "hidden_dim",
    "energy_budget_j",
    "ppp_intensity",
    "eval_interval",
)

_FIELD_NAMES = tuple(f.name for f in dataclasses.fields(ScenarioConfig))


def default_config() -> ScenarioConfig:
    """Return the reference configuration used throughout the experiments."""
    return ScenarioConfig()


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    """Check every documented invariant; raise ValidationError naming the violation."""
    for name in _FIELD_NAMES:
        value = getattr(cfg, name)
        if name == "mobile_devices":
            if not isinstance(value, bool):
                raise ValidationError(f"{name} must be a boolean")
            continue
        if name in ("placement_mode", "scheduler_policy"):
            continue
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"{name} must be numeric")
        if name in _INT_FIELDS and not isinstance(value, int):
            raise ValidationError(f"{name} must be an integer")

    if not (0.0 < cfg.alpha <= 1.0):
        raise ValidationError("alpha must lie in (0,1]")
    for name in _POSITIVE_FIELDS:
        if getattr(cfg, name) <= 0:
            raise ValidationError(f"{name} must be strictly positive")
    if cfg.hover_power_w < 0:
        raise ValidationError("hover_power_w must be non-negative")
    if cfg.max_rounds < 0:
        raise ValidationError("max_rounds must be non-negative")
    if cfg.seed < 0:
        raise ValidationError("seed must be non-negative")
    if cfg.base_model_bits > cfg.total_model_bits:
        raise ValidationError("base_model_bits must not exceed total_model_bits")
    if cfg.placement_mode not in PLACEMENT_MODES:
        raise ValidationError(f"placement_mode must be one of {PLACEMENT_MODES}")
    if cfg.scheduler_policy not in SCHEDULER_POLICIES:
        raise ValidationError(f"scheduler_policy must be one of {SCHEDULER_POLICIES}")
    if cfg.delay_importance_weight < 0:
        raise ValidationError("delay_importance_weight must be non-negative")
    return cfg


def with_overrides(cfg: ScenarioConfig, **overrides) -> ScenarioConfig:
    """Return a validated copy of ``cfg`` with the given fields replaced."""
    for key in overrides:
        if key not in _FIELD_NAMES:
            raise ValidationError(f"unknown config key: {key}")
    return validate(dataclasses.replace(cfg, **overrides))


def from_dict(data: dict) -> ScenarioConfig:
    """Build a config from a (possibly partial) dict; missing keys take defaults."""
    if not isinstance(data, dict):
        raise ValidationError("config document must be a JSON object")
    kwargs = {}
    for key, value in data.items():
        if key not in _FIELD_NAMES:
            raise ValidationError(f"unknown config key: {key}")
        if key not in _INT_FIELDS and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        kwargs[key] = value
    return validate(ScenarioConfig(**kwargs))


def to_dict(cfg: ScenarioConfig) -> dict:
    return dataclasses.asdict(cfg)


def serialize(cfg: ScenarioConfig) -> str:
    """JSON text that round-trips exactly through load."""
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True)


def loads(text: str) -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc
    return from_dict(data)


def load_config(path) -> ScenarioConfig:
    """Load a JSON config file; unspecified keys fall back to defaults."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return loads(text)


def num_devices(cfg: ScenarioConfig) -> int:
    """Device count in deterministic placement mode (realized per seed under ppp)."""
    return cfg.num_uavs * cfg.num_devices_per_uav
