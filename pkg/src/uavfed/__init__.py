"""Deterministic desk-scale simulator of UAV-assisted personalized federated learning.

A small fleet of hovering relay/aggregation UAVs serves ground devices that
train a split model: a globally shared backbone updated only through
sample-weighted hierarchical aggregation of the top gradient-norm fraction of
devices, and per-device personalization heads that never leave their device.
Every round is fully costed in time and energy (uploads, aggregation compute,
inter-UAV relay, broadcast, hovering) against a fleet energy budget.
"""

from .channel import LinkGain, d2u_gain, link_rate, u2u_gain
from .config import (
    ScenarioConfig,
    default_config,
    load_config,
    loads,
    serialize,
    validate,
    with_overrides,
)
from .diagnostics import (
    BoundEstimates,
    bound_trend_report,
    estimate_gradient_variance,
    estimate_selection_bias,
    estimate_tracking_error,
)
from .energetics import RoundLedger, round_ledger
from .federation import (
    RoundRecord,
    TrainerState,
    TrainingResult,
    init_state,
    inter_uav_update,
    intra_uav_aggregate,
    run_round,
    run_training,
)
from .geometry import (
    Topology,
    build_topology,
    place_devices_ppp,
    place_devices_uniform,
    place_uavs_grid_lines,
    remobilize_devices,
)
from .learning import (
    DeviceDataset,
    GradientPair,
    SplitModel,
    compute_gradients,
    evaluate,
    forward_loss,
    generate_federated_data,
    local_personal_update,
)
from .scheduling import (
    Policy,
    RoundSchedule,
    baseline_select,
    energy_opt_only_select,
    grad_energy_tradeoff_select,
    make_schedule,
    max_grad_energy_opt_select,
    random_designated_uav,
    top_alpha_select,
)

__version__ = "0.1.0"
