"""The training round loop: gradients, hierarchical aggregation, budget stop.

Each round every device runs its local pass and reports a backbone
pseudo-gradient. Under FedPer-style policies the scheduled devices'
backbone gradients are sample-weighted through their serving UAV and the
designated UAV, the backbone takes one global step, and every device commits
its personalization-head step locally. FedAvg-style baselines average whole
locally-trained models instead. Per-round time/energy flows into the ledger;
training stops at the round cap or when the fleet energy budget is crossed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as diag
from . import energetics, learning, scheduling
from .config import ScenarioConfig, num_devices, validate
from .geometry import Topology, build_topology, remobilize_devices
from .scheduling import FEDAVG_FAMILY, Policy, RoundSchedule

# rng stream tags so that every random decision has a stable address
_RNG_TOPOLOGY = 1
_RNG_DATA = 3
_RNG_MODEL = 4
_RNG_MOBILITY = 5
_RNG_LOCAL = 6
_RNG_POLICY = 7
_RNG_DIAG = 8


def stream(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng([seed, *tags])


@dataclass
class RoundRecord:
    round_index: int
    policy: str
    selected: list[int]
    designated_uav: int | None
    ledger: energetics.RoundLedger
    mean_accuracy: float | None = None
    per_device_accuracy: np.ndarray | None = None
    train_loss: float | None = None
    estimates: "diag.BoundEstimates | None" = None


@dataclass
class TrainerState:
    cfg: ScenarioConfig
    model: learning.SplitModel
    topology: Topology
    datasets: list[learning.DeviceDataset]
    round_index: int = 0
    cumulative_energy: float = 0.0
    history: list[RoundRecord] = field(default_factory=list)
    base_by_uav: np.ndarray | None = None  # per-UAV backbones (per-UAV aggregation only)

    @property
    def policy(self) -> Policy:
        return Policy(self.cfg.scheduler_policy)

    @property
    def dataset_sizes(self) -> np.ndarray:
        return np.array([ds.num_samples for ds in self.datasets], dtype=float)

    def base_for_device(self, k: int) -> np.ndarray:
        if self.base_by_uav is not None:
            return self.base_by_uav[self.topology.device_uav[k]]
        return self.model.base


@dataclass
class TrainingResult:
    cfg: ScenarioConfig
    records: list[RoundRecord]
    stop_reason: str
    model: learning.SplitModel
    topology: Topology
    datasets: list[learning.DeviceDataset]

    @property
    def accuracy_series(self) -> list[tuple[int, float]]:
        return [(r.round_index, r.mean_accuracy) for r in self.records if r.mean_accuracy is not None]

    @property
    def total_energy(self) -> float:
        return self.records[-1].ledger.cumulative_energy if self.records else 0.0


def intra_uav_aggregate(
    gradients: np.ndarray, schedule: RoundSchedule, dataset_sizes: np.ndarray
) -> np.ndarray:
    """Per-UAV sample-weighted sums of the scheduled devices' backbone gradients.

    UAVs without scheduled devices contribute the zero vector.
    """
    weights = schedule.rho_dev.astype(float) * dataset_sizes[:, None]  # [K, U]
    return weights.T @ gradients  # [U, M]


def inter_uav_update(
    base: np.ndarray,
    uav_gradients: np.ndarray,
    schedule: RoundSchedule,
    dataset_sizes: np.ndarray,
    lr_base: float,
) -> np.ndarray:
    """One global backbone step from the UAV-level sums; a no-op on an empty round."""
    if schedule.num_selected == 0:
        return base.copy()
    denom = float(dataset_sizes[schedule.selected].sum())
    return base - lr_base * uav_gradients.sum(axis=0) / denom


def init_state(cfg: ScenarioConfig) -> TrainerState:
    """Build topology, data, and model for a fresh run of the configured scenario."""
    validate(cfg)
    topology = build_topology(cfg, stream(cfg.seed, _RNG_TOPOLOGY))
    k = topology.num_devices
    datasets = learning.generate_federated_data(cfg, k, stream(cfg.seed, _RNG_DATA))
    model = learning.init_model(cfg, k, stream(cfg.seed, _RNG_MODEL))
    state = TrainerState(cfg=cfg, model=model, topology=topology, datasets=datasets)
    if Policy(cfg.scheduler_policy) is Policy.INTRA_UAV_FEDAVG:
        state.base_by_uav = np.tile(model.base, (topology.num_uavs, 1))
    return state


def _local_passes(state: TrainerState) -> list[learning.GradientPair]:
    cfg = state.cfg
    pairs = []
    for k, ds in enumerate(state.datasets):
        rng = stream(cfg.seed, _RNG_LOCAL, state.round_index, k)
        pairs.append(
            learning.local_training_pass(
                state.model.dims, state.base_for_device(k), state.model.heads[k], ds.train_x, ds.train_y, cfg, rng
            )
        )
    return pairs


def _apply_fedper(state: TrainerState, schedule: RoundSchedule, pairs: list[learning.GradientPair]) -> None:
    cfg = state.cfg
    if schedule.num_selected > 0:
        g_theta = np.stack([p.g_theta for p in pairs])
        g_uav = intra_uav_aggregate(g_theta, schedule, state.dataset_sizes)
        state.model.base = inter_uav_update(state.model.base, g_uav, schedule, state.dataset_sizes, cfg.lr_base)
    for k, pair in enumerate(pairs):
        learning.local_personal_update(state.model, k, pair.g_phi, cfg.lr_head)


def _apply_fedavg(state: TrainerState, schedule: RoundSchedule, pairs: list[learning.GradientPair]) -> None:
    cfg = state.cfg
    sizes = state.dataset_sizes
    base_ends = np.stack([state.base_for_device(k) - cfg.lr_base * p.g_theta for k, p in enumerate(pairs)])
    head_ends = np.stack([state.model.heads[k] - cfg.lr_head * p.g_phi for k, p in enumerate(pairs)])

    if schedule.policy is Policy.INTRA_UAV_FEDAVG:
        for u in range(state.topology.num_uavs):
            members = state.topology.devices_of(u)
            if len(members) == 0:
                continue
            w = sizes[members] / sizes[members].sum()
            state.base_by_uav[u] = w @ base_ends[members]
            state.model.heads[members] = w @ head_ends[members]
        return

    members = np.array(schedule.selected, dtype=int)
    w = sizes[members] / sizes[members].sum()
    state.model.base = w @ base_ends[members]
    state.model.heads[:] = w @ head_ends[members]


def _evaluate(state: TrainerState):
    model, datasets = state.model, state.datasets
    accs = np.empty(len(datasets))
    losses = np.empty(len(datasets))
    for k, ds in enumerate(datasets):
        base = state.base_for_device(k)
        logits = learning.forward_logits(model.dims, base, model.heads[k], ds.test_x)
        accs[k] = float(np.mean(np.argmax(logits, axis=1) == ds.test_y))
        losses[k] = learning.cross_entropy(model.dims, base, model.heads[k], ds.train_x, ds.train_y)
    return accs, float(accs.mean()), float(losses.mean())


def run_round(
    state: TrainerState, collect_diagnostics: bool = False, include_tracking: bool = False
) -> RoundRecord:
    """Execute one communication round in place and append its record."""
    cfg = state.cfg
    t = state.round_index
    if t > 0:
        state.topology = remobilize_devices(state.topology, cfg, stream(cfg.seed, _RNG_MOBILITY, t))

    pairs = _local_passes(state)
    norms = np.array([p.g_theta_l2 for p in pairs])
    schedule = scheduling.build_schedule(
        state.policy, norms, state.topology, cfg, stream(cfg.seed, _RNG_POLICY, t), t
    )

    estimates = None
    if collect_diagnostics:
        estimates = diag.bound_estimates_for_round(
            state, schedule, stream(cfg.seed, _RNG_DIAG, t), include_tracking=include_tracking
        )

    if state.policy in FEDAVG_FAMILY:
        _apply_fedavg(state, schedule, pairs)
    elif state.policy is Policy.LOCAL_ONLY:
        for k, pair in enumerate(pairs):
            learning.local_personal_update(state.model, k, pair.g_phi, cfg.lr_head)
    else:
        _apply_fedper(state, schedule, pairs)

    ledger = energetics.round_ledger(
        schedule, state.topology, cfg, state.dataset_sizes, state.cumulative_energy
    )
    state.cumulative_energy = ledger.cumulative_energy

    record = RoundRecord(
        round_index=t,
        policy=schedule.policy.value,
        selected=list(schedule.selected),
        designated_uav=schedule.designated_uav,
        ledger=ledger,
        estimates=estimates,
    )
    if cfg.eval_interval > 0 and t % cfg.eval_interval == 0:
        accs, mean_acc, train_loss = _evaluate(state)
        record.per_device_accuracy = accs
        record.mean_accuracy = mean_acc
        record.train_loss = train_loss

    state.history.append(record)
    state.round_index += 1
    return record


def run_training(
    cfg: ScenarioConfig, collect_diagnostics: bool = False, include_tracking: bool = False
) -> TrainingResult:
    """Round loop until the round cap or the energy budget is crossed.

    The round that crosses the budget is still recorded; the stop reason is
    ``budget`` in that case and ``max-rounds`` otherwise.
    """
    state = init_state(cfg)
    stop_reason = "max-rounds"
    for _ in range(cfg.max_rounds):
        record = run_round(state, collect_diagnostics, include_tracking)
        if record.ledger.budget_exceeded:
            stop_reason = "budget"
            break
    return TrainingResult(
        cfg=cfg,
        records=state.history,
        stop_reason=stop_reason,
        model=state.model,
        topology=state.topology,
        datasets=state.datasets,
    )
