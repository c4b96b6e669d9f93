"""Split model, synthetic non-IID data, gradients, local updates, evaluation.

The model is a small MLP split into a shared backbone (input->hidden and
hidden->hidden, tanh activations) and a per-device personalization head (one
linear layer into class logits). Parameters live in flat vectors so that
norms, aggregation, and serialization stay trivial. Data is synthetic: each
class has a fixed prototype direction in feature space and samples sit on a
sign-symmetric pair of Gaussian modes around it, which makes the class
structure invisible to a linear readout of the raw features and rewards a
trained backbone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .errors import ValidationError

PROTOTYPE_SCALE = 1.0
NOISE_STD = 0.6
MODE_FLIP_PROB = 0.5  # probability of drawing the mirrored mode of a class
TEST_FRACTION = 0.2


@dataclass(frozen=True)
class ModelDims:
    feature_dim: int
    hidden_dim: int
    num_classes: int

    @property
    def base_size(self) -> int:
        d, h = self.feature_dim, self.hidden_dim
        return d * h + h + h * h + h

    @property
    def head_size(self) -> int:
        return self.hidden_dim * self.num_classes + self.num_classes


@dataclass
class DeviceDataset:
    """One device's local data; train/test splits share the same class subset."""

    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    class_set: np.ndarray

    @property
    def num_samples(self) -> int:
        return len(self.train_y) + len(self.test_y)


@dataclass
class GradientPair:
    g_theta: np.ndarray
    g_phi: np.ndarray
    g_theta_l2: float


@dataclass
class SplitModel:
    dims: ModelDims
    base: np.ndarray  # flat [base_size]
    heads: np.ndarray  # [K, head_size]

    @property
    def num_devices(self) -> int:
        return self.heads.shape[0]

    def copy(self) -> "SplitModel":
        return SplitModel(dims=self.dims, base=self.base.copy(), heads=self.heads.copy())


def dims_from_config(cfg: ScenarioConfig) -> ModelDims:
    return ModelDims(cfg.feature_dim, cfg.hidden_dim, cfg.num_classes)


def _unpack_base(dims: ModelDims, base: np.ndarray):
    d, h = dims.feature_dim, dims.hidden_dim
    i = 0
    w1 = base[i : i + d * h].reshape(d, h)
    i += d * h
    b1 = base[i : i + h]
    i += h
    w2 = base[i : i + h * h].reshape(h, h)
    i += h * h
    b2 = base[i : i + h]
    return w1, b1, w2, b2


def _unpack_head(dims: ModelDims, head: np.ndarray):
    h, c = dims.hidden_dim, dims.num_classes
    wh = head[: h * c].reshape(h, c)
    bh = head[h * c :]
    return wh, bh


def init_base(dims: ModelDims, rng: np.random.Generator) -> np.ndarray:
    """Gaussian fan-in scaled weights, small random biases to break sign symmetry."""
    d, h = dims.feature_dim, dims.hidden_dim
    w1 = rng.normal(0.0, 1.0 / math.sqrt(d), (d, h))
    b1 = rng.normal(0.0, 0.3, h)
    w2 = rng.normal(0.0, 1.0 / math.sqrt(h), (h, h))
    b2 = rng.normal(0.0, 0.3, h)
    return np.concatenate([w1.ravel(), b1, w2.ravel(), b2])


def init_model(cfg: ScenarioConfig, num_devices: int, rng: np.random.Generator) -> SplitModel:
    """Shared backbone init plus identical all-zero heads (uniform initial logits)."""
    dims = dims_from_config(cfg)
    return SplitModel(dims=dims, base=init_base(dims, rng), heads=np.zeros((num_devices, dims.head_size)))


def base_features(dims: ModelDims, base: np.ndarray, x: np.ndarray) -> np.ndarray:
    w1, b1, w2, b2 = _unpack_base(dims, base)
    a1 = np.tanh(x @ w1 + b1)
    return np.tanh(a1 @ w2 + b2)


def forward_logits(dims: ModelDims, base: np.ndarray, head: np.ndarray, x: np.ndarray) -> np.ndarray:
    wh, bh = _unpack_head(dims, head)
    return base_features(dims, base, x) @ wh + bh


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(dims: ModelDims, base: np.ndarray, head: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    probs = _softmax(forward_logits(dims, base, head, x))
    return float(-np.mean(np.log(probs[np.arange(len(y)), y] + 1e-300)))


def forward_loss(model: SplitModel, k: int, x: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy of device k's split model on a batch."""
    return cross_entropy(model.dims, model.base, model.heads[k], x, y)


def backprop(dims: ModelDims, base: np.ndarray, head: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Mean loss and exact gradients w.r.t. the flat backbone and head vectors."""
    w1, b1, w2, b2 = _unpack_base(dims, base)
    wh, bh = _unpack_head(dims, head)
    n = len(y)

    z1 = x @ w1 + b1
    a1 = np.tanh(z1)
    z2 = a1 @ w2 + b2
    a2 = np.tanh(z2)
    logits = a2 @ wh + bh
    probs = _softmax(logits)
    loss = float(-np.mean(np.log(probs[np.arange(n), y] + 1e-300)))

    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    g_wh = a2.T @ dlogits
    g_bh = dlogits.sum(axis=0)
    da2 = dlogits @ wh.T
    dz2 = da2 * (1.0 - a2**2)
    g_w2 = a1.T @ dz2
    g_b2 = dz2.sum(axis=0)
    da1 = dz2 @ w2.T
    dz1 = da1 * (1.0 - a1**2)
    g_w1 = x.T @ dz1
    g_b1 = dz1.sum(axis=0)

    g_base = np.concatenate([g_w1.ravel(), g_b1, g_w2.ravel(), g_b2])
    g_head = np.concatenate([g_wh.ravel(), g_bh])
    return loss, g_base, g_head


def compute_gradients(model: SplitModel, k: int, x: np.ndarray, y: np.ndarray) -> GradientPair:
    """Exact backbone/head gradients of the mean batch loss for device k."""
    _, g_base, g_head = backprop(model.dims, model.base, model.heads[k], x, y)
    return GradientPair(g_theta=g_base, g_phi=g_head, g_theta_l2=float(np.linalg.norm(g_base)))


def local_personal_update(model: SplitModel, k: int, g_phi: np.ndarray, gamma: float) -> None:
    """One head-only descent step for device k, in place."""
    model.heads[k] -= gamma * g_phi


def _epoch_batches(n: int, batch_size: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start : start + batch_size]


def local_training_pass(
    dims: ModelDims,
    base: np.ndarray,
    head: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    cfg: ScenarioConfig,
    rng: np.random.Generator,
) -> GradientPair:
    """Run the configured local epochs of SGD on private copies of both parts.

    Returns accumulated pseudo-gradients: the sums of the per-batch gradients
    along the local trajectory, so that ``start - lr * pseudo`` is exactly the
    locally trained parameter vector. With one epoch that fits in a single
    batch this is the plain stochastic gradient at the round's starting point.
    """
    base_loc = base.copy()
    head_loc = head.copy()
    g_base_total = np.zeros_like(base)
    g_head_total = np.zeros_like(head)
    for _ in range(cfg.local_epochs):
        for idx in _epoch_batches(len(y), cfg.batch_size, rng):
            _, g_base, g_head = backprop(dims, base_loc, head_loc, x[idx], y[idx])
            g_base_total += g_base
            g_head_total += g_head
            base_loc -= cfg.lr_base * g_base
            head_loc -= cfg.lr_head * g_head
    return GradientPair(
        g_theta=g_base_total, g_phi=g_head_total, g_theta_l2=float(np.linalg.norm(g_base_total))
    )


def evaluate(model: SplitModel, datasets: list[DeviceDataset]):
    """Per-device accuracy on the local test split; unweighted mean across devices."""
    accs = np.empty(len(datasets))
    for k, ds in enumerate(datasets):
        logits = forward_logits(model.dims, model.base, model.heads[k], ds.test_x)
        accs[k] = float(np.mean(np.argmax(logits, axis=1) == ds.test_y))
    return accs, float(accs.mean())


def _device_class_subsets(num_devices: int, num_classes: int, c: int, rng: np.random.Generator):
    """Round-robin windows over a shuffled class order; every class lands on >=1 device
    whenever the fleet is large enough (K*c >= num_classes)."""
    order = rng.permutation(num_classes)
    return [np.sort(order[(k * c + np.arange(c)) % num_classes]) for k in range(num_devices)]


def generate_federated_data(
    cfg: ScenarioConfig, num_devices: int, rng: np.random.Generator
) -> list[DeviceDataset]:
    """Equal-size per-device datasets with at most ``heterogeneity_c`` classes each.

    Per class, samples sit on two mirrored Gaussian modes around a fixed
    prototype direction; the per-device train/test split is stratified by
    class so both splits realize the device's full class subset.
    """
    c = cfg.heterogeneity_c
    if c > cfg.num_classes:
        raise ValidationError("heterogeneity_c cannot exceed num_classes")
    prototypes = rng.normal(0.0, PROTOTYPE_SCALE, (cfg.num_classes, cfg.feature_dim))
    subsets = _device_class_subsets(num_devices, cfg.num_classes, c, rng)

    n = cfg.samples_per_device
    base_count, rem = divmod(n, c)
    datasets = []
    for k in range(num_devices):
        classes = subsets[k]
        train_parts, test_parts = [], []
        for j, cls in enumerate(classes):
            count = base_count + (j < rem)
            signs = np.where(rng.uniform(size=count) < MODE_FLIP_PROB, -1.0, 1.0)
            xs = signs[:, None] * prototypes[cls] + NOISE_STD * rng.normal(size=(count, cfg.feature_dim))
            n_test = max(1, round(TEST_FRACTION * count)) if count > 1 else 0
            test_parts.append((xs[:n_test], np.full(n_test, cls, dtype=int)))
            train_parts.append((xs[n_test:], np.full(count - n_test, cls, dtype=int)))
        train_x = np.vstack([p[0] for p in train_parts])
        train_y = np.concatenate([p[1] for p in train_parts])
        test_x = np.vstack([p[0] for p in test_parts])
        test_y = np.concatenate([p[1] for p in test_parts])
        perm = rng.permutation(len(train_y))
        datasets.append(
            DeviceDataset(
                train_x=train_x[perm],
                train_y=train_y[perm],
                test_x=test_x,
                test_y=test_y,
                class_set=classes,
            )
        )
    return datasets
