"""Empirical estimators for the quantities appearing in the convergence bound.

These estimators quantify, per round: the gap between the selected-set
weighted gradient and the all-device average (selection bias), minibatch
gradient variance around full-batch gradients, sampling variance under
random subsets of the same size, the distance of each head from its
frozen-backbone optimum (tracking error), and the composite variance term.
They read trainer snapshots and never mutate them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import learning
from .scheduling import RoundSchedule

TRACKING_STEPS_DEFAULT = 500
TRACKING_LR_DEFAULT = 0.02
VARIANCE_BATCHES_DEFAULT = 8
SAMPLING_DRAWS_DEFAULT = 16


@dataclass
class BoundEstimates:
    """Per-round plug-in estimates; the composite term is exact by construction:
    v_theta_hat = sigma_theta_hat/num_selected + samp_var_hat + beta_sel_hat**2."""

    round_index: int
    num_selected: int
    beta_sel_hat: float
    sigma_theta_hat: float
    samp_var_hat: float
    v_theta_hat: float
    grad_norm_sq: float
    tracking_err_mean: float = math.nan
    tracking_err_max: float = math.nan


def full_batch_gradients(state) -> np.ndarray:
    """Per-device full-train-split backbone gradients at the current parameters."""
    model = state.model
    grads = np.empty((len(state.datasets), model.dims.base_size))
    for k, ds in enumerate(state.datasets):
        _, g_base, _ = learning.backprop(model.dims, state.base_for_device(k), model.heads[k], ds.train_x, ds.train_y)
        grads[k] = g_base
    return grads


def estimate_selection_bias(full_grads: np.ndarray, selected: list[int], sizes: np.ndarray) -> float:
    """l2 distance between the selected-set weighted average gradient and the
    plain average over all devices."""
    sel = np.asarray(selected, dtype=int)
    w = sizes[sel] / sizes[sel].sum()
    selected_avg = w @ full_grads[sel]
    return float(np.linalg.norm(selected_avg - full_grads.mean(axis=0)))


def mean_squared_deviation(samples: np.ndarray, reference: np.ndarray) -> float:
    """Mean squared l2 deviation of sample vectors from a reference vector."""
    return float(np.mean(np.sum((samples - reference[None, :]) ** 2, axis=1)))


def estimate_gradient_variance(
    dims: learning.ModelDims,
    base: np.ndarray,
    head: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    batch_size: int,
    n_batches: int,
    rng: np.random.Generator,
) -> float:
    """Empirical minibatch-gradient variance around the full-batch gradient."""
    _, g_full, _ = learning.backprop(dims, base, head, x, y)
    samples = np.empty((n_batches, dims.base_size))
    n = len(y)
    size = min(batch_size, n)
    for i in range(n_batches):
        idx = rng.choice(n, size=size, replace=False)
        _, g, _ = learning.backprop(dims, base, head, x[idx], y[idx])
        samples[i] = g
    return mean_squared_deviation(samples, g_full)


def estimate_sampling_variance(
    full_grads: np.ndarray, sizes: np.ndarray, subset_size: int, rng: np.random.Generator,
    n_draws: int = SAMPLING_DRAWS_DEFAULT,
) -> float:
    """Variance of the weighted subset-average gradient under uniform random
    subsets of the scheduled size, scaled back by the subset size so that the
    reported value divided by the subset size reproduces the raw spread."""
    k = full_grads.shape[0]
    averages = np.empty((n_draws, full_grads.shape[1]))
    for i in range(n_draws):
        sel = rng.choice(k, size=subset_size, replace=False)
        w = sizes[sel] / sizes[sel].sum()
        averages[i] = w @ full_grads[sel]
    spread = mean_squared_deviation(averages, averages.mean(axis=0))
    return subset_size * spread


def head_descent(
    dims: learning.ModelDims,
    base: np.ndarray,
    head: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    steps: int,
    lr: float,
) -> np.ndarray:
    """Full-batch head-only gradient descent at a frozen backbone."""
    h = head.copy()
    for _ in range(steps):
        _, _, g_head = learning.backprop(dims, base, h, x, y)
        h -= lr * g_head
    return h


def estimate_tracking_error(
    model: learning.SplitModel,
    k: int,
    dataset: learning.DeviceDataset,
    inner_steps: int = TRACKING_STEPS_DEFAULT,
    inner_lr: float = TRACKING_LR_DEFAULT,
    base: np.ndarray | None = None,
) -> float:
    """Distance from device k's current head to an inner-descent surrogate of
    its frozen-backbone optimum.

    The descent starts at the current head, so zero steps return 0 by
    construction and the estimate grows toward the true head-to-optimum
    distance as ``inner_steps`` increases (the head problem is convex).
    """
    if base is None:
        base = model.base
    target = head_descent(
        model.dims, base, model.heads[k], dataset.train_x, dataset.train_y, inner_steps, inner_lr
    )
    return float(np.linalg.norm(model.heads[k] - target))


def bound_estimates_for_round(
    state, schedule: RoundSchedule, rng: np.random.Generator, include_tracking: bool = False
) -> BoundEstimates:
    """All per-round estimates from the current trainer snapshot."""
    cfg = state.cfg
    dims = state.model.dims
    full_grads = full_batch_gradients(state)
    sizes = state.dataset_sizes

    variances = np.empty(len(state.datasets))
    for k, ds in enumerate(state.datasets):
        variances[k] = estimate_gradient_variance(
            dims,
            state.base_for_device(k),
            state.model.heads[k],
            ds.train_x,
            ds.train_y,
            cfg.batch_size,
            VARIANCE_BATCHES_DEFAULT,
            rng,
        )
    sigma_theta = float(variances.mean())
    grad_norm_sq = float(np.sum(full_grads.mean(axis=0) ** 2))

    m = schedule.num_selected
    if m > 0:
        beta = estimate_selection_bias(full_grads, schedule.selected, sizes)
        samp = estimate_sampling_variance(full_grads, sizes, m, rng)
        v_theta = sigma_theta / m + samp + beta**2
    else:
        beta, samp, v_theta = math.nan, math.nan, math.nan

    est = BoundEstimates(
        round_index=state.round_index,
        num_selected=m,
        beta_sel_hat=beta,
        sigma_theta_hat=sigma_theta,
        samp_var_hat=samp,
        v_theta_hat=v_theta,
        grad_norm_sq=grad_norm_sq,
    )
    if include_tracking:
        errs = np.array(
            [
                estimate_tracking_error(state.model, k, ds, base=state.base_for_device(k))
                for k, ds in enumerate(state.datasets)
            ]
        )
        est.tracking_err_mean = float(errs.mean())
        est.tracking_err_max = float(errs.max())
    return est


def bound_trend_report(results_by_alpha: dict) -> dict:
    """Cross-fraction comparison of the bound terms from a selection-ratio sweep.

    Expects diagnostics-enabled training results keyed by the selection
    fraction. The per-round variance term is formed from a shared reference
    variance sequence (the largest fraction present) divided by each series'
    own selected-set size, so the 1/|selected| scaling is directly visible;
    bias and sampling terms come from each series' own run.
    """
    alphas = sorted(results_by_alpha)
    ref = results_by_alpha[alphas[-1]]
    ref_sigma = {
        r.round_index: r.estimates.sigma_theta_hat for r in ref.records if r.estimates is not None
    }
    series = {}
    for alpha in alphas:
        result = results_by_alpha[alpha]
        rows = {
            "round": [],
            "num_selected": [],
            "beta_sel": [],
            "sigma_theta": [],
            "samp_var": [],
            "variance_term": [],
            "v_theta": [],
            "grad_norm_sq_running_mean": [],
        }
        running = 0.0
        for i, rec in enumerate(r for r in result.records if r.estimates is not None):
            est = rec.estimates
            running += est.grad_norm_sq
            shared_sigma = ref_sigma.get(est.round_index, est.sigma_theta_hat)
            m = est.num_selected
            variance_term = shared_sigma / m if m > 0 else math.nan
            rows["round"].append(est.round_index)
            rows["num_selected"].append(m)
            rows["beta_sel"].append(est.beta_sel_hat)
            rows["sigma_theta"].append(est.sigma_theta_hat)
            rows["samp_var"].append(est.samp_var_hat)
            rows["variance_term"].append(variance_term)
            rows["v_theta"].append(variance_term + est.samp_var_hat + est.beta_sel_hat**2)
            rows["grad_norm_sq_running_mean"].append(running / (i + 1))
        series[alpha] = rows
    return {"alphas": alphas, "series": series}
