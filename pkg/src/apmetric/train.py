"""Minibatch training loop with validation-based epoch selection.

Each epoch shuffles the training set, walks it in minibatches (the last
one may be smaller), and updates the model with either the adversarial
metric loss or a binary cross-entropy baseline.  After every epoch the
target metric is evaluated on the validation set at the 0-threshold
decision rule and the parameters from the best epoch are returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dsl import MetricExpr, evaluate_discrete
from .loss import LossConfig, LossWorkspace, ap_objective
from .models import (
    Model,
    backward,
    clone_weights,
    forward,
    init_model,
    l2_penalty,
    make_optimizer,
    predict,
)
from .simplex import SolverError


@dataclass
class TrainConfig:
    """Training hyperparameters.

    objective "ap" optimizes the adversarial formulation of `metric`;
    "bce" trains standard logistic loss while still selecting epochs by
    the target metric on validation.
    """

    metric: MetricExpr
    architecture: tuple[int, ...]
    epochs: int = 100
    lr: float = 1e-3
    optimizer: str = "adam"
    l2: float = 0.0
    batch_size: int = 25
    objective: str = "ap"
    seed: int = 0
    loss_cfg: LossConfig = field(default_factory=LossConfig)


@dataclass
class TrainResult:
    model: Model
    best_epoch: int
    best_val: float
    history: list[tuple[int, float, float]]  # (epoch, train_loss, val_metric)


def _bce_batch(psi: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softplus loss and its gradient with respect to psi."""
    # log(1 + e^psi) - y * psi, computed stably.
    loss = float(np.mean(np.logaddexp(0.0, psi) - y * psi))
    sig = 1.0 / (1.0 + np.exp(-psi))
    return loss, (sig - y) / psi.shape[0]


def validation_metric(
    metric: MetricExpr, model: Model, x_val: np.ndarray, y_val: np.ndarray
) -> float:
    """Target metric of thresholded predictions; NaN maps to -inf."""
    yhat = predict(model, x_val)
    try:
        v = evaluate_discrete(metric, yhat, y_val)
    except ValueError:
        return -math.inf
    if math.isnan(v):
        return -math.inf
    return float(v)


def train(
    cfg: TrainConfig,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
) -> TrainResult:
    """Run the epoch loop and return the best-validation model.

    Parameters
    ----------
    cfg : TrainConfig
        Hyperparameters; all randomness (init, shuffles) flows from
        cfg.seed.
    x_train, y_train : ndarray
        Training features (n, d) and binary labels (n,).
    x_val, y_val : ndarray
        Validation split used only for epoch selection.

    Returns
    -------
    TrainResult
        Best model (parameters from the argmax-validation epoch), its
        epoch index, validation value, and the per-epoch history.

    Raises
    ------
    SolverError
        When a minibatch produces a non-finite loss or gradient.
    """
    if cfg.objective not in ("ap", "bce"):
        raise ValueError(f"unknown objective {cfg.objective!r}")
    x_train = np.asarray(x_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float)
    n = x_train.shape[0]
    if n == 0:
        raise ValueError("empty training set")

    rng = np.random.default_rng(cfg.seed)
    model = init_model(cfg.architecture, seed=int(rng.integers(2**31 - 1)))
    model.metric_name = cfg.metric.name
    opt = make_optimizer(cfg.optimizer, cfg.lr)
    workspace = LossWorkspace()

    best_val = -math.inf
    best_epoch = -1
    best_weights = clone_weights(model)
    history: list[tuple[int, float, float]] = []

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb = x_train[idx]
            yb = y_train[idx]
            psi = forward(model, xb)
            if cfg.objective == "ap":
                res = ap_objective(
                    psi, yb, cfg.metric, cfg.loss_cfg, workspace=workspace
                )
                batch_loss = res.value
                dpsi = res.grad
            else:
                batch_loss, dpsi = _bce_batch(psi, yb)
            batch_loss += l2_penalty(model, cfg.l2)
            if not (np.isfinite(batch_loss) and np.isfinite(dpsi).all()):
                raise SolverError(
                    f"non-finite loss at epoch {epoch}, batch start {start}: "
                    f"loss={batch_loss}, |psi|max="
                    f"{float(np.abs(psi).max()):.3e}"
                )
            grads = backward(model, xb, dpsi, l2=cfg.l2)
            opt.step(model, grads)
            losses.append(batch_loss)
        val = validation_metric(cfg.metric, model, x_val, y_val)
        history.append((epoch, float(np.mean(losses)), val))
        if val > best_val:
            best_val = val
            best_epoch = epoch
            best_weights = clone_weights(model)

    model.weights = best_weights
    return TrainResult(
        model=model, best_epoch=best_epoch, best_val=best_val, history=history
    )
