"""Small dense models with manual backprop, optimizers, serialization.

A model is a stack of dense layers: ReLU on every hidden layer and a
single linear output unit producing one potential per sample.  Gradients
are exact chain-rule expressions; no autodiff framework is involved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class Model:
    """Dense network parameters plus the metadata that rides with them.

    architecture lists layer widths input-to-output, e.g. (2, 100, 100, 1);
    weights holds one (w, b) pair per layer with w of shape (fan_in,
    fan_out).  mean/std/columns carry the feature standardization fitted
    at training time so saved models evaluate raw feature rows
    consistently; columns names the features kept after dropping
    zero-variance ones.
    """

    architecture: tuple[int, ...]
    weights: list[tuple[np.ndarray, np.ndarray]]
    seed: int
    metric_name: str = ""
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    columns: tuple[str, ...] | None = None

    @property
    def n_layers(self) -> int:
        return len(self.weights)


def parse_architecture(spec: str, n_features: int) -> tuple[int, ...]:
    """Layer widths for a CLI model spec.

    "linear" maps to (d, 1); "mlp:H1,H2,..." maps to (d, H1, H2, ..., 1).
    """
    if spec == "linear":
        return (n_features, 1)
    if spec.startswith("mlp:"):
        try:
            hidden = tuple(int(h) for h in spec[len("mlp:"):].split(","))
        except ValueError:
            raise ValueError(f"bad model spec {spec!r}") from None
        if not hidden or any(h < 1 for h in hidden):
            raise ValueError(f"bad model spec {spec!r}")
        return (n_features, *hidden, 1)
    raise ValueError(f"bad model spec {spec!r}")


def init_model(architecture: tuple[int, ...], seed: int) -> Model:
    """Seeded uniform(-a, a) init with a = sqrt(6 / (fan_in + fan_out)).

    Biases start at zero.
    """
    if len(architecture) < 2 or architecture[-1] != 1:
        raise ValueError("architecture must end in a single output unit")
    rng = np.random.default_rng(seed)
    weights = []
    for fan_in, fan_out in zip(architecture[:-1], architecture[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        weights.append((w, b))
    return Model(architecture=tuple(architecture), weights=weights, seed=seed)


def _forward_cached(model: Model, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    acts = [np.asarray(x, dtype=float)]
    h = acts[0]
    last = model.n_layers - 1
    for idx, (w, b) in enumerate(model.weights):
        h = h @ w + b
        if idx < last:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return h[:, 0], acts


def forward(model: Model, x: np.ndarray) -> np.ndarray:
    """Per-sample potentials for a feature matrix.

    Parameters
    ----------
    x : ndarray, shape (n, d)
        Feature rows; d must match the architecture input width.

    Returns
    -------
    ndarray, shape (n,)
        One scalar potential per sample.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.architecture[0]:
        raise ValueError(
            f"features must have shape (n, {model.architecture[0]})"
        )
    return _forward_cached(model, x)[0]


def backward(
    model: Model, x: np.ndarray, dpsi: np.ndarray, l2: float = 0.0
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Parameter gradients of sum_i dpsi_i * psi_i plus the L2 term.

    Parameters
    ----------
    x : ndarray, shape (n, d)
        The same feature rows used in the forward pass.
    dpsi : ndarray, shape (n,)
        Upstream gradient with respect to each potential.
    l2 : float
        Regularization weight; contributes 2 * l2 * parameter to every
        gradient (weights and biases alike).

    Returns
    -------
    list of (dw, db)
        One pair per layer, shaped like the parameters.
    """
    x = np.asarray(x, dtype=float)
    dpsi = np.asarray(dpsi, dtype=float)
    _, acts = _forward_cached(model, x)
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * model.n_layers
    delta = dpsi[:, None]
    for idx in range(model.n_layers - 1, -1, -1):
        w, b = model.weights[idx]
        if idx < model.n_layers - 1:
            delta = delta * (acts[idx + 1] > 0.0)
        dw = acts[idx].T @ delta + 2.0 * l2 * w
        db = delta.sum(axis=0) + 2.0 * l2 * b
        grads[idx] = (dw, db)
        if idx > 0:
            delta = delta @ w.T
    return grads


def predict(model: Model, x: np.ndarray) -> np.ndarray:
    """Binary predictions: 1 where the potential is >= 0 (ties positive)."""
    return (forward(model, x) >= 0.0).astype(float)


def l2_penalty(model: Model, l2: float) -> float:
    """The regularization term l2 * sum of squared parameters."""
    if l2 == 0.0:
        return 0.0
    total = 0.0
    for w, b in model.weights:
        total += float(np.sum(w * w)) + float(np.sum(b * b))
    return l2 * total


def clone_weights(model: Model) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(w.copy(), b.copy()) for w, b in model.weights]


# ---------------------------------------------------------------------------
# Optimizers.


@dataclass
class Sgd:
    lr: float = 1e-3

    def step(self, model: Model, grads) -> None:
        for (w, b), (dw, db) in zip(model.weights, grads):
            w -= self.lr * dw
            b -= self.lr * db


@dataclass
class Adam:
    """Adam with the usual defaults; state arrays are allocated lazily."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    _step: int = 0
    _m: list = field(default_factory=list)
    _v: list = field(default_factory=list)

    def step(self, model: Model, grads) -> None:
        if not self._m:
            self._m = [(np.zeros_like(w), np.zeros_like(b)) for w, b in model.weights]
            self._v = [(np.zeros_like(w), np.zeros_like(b)) for w, b in model.weights]
        self._step += 1
        t = self._step
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for (w, b), (dw, db), (mw, mb), (vw, vb) in zip(
            model.weights, grads, self._m, self._v
        ):
            mw *= self.beta1
            mw += (1.0 - self.beta1) * dw
            mb *= self.beta1
            mb += (1.0 - self.beta1) * db
            vw *= self.beta2
            vw += (1.0 - self.beta2) * dw * dw
            vb *= self.beta2
            vb += (1.0 - self.beta2) * db * db
            w -= self.lr * (mw / c1) / (np.sqrt(vw / c2) + self.eps)
            b -= self.lr * (mb / c1) / (np.sqrt(vb / c2) + self.eps)


def make_optimizer(name: str, lr: float):
    if name == "sgd":
        return Sgd(lr=lr)
    if name == "adam":
        return Adam(lr=lr)
    raise ValueError(f"unknown optimizer {name!r}")


# ---------------------------------------------------------------------------
# Serialization.


def model_to_json(model: Model) -> str:
    """JSON document with architecture, row-major weights, seed, metric."""
    doc = {
        "architecture": list(model.architecture),
        "layers": [
            {"w": w.tolist(), "b": b.tolist()} for w, b in model.weights
        ],
        "seed": model.seed,
        "metric": model.metric_name,
    }
    if model.mean is not None:
        doc["standardization"] = {
            "mean": model.mean.tolist(),
            "std": model.std.tolist(),
        }
        if model.columns is not None:
            doc["standardization"]["columns"] = list(model.columns)
    return json.dumps(doc, indent=2)


def model_from_json(text: str) -> Model:
    """Inverse of model_to_json."""
    doc = json.loads(text)
    arch = tuple(int(a) for a in doc["architecture"])
    weights = []
    for layer in doc["layers"]:
        w = np.asarray(layer["w"], dtype=float)
        b = np.asarray(layer["b"], dtype=float)
        weights.append((w, b))
    mean = std = columns = None
    if "standardization" in doc:
        mean = np.asarray(doc["standardization"]["mean"], dtype=float)
        std = np.asarray(doc["standardization"]["std"], dtype=float)
        raw_cols = doc["standardization"].get("columns")
        if raw_cols is not None:
            columns = tuple(str(c) for c in raw_cols)
    model = Model(
        architecture=arch,
        weights=weights,
        seed=int(doc.get("seed", 0)),
        metric_name=str(doc.get("metric", "")),
        mean=mean,
        std=std,
        columns=columns,
    )
    for (fan_in, fan_out), (w, b) in zip(
        zip(arch[:-1], arch[1:]), model.weights
    ):
        if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
            raise ValueError("weight shapes do not match the architecture")
    return model


def save_model(model: Model, path: str | Path) -> None:
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def load_model(path: str | Path) -> Model:
    return model_from_json(Path(path).read_text(encoding="utf-8"))
