"""Wide-and-deep cell classifier with manual backpropagation.

Each of the four embedding inputs runs through its own pathway: two highway
layers (out = g * relu(W_H x + b_H) + (1 - g) * x with g = sigmoid(W_T x +
b_T)) followed by a dense reduction to one scalar. The four scalars are
concatenated with the wide feature vector and fed to a one-hidden-layer ReLU
network with a 2-way softmax over {correct, error}.

All parameters live in one flat vector (named arrays are views into it), so
ADAM is a single vectorized update and finite-difference checks can walk every
coordinate. Embedding tables are not parameters: deep inputs are constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataError

CLASS_CORRECT = 0
CLASS_ERROR = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 5
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    hidden: int = 64
    calibration_epochs: int = 100
    calibration_lr: float = 0.1


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class NeuralModel:
    """Pathways + classifier over (wide, deep) features.

    Freshly constructed models are all-zero (softmax gives 0.5/0.5); training
    initializes them from the config seed.
    """

    def __init__(self, wide_dim: int, n_pathways: int = 4, dims: int = 50, hidden: int = 64):
        self.wide_dim = wide_dim
        self.n_pathways = n_pathways
        self.dims = dims
        self.hidden = hidden
        p, d, h = n_pathways, dims, hidden
        shapes = [
            ("WH", (p, 2, d, d)),
            ("bH", (p, 2, d)),
            ("WT", (p, 2, d, d)),
            ("bT", (p, 2, d)),
            ("wr", (p, d)),
            ("br", (p,)),
            ("W1", (wide_dim + p, h)),
            ("b1", (h,)),
            ("W2", (h, 2)),
            ("b2", (2,)),
        ]
        self.shapes = shapes
        self.theta = np.zeros(sum(int(np.prod(s)) for _, s in shapes))
        self.params = self._views(self.theta)

    def _views(self, flat: np.ndarray) -> dict[str, np.ndarray]:
        views, offset = {}, 0
        for name, shape in self.shapes:
            size = int(np.prod(shape))
            views[name] = flat[offset : offset + size].reshape(shape)
            offset += size
        return views

    def init_params(self, rng: np.random.RandomState):
        def glorot(arr: np.ndarray, fan_in: int, fan_out: int):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            arr[...] = rng.uniform(-bound, bound, size=arr.shape)

        p = self.params
        d, h = self.dims, self.hidden
        glorot(p["WH"], d, d)
        glorot(p["WT"], d, d)
        glorot(p["wr"], d, 1)
        glorot(p["W1"], self.wide_dim + self.n_pathways, h)
        glorot(p["W2"], h, 2)
        p["bH"][...] = 0.0
        # Gate bias -1 so early training lets inputs pass mostly unchanged.
        p["bT"][...] = -1.0
        p["br"][...] = 0.0
        p["b1"][...] = 0.0
        p["b2"][...] = 0.0

    def _check_shapes(self, wide: np.ndarray, deep: np.ndarray):
        if wide.ndim != 2 or wide.shape[1] != self.wide_dim:
            raise DataError(f"wide features have dim {wide.shape}, model expects {self.wide_dim}")
        if deep.shape != (self.n_pathways, wide.shape[0], self.dims):
            raise DataError(
                f"deep features have shape {deep.shape}, model expects "
                f"{(self.n_pathways, wide.shape[0], self.dims)}"
            )

    def _forward(self, wide: np.ndarray, deep: np.ndarray):
        p = self.params
        x = deep  # (P, n, d)
        layer_cache = []
        for layer in range(2):
            pre_h = np.matmul(x, p["WH"][:, layer]) + p["bH"][:, layer][:, None, :]
            h = np.maximum(pre_h, 0.0)
            g = _sigmoid(np.matmul(x, p["WT"][:, layer]) + p["bT"][:, layer][:, None, :])
            layer_cache.append((x, h, g))
            x = g * h + (1.0 - g) * x
        scalars = np.einsum("pnd,pd->pn", x, p["wr"]) + p["br"][:, None]
        z = np.concatenate([wide, scalars.T], axis=1)
        a1_pre = z @ p["W1"] + p["b1"]
        a1 = np.maximum(a1_pre, 0.0)
        logits = a1 @ p["W2"] + p["b2"]
        probs = softmax(logits)
        return logits, probs, (layer_cache, x, z, a1)

    def forward(self, wide: np.ndarray, deep: np.ndarray):
        """(logits, probs), each (n, 2)."""
        self._check_shapes(wide, deep)
        logits, probs, _ = self._forward(wide, deep)
        return logits, probs

    def loss_and_grad(self, wide: np.ndarray, deep: np.ndarray, labels: np.ndarray):
        """Mean cross-entropy and its gradient as a flat vector."""
        self._check_shapes(wide, deep)
        n = len(labels)
        p = self.params
        logits, probs, (layer_cache, x_final, z, a1) = self._forward(wide, deep)
        loss = -np.mean(np.log(probs[np.arange(n), labels] + 1e-300))

        grad_flat = np.zeros_like(self.theta)
        g = self._views(grad_flat)
        d_logits = probs.copy()
        d_logits[np.arange(n), labels] -= 1.0
        d_logits /= n
        g["W2"][...] = a1.T @ d_logits
        g["b2"][...] = d_logits.sum(axis=0)
        d_a1 = d_logits @ p["W2"].T
        d_a1[a1 <= 0.0] = 0.0
        g["W1"][...] = z.T @ d_a1
        g["b1"][...] = d_a1.sum(axis=0)
        d_z = d_a1 @ p["W1"].T
        d_scalars = d_z[:, self.wide_dim :].T  # (P, n)
        g["wr"][...] = np.einsum("pnd,pn->pd", x_final, d_scalars)
        g["br"][...] = d_scalars.sum(axis=1)
        d_x = d_scalars[:, :, None] * p["wr"][:, None, :]
        for layer in (1, 0):
            x_in, h, gate = layer_cache[layer]
            d_gate = d_x * (h - x_in)
            d_h = d_x * gate
            d_h[h <= 0.0] = 0.0
            d_pre_t = d_gate * gate * (1.0 - gate)
            g["WH"][:, layer] = np.einsum("pnd,pne->pde", x_in, d_h)
            g["bH"][:, layer] = d_h.sum(axis=1)
            g["WT"][:, layer] = np.einsum("pnd,pne->pde", x_in, d_pre_t)
            g["bT"][:, layer] = d_pre_t.sum(axis=1)
            d_x = (
                d_x * (1.0 - gate)
                + np.matmul(d_h, p["WH"][:, layer].transpose(0, 2, 1))
                + np.matmul(d_pre_t, p["WT"][:, layer].transpose(0, 2, 1))
            )
        return loss, grad_flat


def error_logit_margin(logits: np.ndarray) -> np.ndarray:
    """Log-odds of the error class: logit_error - logit_correct."""
    return logits[:, CLASS_ERROR] - logits[:, CLASS_CORRECT]


def train_model(
    model: NeuralModel,
    wide: np.ndarray,
    deep: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig,
) -> list[float]:
    """ADAM training with a seeded permutation per epoch; returns epoch losses."""
    labels = np.asarray(labels, dtype=np.int64)
    present = np.unique(labels)
    if len(present) < 2:
        name = "error" if (present.size and present[0] == CLASS_ERROR) else "correct"
        raise DataError(
            f"training set contains only {name!r} examples; generate synthetic "
            "errors with augment() before training"
        )
    rng = np.random.RandomState(config.seed & 0xFFFFFFFF)
    model.init_params(rng)
    n = len(labels)
    m = np.zeros_like(model.theta)
    v = np.zeros_like(model.theta)
    step = 0
    history = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grad = model.loss_and_grad(wide[idx], deep[:, idx, :], labels[idx])
            epoch_loss += loss * len(idx)
            step += 1
            m += (1.0 - config.beta1) * (grad - m)
            v += (1.0 - config.beta2) * (grad * grad - v)
            m_hat = m / (1.0 - config.beta1**step)
            v_hat = v / (1.0 - config.beta2**step)
            model.theta -= config.lr * m_hat / (np.sqrt(v_hat) + config.eps)
        history.append(epoch_loss / n)
    return history


@dataclass(frozen=True)
class Calibrator:
    """Platt scaling: error probability sigmoid(a*z + b) of the logit margin."""

    a: float = 1.0
    b: float = 0.0

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return _sigmoid(self.a * np.asarray(z, dtype=np.float64) + self.b)


def calibrate(z: np.ndarray, labels: np.ndarray, config: TrainConfig | None = None) -> Calibrator:
    """Fit (a, b) by full-batch NLL descent; identity fallback on degenerate data."""
    config = config or TrainConfig()
    z = np.asarray(z, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if len(z) == 0 or len(np.unique(labels)) < 2:
        return Calibrator()
    params = np.array([1.0, 0.0])
    m = np.zeros(2)
    v = np.zeros(2)
    for step in range(1, config.calibration_epochs + 1):
        q = _sigmoid(params[0] * z + params[1])
        residual = q - labels
        grad = np.array([np.mean(residual * z), np.mean(residual)])
        m += (1.0 - config.beta1) * (grad - m)
        v += (1.0 - config.beta2) * (grad * grad - v)
        m_hat = m / (1.0 - config.beta1**step)
        v_hat = v / (1.0 - config.beta2**step)
        params -= config.calibration_lr * m_hat / (np.sqrt(v_hat) + config.eps)
    return Calibrator(float(params[0]), float(params[1]))
