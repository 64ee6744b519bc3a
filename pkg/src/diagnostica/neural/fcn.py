"""Fully convolutional network for binary time-series classification.

Three Conv1d + BatchNorm + ReLU blocks, global average pooling and a
two-logit dense head, implemented directly on numpy arrays with
hand-derived backward passes.  Keeping the chain rule explicit is the
point: :func:`gradient_check` compares every analytic gradient against
central finite differences, and the saliency module reuses the same
activation semantics.

Class 0 is "anomalous", class 1 is "normal".  Convolutions use
stride-aware "same" padding, so each block emits ``ceil(T / stride)``
time steps.
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import ConfigError, ShapeError

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


def same_padding(length: int, kernel: int, stride: int) -> tuple[int, int]:
    """Left/right padding so output length is ceil(length / stride)."""
    out = -(-length // stride)
    total = max((out - 1) * stride + kernel - length, 0)
    left = total // 2
    return left, total - left


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


class FcnModel:
    """Trainable FCN with explicit forward/backward passes."""

    def __init__(self, input_length: int,
                 filters: tuple[int, int, int] = (32, 64, 32),
                 kernels: tuple[int, int, int] = (8, 5, 3),
                 strides: tuple[int, int, int] = (1, 1, 1),
                 seed: int = 0):
        if input_length < 1:
            raise ConfigError("input_length must be positive")
        if not (len(filters) == len(kernels) == len(strides) == 3):
            raise ConfigError("filters, kernels and strides must have "
                              "three entries")
        if any(s < 1 for s in strides) or any(k < 1 for k in kernels):
            raise ConfigError("kernels and strides must be >= 1")
        self.input_length = int(input_length)
        self.filters = tuple(int(f) for f in filters)
        self.kernels = tuple(int(k) for k in kernels)
        self.strides = tuple(int(s) for s in strides)
        self.seed = int(seed)
        rng = np.random.default_rng(seed)
        self.params: dict[str, np.ndarray] = {}
        self.running: dict[str, np.ndarray] = {}
        channels = 1
        for i, (f, k) in enumerate(zip(self.filters, self.kernels)):
            scale = np.sqrt(2.0 / (channels * k))
            self.params[f"conv{i}_w"] = rng.normal(
                0.0, scale, size=(f, channels, k))
            self.params[f"conv{i}_b"] = np.zeros(f)
            self.params[f"bn{i}_gamma"] = np.ones(f)
            self.params[f"bn{i}_beta"] = np.zeros(f)
            self.running[f"bn{i}_mean"] = np.zeros(f)
            self.running[f"bn{i}_var"] = np.ones(f)
            channels = f
        self.params["dense_w"] = rng.normal(
            0.0, np.sqrt(2.0 / channels), size=(2, channels))
        self.params["dense_b"] = np.zeros(2)

    # ------------------------------------------------------------------
    # forward

    def _check_input(self, x) -> np.ndarray:
        batch = np.asarray(x, dtype=np.float64)
        if batch.ndim == 1:
            batch = batch[None, :]
        if batch.ndim != 2 or batch.shape[1] != self.input_length:
            raise ShapeError(
                f"expected series of length {self.input_length}, got "
                f"shape {batch.shape}")
        return batch

    def forward(self, x, training: bool = False,
                update_running: bool = False) -> tuple[np.ndarray, dict]:
        """Logits of shape (n, 2) plus the cache the backward pass needs."""
        batch = self._check_input(x)[:, None, :]
        cache: dict[str, object] = {"training": training, "blocks": []}
        out = batch
        for i in range(3):
            conv, conv_cache = self._conv_forward(out, i)
            norm, bn_cache = self._bn_forward(conv, i, training,
                                              update_running)
            relu = np.maximum(norm, 0.0)
            cache["blocks"].append({"conv": conv_cache, "bn": bn_cache,
                                    "relu_in": norm})
            out = relu
        cache["gap_in_length"] = out.shape[2]
        pooled = out.mean(axis=2)
        cache["pooled"] = pooled
        logits = pooled @ self.params["dense_w"].T + self.params["dense_b"]
        cache["last_activations"] = out
        return logits, cache

    def _conv_forward(self, x: np.ndarray, i: int):
        kernel = self.kernels[i]
        stride = self.strides[i]
        length = x.shape[2]
        out_length = -(-length // stride)
        left, right = same_padding(length, kernel, stride)
        padded = np.pad(x, ((0, 0), (0, 0), (left, right)))
        windows = np.lib.stride_tricks.sliding_window_view(
            padded, kernel, axis=2)[:, :, ::stride, :][:, :, :out_length, :]
        out = np.einsum("nctk,fck->nft", windows,
                        self.params[f"conv{i}_w"])
        out += self.params[f"conv{i}_b"][None, :, None]
        return out, {"windows": windows, "pad_left": left,
                     "in_length": length, "padded_length": padded.shape[2],
                     "out_length": out_length}

    def _bn_forward(self, x: np.ndarray, i: int, training: bool,
                    update_running: bool):
        gamma = self.params[f"bn{i}_gamma"][None, :, None]
        beta = self.params[f"bn{i}_beta"][None, :, None]
        if training:
            mean = x.mean(axis=(0, 2))
            var = x.var(axis=(0, 2))
            if update_running:
                self.running[f"bn{i}_mean"] = (
                    BN_MOMENTUM * self.running[f"bn{i}_mean"]
                    + (1 - BN_MOMENTUM) * mean)
                self.running[f"bn{i}_var"] = (
                    BN_MOMENTUM * self.running[f"bn{i}_var"]
                    + (1 - BN_MOMENTUM) * var)
        else:
            mean = self.running[f"bn{i}_mean"]
            var = self.running[f"bn{i}_var"]
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        x_hat = (x - mean[None, :, None]) * inv_std[None, :, None]
        out = gamma * x_hat + beta
        return out, {"x_hat": x_hat, "inv_std": inv_std,
                     "training": training}

    # ------------------------------------------------------------------
    # loss and backward

    def loss(self, x, y, training: bool = True) -> float:
        logits, _ = self.forward(x, training=training)
        return self._cross_entropy(logits, np.asarray(y))[0]

    @staticmethod
    def _cross_entropy(logits: np.ndarray, y: np.ndarray
                       ) -> tuple[float, np.ndarray]:
        probs = _softmax(logits)
        n = logits.shape[0]
        picked = probs[np.arange(n), y]
        loss = float(-np.log(np.maximum(picked, 1e-300)).mean())
        dlogits = probs.copy()
        dlogits[np.arange(n), y] -= 1.0
        return loss, dlogits / n

    def loss_and_grads(self, x, y, training: bool = True,
                       update_running: bool = False
                       ) -> tuple[float, dict[str, np.ndarray]]:
        labels = np.asarray(y, dtype=np.int64)
        logits, cache = self.forward(x, training=training,
                                     update_running=update_running)
        loss, dlogits = self._cross_entropy(logits, labels)
        grads: dict[str, np.ndarray] = {}
        pooled = cache["pooled"]
        grads["dense_w"] = dlogits.T @ pooled
        grads["dense_b"] = dlogits.sum(axis=0)
        dpooled = dlogits @ self.params["dense_w"]
        length = cache["gap_in_length"]
        dout = np.repeat(dpooled[:, :, None], length, axis=2) / length
        for i in reversed(range(3)):
            block = cache["blocks"][i]
            dout = dout * (block["relu_in"] > 0)
            dout = self._bn_backward(dout, i, block["bn"], grads)
            dout = self._conv_backward(dout, i, block["conv"], grads)
        return loss, grads

    def _bn_backward(self, dout: np.ndarray, i: int, cache: dict,
                     grads: dict) -> np.ndarray:
        x_hat = cache["x_hat"]
        inv_std = cache["inv_std"][None, :, None]
        gamma = self.params[f"bn{i}_gamma"][None, :, None]
        grads[f"bn{i}_gamma"] = (dout * x_hat).sum(axis=(0, 2))
        grads[f"bn{i}_beta"] = dout.sum(axis=(0, 2))
        dx_hat = dout * gamma
        if not cache["training"]:
            return dx_hat * inv_std
        count = dout.shape[0] * dout.shape[2]
        sum_dx_hat = dx_hat.sum(axis=(0, 2), keepdims=True)
        sum_dx_hat_x = (dx_hat * x_hat).sum(axis=(0, 2), keepdims=True)
        return (inv_std / count) * (
            count * dx_hat - sum_dx_hat - x_hat * sum_dx_hat_x)

    def _conv_backward(self, dout: np.ndarray, i: int, cache: dict,
                       grads: dict) -> np.ndarray:
        weights = self.params[f"conv{i}_w"]
        windows = cache["windows"]
        grads[f"conv{i}_w"] = np.einsum("nctk,nft->fck", windows, dout)
        grads[f"conv{i}_b"] = dout.sum(axis=(0, 2))
        dwindows = np.einsum("nft,fck->nctk", dout, weights)
        n, channels = windows.shape[0], windows.shape[1]
        dx_padded = np.zeros((n, channels, cache["padded_length"]))
        stride = self.strides[i]
        out_length = cache["out_length"]
        for k in range(self.kernels[i]):
            stop = k + stride * (out_length - 1) + 1
            dx_padded[:, :, k:stop:stride] += dwindows[:, :, :, k]
        left = cache["pad_left"]
        return dx_padded[:, :, left:left + cache["in_length"]]

    # ------------------------------------------------------------------
    # training and inference

    def train(self, x, y, epochs: int = 40, batch_size: int = 32,
              learning_rate: float = 3e-3, seed: int | None = None
              ) -> dict[str, list[float]]:
        """Adam-optimized training; returns per-epoch loss/accuracy."""
        batch = self._check_input(x)
        labels = np.asarray(y, dtype=np.int64)
        if labels.shape != (batch.shape[0],):
            raise ShapeError("labels must be one int per series")
        if not set(np.unique(labels)) <= {0, 1}:
            raise ShapeError("labels must be 0 (anomalous) or 1 (normal)")
        rng = np.random.default_rng(self.seed if seed is None else seed)
        moment1 = {k: np.zeros_like(v) for k, v in self.params.items()}
        moment2 = {k: np.zeros_like(v) for k, v in self.params.items()}
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        step = 0
        history = {"loss": [], "accuracy": []}
        for _ in range(epochs):
            order = rng.permutation(batch.shape[0])
            epoch_loss = 0.0
            for start in range(0, batch.shape[0], batch_size):
                index = order[start:start + batch_size]
                loss, grads = self.loss_and_grads(
                    batch[index], labels[index], training=True,
                    update_running=True)
                epoch_loss += loss * len(index)
                step += 1
                for name, grad in grads.items():
                    moment1[name] = beta1 * moment1[name] + \
                        (1 - beta1) * grad
                    moment2[name] = beta2 * moment2[name] + \
                        (1 - beta2) * grad * grad
                    m_hat = moment1[name] / (1 - beta1 ** step)
                    v_hat = moment2[name] / (1 - beta2 ** step)
                    self.params[name] -= learning_rate * m_hat / \
                        (np.sqrt(v_hat) + eps)
            history["loss"].append(epoch_loss / batch.shape[0])
            history["accuracy"].append(
                float((self.predict(batch) == labels).mean()))
        return history

    def predict_proba(self, x) -> np.ndarray:
        logits, _ = self.forward(x, training=False)
        return _softmax(logits)

    def predict(self, x) -> np.ndarray:
        return self.predict_proba(x).argmax(axis=1)

    # ------------------------------------------------------------------
    # persistence

    def to_json(self) -> str:
        return json.dumps({
            "format": "fcn-v1",
            "config": {"input_length": self.input_length,
                       "filters": list(self.filters),
                       "kernels": list(self.kernels),
                       "strides": list(self.strides),
                       "seed": self.seed},
            "params": {k: v.tolist() for k, v in self.params.items()},
            "running": {k: v.tolist() for k, v in self.running.items()},
        })

    @staticmethod
    def from_json(text: str) -> "FcnModel":
        payload = json.loads(text)
        if payload.get("format") != "fcn-v1":
            raise ConfigError("not a serialized FCN model")
        config = payload["config"]
        model = FcnModel(config["input_length"],
                         filters=tuple(config["filters"]),
                         kernels=tuple(config["kernels"]),
                         strides=tuple(config["strides"]),
                         seed=config["seed"])
        for key, value in payload["params"].items():
            model.params[key] = np.array(value, dtype=np.float64)
        for key, value in payload["running"].items():
            model.running[key] = np.array(value, dtype=np.float64)
        return model

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.to_json())

    @staticmethod
    def load(path: str) -> "FcnModel":
        with open(path, "r", encoding="utf-8") as handle:
            return FcnModel.from_json(handle.read())


def gradient_check(model: FcnModel, x, y, epsilon: float = 1e-5,
                   max_checks_per_param: int | None = None,
                   seed: int = 0) -> float:
    """Worst relative error between analytic and central FD gradients.

    Runs in training mode without touching running statistics, so the
    loss is a pure function of the parameters.
    """
    labels = np.asarray(y, dtype=np.int64)
    _, grads = model.loss_and_grads(x, labels, training=True,
                                    update_running=False)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, param in model.params.items():
        flat = param.reshape(-1)
        indices = np.arange(flat.size)
        if max_checks_per_param is not None and \
                flat.size > max_checks_per_param:
            indices = rng.choice(flat.size, size=max_checks_per_param,
                                 replace=False)
        for index in indices:
            original = flat[index]
            flat[index] = original + epsilon
            plus = model.loss(x, labels, training=True)
            flat[index] = original - epsilon
            minus = model.loss(x, labels, training=True)
            flat[index] = original
            numeric = (plus - minus) / (2 * epsilon)
            analytic = grads[name].reshape(-1)[index]
            # floor the scale: gradients that are mathematically zero
            # (conv bias under training-mode BN) measure as FD noise
            scale = max(1e-6, abs(numeric) + abs(analytic))
            worst = max(worst, abs(numeric - analytic) / scale)
    return worst
