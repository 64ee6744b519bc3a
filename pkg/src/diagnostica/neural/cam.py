"""Class activation heatmaps for the FCN classifier.

Both methods look at A, the post-ReLU activations of the last conv
block (the tensor global average pooling consumes):

* Grad-CAM weighs each channel by the time-averaged gradient of the
  target logit and rectifies the weighted sum.
* HiResCAM multiplies the gradient elementwise before summing, which
  keeps location-specific gradient structure.

With a GAP head the logit is linear in A, so the gradient is exactly
``dense_w[target] / T`` at every time step, and the two methods agree
to machine precision.  Heatmaps are resampled to input length and
scaled to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .fcn import FcnModel

GRAD_CAM = "grad-cam"
HIRES_CAM = "hires-cam"
METHODS = (GRAD_CAM, HIRES_CAM)


@dataclass(frozen=True)
class Heatmap:
    """Per-sample relevance of one series for one predicted class."""

    values: tuple[float, ...]
    method: str
    target_class: int

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.values))

    def to_json(self) -> dict:
        return {"values": list(self.values), "method": self.method,
                "target_class": self.target_class}


def _activations_and_gradient(model: FcnModel, series,
                              target_class: int):
    logits, cache = model.forward(series, training=False)
    activations = cache["last_activations"][0]  # (channels, T')
    length = activations.shape[1]
    # d logit / d A: GAP then dense is linear, gradient is constant in t
    channel_grad = model.params["dense_w"][target_class] / length
    gradient = np.repeat(channel_grad[:, None], length, axis=1)
    return activations, gradient, logits


def _finish(raw: np.ndarray, input_length: int, method: str,
            target_class: int) -> Heatmap:
    raw = np.maximum(raw, 0.0)
    if raw.shape[0] != input_length:
        source = np.linspace(0.0, 1.0, num=raw.shape[0])
        target = np.linspace(0.0, 1.0, num=input_length)
        raw = np.interp(target, source, raw)
    peak = raw.max()
    if peak > 0:
        raw = raw / peak
    return Heatmap(tuple(float(v) for v in raw), method, target_class)


def grad_cam(model: FcnModel, series, target_class: int | None = None
             ) -> Heatmap:
    """Channel-weighted saliency; defaults to the predicted class."""
    if target_class is None:
        target_class = int(model.predict(series)[0])
    activations, gradient, _ = _activations_and_gradient(
        model, series, target_class)
    weights = gradient.mean(axis=1)
    raw = np.tensordot(weights, activations, axes=(0, 0))
    return _finish(raw, model.input_length, GRAD_CAM, target_class)


def hires_cam(model: FcnModel, series, target_class: int | None = None
              ) -> Heatmap:
    """Elementwise gradient-weighted saliency."""
    if target_class is None:
        target_class = int(model.predict(series)[0])
    activations, gradient, _ = _activations_and_gradient(
        model, series, target_class)
    raw = (gradient * activations).sum(axis=0)
    return _finish(raw, model.input_length, HIRES_CAM, target_class)


def compute_heatmap(model: FcnModel, series, method: str = GRAD_CAM,
                    target_class: int | None = None) -> Heatmap:
    if method == GRAD_CAM:
        return grad_cam(model, series, target_class)
    if method == HIRES_CAM:
        return hires_cam(model, series, target_class)
    raise ConfigError(f"unknown saliency method {method!r}; "
                      f"expected one of {METHODS}")


def render_svg(series, heatmap: Heatmap, width: int = 800,
               height: int = 200) -> str:
    """Standalone SVG: signal polyline over per-sample relevance shading."""
    values = np.asarray(series, dtype=np.float64)
    if values.ndim != 1 or values.size != len(heatmap.values):
        raise ConfigError("series and heatmap lengths differ")
    n = values.size
    span = values.max() - values.min()
    span = span if span > 0 else 1.0
    xs = np.linspace(0, width, num=n)
    ys = height - (values - values.min()) / span * (height * 0.9) \
        - height * 0.05
    cell = width / n
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">']
    for i, weight in enumerate(heatmap.values):
        if weight <= 0:
            continue
        parts.append(
            f'<rect x="{i * cell:.2f}" y="0" width="{cell:.2f}" '
            f'height="{height}" fill="rgb(255,64,0)" '
            f'opacity="{0.75 * weight:.3f}"/>')
    points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    parts.append(f'<polyline points="{points}" fill="none" '
                 'stroke="#103050" stroke-width="1.5"/>')
    parts.append("</svg>")
    return "".join(parts)
