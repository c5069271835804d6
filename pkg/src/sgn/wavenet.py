"""Dilated causal convolutional network with gated activations.

The forward pass, in 64-bit floats throughout:

* one-hot input over K classes -> initial causal conv (width 2, dilation 1)
  into residual channels;
* a stack of dilated causal conv layers, each computing
  z = tanh(filter conv) * logistic(gate conv), feeding a residual update
  and a skip accumulator;
* head: relu -> 1x1 conv -> relu -> 1x1 conv -> logits over K classes.

Causality comes from left zero-padding in one-hot space: position t never
reads positions beyond t.  Logits row i corresponds to input position
``receptive_field - 1 + i`` and parameterizes the distribution of the next
position's class.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from sgn.rng import RngStream


@dataclass(frozen=True)
class NetConfig:
    dilation_list: tuple[int, ...] = (1, 2, 4, 1, 2, 4, 1, 2, 4, 1, 2, 4, 1, 2, 4)
    filter_width: int = 2
    residual_channels: int = 32
    skip_channels: int = 256
    num_classes: int = 256

    def __post_init__(self):
        object.__setattr__(self, "dilation_list", tuple(int(d) for d in self.dilation_list))
        if not self.dilation_list:
            raise ValueError("dilation_list must be non-empty")
        if any(d < 1 for d in self.dilation_list):
            raise ValueError("dilations must be >= 1")
        if self.filter_width < 1:
            raise ValueError("filter_width must be >= 1")
        if min(self.residual_channels, self.skip_channels, self.num_classes) < 1:
            raise ValueError("channel counts must be positive")

    def to_dict(self) -> dict:
        return {
            "dilation_list": list(self.dilation_list),
            "filter_width": self.filter_width,
            "residual_channels": self.residual_channels,
            "skip_channels": self.skip_channels,
            "num_classes": self.num_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        return cls(dilation_list=tuple(d["dilation_list"]), filter_width=d["filter_width"],
                   residual_channels=d["residual_channels"], skip_channels=d["skip_channels"],
                   num_classes=d["num_classes"])


def dilation_schedule(blocks: int, max_dilation: int) -> tuple[int, ...]:
    """`blocks` repetitions of the doubling cycle [1, 2, 4, ..., max_dilation]."""
    if blocks < 1 or max_dilation < 1:
        raise ValueError("blocks and max_dilation must be >= 1")
    if max_dilation & (max_dilation - 1):
        raise ValueError("max_dilation must be a power of two")
    cycle = []
    d = 1
    while d <= max_dilation:
        cycle.append(d)
        d *= 2
    return tuple(cycle * blocks)


def receptive_field(config: NetConfig) -> int:
    """Trailing input positions that can influence one output position:
    the position itself, the initial causal conv, and each dilated layer."""
    return 1 + (config.filter_width - 1) * (1 + sum(config.dilation_list))


@dataclass
class LogitsSeq:
    """Per-position next-class logits; row i sits at input position
    first_valid_index + i."""

    logits: np.ndarray
    first_valid_index: int


def param_shapes(config: NetConfig) -> dict[str, tuple[int, ...]]:
    """Named parameter tensors in a fixed order (also the init draw order)."""
    w, R, S, K = config.filter_width, config.residual_channels, config.skip_channels, config.num_classes
    shapes: dict[str, tuple[int, ...]] = {"input.w": (w, K, R), "input.b": (R,)}
    for k in range(len(config.dilation_list)):
        shapes[f"layer{k}.filter.w"] = (w, R, R)
        shapes[f"layer{k}.filter.b"] = (R,)
        shapes[f"layer{k}.gate.w"] = (w, R, R)
        shapes[f"layer{k}.gate.b"] = (R,)
        shapes[f"layer{k}.res.w"] = (R, R)
        shapes[f"layer{k}.res.b"] = (R,)
        shapes[f"layer{k}.skip.w"] = (R, S)
        shapes[f"layer{k}.skip.b"] = (S,)
    shapes["head.w1"] = (S, S)
    shapes["head.b1"] = (S,)
    shapes["head.w2"] = (S, K)
    shapes["head.b2"] = (K,)
    return shapes


def build_network(config: NetConfig, rng: RngStream) -> dict[str, np.ndarray]:
    """Initialize parameters: fan-in-scaled uniform weights, zero biases.

    The output head's final conv and bias start at zero so the initial
    predictive distribution is exactly uniform (initial loss = ln K).
    """
    g = rng.generator()
    params: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(config).items():
        if name in ("head.w2", "head.b2") or name.endswith(".b"):
            params[name] = np.zeros(shape)
        else:
            fan_in = shape[0] * shape[1] if len(shape) == 3 else shape[0]
            lim = np.sqrt(1.0 / fan_in)
            params[name] = g.uniform(-lim, lim, size=shape)
    return params


def validate_params(params: dict[str, np.ndarray], config: NetConfig) -> None:
    shapes = param_shapes(config)
    if set(params) != set(shapes):
        raise ValueError("parameter names do not match the network config")
    for name, shape in shapes.items():
        if tuple(params[name].shape) != shape:
            raise ValueError(f"{name}: expected shape {shape}, got {params[name].shape}")
        if not np.all(np.isfinite(params[name])):
            raise ValueError(f"{name}: non-finite values")


def _shift(x: np.ndarray, s: int) -> np.ndarray:
    # x[:, t] <- x[:, t-s], zero-filled on the left.
    if s == 0:
        return x
    out = np.zeros_like(x)
    out[:, s:] = x[:, :-s]
    return out


def _backshift(x: np.ndarray, s: int) -> np.ndarray:
    # Adjoint of _shift: x[:, t] <- x[:, t+s], zero-filled on the right.
    if s == 0:
        return x
    out = np.zeros_like(x)
    out[:, :-s] = x[:, s:]
    return out


def _mm(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    B, T, Cin = x.shape
    return (x.reshape(B * T, Cin) @ w).reshape(B, T, -1)


def _tmm(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    B, T, Cx = x.shape
    return x.reshape(B * T, Cx).T @ y.reshape(B * T, -1)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _conv(h: np.ndarray, w: np.ndarray, b: np.ndarray, d: int, width: int) -> np.ndarray:
    out = np.broadcast_to(b, h.shape[:2] + (w.shape[2],)).copy()
    for j in range(width):
        s = (width - 1 - j) * d
        out += _mm(_shift(h, s), w[j])
    return out


def forward_raw(params: dict[str, np.ndarray], config: NetConfig, classes: np.ndarray,
                want_cache: bool = False):
    """Forward pass over a batch of class sequences [B, T].

    Returns logits [B, T, K] for every position (rows before the receptive
    field is filled see zero padding) and, optionally, the activation cache
    needed by the backward pass.
    """
    classes = np.asarray(classes, dtype=np.int64)
    squeeze = classes.ndim == 1
    if squeeze:
        classes = classes[None, :]
    B, T = classes.shape
    if classes.size and (classes.min() < 0 or classes.max() >= config.num_classes):
        raise ValueError("class index out of range")
    w = config.filter_width

    # Initial causal conv: one-hot matmul realized as an embedding gather;
    # left padding contributes nothing (zero one-hot vectors).
    win, bin_ = params["input.w"], params["input.b"]
    h = np.broadcast_to(bin_, (B, T, win.shape[2])).copy()
    for j in range(w):
        s = w - 1 - j
        if s < T:
            h[:, s:, :] += win[j][classes[:, : T - s]]

    skip = np.zeros((B, T, config.skip_channels))
    cache_layers = []
    for k, d in enumerate(config.dilation_list):
        pf = _conv(h, params[f"layer{k}.filter.w"], params[f"layer{k}.filter.b"], d, w)
        pg = _conv(h, params[f"layer{k}.gate.w"], params[f"layer{k}.gate.b"], d, w)
        tz = np.tanh(pf)
        gz = _sigmoid(pg)
        z = tz * gz
        skip += _mm(z, params[f"layer{k}.skip.w"]) + params[f"layer{k}.skip.b"]
        if want_cache:
            cache_layers.append((h, tz, gz))
        h = h + _mm(z, params[f"layer{k}.res.w"]) + params[f"layer{k}.res.b"]

    r1 = np.maximum(skip, 0.0)
    a1 = _mm(r1, params["head.w1"]) + params["head.b1"]
    r2 = np.maximum(a1, 0.0)
    logits = _mm(r2, params["head.w2"]) + params["head.b2"]

    if want_cache:
        cache = {"classes": classes, "layers": cache_layers, "skip": skip, "r1": r1, "a1": a1, "r2": r2}
        return logits, cache
    return logits[0] if squeeze else logits


def forward(params: dict[str, np.ndarray], config: NetConfig, classes: np.ndarray) -> LogitsSeq:
    """Forward pass returning only rows with a fully populated receptive
    field.  Row i predicts the class at position receptive_field + i."""
    rf = receptive_field(config)
    classes = np.asarray(classes, dtype=np.int64)
    if classes.ndim != 1:
        raise ValueError("forward expects a 1-D class sequence")
    if classes.size < rf:
        raise ValueError(f"input length {classes.size} shorter than receptive field {rf}")
    logits = forward_raw(params, config, classes)
    return LogitsSeq(logits=logits[rf - 1:], first_valid_index=rf - 1)


def backward_raw(params: dict[str, np.ndarray], config: NetConfig, cache: dict,
                 dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of sum(dlogits * logits) w.r.t. every
    parameter tensor.  dlogits must be zero at masked positions."""
    w = config.filter_width
    classes = cache["classes"]
    B, T = classes.shape
    grads: dict[str, np.ndarray] = {}

    r1, a1, r2, skip = cache["r1"], cache["a1"], cache["r2"], cache["skip"]
    grads["head.w2"] = _tmm(r2, dlogits)
    grads["head.b2"] = dlogits.sum(axis=(0, 1))
    dr2 = _mm(dlogits, params["head.w2"].T)
    da1 = dr2 * (a1 > 0)
    grads["head.w1"] = _tmm(r1, da1)
    grads["head.b1"] = da1.sum(axis=(0, 1))
    dr1 = _mm(da1, params["head.w1"].T)
    dskip = dr1 * (skip > 0)

    dh = np.zeros((B, T, config.residual_channels))
    for k in reversed(range(len(config.dilation_list))):
        d = config.dilation_list[k]
        h_in, tz, gz = cache["layers"][k]
        z = tz * gz
        grads[f"layer{k}.res.w"] = _tmm(z, dh)
        grads[f"layer{k}.res.b"] = dh.sum(axis=(0, 1))
        grads[f"layer{k}.skip.w"] = _tmm(z, dskip)
        grads[f"layer{k}.skip.b"] = dskip.sum(axis=(0, 1))
        dz = _mm(dskip, params[f"layer{k}.skip.w"].T) + _mm(dh, params[f"layer{k}.res.w"].T)
        dpf = dz * gz * (1.0 - tz * tz)
        dpg = dz * tz * gz * (1.0 - gz)
        dh_in = dh.copy()  # residual passthrough
        wf, wg = params[f"layer{k}.filter.w"], params[f"layer{k}.gate.w"]
        dwf = np.empty_like(wf)
        dwg = np.empty_like(wg)
        for j in range(w):
            s = (w - 1 - j) * d
            h_shift = _shift(h_in, s)
            dwf[j] = _tmm(h_shift, dpf)
            dwg[j] = _tmm(h_shift, dpg)
            dh_in += _backshift(_mm(dpf, wf[j].T) + _mm(dpg, wg[j].T), s)
        grads[f"layer{k}.filter.w"] = dwf
        grads[f"layer{k}.filter.b"] = dpf.sum(axis=(0, 1))
        grads[f"layer{k}.gate.w"] = dwg
        grads[f"layer{k}.gate.b"] = dpg.sum(axis=(0, 1))
        dh = dh_in

    win = params["input.w"]
    dwin = np.zeros_like(win)
    for j in range(w):
        s = w - 1 - j
        if s < T:
            np.add.at(dwin[j], classes[:, : T - s].ravel(),
                      dh[:, s:, :].reshape(-1, dh.shape[2]))
    grads["input.w"] = dwin
    grads["input.b"] = dh.sum(axis=(0, 1))
    return grads


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-shifted softmax over the last axis."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("softmax requires finite logits")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def parameter_count(config: NetConfig) -> int:
    return sum(int(np.prod(s)) for s in param_shapes(config).values())
