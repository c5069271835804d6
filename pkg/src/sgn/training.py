"""Next-sample classification training.

Cross-entropy over the network's per-position class predictions, exact
reverse-mode gradients, Adam-style adaptive-moment updates, and the forward
hyperparameter search that grows dilations (and then blocks) while held-out
loss keeps improving.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from sgn.codec import ClassSeries, Quantizer, fit_quantizer
from sgn.processes import SeriesF
from sgn.rng import RngStream
from sgn.wavenet import (
    NetConfig,
    backward_raw,
    build_network,
    dilation_schedule,
    forward_raw,
    param_shapes,
    receptive_field,
    softmax,
)


class TrainingDiverged(RuntimeError):
    """Raised when the training loss becomes non-finite or blows up."""


@dataclass
class TrainConfig:
    steps: int = 20000
    batch_size: int = 4
    crop_length: Optional[int] = None  # default: receptive_field + 256
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    train_count: int = 10000
    backtest_count: int = 2000
    margin_fraction: float = 0.005
    quantizer_scheme: str = "linear"
    log_every: int = 50

    def resolved_crop(self, config: NetConfig) -> int:
        crop = self.crop_length if self.crop_length is not None else receptive_field(config) + 256
        if crop <= receptive_field(config):
            raise ValueError("crop_length must exceed the receptive field")
        return crop


@dataclass
class TrainReport:
    loss_history: list[tuple[int, float]]
    backtest_loss: float
    backtest_accuracy: float
    wall_time_seconds: float
    final_train_loss: float


@dataclass
class SearchConfig:
    max_blocks: int = 9
    max_dilation_cap: int = 256
    improvement_threshold: float = 0.02
    budget_steps_per_trial: int = 2000

    def __post_init__(self):
        if self.max_dilation_cap & (self.max_dilation_cap - 1):
            raise ValueError("max_dilation_cap must be a power of two")
        if self.improvement_threshold <= 0:
            raise ValueError("improvement_threshold must be > 0")


def cross_entropy(logits_row: np.ndarray, target: int) -> float:
    """-log softmax(logits)[target], computed with the max shift."""
    logits_row = np.asarray(logits_row, dtype=np.float64)
    if not 0 <= target < logits_row.size:
        raise ValueError("target class out of range")
    m = logits_row.max()
    lse = m + math.log(np.exp(logits_row - m).sum())
    return float(lse - logits_row[target])


def batch_loss(params: dict[str, np.ndarray], config: NetConfig, crops: np.ndarray) -> float:
    """Mean cross-entropy of a batch of crops, forward pass only."""
    crops = np.asarray(crops, dtype=np.int64)
    if crops.ndim == 1:
        crops = crops[None, :]
    B, L = crops.shape
    rf = receptive_field(config)
    if L <= rf:
        raise ValueError("crops must be longer than the receptive field")
    logits = forward_raw(params, config, crops)
    probs = softmax(logits[:, rf - 1 : L - 1, :])
    targets = crops[:, rf:]
    picked = probs[np.arange(B)[:, None], np.arange(L - rf)[None, :], targets]
    return float(-np.log(np.maximum(picked, 1e-300)).mean())


def batch_loss_and_grads(params: dict[str, np.ndarray], config: NetConfig,
                         crops: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over all positions with a full receptive field in
    a batch of class crops [B, L], plus its exact gradients.

    Position t of a crop is predicted from positions <= t-1; the first
    receptive_field - 1 rows (incomplete field) carry no loss.
    """
    crops = np.asarray(crops, dtype=np.int64)
    if crops.ndim == 1:
        crops = crops[None, :]
    B, L = crops.shape
    rf = receptive_field(config)
    if L <= rf:
        raise ValueError("crops must be longer than the receptive field")
    logits, cache = forward_raw(params, config, crops, want_cache=True)

    # Row t predicts position t+1; usable rows are rf-1 .. L-2.
    probs = softmax(logits[:, rf - 1 : L - 1, :])
    targets = crops[:, rf:]
    n_valid = B * (L - rf)
    rows = np.arange(L - rf)
    picked = probs[np.arange(B)[:, None], rows[None, :], targets]
    loss = float(-np.log(np.maximum(picked, 1e-300)).mean())

    dlogits = np.zeros_like(logits)
    dvalid = probs.copy()
    dvalid[np.arange(B)[:, None], rows[None, :], targets] -= 1.0
    dlogits[:, rf - 1 : L - 1, :] = dvalid / n_valid
    grads = backward_raw(params, config, cache, dlogits)
    return loss, grads


def adam_init(params: dict[str, np.ndarray]) -> dict[str, dict[str, np.ndarray]]:
    return {name: {"m": np.zeros_like(v), "v": np.zeros_like(v)} for name, v in params.items()}


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: dict[str, dict[str, np.ndarray]], t: int, cfg: TrainConfig) -> None:
    """In-place adaptive-moment update with bias correction; t is 1-based."""
    if t < 1:
        raise ValueError("step index must be >= 1")
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, g in grads.items():
        st = state[name]
        st["m"] = b1 * st["m"] + (1.0 - b1) * g
        st["v"] = b2 * st["v"] + (1.0 - b2) * g * g
        params[name] -= cfg.learning_rate * (st["m"] / c1) / (np.sqrt(st["v"] / c2) + cfg.epsilon)


def evaluate_backtest(params: dict[str, np.ndarray], config: NetConfig, classes: np.ndarray,
                      split: int, count: int) -> tuple[float, float]:
    """Teacher-forced one-step-ahead cross-entropy and argmax accuracy over
    positions [split, split+count), with context drawn from before the split."""
    classes = np.asarray(classes, dtype=np.int64)
    rf = receptive_field(config)
    if split < rf:
        raise ValueError("split must be >= receptive field")
    a = split - rf
    window = classes[a : split + count]
    logits = forward_raw(params, config, window)
    # Row t of the raw output predicts absolute position a+t+1.
    rows = logits[rf - 1 : rf - 1 + count]
    targets = classes[split : split + count]
    probs = softmax(rows)
    picked = probs[np.arange(count), targets]
    loss = float(-np.log(np.maximum(picked, 1e-300)).mean())
    accuracy = float((rows.argmax(axis=1) == targets).mean())
    return loss, accuracy


def train(series: SeriesF, net_config: NetConfig, train_config: TrainConfig,
          quantizer: Optional[Quantizer] = None,
          initial_params: Optional[dict[str, np.ndarray]] = None,
          ) -> tuple[dict[str, np.ndarray], Quantizer, TrainReport]:
    """Train on random crops of the first train_count samples; report final
    cross-entropy and argmax accuracy on the following backtest_count.

    initial_params warm-starts from an earlier run (copied, not mutated);
    optimizer moments restart from zero, so staged runs with decreasing
    learning rates behave like a step schedule."""
    tc = train_config
    n = len(series)
    if n < tc.train_count + tc.backtest_count:
        raise ValueError(
            f"series has {n} samples; need train_count + backtest_count = "
            f"{tc.train_count + tc.backtest_count}")
    crop = tc.resolved_crop(net_config)
    if tc.train_count <= crop:
        raise ValueError("train_count must exceed crop_length")

    if quantizer is None:
        quantizer = fit_quantizer(series.values[: tc.train_count], net_config.num_classes,
                                  scheme=tc.quantizer_scheme, margin_fraction=tc.margin_fraction)
    classes = quantizer.quantize(series.values)

    if initial_params is not None:
        expected = param_shapes(net_config)
        if set(initial_params) != set(expected) or any(
                initial_params[k].shape != expected[k] for k in expected):
            raise ValueError("initial_params do not match the network configuration")
        params = {k: v.copy() for k, v in initial_params.items()}
    else:
        params = build_network(net_config, RngStream(tc.seed, stream_id=1))
    state = adam_init(params)
    crop_rng = RngStream(tc.seed, stream_id=2).generator()

    loss_cap = 10.0 * math.log(net_config.num_classes)
    history: list[tuple[int, float]] = []
    t0 = time.monotonic()
    loss = math.log(net_config.num_classes)
    for step in range(1, tc.steps + 1):
        starts = crop_rng.integers(0, tc.train_count - crop + 1, size=tc.batch_size)
        crops = np.stack([classes[s : s + crop] for s in starts])
        loss, grads = batch_loss_and_grads(params, net_config, crops)
        if not math.isfinite(loss) or loss > loss_cap:
            raise TrainingDiverged(f"training loss {loss} at step {step}")
        adam_step(params, grads, state, step, tc)
        if step % tc.log_every == 0 or step == 1 or step == tc.steps:
            history.append((step, loss))

    bt_loss, bt_acc = evaluate_backtest(params, net_config, classes, tc.train_count, tc.backtest_count)
    report = TrainReport(loss_history=history, backtest_loss=bt_loss, backtest_accuracy=bt_acc,
                         wall_time_seconds=time.monotonic() - t0, final_train_loss=loss)
    return params, quantizer, report


def hyper_search(series: Optional[SeriesF], search: SearchConfig, train_config: TrainConfig,
                 net_template: Optional[NetConfig] = None,
                 evaluator: Optional[Callable[[int, int], float]] = None,
                 ) -> tuple[NetConfig, list[tuple[int, int, float]]]:
    """Forward hyperparameter search.

    Starts at blocks=2, max_dilation=2.  While the relative backtest-loss
    improvement meets the threshold, the dilation cap doubles; when dilation
    growth stalls, a block is added (dilations reset to 2).  Returns the
    best configuration seen and the trial log [(blocks, max_dilation, loss)].

    evaluator(blocks, max_dilation) -> loss may be injected for testing;
    the default trains for budget_steps_per_trial steps and returns the
    backtest cross-entropy.
    """
    template = net_template or NetConfig()

    def make_config(blocks: int, max_d: int) -> NetConfig:
        return NetConfig(dilation_list=dilation_schedule(blocks, max_d),
                         filter_width=template.filter_width,
                         residual_channels=template.residual_channels,
                         skip_channels=template.skip_channels,
                         num_classes=template.num_classes)

    if evaluator is None:
        if series is None:
            raise ValueError("hyper_search needs a series unless an evaluator is injected")

        def evaluator(blocks: int, max_d: int) -> float:
            cfg = make_config(blocks, max_d)
            tc = TrainConfig(**{**train_config.__dict__, "steps": search.budget_steps_per_trial})
            _, _, report = train(series, cfg, tc)
            return report.backtest_loss

    trials: list[tuple[int, int, float]] = []

    def run(blocks: int, max_d: int) -> float:
        loss = float(evaluator(blocks, max_d))
        trials.append((blocks, max_d, loss))
        return loss

    def improves(current: float, candidate: float) -> bool:
        return (current - candidate) >= search.improvement_threshold * abs(current)

    blocks, max_d = 2, 2
    current = run(blocks, max_d)
    best = (blocks, max_d, current)
    while True:
        # Grow dilations while they keep paying off.
        while max_d * 2 <= search.max_dilation_cap:
            cand = run(blocks, max_d * 2)
            if not improves(current, cand):
                break
            max_d *= 2
            current = cand
            if cand < best[2]:
                best = (blocks, max_d, cand)
        # Dilation growth stalled: try one more block.
        if blocks + 1 > search.max_blocks:
            break
        cand = run(blocks + 1, 2)
        if not improves(current, cand):
            break
        blocks, max_d = blocks + 1, 2
        current = cand
        if cand < best[2]:
            best = (blocks, max_d, cand)

    return make_config(best[0], best[1]), trials


def _loss_extended(params: dict[str, np.ndarray], config: NetConfig, crops: np.ndarray) -> float:
    """Independent loss evaluation in extended precision (longdouble).

    Re-implements the forward pass directly so the finite-difference oracle
    shares no code with the path it checks, and so float64 roundoff does not
    drown the difference quotient for tiny gradients.
    """
    ld = np.longdouble
    w = config.filter_width
    rf = receptive_field(config)
    B, L = crops.shape
    p = {k: v.astype(ld) for k, v in params.items()}

    onehot = np.zeros((B, L, config.num_classes), dtype=ld)
    for b in range(B):
        onehot[b, np.arange(L), crops[b]] = 1.0

    def conv(x, weight, bias, d):
        out = np.zeros(x.shape[:2] + (weight.shape[2],), dtype=ld) + bias
        for j in range(w):
            s = (w - 1 - j) * d
            for t in range(s, L):
                out[:, t, :] += x[:, t - s, :] @ weight[j]
        return out

    h_ = conv(onehot, p["input.w"], p["input.b"], 1)
    skip = np.zeros((B, L, config.skip_channels), dtype=ld)
    for k, d in enumerate(config.dilation_list):
        pf = conv(h_, p[f"layer{k}.filter.w"], p[f"layer{k}.filter.b"], d)
        pg = conv(h_, p[f"layer{k}.gate.w"], p[f"layer{k}.gate.b"], d)
        z = np.tanh(pf) * (1.0 / (1.0 + np.exp(-pg)))
        skip = skip + z @ p[f"layer{k}.skip.w"] + p[f"layer{k}.skip.b"]
        h_ = h_ + z @ p[f"layer{k}.res.w"] + p[f"layer{k}.res.b"]
    r1 = np.maximum(skip, 0.0)
    r2 = np.maximum(r1 @ p["head.w1"] + p["head.b1"], 0.0)
    logits = r2 @ p["head.w2"] + p["head.b2"]

    total = ld(0.0)
    count = 0
    for b in range(B):
        for t in range(rf - 1, L - 1):
            row = logits[b, t]
            m = row.max()
            lse = m + np.log(np.exp(row - m).sum())
            total += lse - row[crops[b, t + 1]]
            count += 1
    return total / count


def finite_difference_check(config: NetConfig, seed: int = 0, crop_length: int = 16,
                            batch_size: int = 2, h: float = 1e-5) -> float:
    """Max relative error between reverse-mode and central finite-difference
    gradients over every parameter coordinate (denominators floored at 1e-8).

    The finite-difference side runs in extended precision via an independent
    forward implementation."""
    stream = RngStream(seed)
    base = build_network(config, stream)
    # Perturb the zero-initialized tensors too, so the check exercises the
    # whole network in a generic position.  Redraw if any relu input lands
    # within the finite-difference step of its kink, where central
    # differences are invalid for reasons unrelated to the gradient code.
    for attempt in range(100):
        g = stream.subgenerator(1 + attempt)
        params = {name: v + 0.1 * g.standard_normal(v.shape) for name, v in base.items()}
        crops = g.integers(0, config.num_classes, size=(batch_size, crop_length))
        _, cache = forward_raw(params, config, crops, want_cache=True)
        kink_margin = min(np.abs(cache["skip"]).min(), np.abs(cache["a1"]).min())
        if kink_margin > 100.0 * h:
            break
    else:
        raise RuntimeError("could not find a kink-free evaluation point")

    _, grads = batch_loss_and_grads(params, config, crops)

    max_rel = 0.0
    for name, tensor in params.items():
        flat = tensor.ravel()
        gflat = grads[name].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = _loss_extended(params, config, crops)
            flat[i] = orig - h
            lm = _loss_extended(params, config, crops)
            flat[i] = orig
            fd = float((lp - lm) / np.longdouble(2.0 * h))
            denom = max(abs(fd), abs(gflat[i]), 1e-8)
            max_rel = max(max_rel, abs(fd - gflat[i]) / denom)
    return max_rel
