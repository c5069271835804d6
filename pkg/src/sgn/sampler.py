"""Autoregressive generation and backtesting.

Deterministic mode ranks the softmax output and takes its top class
(lowest index on ties); stochastic mode draws one class per step by
inverse-CDF on a single uniform.  Multiple stochastic simulations run on
independent substreams and are stepped together so the per-step network
evaluation is batched.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from sgn.codec import ClassSeries, Quantizer
from sgn.processes import SeriesF
from sgn.rng import RngStream
from sgn.wavenet import NetConfig, forward_raw, receptive_field, softmax

DETERMINISTIC = "deterministic"
STOCHASTIC = "stochastic"


@dataclass
class GenRequest:
    context: ClassSeries
    horizon: int
    mode: str = STOCHASTIC
    rng: Optional[RngStream] = None
    sims: int = 1

    def __post_init__(self):
        if self.mode not in (DETERMINISTIC, STOCHASTIC):
            raise ValueError(f"unknown mode '{self.mode}'")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.sims < 1:
            raise ValueError("sims must be >= 1")
        if self.mode == STOCHASTIC and self.rng is None:
            raise ValueError("stochastic mode needs an RngStream")


def next_distribution(params: dict[str, np.ndarray], config: NetConfig,
                      context: ClassSeries) -> np.ndarray:
    """Distribution of the next class given the trailing receptive-field
    window of the context."""
    rf = receptive_field(config)
    if len(context) < rf:
        raise ValueError(f"context length {len(context)} shorter than receptive field {rf}")
    window = context.classes[-rf:]
    logits = forward_raw(params, config, window)
    return softmax(logits[-1])


def step_windows(params: dict[str, np.ndarray], config: NetConfig, windows: np.ndarray,
                  horizon: int, mode: str, gens: Optional[list[np.random.Generator]]) -> np.ndarray:
    """Advance a batch of trailing windows [S, rf] by horizon steps; returns
    the generated classes [S, horizon]."""
    S = windows.shape[0]
    out = np.empty((S, horizon), dtype=np.int64)
    windows = windows.copy()
    for step in range(horizon):
        logits = forward_raw(params, config, windows)
        probs = softmax(logits[:, -1, :])
        if mode == DETERMINISTIC:
            chosen = probs.argmax(axis=1)
        else:
            cdf = np.cumsum(probs, axis=1)
            chosen = np.empty(S, dtype=np.int64)
            for i in range(S):
                u = gens[i].random()
                chosen[i] = min(int(np.searchsorted(cdf[i], u, side="right")), probs.shape[1] - 1)
        out[:, step] = chosen
        windows = np.concatenate([windows[:, 1:], chosen[:, None]], axis=1)
    return out


def generate_series(params: dict[str, np.ndarray], config: NetConfig, quantizer: Quantizer,
                    request: GenRequest, dt: float = 1.0,
                    ) -> tuple[list[SeriesF], list[ClassSeries]]:
    """Generate request.sims series of length request.horizon."""
    rf = receptive_field(config)
    if len(request.context) < rf:
        raise ValueError(f"context length {len(request.context)} shorter than receptive field {rf}")
    window = request.context.classes[-rf:]

    if request.mode == DETERMINISTIC:
        if request.sims > 1:
            warnings.warn("deterministic mode ignores sims; all series are identical")
        classes = step_windows(params, config, window[None, :], request.horizon, DETERMINISTIC, None)
        classes = np.repeat(classes, request.sims, axis=0)
    else:
        windows = np.repeat(window[None, :], request.sims, axis=0)
        gens = request.rng.generators(request.sims)
        classes = step_windows(params, config, windows, request.horizon, STOCHASTIC, gens)

    class_series = [ClassSeries(classes=row, num_classes=config.num_classes, quantizer=quantizer)
                    for row in classes]
    series = [SeriesF(values=quantizer.dequantize(cs.classes), dt=dt) for cs in class_series]
    return series, class_series


@dataclass
class BacktestRow:
    t: int
    true_class: int
    predicted_class: int
    predicted_value: float
    true_value: float


@dataclass
class BacktestResult:
    rows: list[BacktestRow]
    one_step_accuracy: float
    free_run: SeriesF
    free_run_classes: ClassSeries


def backtest(params: dict[str, np.ndarray], config: NetConfig, quantizer: Quantizer,
             series: SeriesF, split: int) -> BacktestResult:
    """Teacher-forced one-step argmax predictions over [split, len), plus a
    deterministic free run of the same horizon seeded at the split."""
    rf = receptive_field(config)
    n = len(series)
    if not rf <= split < n:
        raise ValueError("split must be in [receptive_field, len)")
    classes = quantizer.quantize(series.values)
    horizon = n - split

    a = split - rf
    logits = forward_raw(params, config, classes[a:n])
    pred_rows = logits[rf - 1 : rf - 1 + horizon]
    preds = pred_rows.argmax(axis=1)
    rows = []
    for i in range(horizon):
        t = split + i
        rows.append(BacktestRow(
            t=t, true_class=int(classes[t]), predicted_class=int(preds[i]),
            predicted_value=float(quantizer.dequantize(int(preds[i]))),
            true_value=float(series.values[t])))
    accuracy = float((preds == classes[split:n]).mean())

    context = ClassSeries(classes=classes[:split], num_classes=config.num_classes, quantizer=quantizer)
    request = GenRequest(context=context, horizon=horizon, mode=DETERMINISTIC)
    free_series, free_classes = generate_series(params, config, quantizer, request, dt=series.dt)
    return BacktestResult(rows=rows, one_step_accuracy=accuracy,
                          free_run=free_series[0], free_run_classes=free_classes[0])


def zero_context(config: NetConfig, quantizer: Quantizer) -> ClassSeries:
    """A receptive-field-long context of quantize(0), mirroring training sets
    whose first samples are zero."""
    rf = receptive_field(config)
    zero_class = int(quantizer.quantize(0.0))
    return ClassSeries(classes=np.full(rf, zero_class, dtype=np.int64),
                       num_classes=config.num_classes, quantizer=quantizer)
