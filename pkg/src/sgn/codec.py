"""8-bit style quantization codec.

Maps real-valued series onto K discrete classes and back.  The default
scheme is linear binning over a fitted range; mu-law companding is available
for parity experiments with audio-style encodings.  Decoding returns bin
centers so the round-trip error is symmetric and bounded by half a bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from sgn.processes import SeriesF

LINEAR = "linear"
MULAW = "mulaw"


@dataclass(frozen=True)
class Quantizer:
    num_classes: int = 256
    lo: float = -1.0
    hi: float = 1.0
    scheme: str = LINEAR
    mu: float = 255.0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if not self.hi > self.lo:
            raise ValueError("hi must be > lo")
        if self.scheme not in (LINEAR, MULAW):
            raise ValueError(f"unknown scheme '{self.scheme}'")
        if self.scheme == MULAW and self.mu <= 0:
            raise ValueError("mu must be > 0")

    def quantize(self, x) -> np.ndarray:
        """Map values to class indices in [0, K); out-of-range values clamp
        to the edge classes."""
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise ValueError("cannot quantize non-finite values")
        u = (x - self.lo) / (self.hi - self.lo)
        if self.scheme == MULAW:
            s = np.clip(2.0 * u - 1.0, -1.0, 1.0)
            y = np.sign(s) * np.log1p(self.mu * np.abs(s)) / math.log1p(self.mu)
            u = (y + 1.0) / 2.0
        cls = np.floor(u * self.num_classes).astype(np.int64)
        return np.clip(cls, 0, self.num_classes - 1)

    def dequantize(self, cls) -> np.ndarray:
        """Map class indices to their bin-center values."""
        cls = np.asarray(cls, dtype=np.int64)
        if np.any(cls < 0) or np.any(cls >= self.num_classes):
            raise ValueError("class index out of range")
        center = (cls + 0.5) / self.num_classes
        if self.scheme == MULAW:
            y = 2.0 * center - 1.0
            s = np.sign(y) * (np.power(1.0 + self.mu, np.abs(y)) - 1.0) / self.mu
            center = (s + 1.0) / 2.0
        return self.lo + center * (self.hi - self.lo)

    def to_dict(self) -> dict:
        d = {"num_classes": self.num_classes, "lo": self.lo, "hi": self.hi, "scheme": self.scheme}
        if self.scheme == MULAW:
            d["mu"] = self.mu
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Quantizer":
        return cls(num_classes=d["num_classes"], lo=d["lo"], hi=d["hi"],
                   scheme=d["scheme"], mu=d.get("mu", 255.0))


@dataclass
class ClassSeries:
    """A series of integer class indices over a K-symbol alphabet."""

    classes: np.ndarray
    num_classes: int
    quantizer: Optional[Quantizer] = None

    def __post_init__(self):
        self.classes = np.asarray(self.classes, dtype=np.int64)
        if self.classes.ndim != 1:
            raise ValueError("classes must be 1-D")
        if self.classes.size and (self.classes.min() < 0 or self.classes.max() >= self.num_classes):
            raise ValueError("class index out of range")

    def __len__(self) -> int:
        return self.classes.size


def fit_quantizer(series: Union[SeriesF, np.ndarray], num_classes: int = 256,
                  scheme: str = LINEAR, margin_fraction: float = 0.005,
                  mu: float = 255.0) -> Quantizer:
    """Fit the quantization range to a series.

    The range is [min - m*range, max + m*range]; a degenerate (constant)
    series expands by one unit on each side.
    """
    values = series.values if isinstance(series, SeriesF) else np.asarray(series, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot fit a quantizer on an empty series")
    if not np.all(np.isfinite(values)):
        raise ValueError("series contains non-finite values")
    if margin_fraction < 0:
        raise ValueError("margin_fraction must be >= 0")
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo
    if span == 0.0:
        lo, hi = lo - 1.0, hi + 1.0
    else:
        lo, hi = lo - margin_fraction * span, hi + margin_fraction * span
    return Quantizer(num_classes=num_classes, lo=lo, hi=hi, scheme=scheme, mu=mu)


def encode(q: Quantizer, series: SeriesF) -> ClassSeries:
    return ClassSeries(classes=q.quantize(series.values), num_classes=q.num_classes, quantizer=q)


def decode(q: Quantizer, cs: ClassSeries, dt: float = 1.0) -> SeriesF:
    return SeriesF(values=q.dequantize(cs.classes), dt=dt)
