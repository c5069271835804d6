"""File formats: CSV series, JSON model files and reports, run manifests,
and minimal SVG line plots.

All writes are whole-file atomic (temp file + rename).  Floats serialize
via Python's shortest round-trip repr, so write -> read -> write is
byte-identical.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict
from typing import Optional, Sequence

import numpy as np

from sgn.codec import Quantizer
from sgn.wavenet import NetConfig, param_shapes, validate_params

MODEL_FORMAT_VERSION = 1


class ModelFileError(ValueError):
    """Raised for corrupt or inconsistent model files."""


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_series_csv(path: str, values: np.ndarray, dt: float = 1.0) -> None:
    """CSV with header t,value; t = i*dt."""
    lines = ["t,value"]
    for i, v in enumerate(np.asarray(values, dtype=np.float64)):
        lines.append(f"{repr(i * dt)},{repr(float(v))}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_series_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Returns (t, value) arrays from a t,value CSV."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("t,"):
            raise ValueError(f"{path}: expected a 't,...' header, got '{header}'")
        t, values = [], []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            t.append(float(parts[0]))
            values.append(float(parts[1]))
    if not values:
        raise ValueError(f"{path}: no data rows")
    return np.array(t), np.array(values)


def write_sim_csv(path: str, classes: np.ndarray, values: np.ndarray, dt: float = 1.0) -> None:
    """CSV with header t,class,value for generated simulations."""
    lines = ["t,class,value"]
    for i, (c, v) in enumerate(zip(classes, values)):
        lines.append(f"{repr(i * dt)},{int(c)},{repr(float(v))}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_sim_csv(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "t,class,value":
            raise ValueError(f"{path}: expected header 't,class,value', got '{header}'")
        t, cls, values = [], [], []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            a, b, c = line.split(",")
            t.append(float(a))
            cls.append(int(b))
            values.append(float(c))
    return np.array(t), np.array(cls, dtype=np.int64), np.array(values)


def _json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1)


def write_json(path: str, obj) -> None:
    atomic_write_text(path, _json_dumps(obj) + "\n")


def save_model(path: str, params: dict[str, np.ndarray], config: NetConfig,
               quantizer: Quantizer, training_meta: Optional[dict] = None) -> None:
    validate_params(params, config)
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "net_config": config.to_dict(),
        "quantizer": quantizer.to_dict(),
        "tensors": {
            name: {"shape": list(t.shape), "data": [float(v) for v in t.ravel()]}
            for name, t in params.items()
        },
        "training_meta": training_meta or {},
    }
    write_json(path, doc)


def load_model(path: str) -> tuple[dict[str, np.ndarray], NetConfig, Quantizer, dict]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: not valid JSON ({exc})") from exc
    try:
        if doc["format_version"] != MODEL_FORMAT_VERSION:
            raise ModelFileError(f"{path}: unsupported format_version {doc['format_version']}")
        config = NetConfig.from_dict(doc["net_config"])
        quantizer = Quantizer.from_dict(doc["quantizer"])
        params = {}
        for name, entry in doc["tensors"].items():
            params[name] = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFileError):
            raise
        raise ModelFileError(f"{path}: malformed model file ({exc})") from exc
    try:
        validate_params(params, config)
    except ValueError as exc:
        raise ModelFileError(f"{path}: {exc}") from exc
    return params, config, quantizer, doc.get("training_meta", {})


def write_manifest(path: str, command: str, argv: Sequence[str], seeds: dict,
                   inputs: Sequence[str], outputs: Sequence[str], parameters: dict,
                   timestamp: str) -> None:
    write_json(path, {
        "command": command,
        "argv": list(argv),
        "seeds": seeds,
        "inputs": list(inputs),
        "outputs": list(outputs),
        "parameters": parameters,
        "timestamp": timestamp,
    })


# ---------------------------------------------------------------------------
# Minimal SVG line plots (axes + legend + polylines), no plotting dependency.

_SVG_W, _SVG_H = 900, 420
_MARGIN = 50


def _scale(points: np.ndarray, lo: float, hi: float, out_lo: float, out_hi: float) -> np.ndarray:
    span = hi - lo if hi > lo else 1.0
    return out_lo + (points - lo) / span * (out_hi - out_lo)


def render_line_svg(path: str, curves: Sequence[dict], title: str = "") -> None:
    """Render curves [{x, y, label, color, dashed}] into a standalone SVG."""
    xs = np.concatenate([np.asarray(c["x"], dtype=np.float64) for c in curves])
    ys = np.concatenate([np.asarray(c["y"], dtype=np.float64) for c in curves])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<line x1="{_MARGIN}" y1="{_SVG_H - _MARGIN}" x2="{_SVG_W - _MARGIN}" '
        f'y2="{_SVG_H - _MARGIN}" stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" y2="{_SVG_H - _MARGIN}" stroke="black"/>',
    ]
    if title:
        parts.append(f'<text x="{_SVG_W // 2}" y="24" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="15">{title}</text>')
    for lab, val in (("%.6g" % x_lo, _MARGIN), ("%.6g" % x_hi, _SVG_W - _MARGIN)):
        parts.append(f'<text x="{val}" y="{_SVG_H - _MARGIN + 18}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{lab}</text>')
    for lab, val in (("%.6g" % y_lo, _SVG_H - _MARGIN), ("%.6g" % y_hi, _MARGIN)):
        parts.append(f'<text x="{_MARGIN - 6}" y="{val + 4}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{lab}</text>')

    legend_y = _MARGIN
    for c in curves:
        x = _scale(np.asarray(c["x"], dtype=np.float64), x_lo, x_hi, _MARGIN, _SVG_W - _MARGIN)
        y = _scale(np.asarray(c["y"], dtype=np.float64), y_lo, y_hi, _SVG_H - _MARGIN, _MARGIN)
        pts = " ".join(f"{px:.2f},{py:.2f}" for px, py in zip(x, y))
        dash = ' stroke-dasharray="6,4"' if c.get("dashed") else ""
        color = c.get("color", "black")
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2"{dash} points="{pts}"/>')
        if c.get("label"):
            parts.append(f'<line x1="{_SVG_W - 200}" y1="{legend_y}" x2="{_SVG_W - 170}" '
                         f'y2="{legend_y}" stroke="{color}"{dash}/>')
            parts.append(f'<text x="{_SVG_W - 164}" y="{legend_y + 4}" font-family="sans-serif" '
                         f'font-size="12">{c["label"]}</text>')
            legend_y += 18
    parts.append("</svg>")
    atomic_write_text(path, "\n".join(parts) + "\n")


def render_strip_svg(path: str, parameters: dict, title: str = "") -> None:
    """Strip plot of Monte-Carlo estimate distributions: one column per
    parameter, grey estimate dots, red median rule, blue true-value rule."""
    names = list(parameters)
    n = len(names)
    col_w = (_SVG_W - 2 * _MARGIN) / max(n, 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{_SVG_W // 2}" y="24" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="15">{title}</text>')
    for i, name in enumerate(names):
        info = parameters[name]
        values = np.asarray(info["all_estimates"], dtype=np.float64)
        lo = min(values.min(), info["true"])
        hi = max(values.max(), info["true"])
        if hi == lo:
            lo, hi = lo - 1.0, hi + 1.0
        x0 = _MARGIN + i * col_w
        xc = x0 + col_w / 2.0
        y = _scale(values, lo, hi, _SVG_H - _MARGIN, _MARGIN)
        jitter = _scale(np.arange(values.size, dtype=np.float64), 0, max(values.size - 1, 1),
                        xc - col_w * 0.25, xc + col_w * 0.25)
        for px, py in zip(jitter, y):
            parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="2" fill="grey" fill-opacity="0.6"/>')
        y_med = _scale(np.array([info["median"]]), lo, hi, _SVG_H - _MARGIN, _MARGIN)[0]
        y_true = _scale(np.array([info["true"]]), lo, hi, _SVG_H - _MARGIN, _MARGIN)[0]
        parts.append(f'<line x1="{x0 + 8:.2f}" y1="{y_med:.2f}" x2="{x0 + col_w - 8:.2f}" '
                     f'y2="{y_med:.2f}" stroke="red" stroke-width="2"/>')
        parts.append(f'<line x1="{x0 + 8:.2f}" y1="{y_true:.2f}" x2="{x0 + col_w - 8:.2f}" '
                     f'y2="{y_true:.2f}" stroke="blue" stroke-width="2"/>')
        parts.append(f'<text x="{xc:.2f}" y="{_SVG_H - _MARGIN + 18}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="12">{name}</text>')
    parts.append("</svg>")
    atomic_write_text(path, "\n".join(parts) + "\n")
