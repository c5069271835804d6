"""Structural parameter estimation and Monte-Carlo aggregation.

Estimators for the four processes whose parameters the pipeline validates:
AR(1) by ordinary least squares, ARMA(1,1) by conditional sum of squares,
ARCH(1) by Gaussian quasi-maximum likelihood, and the mean-reverting
diffusion by inverting its exact AR(1) discretization.  A report collects
per-parameter medians and quantiles over many fitted simulations against
the known true values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from sgn.processes import AR1, ARCH1, ARMA11, OU, ProcessSpec, SeriesF


class EstimationError(RuntimeError):
    """Raised when a report cannot be built (e.g. zero converged fits)."""


@dataclass
class FitResult:
    process_kind: str
    estimates: dict[str, float]
    converged: bool
    loglik_or_ssr: float


@dataclass
class EstimateReport:
    process_kind: str
    parameters: dict[str, dict]  # name -> {true, median, quantiles, all_estimates}
    num_sims: int
    num_converged: int

    def to_dict(self) -> dict:
        return {
            "process_kind": self.process_kind,
            "num_sims": self.num_sims,
            "num_converged": self.num_converged,
            "parameters": self.parameters,
        }


def _values(series) -> np.ndarray:
    return series.values if isinstance(series, SeriesF) else np.asarray(series, dtype=np.float64)


def fit_ar1(series) -> FitResult:
    """OLS of x_t on (1, x_{t-1})."""
    x = _values(series)
    if x.size < 10:
        raise ValueError("need at least 10 samples")
    y, lag = x[1:], x[:-1]
    if np.ptp(lag) == 0.0:
        return FitResult("ar1", {}, converged=False, loglik_or_ssr=math.inf)
    design = np.column_stack([np.ones_like(lag), lag])
    (c, phi), ssr_arr, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ (c, phi)
    ssr = float(resid @ resid)
    m = y.size
    sigma = math.sqrt(ssr / (m - 2)) if m > 2 else 0.0
    return FitResult("ar1", {"phi": float(phi), "c": float(c), "sigma_eps": sigma},
                     converged=True, loglik_or_ssr=ssr)


def arma11_css(x: np.ndarray, phi: float, theta: float, c: float) -> float:
    """Conditional sum of squared innovations with eps_0 = 0."""
    u = x[1:] - c - phi * x[:-1]
    eps = lfilter([1.0], [1.0, theta], u)
    return float(eps @ eps)


_ARMA_STARTS = [(-0.5, -0.5), (-0.5, 0.5), (0.0, 0.0), (0.3, -0.3),
                (0.5, 0.5), (0.7, -0.5), (0.8, 0.3), (0.9, -0.1)]


def fit_arma11(series) -> FitResult:
    """Conditional-sum-of-squares fit of (phi, theta, c) by simplex descent
    from 8 spread starts, with |phi| < 1 and |theta| < 1 enforced through a
    tanh reparameterization."""
    x = _values(series)
    if x.size < 50:
        raise ValueError("need at least 50 samples")

    def objective(p: np.ndarray) -> float:
        phi, theta = math.tanh(p[0]), math.tanh(p[1])
        return arma11_css(x, phi, theta, p[2])

    mean = float(x.mean())
    best = None
    any_converged = False
    for phi0, theta0 in _ARMA_STARTS:
        p0 = np.array([math.atanh(phi0) if phi0 else 0.0,
                       math.atanh(theta0) if theta0 else 0.0,
                       mean * (1.0 - phi0)])
        res = minimize(objective, p0, method="Nelder-Mead",
                       options={"xatol": 1e-8, "fatol": 1e-8, "maxiter": 2000})
        if not np.isfinite(res.fun):
            continue
        any_converged = any_converged or res.success
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not any_converged:
        return FitResult("arma11", {}, converged=False, loglik_or_ssr=math.inf)

    phi, theta = math.tanh(best.x[0]), math.tanh(best.x[1])
    c = float(best.x[2])
    m = x.size - 1
    sigma = math.sqrt(best.fun / (m - 3)) if m > 3 else 0.0
    return FitResult("arma11", {"phi": phi, "theta_ma": theta, "c": c, "sigma_eps": sigma},
                     converged=True, loglik_or_ssr=float(best.fun))


def arch1_loglik(x: np.ndarray, c: float, phi1: float) -> float:
    """Gaussian quasi-log-likelihood with h_t^2 = c + phi1 * x_{t-1}^2."""
    h2 = c + phi1 * x[:-1] ** 2
    if np.any(h2 <= 0):
        return -math.inf
    return float(-0.5 * np.sum(np.log(h2) + x[1:] ** 2 / h2))


_PHI1_MAX = 0.999


def fit_arch1(series) -> FitResult:
    """Gaussian QMLE over (c > 0, 0 <= phi1 < 1), via c = exp(u) and a
    logistic squashing of phi1, simplex descent with restarts."""
    x = _values(series)
    if x.size < 100:
        raise ValueError("need at least 100 samples")
    var = float(x.var())
    if var == 0.0:
        return FitResult("arch1", {}, converged=False, loglik_or_ssr=-math.inf)

    def objective(p: np.ndarray) -> float:
        c = math.exp(p[0])
        phi1 = _PHI1_MAX / (1.0 + math.exp(-p[1]))
        ll = arch1_loglik(x, c, phi1)
        return -ll if math.isfinite(ll) else 1e300

    best = None
    any_converged = False
    for u0 in (math.log(var / 2.0), math.log(var)):
        for v0 in (-2.0, -0.5, 0.5, 2.0):
            res = minimize(objective, np.array([u0, v0]), method="Nelder-Mead",
                           options={"xatol": 1e-8, "fatol": 1e-8, "maxiter": 2000})
            if not np.isfinite(res.fun) or res.fun >= 1e300:
                continue
            any_converged = any_converged or res.success
            if best is None or res.fun < best.fun:
                best = res
    if best is None or not any_converged:
        return FitResult("arch1", {}, converged=False, loglik_or_ssr=-math.inf)

    c = math.exp(best.x[0])
    phi1 = _PHI1_MAX / (1.0 + math.exp(-best.x[1]))
    return FitResult("arch1", {"c": c, "phi1": phi1}, converged=True,
                     loglik_or_ssr=float(-best.fun))


def fit_ou(series, dt: float = 1.0) -> FitResult:
    """Invert the exact OU discretization: an AR(1) fit gives phi = e^{-theta dt},
    the intercept gives the long-run mean, and the residual scale maps back to
    the diffusion volatility.  Requires the fitted slope in (0, 1)."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    ar = fit_ar1(series)
    if not ar.converged:
        return FitResult("ou", {}, converged=False, loglik_or_ssr=ar.loglik_or_ssr)
    phi = ar.estimates["phi"]
    if not 0.0 < phi < 1.0:
        return FitResult("ou", {}, converged=False, loglik_or_ssr=ar.loglik_or_ssr)
    theta = -math.log(phi) / dt
    mu = ar.estimates["c"] / (1.0 - phi)
    sig_resid = ar.estimates["sigma_eps"]
    sigma = sig_resid * math.sqrt(2.0 * theta / (1.0 - math.exp(-2.0 * theta * dt)))
    return FitResult("ou", {"theta": theta, "mu": mu, "sigma": sigma},
                     converged=True, loglik_or_ssr=ar.loglik_or_ssr)


FITTERS = {"ar1": fit_ar1, "arma11": fit_arma11, "arch1": fit_arch1, "ou": fit_ou}

# Parameter names reported per process, matching the generator specs.
REPORT_PARAMS = {
    "ar1": ("phi", "c", "sigma_eps"),
    "arma11": ("phi", "theta_ma", "c", "sigma_eps"),
    "arch1": ("c", "phi1"),
    "ou": ("theta", "mu", "sigma"),
}

_QUANTILES = (0.05, 0.25, 0.75, 0.95)


def true_parameters(spec: ProcessSpec) -> dict[str, float]:
    if spec.kind not in REPORT_PARAMS:
        raise ValueError(f"no estimator for process '{spec.kind}'")
    return {name: float(getattr(spec, name)) for name in REPORT_PARAMS[spec.kind]}


def monte_carlo_report(fits: Sequence[FitResult], true_spec: ProcessSpec) -> EstimateReport:
    """Medians and quantiles of converged estimates against true values.

    The even-count median is the midpoint of the two central order
    statistics (numpy's linear-interpolation quantile)."""
    fits = list(fits)
    if not fits:
        raise EstimationError("no fits supplied")
    kind = fits[0].process_kind
    converged = [f for f in fits if f.converged]
    if not converged:
        raise EstimationError("zero converged fits")
    truths = true_parameters(true_spec)
    parameters = {}
    for name in REPORT_PARAMS[kind]:
        values = np.array([f.estimates[name] for f in converged])
        parameters[name] = {
            "true": truths[name],
            "median": float(np.quantile(values, 0.5)),
            "quantiles": {str(q): float(np.quantile(values, q)) for q in _QUANTILES},
            "all_estimates": [float(v) for v in values],
        }
    return EstimateReport(process_kind=kind, parameters=parameters,
                          num_sims=len(fits), num_converged=len(converged))


def ks_distance(sample_a, sample_b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic: the supremum over the merged
    sample of the gap between the two empirical CDFs."""
    a = np.sort(np.asarray(sample_a, dtype=np.float64))
    b = np.sort(np.asarray(sample_b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be non-empty")
    merged = np.concatenate([a, b])
    fa = np.searchsorted(a, merged, side="right") / a.size
    fb = np.searchsorted(b, merged, side="right") / b.size
    return float(np.abs(fa - fb).max())
