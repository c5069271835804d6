"""Synthetic process generators.

Four deterministic systems (harmonic oscillator, damped oscillator, logistic
map, Lorenz system) and five stochastic ones (mean-reverting diffusion,
jump-diffusion, AR(1), ARMA(1,1), ARCH(1)).  Deterministic variants ignore
the random stream entirely; discrete-time variants (logistic map, AR, ARMA,
ARCH) ignore ``dt`` and step in unit time.

The oscillators use the exact closed-form solutions of their linear ODEs so
the training data carries no integrator bias; the Lorenz system, which has
no closed form, is integrated with classical RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from sgn.rng import RngStream


@dataclass(frozen=True)
class Harmonic:
    """y'' + a*y = 0, solved exactly: y(t) = y0*cos(w t) + (v0/w)*sin(w t)."""

    a: float = 1.0
    y0: float = 1.0
    v0: float = 0.0
    kind = "harmonic"
    deterministic = True
    discrete = False

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("harmonic: a must be > 0")


@dataclass(frozen=True)
class Damped:
    """y'' + b*y' + a*y = 0, exact solution via characteristic roots."""

    a: float = 1.0
    b: float = 0.1
    y0: float = 1.0
    v0: float = 0.0
    kind = "damped"
    deterministic = True
    discrete = False

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("damped: a must be > 0")
        if self.b < 0:
            raise ValueError("damped: b must be >= 0")


@dataclass(frozen=True)
class Logistic:
    """x_{n+1} = r * x_n * (1 - x_n); r = 4 is the chaotic preset."""

    r: float = 4.0
    x0: float = 0.3
    kind = "logistic"
    deterministic = True
    discrete = True

    def __post_init__(self):
        if not (0 < self.r <= 4):
            raise ValueError("logistic: r must be in (0, 4]")
        if not (0 < self.x0 < 1):
            raise ValueError("logistic: x0 must be in (0, 1)")


@dataclass(frozen=True)
class Lorenz:
    """The Lorenz system, integrated with RK4; emits one chosen component."""

    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    init: tuple[float, float, float] = (1.0, 1.0, 1.0)
    component: str = "x"
    kind = "lorenz"
    deterministic = True
    discrete = False

    def __post_init__(self):
        if self.component not in ("x", "y", "z"):
            raise ValueError("lorenz: component must be one of x, y, z")
        if len(self.init) != 3:
            raise ValueError("lorenz: init must have 3 components")


@dataclass(frozen=True)
class OU:
    """Mean-reverting diffusion dX = theta*(mu - X)*dt + sigma*dW.

    Stepped with the exact Gaussian discretization, so samples are draws
    from the true transition density at spacing dt.
    """

    theta: float = 0.1
    mu: float = 0.0
    sigma: float = 0.2
    x0: float = 0.0
    kind = "ou"
    deterministic = False
    discrete = False

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("ou: theta must be > 0")
        if self.sigma < 0:
            raise ValueError("ou: sigma must be >= 0")


@dataclass(frozen=True)
class JumpDiffusion:
    """Merton-style jump-diffusion with lognormal jump sizes.

    Per step: X' = X * exp((alpha - lambda*k - sigma^2/2)*dt + sigma*sqrt(dt)*z)
    * prod_j Y_j, with N ~ Poisson(lambda*dt), ln Y_j ~ N(jump_mu, jump_sigma^2)
    and k = exp(jump_mu + jump_sigma^2/2) - 1 the mean relative jump size.
    """

    alpha: float = -0.05
    lam: float = 0.02
    sigma: float = 0.15
    jump_mu: float = 0.4
    jump_sigma: float = 0.1
    x0: float = 1.0
    kind = "jumpdiffusion"
    deterministic = False
    discrete = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("jumpdiffusion: lambda must be >= 0")
        if self.sigma < 0 or self.jump_sigma < 0:
            raise ValueError("jumpdiffusion: volatilities must be >= 0")
        if self.x0 <= 0:
            raise ValueError("jumpdiffusion: x0 must be > 0")


@dataclass(frozen=True)
class AR1:
    """x_t = phi*x_{t-1} + eps_t + c, eps_t ~ N(0, sigma_eps^2)."""

    phi: float = 0.7
    c: float = 0.0
    sigma_eps: float = 1.0
    x0: float = 0.0
    kind = "ar1"
    deterministic = False
    discrete = True

    def __post_init__(self):
        if self.sigma_eps < 0:
            raise ValueError("ar1: sigma_eps must be >= 0")


@dataclass(frozen=True)
class ARMA11:
    """x_t = phi*x_{t-1} + theta_ma*eps_{t-1} + eps_t + c, eps_0 = 0."""

    phi: float = 0.7
    theta_ma: float = 0.3
    c: float = 0.0
    sigma_eps: float = 1.0
    x0: float = 0.0
    kind = "arma11"
    deterministic = False
    discrete = True

    def __post_init__(self):
        if self.sigma_eps < 0:
            raise ValueError("arma11: sigma_eps must be >= 0")


@dataclass(frozen=True)
class ARCH1:
    """x_t = eps_t*h_t with h_t^2 = c + phi1*x_{t-1}^2 (lagged recursion)."""

    c: float = 1.0
    phi1: float = 0.5
    x0: float = 0.0
    kind = "arch1"
    deterministic = False
    discrete = True

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("arch1: c must be > 0")
        if not (0 <= self.phi1 < 1):
            raise ValueError("arch1: phi1 must be in [0, 1)")


ProcessSpec = Union[Harmonic, Damped, Logistic, Lorenz, OU, JumpDiffusion, AR1, ARMA11, ARCH1]

PROCESS_KINDS: dict[str, type] = {
    cls.kind: cls for cls in (Harmonic, Damped, Logistic, Lorenz, OU, JumpDiffusion, AR1, ARMA11, ARCH1)
}


@dataclass
class SeriesF:
    """A real-valued series with a fixed sampling interval."""

    values: np.ndarray
    dt: float = 1.0
    origin_spec: Optional[ProcessSpec] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("series must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("series contains non-finite values")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")

    def __len__(self) -> int:
        return self.values.size


def rk4_step(state: np.ndarray, derivative: Callable[[np.ndarray], np.ndarray], dt: float) -> np.ndarray:
    """One classical 4th-order Runge-Kutta update."""
    k1 = derivative(state)
    k2 = derivative(state + 0.5 * dt * k1)
    k3 = derivative(state + 0.5 * dt * k2)
    k4 = derivative(state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _harmonic(spec: Harmonic, n: int, dt: float) -> np.ndarray:
    w = math.sqrt(spec.a)
    t = np.arange(n) * dt
    return spec.y0 * np.cos(w * t) + (spec.v0 / w) * np.sin(w * t)


def _damped(spec: Damped, n: int, dt: float) -> np.ndarray:
    t = np.arange(n) * dt
    disc = spec.b * spec.b - 4.0 * spec.a
    half_b = spec.b / 2.0
    if disc < 0:
        wd = math.sqrt(spec.a - half_b * half_b)
        c2 = (spec.v0 + half_b * spec.y0) / wd
        return np.exp(-half_b * t) * (spec.y0 * np.cos(wd * t) + c2 * np.sin(wd * t))
    if disc == 0:
        r = -half_b
        return (spec.y0 + (spec.v0 - r * spec.y0) * t) * np.exp(r * t)
    sq = math.sqrt(disc)
    r1, r2 = (-spec.b + sq) / 2.0, (-spec.b - sq) / 2.0
    c2 = (spec.v0 - r1 * spec.y0) / (r2 - r1)
    c1 = spec.y0 - c2
    return c1 * np.exp(r1 * t) + c2 * np.exp(r2 * t)


def _logistic(spec: Logistic, n: int) -> np.ndarray:
    out = np.empty(n)
    x = spec.x0
    out[0] = x
    for i in range(1, n):
        x = spec.r * x * (1.0 - x)
        out[i] = x
    return out


def _lorenz(spec: Lorenz, n: int, dt: float) -> np.ndarray:
    def deriv(s: np.ndarray) -> np.ndarray:
        x, y, z = s
        return np.array([spec.sigma * (y - x), x * (spec.rho - z) - y, x * y - spec.beta * z])

    idx = "xyz".index(spec.component)
    state = np.array(spec.init, dtype=np.float64)
    out = np.empty(n)
    out[0] = state[idx]
    for i in range(1, n):
        state = rk4_step(state, deriv, dt)
        out[i] = state[idx]
    return out


def _ou(spec: OU, n: int, dt: float, g: np.random.Generator) -> np.ndarray:
    phi = math.exp(-spec.theta * dt)
    scale = spec.sigma * math.sqrt((1.0 - phi * phi) / (2.0 * spec.theta))
    z = g.standard_normal(n - 1) if n > 1 else np.empty(0)
    out = np.empty(n)
    x = spec.x0
    out[0] = x
    for i in range(1, n):
        x = spec.mu + (x - spec.mu) * phi + scale * z[i - 1]
        out[i] = x
    return out


def _jump_diffusion(spec: JumpDiffusion, n: int, dt: float, g: np.random.Generator) -> np.ndarray:
    k = math.exp(spec.jump_mu + spec.jump_sigma**2 / 2.0) - 1.0
    drift = (spec.alpha - spec.lam * k - spec.sigma**2 / 2.0) * dt
    vol = spec.sigma * math.sqrt(dt)
    out = np.empty(n)
    x = spec.x0
    out[0] = x
    # Fixed draw order per step: diffusion normal, then jump count, then
    # one normal per jump.
    for i in range(1, n):
        z = g.standard_normal()
        log_step = drift + vol * z
        n_jumps = g.poisson(spec.lam * dt)
        if n_jumps > 0:
            log_step += spec.jump_mu * n_jumps + spec.jump_sigma * g.standard_normal(n_jumps).sum()
        x = x * math.exp(log_step)
        out[i] = x
    return out


def _arma(phi: float, theta_ma: float, c: float, sigma_eps: float, x0: float,
          n: int, g: np.random.Generator) -> np.ndarray:
    eps = sigma_eps * g.standard_normal(n - 1) if n > 1 else np.empty(0)
    out = np.empty(n)
    x = x0
    e_prev = 0.0
    out[0] = x
    for i in range(1, n):
        e = eps[i - 1]
        x = phi * x + theta_ma * e_prev + e + c
        e_prev = e
        out[i] = x
    return out


def _arch(spec: ARCH1, n: int, g: np.random.Generator) -> np.ndarray:
    eps = g.standard_normal(n - 1) if n > 1 else np.empty(0)
    out = np.empty(n)
    x = spec.x0
    out[0] = x
    for i in range(1, n):
        h = math.sqrt(spec.c + spec.phi1 * x * x)
        x = eps[i - 1] * h
        out[i] = x
    return out


def generate(spec: ProcessSpec, n: int, dt: float = 1.0, rng: Optional[RngStream] = None) -> SeriesF:
    """Generate n samples of the process described by spec.

    dt is the sampling interval for continuous-time variants and is forced
    to 1 for discrete-time ones.  rng is required for stochastic variants
    and ignored for deterministic ones.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if spec.discrete:
        dt = 1.0

    if isinstance(spec, Harmonic):
        values = _harmonic(spec, n, dt)
    elif isinstance(spec, Damped):
        values = _damped(spec, n, dt)
    elif isinstance(spec, Logistic):
        values = _logistic(spec, n)
    elif isinstance(spec, Lorenz):
        values = _lorenz(spec, n, dt)
    else:
        if rng is None:
            raise ValueError(f"{spec.kind} is stochastic and needs an RngStream")
        g = rng.generator()
        if isinstance(spec, OU):
            values = _ou(spec, n, dt, g)
        elif isinstance(spec, JumpDiffusion):
            values = _jump_diffusion(spec, n, dt, g)
        elif isinstance(spec, AR1):
            values = _arma(spec.phi, 0.0, spec.c, spec.sigma_eps, spec.x0, n, g)
        elif isinstance(spec, ARMA11):
            values = _arma(spec.phi, spec.theta_ma, spec.c, spec.sigma_eps, spec.x0, n, g)
        elif isinstance(spec, ARCH1):
            values = _arch(spec, n, g)
        else:
            raise ValueError(f"unknown process spec {spec!r}")

    return SeriesF(values=values, dt=dt, origin_spec=spec)


def default_spec(kind: str, overrides: Optional[dict] = None) -> ProcessSpec:
    """Build a process spec by name with optional parameter overrides."""
    if kind not in PROCESS_KINDS:
        raise ValueError(f"unknown process '{kind}' (choose from {sorted(PROCESS_KINDS)})")
    cls = PROCESS_KINDS[kind]
    kwargs = dict(overrides or {})
    if cls is Lorenz and "init" in kwargs and isinstance(kwargs["init"], (list, tuple)):
        kwargs["init"] = tuple(float(v) for v in kwargs["init"])
    return cls(**kwargs)


# Per-process default sampling intervals used by the CLI when none is given.
DEFAULT_DT: dict[str, float] = {
    "harmonic": 0.05,
    "damped": 0.05,
    "logistic": 1.0,
    "lorenz": 0.01,
    "ou": 1.0,
    "jumpdiffusion": 1.0,
    "ar1": 1.0,
    "arma11": 1.0,
    "arch1": 1.0,
}
