"""Generative modelling of synthetic stochastic processes with a dilated
causal convolutional network, plus the statistical tooling to validate that
generated series carry the structural parameters of the true processes."""

from sgn.rng import RngStream
from sgn.processes import (
    AR1,
    ARCH1,
    ARMA11,
    Damped,
    Harmonic,
    JumpDiffusion,
    Logistic,
    Lorenz,
    OU,
    SeriesF,
    generate,
    rk4_step,
)
from sgn.codec import ClassSeries, Quantizer, fit_quantizer
from sgn.wavenet import NetConfig, build_network, dilation_schedule, forward, receptive_field, softmax
from sgn.training import TrainConfig, SearchConfig, TrainReport, cross_entropy, train, hyper_search
from sgn.sampler import GenRequest, generate_series, next_distribution

__version__ = "0.1.0"
