import math

import numpy as np
import pytest

from sgn.codec import ClassSeries, Quantizer
from sgn.processes import SeriesF
from sgn.rng import RngStream
from sgn.sampler import (
    DETERMINISTIC,
    STOCHASTIC,
    GenRequest,
    backtest,
    generate_series,
    next_distribution,
    step_windows,
    zero_context,
)
from sgn.training import TrainConfig, train
from sgn.wavenet import NetConfig, build_network, dilation_schedule, param_shapes, receptive_field

CFG3 = NetConfig(dilation_list=(1,), filter_width=2, residual_channels=2,
                 skip_channels=4, num_classes=3)


def stub_params(config, distribution):
    """A network whose softmax output is the given distribution everywhere."""
    params = {name: np.zeros(shape) for name, shape in param_shapes(config).items()}
    params["head.b2"][:] = np.log(np.asarray(distribution))
    return params


def make_context(config, value=0):
    rf = receptive_field(config)
    return ClassSeries(classes=np.full(rf + 3, value, dtype=np.int64),
                       num_classes=config.num_classes)


class TestNextDistribution:
    def test_uniform_for_zero_head(self):
        cfg = NetConfig(dilation_list=dilation_schedule(1, 2), residual_channels=4,
                        skip_channels=8, num_classes=8)
        params = build_network(cfg, RngStream(0))
        p = next_distribution(params, cfg, make_context(cfg))
        np.testing.assert_allclose(p, 1.0 / 8, atol=1e-15)
        assert abs(p.sum() - 1.0) < 1e-12

    def test_purity_and_left_extension(self):
        cfg = NetConfig(dilation_list=dilation_schedule(1, 2), residual_channels=4,
                        skip_channels=8, num_classes=8)
        stream = RngStream(1)
        params = {k: v + 0.4 * stream.subgenerator(5).standard_normal(v.shape)
                  for k, v in build_network(cfg, stream).items()}
        g = stream.subgenerator(6)
        rf = receptive_field(cfg)
        tail = g.integers(0, 8, size=rf)
        ctx = ClassSeries(classes=tail, num_classes=8)
        p1 = next_distribution(params, cfg, ctx)
        p2 = next_distribution(params, cfg, ctx)
        np.testing.assert_array_equal(p1, p2)
        extended = ClassSeries(classes=np.concatenate([g.integers(0, 8, size=10), tail]),
                               num_classes=8)
        np.testing.assert_array_equal(p1, next_distribution(params, cfg, extended))

    def test_context_too_short(self):
        cfg = NetConfig(dilation_list=(1, 2), residual_channels=2, skip_channels=4,
                        num_classes=4)
        params = build_network(cfg, RngStream(0))
        short = ClassSeries(classes=np.zeros(receptive_field(cfg) - 1, dtype=np.int64),
                            num_classes=4)
        with pytest.raises(ValueError):
            next_distribution(params, cfg, short)


class TestGenerate:
    def test_forced_constant_class(self):
        cfg = NetConfig(dilation_list=(1,), residual_channels=2, skip_channels=4,
                        num_classes=8)
        params = {name: np.zeros(shape) for name, shape in param_shapes(cfg).items()}
        params["head.b2"][5] = 50.0
        q = Quantizer(8, 0.0, 8.0)
        req = GenRequest(context=make_context(cfg), horizon=20, mode=DETERMINISTIC)
        series, classes = generate_series(params, cfg, q, req)
        np.testing.assert_array_equal(classes[0].classes, 5)
        np.testing.assert_allclose(series[0].values, q.dequantize(5))

    def test_stochastic_frequencies_match_distribution(self):
        dist = [0.1, 0.7, 0.2]
        params = stub_params(CFG3, dist)
        q = Quantizer(3, 0.0, 3.0)
        req = GenRequest(context=make_context(CFG3), horizon=10000, mode=STOCHASTIC,
                         rng=RngStream(42))
        _, classes = generate_series(params, CFG3, q, req)
        freqs = np.bincount(classes[0].classes, minlength=3) / 10000
        np.testing.assert_allclose(freqs, dist, atol=0.02)

    def test_deterministic_argmax(self):
        params = stub_params(CFG3, [0.1, 0.7, 0.2])
        q = Quantizer(3, 0.0, 3.0)
        req = GenRequest(context=make_context(CFG3), horizon=50, mode=DETERMINISTIC)
        _, classes = generate_series(params, CFG3, q, req)
        np.testing.assert_array_equal(classes[0].classes, 1)

    def test_stochastic_determinism(self):
        params = stub_params(CFG3, [0.3, 0.3, 0.4])
        q = Quantizer(3, 0.0, 3.0)
        for _ in range(2):
            req = GenRequest(context=make_context(CFG3), horizon=100, mode=STOCHASTIC,
                             rng=RngStream(9), sims=3)
            _, classes = generate_series(params, CFG3, q, req)
        a = generate_series(params, CFG3, q, GenRequest(
            context=make_context(CFG3), horizon=100, mode=STOCHASTIC, rng=RngStream(9), sims=3))[1]
        b = generate_series(params, CFG3, q, GenRequest(
            context=make_context(CFG3), horizon=100, mode=STOCHASTIC, rng=RngStream(9), sims=3))[1]
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.classes, y.classes)

    def test_deterministic_mode_seed_independent_and_warns_on_sims(self):
        params = stub_params(CFG3, [0.2, 0.5, 0.3])
        q = Quantizer(3, 0.0, 3.0)
        with pytest.warns(UserWarning):
            series, classes = generate_series(params, CFG3, q, GenRequest(
                context=make_context(CFG3), horizon=30, mode=DETERMINISTIC,
                rng=RngStream(1), sims=3))
        assert len(series) == 3
        for cs in classes[1:]:
            np.testing.assert_array_equal(cs.classes, classes[0].classes)

    def test_incremental_consistency(self):
        params = stub_params(CFG3, [0.3, 0.3, 0.4])
        rf = receptive_field(CFG3)
        window = np.zeros((2, rf), dtype=np.int64)

        full_gens = RngStream(5).generators(2)
        full = step_windows(params, CFG3, window, 30, STOCHASTIC, full_gens)

        gens = RngStream(5).generators(2)
        first = step_windows(params, CFG3, window, 12, STOCHASTIC, gens)
        rolled = np.concatenate([window, first], axis=1)[:, -rf:]
        second = step_windows(params, CFG3, rolled, 18, STOCHASTIC, gens)
        np.testing.assert_array_equal(full, np.concatenate([first, second], axis=1))

    def test_decoded_values_within_quantizer_range(self):
        params = stub_params(CFG3, [0.3, 0.3, 0.4])
        q = Quantizer(3, -2.0, 5.0)
        series, _ = generate_series(params, CFG3, q, GenRequest(
            context=make_context(CFG3), horizon=500, mode=STOCHASTIC, rng=RngStream(3)))
        assert series[0].values.min() >= q.lo and series[0].values.max() <= q.hi

    def test_zero_context(self):
        cfg = NetConfig(dilation_list=(1,), residual_channels=2, skip_channels=4,
                        num_classes=8)
        q = Quantizer(8, -1.0, 1.0)
        ctx = zero_context(cfg, q)
        assert len(ctx) >= receptive_field(cfg)
        assert (ctx.classes == q.quantize(0.0)).all()


class TestBacktest:
    def trained_constant_model(self):
        cfg = NetConfig(dilation_list=(1, 2), residual_channels=4, skip_channels=8,
                        num_classes=8)
        series = SeriesF(values=np.full(700, 2.0), dt=1.0)
        tc = TrainConfig(steps=200, batch_size=2, crop_length=16, train_count=500,
                        backtest_count=150, seed=0, learning_rate=3e-3)
        params, q, _ = train(series, cfg, tc)
        return params, cfg, q, series

    def test_constant_series(self):
        params, cfg, q, series = self.trained_constant_model()
        result = backtest(params, cfg, q, series, 500)
        assert result.one_step_accuracy == 1.0
        assert np.ptp(result.free_run.values) == 0.0

    def test_period_two_free_run_alternates(self):
        cfg = NetConfig(dilation_list=(1, 2), residual_channels=4, skip_channels=8,
                        num_classes=8)
        series = SeriesF(values=np.tile([0.0, 1.0], 400), dt=1.0)
        tc = TrainConfig(steps=600, batch_size=2, crop_length=16, train_count=600,
                        backtest_count=150, seed=0, learning_rate=3e-3)
        params, q, report = train(series, cfg, tc)
        assert report.backtest_accuracy >= 0.99
        result = backtest(params, cfg, q, series, 600)
        np.testing.assert_array_equal(result.free_run_classes.classes,
                                      q.quantize(series.values[600:]))

    def test_predictions_ignore_future_values(self):
        params, cfg, q, series = self.trained_constant_model()
        r1 = backtest(params, cfg, q, series, 500)
        altered = SeriesF(values=series.values.copy(), dt=1.0)
        altered.values[-1] = 1000.0  # out of range: clamps, but only at the end
        r2 = backtest(params, cfg, q, altered, 500)
        for a, b in zip(r1.rows[:-1], r2.rows[:-1]):
            assert a.predicted_class == b.predicted_class

    def test_invalid_split(self):
        params, cfg, q, series = self.trained_constant_model()
        with pytest.raises(ValueError):
            backtest(params, cfg, q, series, 1)
        with pytest.raises(ValueError):
            backtest(params, cfg, q, series, len(series))
