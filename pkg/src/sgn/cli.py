"""Command-line surface tying the pipeline together.

Subcommands: gen, train, sample, backtest, estimate, search, gradcheck,
plot, reproduce.  Exit codes: 0 success, 1 I/O or internal failure,
2 usage/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import glob
import math
import os
import sys

import numpy as np

from sgn import io
from sgn.codec import ClassSeries
from sgn.inference import (
    EstimationError,
    FITTERS,
    REPORT_PARAMS,
    monte_carlo_report,
    true_parameters,
)
from sgn.processes import DEFAULT_DT, PROCESS_KINDS, SeriesF, default_spec, generate
from sgn.rng import RngStream
from sgn.sampler import (
    DETERMINISTIC,
    STOCHASTIC,
    GenRequest,
    backtest,
    generate_series,
    zero_context,
)
from sgn.training import (
    SearchConfig,
    TrainConfig,
    TrainingDiverged,
    finite_difference_check,
    hyper_search,
    train,
)
from sgn.wavenet import NetConfig, dilation_schedule, receptive_field

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(ValueError):
    pass


class NumericError(RuntimeError):
    pass


def _parse_overrides(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise UsageError(f"--set expects name=value, got '{pair}'")
        name, raw = pair.split("=", 1)
        name = name.strip()
        raw = raw.strip()
        if name == "component":
            out[name] = raw
        elif name == "init":
            out[name] = tuple(float(v) for v in raw.split(":"))
        elif name in ("lambda", "lam"):
            out["lam"] = float(raw)
        else:
            out[name] = float(raw)
    return out


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _manifest_for(out_path: str, args, command: str, seeds: dict, inputs, outputs, parameters):
    io.write_manifest(out_path, command, sys.argv[1:], seeds, inputs, outputs,
                      parameters, _timestamp())


def cmd_gen(args) -> int:
    try:
        spec = default_spec(args.process, _parse_overrides(args.set))
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    dt = args.dt if args.dt is not None else DEFAULT_DT[spec.kind]
    series = generate(spec, args.n, dt=dt, rng=RngStream(args.seed))
    io.write_series_csv(args.out, series.values, dt=series.dt)
    _manifest_for(args.out + ".manifest.json", args, "gen", {"seed": args.seed},
                  [], [args.out], {"process": args.process, "n": args.n, "dt": dt,
                                   "spec": {k: v for k, v in spec.__dict__.items()}})
    return EXIT_OK


def _net_config_from_args(args) -> NetConfig:
    kwargs = {"filter_width": args.filter_width, "residual_channels": args.residual_channels,
              "skip_channels": args.skip_channels, "num_classes": args.num_classes}
    if args.dilations:
        dil = tuple(int(d) for d in args.dilations.split(","))
        return NetConfig(dilation_list=dil, **kwargs)
    return NetConfig(dilation_list=dilation_schedule(args.blocks, args.max_dilation), **kwargs)


def cmd_train(args) -> int:
    t, values = io.read_series_csv(args.data)
    dt = float(t[1] - t[0]) if t.size > 1 else 1.0
    series = SeriesF(values=values, dt=dt)
    try:
        config = _net_config_from_args(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    tc = TrainConfig(steps=args.steps, batch_size=args.batch_size, crop_length=args.crop_length,
                     learning_rate=args.learning_rate, seed=args.seed,
                     train_count=args.train_count, backtest_count=args.backtest_count)
    try:
        params, quantizer, report = train(series, config, tc)
    except TrainingDiverged as exc:
        raise NumericError(str(exc)) from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    rf = receptive_field(config)
    meta = {
        "train_config": {k: v for k, v in tc.__dict__.items()},
        "final_train_loss": report.final_train_loss,
        "backtest_loss": report.backtest_loss,
        "backtest_accuracy": report.backtest_accuracy,
        "dt": dt,
        "context_classes": [int(c) for c in
                            quantizer.quantize(values[tc.train_count - rf: tc.train_count])],
    }
    io.save_model(args.out, params, config, quantizer, meta)
    loss_csv = args.loss_history or args.out + ".loss.csv"
    io.atomic_write_text(loss_csv, "step,loss\n" + "".join(
        f"{s},{repr(l)}\n" for s, l in report.loss_history))
    _manifest_for(args.out + ".manifest.json", args, "train", {"seed": args.seed},
                  [args.data], [args.out, loss_csv],
                  {"net_config": config.to_dict(), "steps": args.steps})
    print(f"trained: backtest loss {report.backtest_loss:.4f}, "
          f"accuracy {report.backtest_accuracy:.4f}, "
          f"{report.wall_time_seconds:.1f}s")
    return EXIT_OK


def cmd_sample(args) -> int:
    params, config, quantizer, meta = io.load_model(args.model)
    dt = float(meta.get("dt", 1.0))
    rf = receptive_field(config)
    if args.zero_context:
        context = zero_context(config, quantizer)
    elif args.data:
        _, values = io.read_series_csv(args.data)
        context = ClassSeries(classes=quantizer.quantize(values[-rf:]),
                              num_classes=config.num_classes, quantizer=quantizer)
    else:
        ctx = meta.get("context_classes")
        if not ctx:
            raise UsageError("model has no stored context; pass --data or --zero-context")
        context = ClassSeries(classes=np.array(ctx, dtype=np.int64),
                              num_classes=config.num_classes, quantizer=quantizer)

    sims = args.sims if args.sims is not None else (100 if args.mode == STOCHASTIC else 1)
    request = GenRequest(context=context, horizon=args.n, mode=args.mode,
                         rng=RngStream(args.seed), sims=sims)
    series, class_series = generate_series(params, config, quantizer, request, dt=dt)
    os.makedirs(args.out_dir, exist_ok=True)
    outputs = []
    for i, (s, cs) in enumerate(zip(series, class_series)):
        path = os.path.join(args.out_dir, f"sim_{i:04d}.csv")
        io.write_sim_csv(path, cs.classes, s.values, dt=dt)
        outputs.append(path)
    _manifest_for(os.path.join(args.out_dir, "manifest.json"), args, "sample",
                  {"seed": args.seed}, [args.model], outputs,
                  {"mode": args.mode, "sims": sims, "n": args.n})
    return EXIT_OK


def cmd_backtest(args) -> int:
    params, config, quantizer, meta = io.load_model(args.model)
    t, values = io.read_series_csv(args.data)
    dt = float(t[1] - t[0]) if t.size > 1 else 1.0
    series = SeriesF(values=values, dt=dt)
    try:
        result = backtest(params, config, quantizer, series, args.split)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    lines = ["t,true_class,predicted_class,predicted_value,true_value"]
    for row in result.rows:
        lines.append(f"{row.t},{row.true_class},{row.predicted_class},"
                     f"{repr(row.predicted_value)},{repr(row.true_value)}")
    io.atomic_write_text(args.out, "\n".join(lines) + "\n")
    svg = args.svg or args.out + ".svg"
    n = len(series)
    idx_train = np.arange(args.split)
    idx_test = np.arange(args.split, n)
    io.render_line_svg(svg, [
        {"x": idx_train * dt, "y": values[: args.split], "label": "training", "color": "black",
         "dashed": True},
        {"x": idx_test * dt, "y": values[args.split:], "label": "held-out", "color": "green",
         "dashed": True},
        {"x": idx_test * dt, "y": result.free_run.values, "label": "free run", "color": "red"},
    ], title="backtest")
    print(f"one-step accuracy: {result.one_step_accuracy:.4f}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    if args.process == "jumpdiffusion":
        raise UsageError("jump-diffusion parameter estimation is out of scope "
                         "(structural estimation of that process is not supported)")
    if args.process not in FITTERS:
        raise UsageError(f"no estimator for process '{args.process}' "
                         f"(choose from {sorted(FITTERS)})")
    paths = sorted(p for pattern in args.data for p in glob.glob(pattern))
    if not paths:
        raise UsageError("no input series matched --data")
    truth_overrides = _parse_overrides(args.true)
    try:
        spec = default_spec(args.process, truth_overrides)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc

    fitter = FITTERS[args.process]
    fits = []
    for path in paths:
        with open(path) as fh:
            header = fh.readline().strip()
        values = (io.read_sim_csv(path)[2] if header == "t,class,value"
                  else io.read_series_csv(path)[1])
        if args.process == "ou":
            fits.append(fitter(values, dt=args.dt))
        else:
            fits.append(fitter(values))
    try:
        report = monte_carlo_report(fits, spec)
    except EstimationError as exc:
        raise NumericError(str(exc)) from exc
    io.write_json(args.out, report.to_dict())
    svg = args.svg or args.out + ".svg"
    io.render_strip_svg(svg, report.parameters, title=f"{args.process} estimates")
    _manifest_for(args.out + ".manifest.json", args, "estimate", {},
                  paths, [args.out, svg], {"process": args.process,
                                           "true": {k: v for k, v in truth_overrides.items()}})
    for name, info in report.parameters.items():
        print(f"{name}: median {info['median']:.6g} (true {info['true']:.6g})")
    return EXIT_OK


def cmd_search(args) -> int:
    _, values = io.read_series_csv(args.data)
    series = SeriesF(values=values, dt=1.0)
    search = SearchConfig(max_blocks=args.max_blocks, max_dilation_cap=args.max_dilation_cap,
                          improvement_threshold=args.improvement_threshold,
                          budget_steps_per_trial=args.budget_steps)
    tc = TrainConfig(seed=args.seed, train_count=args.train_count,
                     backtest_count=args.backtest_count)
    try:
        config, trials = hyper_search(series, search, tc)
    except TrainingDiverged as exc:
        raise NumericError(str(exc)) from exc
    for blocks, max_d, loss in trials:
        print(f"trial blocks={blocks} max_dilation={max_d} loss={loss:.5f}")
    print(f"best: dilations={','.join(map(str, config.dilation_list))}")
    if args.out:
        io.write_json(args.out, {"net_config": config.to_dict(),
                                 "trials": [{"blocks": b, "max_dilation": d, "loss": l}
                                            for b, d, l in trials]})
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    config = NetConfig(dilation_list=dilation_schedule(args.blocks, args.max_dilation),
                       residual_channels=args.residual_channels,
                       skip_channels=args.skip_channels, num_classes=args.num_classes)
    err = finite_difference_check(config, seed=args.seed, crop_length=args.crop_length)
    print(f"max relative gradient error: {err:.3e}")
    if err >= 1e-4:
        raise NumericError(f"gradient check failed: {err:.3e} >= 1e-4")
    return EXIT_OK


def cmd_plot(args) -> int:
    curves = []
    colors = ["black", "red", "green", "blue", "orange", "purple"]
    for i, path in enumerate(args.inputs):
        t, values = io.read_series_csv(path)
        curves.append({"x": t, "y": values, "label": os.path.basename(path),
                       "color": colors[i % len(colors)]})
    io.render_line_svg(args.out, curves, title=args.title or "")
    return EXIT_OK


# Per-process experiment presets: architecture, sampling mode, estimator.
EXPERIMENTS = {
    "harmonic": {"blocks": 2, "max_dilation": 8, "mode": DETERMINISTIC, "estimate": None},
    "damped": {"blocks": 9, "max_dilation": 4, "mode": DETERMINISTIC, "estimate": None},
    "logistic": {"blocks": 5, "max_dilation": 2, "mode": DETERMINISTIC, "estimate": None},
    "lorenz": {"blocks": 5, "max_dilation": 4, "mode": DETERMINISTIC, "estimate": None},
    "jumpdiffusion": {"blocks": 5, "max_dilation": 4, "mode": STOCHASTIC, "estimate": None},
    "ou": {"blocks": 5, "max_dilation": 4, "mode": STOCHASTIC, "estimate": "ou"},
    "ar1": {"blocks": 5, "max_dilation": 4, "mode": STOCHASTIC, "estimate": "ar1"},
    "arma11": {"blocks": 5, "max_dilation": 4, "mode": STOCHASTIC, "estimate": "arma11"},
    "arch1": {"blocks": 5, "max_dilation": 4, "mode": STOCHASTIC, "estimate": "arch1"},
}


def cmd_reproduce(args) -> int:
    names = args.experiments or sorted(EXPERIMENTS)
    for name in names:
        if name not in EXPERIMENTS:
            raise UsageError(f"unknown experiment '{name}' (choose from {sorted(EXPERIMENTS)})")
    for name in names:
        exp = EXPERIMENTS[name]
        out_dir = os.path.join(args.out_dir, name)
        os.makedirs(out_dir, exist_ok=True)
        data_csv = os.path.join(out_dir, "data.csv")
        model_path = os.path.join(out_dir, "model.sgn")
        print(f"[{name}] generating data")
        run_main(["gen", "--process", name, "--n", str(args.n), "--seed", str(args.seed),
                  "--out", data_csv])
        print(f"[{name}] training")
        run_main(["train", "--data", data_csv, "--blocks", str(exp["blocks"]),
                  "--max-dilation", str(exp["max_dilation"]), "--steps", str(args.steps),
                  "--train-count", str(args.train_count),
                  "--backtest-count", str(args.backtest_count),
                  "--seed", str(args.seed), "--out", model_path])
        print(f"[{name}] backtesting")
        run_main(["backtest", "--model", model_path, "--data", data_csv,
                  "--split", str(args.train_count),
                  "--out", os.path.join(out_dir, "backtest.csv")])
        print(f"[{name}] sampling ({exp['mode']})")
        sims = args.sims if exp["mode"] == STOCHASTIC else 1
        run_main(["sample", "--model", model_path, "--mode", exp["mode"],
                  "--sims", str(sims), "--n", str(args.horizon), "--seed", str(args.seed),
                  "--out-dir", os.path.join(out_dir, "sims")])
        if exp["estimate"]:
            print(f"[{name}] estimating")
            estimate_args = ["estimate", "--process", exp["estimate"],
                             "--data", os.path.join(out_dir, "sims", "sim_*.csv"),
                             "--out", os.path.join(out_dir, "estimates.json")]
            if exp["estimate"] == "ou":
                estimate_args += ["--dt", "1.0"]
            run_main(estimate_args)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgn", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("gen", help="generate a synthetic process series as CSV")
    p.add_argument("--process", required=True, choices=sorted(PROCESS_KINDS))
    p.add_argument("--n", type=int, default=12000)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--set", action="append", default=[], metavar="NAME=VALUE",
                   help="override a process parameter")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model on a CSV series")
    p.add_argument("--data", required=True)
    p.add_argument("--blocks", type=int, default=5)
    p.add_argument("--max-dilation", type=int, default=4)
    p.add_argument("--dilations", default=None, help="explicit comma-separated dilation list")
    p.add_argument("--filter-width", type=int, default=2)
    p.add_argument("--residual-channels", type=int, default=32)
    p.add_argument("--skip-channels", type=int, default=256)
    p.add_argument("--num-classes", type=int, default=256)
    p.add_argument("--steps", type=int, default=20000)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--crop-length", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--train-count", type=int, default=10000)
    p.add_argument("--backtest-count", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss-history", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="generate series from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--mode", choices=[DETERMINISTIC, STOCHASTIC], default=STOCHASTIC)
    p.add_argument("--sims", type=int, default=None)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", default=None, help="take the context window from this CSV")
    p.add_argument("--zero-context", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("backtest", help="teacher-forced predictions plus a free run")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("estimate", help="fit structural parameters of series")
    p.add_argument("--process", required=True)
    p.add_argument("--data", action="append", required=True, metavar="GLOB")
    p.add_argument("--true", action="append", default=[], metavar="NAME=VALUE")
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("search", help="forward hyperparameter search")
    p.add_argument("--data", required=True)
    p.add_argument("--max-blocks", type=int, default=9)
    p.add_argument("--max-dilation-cap", type=int, default=256)
    p.add_argument("--improvement-threshold", type=float, default=0.02)
    p.add_argument("--budget-steps", type=int, default=2000)
    p.add_argument("--train-count", type=int, default=10000)
    p.add_argument("--backtest-count", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blocks", type=int, default=1)
    p.add_argument("--max-dilation", type=int, default=2)
    p.add_argument("--residual-channels", type=int, default=4)
    p.add_argument("--skip-channels", type=int, default=8)
    p.add_argument("--num-classes", type=int, default=8)
    p.add_argument("--crop-length", type=int, default=16)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("plot", help="render t,value CSVs to SVG")
    p.add_argument("--in", dest="inputs", action="append", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--title", default=None)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("reproduce", help="chain gen/train/sample/estimate per experiment")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--experiments", nargs="*", default=None)
    p.add_argument("--n", type=int, default=12000)
    p.add_argument("--steps", type=int, default=20000)
    p.add_argument("--train-count", type=int, default=10000)
    p.add_argument("--backtest-count", type=int, default=2000)
    p.add_argument("--horizon", type=int, default=2000)
    p.add_argument("--sims", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_reproduce)

    return parser


def run_main(argv: list[str]) -> int:
    """Run one command; raises on failure (used by reproduce and tests)."""
    parser = build_parser()
    args = parser.parse_args(argv)
    code = args.func(args)
    if code != EXIT_OK:
        raise RuntimeError(f"command failed with exit code {code}")
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, io.ModelFileError) as exc:
        if isinstance(exc, io.ModelFileError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # internal failure
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
