"""Command-line interface.

Subcommands::

    noisemap synth-data  --out DATA [--config C] [--seed S]
    noisemap train-flow  DATA --out CKPT [--config C] [--seed S]
    noisemap reconstruct DATA --method M --out REC [--alpha A] [--iterations I]
                         [--concentration c] [--checkpoint CKPT]
    noisemap evaluate    REC --data DATA --out DIR
    noisemap grid-search DATA --method M --out DIR [--concentration c] [--checkpoint CKPT]
    noisemap render      CONTAINER --out DIR [--array NAME] [--index I] [--data-range R]
    noisemap benchmark   --out DIR [--config C] [--seed S]

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. ``NOISEMAP_THREADS`` caps the worker threads used per command.
"""
import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .benchmark import check_params, density_from_config, reconstruct_images, run_benchmark
from .config import METHODS, RunConfig
from .container import Container, dumps_manifest, write_container
from .dataset import generate, load_dataset
from .errors import ConfigError, DataError, NumericalError, TrainingError
from .estimators import check_noise
from .flow import TrainConfig, load_flow, save_flow, train
from .metrics import MetricConfig, evaluate_set, grid_search

log = logging.getLogger("noisemap")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


def _config(args):
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.validate()
    return cfg


def _write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_json(path, obj):
    _write_text(path, dumps_manifest(obj))


def cmd_synth_data(args):
    cfg = _config(args)
    ds = generate(cfg)
    ds.save(args.out, cfg.seed)
    _write_json(Path(args.out) / "config.json", cfg.to_dict())
    log.info("wrote %d phantoms x %d concentrations to %s", len(ds.images), len(ds.concentrations), args.out)


def cmd_train_flow(args):
    cfg = _config(args)
    noise = check_noise(Container(args.data)["noise_bank"])
    density = density_from_config(cfg, cfg.seed)
    model = density.build(noise.shape[1])
    tcfg = TrainConfig(density.batch_size, density.epochs, density.learning_rate, density.seed,
                       validation_fraction=density.validation_fraction)

    def progress(epoch, history):
        log.info("epoch %d train nll %.5f", epoch, history.train_nll[-1])

    try:
        model, history = train(model, noise, tcfg, progress)
    except TrainingError as exc:
        log.error("training diverged; last finite epoch: %s", exc.last_finite_epoch)
        raise
    extra = {
        "train_nll": history.train_nll,
        "val_nll": history.val_nll,
        "steps": history.steps,
        "seed": cfg.seed,
        "source": str(args.data),
    }
    save_flow(model, args.out, extra)
    rows = ["epoch\ttrain_nll\tval_nll"]
    for i, t in enumerate(history.train_nll):
        v = history.val_nll[i] if i < len(history.val_nll) else float("nan")
        rows.append(f"{i}\t{t:.10g}\t{v:.10g}")
    _write_text(Path(args.out) / "history.tsv", "\n".join(rows) + "\n")


def _method_params(args):
    method = args.method
    params = {}
    if args.alpha is not None:
        params["alpha"] = args.alpha
    if args.iterations is not None:
        if method == "tikhonov":
            raise ConfigError("tikhonov takes no iteration count", "iterations")
        params["sweeps" if method in ("rk", "wrk") else "iterations"] = args.iterations
    for item in args.param or []:
        key, _, value = item.partition("=")
        try:
            params[key] = float(value) if any(ch in value for ch in ".eE") else int(value)
        except ValueError:
            raise ConfigError(f"cannot parse parameter {item!r}", key) from None
    check_params(method, params)
    return params


def _concentration(ds, value):
    if value is None:
        return ds.concentrations[0]
    return float(value)


def _flow_for(args, method):
    if method != "lda":
        if args.checkpoint:
            raise ConfigError(f"method {method!r} does not use a checkpoint", "checkpoint")
        return None
    if not args.checkpoint:
        raise ConfigError("method 'lda' requires --checkpoint", "checkpoint")
    return load_flow(args.checkpoint)


def cmd_reconstruct(args):
    params = _method_params(args)
    flow = _flow_for(args, args.method)
    ds = load_dataset(args.data)
    c = _concentration(ds, args.concentration)
    Y = ds.measurements(c)
    noise = ds.noise_bank if args.method == "wrk" else None
    start = time.perf_counter()
    recs = reconstruct_images(args.method, params, ds.operator_rec, Y, noise, flow)
    elapsed = time.perf_counter() - start
    if not np.all(np.isfinite(recs)):
        raise NumericalError("reconstruction produced non-finite values")
    attrs = {"kind": "reconstructions", "method": args.method, "params": params, "concentration": c,
             "source": str(args.data)}
    write_container(args.out, {"reconstructions": recs}, attrs)
    # timings vary between runs, so they live outside the array payload
    _write_json(Path(args.out) / "timing.json",
                {"total_seconds": elapsed, "seconds_per_sample": elapsed / len(recs), "n": len(recs)})


def cmd_evaluate(args):
    rec = Container(args.reconstructions)
    recs = rec["reconstructions"]
    c = args.concentration if args.concentration is not None else rec.attrs.get("concentration")
    if c is None:
        raise ConfigError("--concentration is required for this container", "concentration")
    c = float(c)
    ds = load_dataset(args.data)
    gts = ds.ground_truth(c)
    if len(gts) != len(recs):
        raise DataError(f"{len(recs)} reconstructions for {len(gts)} ground truths")
    report = evaluate_set(recs, gts, MetricConfig(data_range=c), rec.attrs.get("method", ""),
                          rec.attrs.get("params", {}), c)
    out = Path(args.out)
    _write_json(out / "report.json", {**report.summary(), "ssim": report.ssim, "psnr": report.psnr})
    _write_text(out / "report.txt", report.to_text())
    print(f"SSIM {report.ssim_mean:.4f}  PSNR {report.psnr_mean:.2f}")


def cmd_grid_search(args):
    cfg = _config(args)
    flow = _flow_for(args, args.method)
    ds = load_dataset(args.data)
    c = _concentration(ds, args.concentration)
    n = ds.n_validation or len(ds.images)
    Y, gts = ds.measurements(c)[:n], ds.ground_truth(c)[:n]
    grid = cfg.grid(args.method)
    check_params(args.method, {k: v[0] for k, v in grid.items()})
    noise = ds.noise_bank if args.method == "wrk" else None

    def run(params, meas):
        return reconstruct_images(args.method, params, ds.operator_rec, meas, noise, flow)

    result = grid_search(run, grid, Y, gts, MetricConfig(data_range=c))
    out = Path(args.out)
    _write_json(out / "best.json", {"method": args.method, "concentration": c, "n_samples": n,
                                    "best_params": result.best_params, "best_ssim": result.best_score})
    rows = ["params\tssim_mean"]
    rows += [f"{json.dumps(t['params'], sort_keys=True)}\t{t['ssim_mean']:.10g}" for t in result.table]
    _write_text(out / "table.tsv", "\n".join(rows) + "\n")
    print(json.dumps(result.best_params, sort_keys=True))


def to_pgm(image, data_range):
    """8-bit ASCII portable graymap; ``[0, data_range]`` maps to ``[0, 255]``."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DataError(f"can only render 2-D images, got shape {img.shape}")
    if not data_range > 0:
        raise ConfigError("data range must be positive", "data_range")
    levels = np.rint(np.clip(img / data_range, 0.0, 1.0) * 255).astype(np.int64)
    # rows of the graymap run along the height axis
    levels = levels.T
    lines = ["P2", f"{levels.shape[1]} {levels.shape[0]}", "255"]
    lines += [" ".join(str(v) for v in row) for row in levels]
    return "\n".join(lines) + "\n"


def cmd_render(args):
    c = Container(args.container)
    name = args.array or ("reconstructions" if "reconstructions" in c else None)
    if name is None:
        raise ConfigError("--array is required for this container", "array")
    data = c[name]
    if data.ndim == 2:
        data = data[None]
    if data.ndim != 3 or np.iscomplexobj(data):
        raise DataError(f"array {name!r} of shape {data.shape} does not hold images")
    data_range = args.data_range or c.attrs.get("concentration")
    if data_range is None:
        raise ConfigError("--data-range is required for this container", "data_range")
    indices = [args.index] if args.index is not None else range(data.shape[0])
    out = Path(args.out)
    for i in indices:
        if not 0 <= i < data.shape[0]:
            raise DataError(f"index {i} out of range for {data.shape[0]} images")
        _write_text(out / f"{name}_{i:04d}.pgm", to_pgm(data[i], float(data_range)))


def cmd_benchmark(args):
    cfg = _config(args)
    ds = generate(cfg)
    result = run_benchmark(ds, cfg)
    out = Path(args.out)
    summary = [
        {**r.summary(), "seconds_mean": None} for _, r in sorted(result.reports.items())
    ]
    _write_json(out / "benchmark.json", summary)
    _write_text(out / "benchmark.txt", result.table())
    print(result.table(), end="")


def build_parser():
    p = argparse.ArgumentParser(prog="noisemap", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, config=True):
        sp.add_argument("--out", required=True, help="output directory")
        if seed:
            sp.add_argument("--seed", type=int, default=None)
        if config:
            sp.add_argument("--config", default=None, help="JSON run configuration")

    sp = sub.add_parser("synth-data", help="generate a synthetic dataset container")
    common(sp)
    sp.set_defaults(func=cmd_synth_data)

    sp = sub.add_parser("train-flow", help="train the noise flow on a noise bank")
    sp.add_argument("data")
    common(sp)
    sp.set_defaults(func=cmd_train_flow)

    def method_args(sp):
        sp.add_argument("--method", required=True, choices=METHODS)
        sp.add_argument("--concentration", type=float, default=None)
        sp.add_argument("--checkpoint", default=None)

    sp = sub.add_parser("reconstruct", help="reconstruct every sample of a dataset")
    sp.add_argument("data")
    common(sp, seed=False, config=False)
    method_args(sp)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--iterations", type=int, default=None)
    sp.add_argument("--param", action="append", metavar="KEY=VALUE", help="extra method parameter")
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("evaluate", help="score reconstructions against ground truth")
    sp.add_argument("reconstructions")
    sp.add_argument("--data", required=True)
    sp.add_argument("--concentration", type=float, default=None)
    common(sp, seed=False, config=False)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("grid-search", help="select method parameters on the validation split")
    sp.add_argument("data")
    common(sp)
    method_args(sp)
    sp.set_defaults(func=cmd_grid_search)

    sp = sub.add_parser("render", help="write images as portable graymaps")
    sp.add_argument("container")
    common(sp, seed=False, config=False)
    sp.add_argument("--array", default=None)
    sp.add_argument("--index", type=int, default=None)
    sp.add_argument("--data-range", type=float, default=None)
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("benchmark", help="run the desk-scale method comparison")
    common(sp)
    sp.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
