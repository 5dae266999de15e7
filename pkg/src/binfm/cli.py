"""Command-line tools: dataset synthesis, training, evaluation, decision
boundary export, benchmarking, and memory accounting.

Exit codes: 0 success, 1 usage error, 2 data/model-file error, 3 numeric
divergence during training.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import sys
import time

import numpy as np

from . import binarized, fm, model_io, packing
from .datasets import (
    DataError,
    Dataset,
    Sample,
    gen_circles,
    gen_moons,
    load_libsvm,
    save_libsvm,
    split,
)
from .encoding import STRATEGIES, encode_dataset, fit_bins
from .fm import LOSSES, TrainingDivergedError
from .model_io import LoadedModel, load_model, predicted_labels, prepare_inputs, score_matrix
from .packing import ModelFormatError, memory_report

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3

CV_RANKS = (16, 32, 64, 128)
CV_BINS = (10, 20, 30, 40, 50)
CV_LAMBDAS = (1e-2, 1e-1, 1.0, 1e1, 1e2)

DEFAULT_ETA = {"fm": 0.05, "sefm": 0.05, "binfm": 0.1}


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; this toolkit uses 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x: float) -> str:
    """Shortest-roundtrip float text, so identical runs give identical files."""
    return repr(float(x))


def build_parser() -> _Parser:
    parser = _Parser(prog="binfm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic dataset as libsvm text")
    p.add_argument("--kind", required=True, choices=("circles", "moons"))
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="train a model on a libsvm file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", choices=("fm", "sefm", "binfm"), default="binfm")
    p.add_argument("--bins", type=int, default=30)
    p.add_argument("--bin-strategy", choices=STRATEGIES, default="quantile")
    p.add_argument("--rank", type=int, default=16)
    p.add_argument("--eta", type=float, default=None,
                   help="step size (default 0.1 for binfm, 0.05 for fm/sefm)")
    p.add_argument("--lambda1", type=float, default=1e-4)
    p.add_argument("--lambda2", type=float, default=1e-4)
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--loss", choices=LOSSES, default="logistic")
    p.add_argument("--optimizer", choices=("adagrad", "sgd"), default=None,
                   help="binfm proxy updates (default adagrad)")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4,
                   help="relative loss improvement below which training stops early; 0 disables")
    p.add_argument("--scaling", action=argparse.BooleanOptionalAction, default=None,
                   help="learn the two scale factors (binfm; default on)")
    p.add_argument("--dim", type=int, default=0, help="lower bound on feature count")
    p.add_argument("--loss-log", default=None,
                   help="per-epoch loss CSV (default <out>.losses.csv)")
    p.add_argument("--cv", type=int, default=0,
                   help="K-fold cross-validation over the rank/bins/lambda grid")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a libsvm file with a model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=0)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="accuracy, latency, and memory of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--dim", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("boundary", help="export a decision grid for a 2-d model")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", required=True, metavar="XMIN,XMAX,YMIN,YMAX")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("bench", help="repeated-split comparison of fm/sefm/binfm")
    p.add_argument("--data", required=True, nargs="+",
                   help="libsvm paths or the tokens 'circles'/'moons'")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--bins", type=int, default=30)
    p.add_argument("--bin-strategy", choices=STRATEGIES, default="quantile")
    p.add_argument("--rank", type=int, default=16)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--lambda1", type=float, default=1e-4)
    p.add_argument("--lambda2", type=float, default=1e-4)
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--loss", choices=LOSSES, default="logistic")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=5000, help="size of generated datasets")
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--format", choices=("md", "csv"), default="md")
    p.add_argument("--out", default=None, help="write the table here instead of stdout")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel workers across repeat splits")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("mem-report", help="parameter storage for each method")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--bins", type=int, required=True)
    p.add_argument("--rank", type=int, required=True)
    p.set_defaults(func=cmd_mem_report)

    return parser


def _validate(parser: _Parser, args) -> None:
    checks = {
        "n": lambda v: v >= 2 and v % 2 == 0,
        "noise": lambda v: v >= 0,
        "bins": lambda v: v >= 2,
        "rank": lambda v: v >= 1,
        "eta": lambda v: v is None or v > 0,
        "lambda1": lambda v: v >= 0,
        "lambda2": lambda v: v >= 0,
        "eps": lambda v: v > 0,
        "epochs": lambda v: v >= 1,
        "tol": lambda v: v >= 0,
        "dim": lambda v: v >= 0,
        "steps": lambda v: v >= 2,
        "repeats": lambda v: v >= 1,
        "train_frac": lambda v: 0 < v < 1,
        "cv": lambda v: v == 0 or v >= 2,
        "jobs": lambda v: v >= 1,
    }
    for name, ok in checks.items():
        if hasattr(args, name) and not ok(getattr(args, name)):
            parser.error(f"invalid value for --{name.replace('_', '-')}")
    if getattr(args, "model", None) in ("fm", "sefm") and args.command == "train":
        if args.optimizer is not None:
            parser.error("--optimizer applies only to --model binfm")
        if args.scaling is not None:
            parser.error("--scaling applies only to --model binfm")


def cmd_gen_synth(args) -> int:
    gen = gen_circles if args.kind == "circles" else gen_moons
    ds = gen(args.n, noise=args.noise, seed=args.seed)
    save_libsvm(ds, args.out)
    print(f"wrote {len(ds)} samples ({args.kind}, d={ds.dim}) to {args.out}")
    return EXIT_OK


def _train_params(args, model_kind: str) -> dict:
    return {
        "eta": args.eta if args.eta is not None else DEFAULT_ETA[model_kind],
        "lam1": args.lambda1,
        "lam2": args.lambda2,
        "kind": args.loss,
        "epochs": args.epochs,
        "tol": args.tol,
    }


def _fit_any(model_kind, data, spec, rank, seed, params, optimizer="adagrad",
             use_scaling=True, eps=1e-8) -> LoadedModel:
    """Train one model of any kind and wrap it as an in-memory LoadedModel."""
    if model_kind == "fm":
        ovr = fm.fm_train_ovr(data, rank, seed=seed, **params)
        return LoadedModel("fm", ovr.heads, None, data.classes)
    enc = encode_dataset(spec, data)
    if model_kind == "sefm":
        ovr = fm.fm_train_ovr(enc, rank, seed=seed, **params)
        return LoadedModel("sefm", ovr.heads, spec, data.classes)
    ovr = binarized.train_ovr(
        enc, rank, seed=seed, eps=eps, optimizer=optimizer,
        use_scaling=use_scaling, **params,
    )
    packed = [packing.pack(h, spec) for h in ovr.heads]
    loaded = LoadedModel("binfm", packed, spec, data.classes)
    loaded.raw_heads = ovr.heads  # keeps training histories reachable
    return loaded


def _histories(loaded: LoadedModel):
    heads = getattr(loaded, "raw_heads", loaded.heads)
    return [h.history for h in heads if getattr(h, "history", None) is not None]


def _write_loss_log(path, histories) -> None:
    depth = max(len(h.epoch_losses) for h in histories)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for e in range(depth):
            at_e = [h.epoch_losses[e] for h in histories if e < len(h.epoch_losses)]
            fh.write(f"{e + 1},{_fmt(float(np.mean(at_e)))}\n")


def _cross_validate(args, ds) -> tuple[int, int, float]:
    """K-fold grid search; returns the chosen (rank, bins, lambda)."""
    folds = args.cv
    labels = ds.labels()
    order = np.random.default_rng(args.seed).permutation(len(ds))
    assignment = np.arange(len(ds)) % folds
    fold_of = np.empty(len(ds), dtype=int)
    fold_of[order] = assignment
    bins_grid = CV_BINS if args.model in ("sefm", "binfm") else (args.bins,)
    best = None
    for rank in CV_RANKS:
        for bins in bins_grid:
            for lam in CV_LAMBDAS:
                accs = []
                for k in range(folds):
                    tr_idx = np.flatnonzero(fold_of != k)
                    te_idx = np.flatnonzero(fold_of == k)
                    tr = _subset(ds, tr_idx)
                    te = _subset(ds, te_idx)
                    params = _train_params(args, args.model)
                    params["lam1"] = params["lam2"] = lam
                    spec = (
                        fit_bins(tr, bins, args.bin_strategy)
                        if args.model != "fm"
                        else None
                    )
                    loaded = _fit_any(
                        args.model, tr, spec, rank, args.seed, params, eps=args.eps
                    )
                    scores = score_matrix(loaded, prepare_inputs(loaded, te))
                    pred = predicted_labels(scores, loaded.classes)
                    accs.append(float((pred == labels[te_idx]).mean()))
                mean = float(np.mean(accs))
                key = (mean, -rank, -bins, -lam)
                if best is None or key > best[0]:
                    best = (key, (rank, bins, lam))
    (rank, bins, lam) = best[1]
    print(f"cv: rank={rank} bins={bins} lambda={lam} (accuracy {best[0][0]:.4f})")
    return rank, bins, lam


def _subset(ds, idx):
    return dataclasses.replace(ds, samples=tuple(ds.samples[i] for i in idx))


def cmd_train(args) -> int:
    ds = load_libsvm(args.data, min_dim=args.dim)
    rank, bins = args.rank, args.bins
    params = _train_params(args, args.model)
    if args.cv:
        rank, bins, lam = _cross_validate(args, ds)
        params["lam1"] = params["lam2"] = lam
    spec = fit_bins(ds, bins, args.bin_strategy) if args.model != "fm" else None
    loaded = _fit_any(
        args.model, ds, spec, rank, args.seed, params,
        optimizer=args.optimizer or "adagrad",
        use_scaling=args.scaling if args.scaling is not None else True,
        eps=args.eps,
    )
    if args.model == "binfm":
        ovr = binarized.BinFmOvrModel(heads=loaded.raw_heads, classes=loaded.classes)
        model_io.save_binarized(args.out, ovr, spec)
    else:
        ovr = fm.FmOvrModel(heads=loaded.heads, classes=loaded.classes)
        model_io.save_float(args.out, ovr, spec)
    histories = _histories(loaded)
    log_path = args.loss_log or f"{args.out}.losses.csv"
    _write_loss_log(log_path, histories)
    epochs_run = max(len(h.epoch_losses) for h in histories)
    final = histories[0].epoch_losses[-1]
    print(
        f"trained {args.model} on {len(ds)} samples "
        f"(classes={ds.classes}, epochs run={epochs_run}, final loss={final:.4f})"
    )
    print(f"model: {args.out}\nloss log: {log_path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    loaded = load_model(args.model)
    ds = load_libsvm(args.data, min_dim=args.dim)
    scores = score_matrix(loaded, prepare_inputs(loaded, ds))
    labels = predicted_labels(scores, loaded.classes)
    top = scores[:, 0] if scores.shape[1] == 1 else scores.max(axis=1)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("index,score,label\n")
        for i, (s, y) in enumerate(zip(top, labels)):
            fh.write(f"{i},{_fmt(s)},{int(y)}\n")
    print(f"wrote {len(labels)} predictions to {args.out}")
    return EXIT_OK


def _print_memory(loaded: LoadedModel) -> None:
    if loaded.binning is None:
        d, m = loaded.dim, loaded.rank
        print(f"memory: FM {32 * (d + m * d)} bits (raw-feature model)")
        return
    d, b, m = loaded.binning.dim, loaded.binning.bins, loaded.rank
    print(f"memory (d={d}, b={b}, m={m}):")
    for name, cost in memory_report(d, b, m).items():
        print(f"  {name:<13} {cost.bits:>12} bits  {cost.ratio_vs_fm:.2f}x")


def cmd_eval(args) -> int:
    loaded = load_model(args.model)
    ds = load_libsvm(args.data, min_dim=args.dim)
    prepared = prepare_inputs(loaded, ds)
    t0 = time.perf_counter()
    scores = score_matrix(loaded, prepared)
    elapsed = time.perf_counter() - t0
    pred = predicted_labels(scores, loaded.classes)
    acc = float((pred == ds.labels()).mean())
    print(f"accuracy: {acc:.4f} ({len(ds)} samples)")
    print(
        f"prediction time: {elapsed * 1e3:.2f} ms total, "
        f"{elapsed * 1e3 / len(ds):.4f} ms/sample"
    )
    _print_memory(loaded)
    return EXIT_OK


def cmd_boundary(args) -> int:
    loaded = load_model(args.model)
    if loaded.dim != 2:
        raise DataError(f"boundary needs a 2-d model, this one has d={loaded.dim}")
    try:
        xmin, xmax, ymin, ymax = (float(tok) for tok in args.grid.split(","))
    except ValueError:
        raise DataError(f"bad --grid {args.grid!r}, expected XMIN,XMAX,YMIN,YMAX")
    xs = np.linspace(xmin, xmax, args.steps)
    ys = np.linspace(ymin, ymax, args.steps)
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel()])
    idx = np.arange(2, dtype=np.int64)
    grid_ds = Dataset(
        samples=tuple(Sample(idx, row.astype(np.float64), 0) for row in points),
        dim=2,
        classes=2,
    )
    scores = score_matrix(loaded, prepare_inputs(loaded, grid_ds))
    labels = predicted_labels(scores, loaded.classes)
    top = scores[:, 0] if scores.shape[1] == 1 else scores.max(axis=1)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("x,y,score,label\n")
        for (x, y), s, lab in zip(points, top, labels):
            fh.write(f"{_fmt(x)},{_fmt(y)},{_fmt(s)},{int(lab)}\n")
    print(f"wrote {len(points)} grid points to {args.out}")
    return EXIT_OK


def _bench_one(ds, method, args, repeat) -> tuple[float, float]:
    """One repeat: split, train, time the scoring pass; returns (acc, sec)."""
    seed = args.seed + repeat
    tr, te = split(ds, args.train_frac, seed=seed)
    params = _train_params(args, method)
    spec = fit_bins(tr, args.bins, args.bin_strategy) if method != "fm" else None
    loaded = _fit_any(method, tr, spec, args.rank, seed, params, eps=args.eps)
    prepared = prepare_inputs(loaded, te)
    t0 = time.perf_counter()
    scores = score_matrix(loaded, prepared)
    elapsed = time.perf_counter() - t0
    pred = predicted_labels(scores, loaded.classes)
    return float((pred == te.labels()).mean()), elapsed


def _bench_dataset(name, ds, args):
    rows = []
    mem = memory_report(ds.dim, args.bins, args.rank)
    ratios = {"fm": mem["FM"], "sefm": mem["SEFM"], "binfm": mem["Binarized FM"]}
    for method in ("fm", "sefm", "binfm"):
        tasks = [(ds, method, args, r) for r in range(args.repeats)]
        if args.jobs > 1:
            with concurrent.futures.ProcessPoolExecutor(args.jobs) as pool:
                results = list(pool.map(_bench_star, tasks))
        else:
            results = [_bench_one(*t) for t in tasks]
        accs = np.array([a for a, _ in results])
        times = np.array([t for _, t in results])
        rows.append(
            {
                "dataset": name,
                "method": method,
                "acc_mean": accs.mean(),
                "acc_std": accs.std(),
                "pred_ms": times.mean() * 1e3,
                "memory": ratios[method].ratio_vs_fm,
            }
        )
    return rows


def _bench_star(task):
    return _bench_one(*task)


def cmd_bench(args) -> int:
    all_rows = []
    for token in args.data:
        if token in ("circles", "moons"):
            gen = gen_circles if token == "circles" else gen_moons
            ds, name = gen(args.n, noise=args.noise, seed=args.seed), token
        else:
            ds, name = load_libsvm(token), token
        all_rows.extend(_bench_dataset(name, ds, args))
    if args.format == "csv":
        lines = ["dataset,method,acc_mean,acc_std,pred_ms,memory_vs_fm"]
        for r in all_rows:
            lines.append(
                f"{r['dataset']},{r['method']},{_fmt(r['acc_mean'])},"
                f"{_fmt(r['acc_std'])},{r['pred_ms']:.3f},{_fmt(r['memory'])}"
            )
    else:
        lines = [
            "| dataset | method | accuracy (%) | prediction time (ms) | memory vs FM |",
            "|---|---|---|---|---|",
        ]
        for r in all_rows:
            lines.append(
                f"| {r['dataset']} | {r['method']} "
                f"| {100 * r['acc_mean']:.2f} ± {100 * r['acc_std']:.2f} "
                f"| {r['pred_ms']:.2f} | {r['memory']:.2f}x |"
            )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote bench table to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_mem_report(args) -> int:
    print(f"model-parameter memory for d={args.dim}, b={args.bins}, m={args.rank}:")
    for name, cost in memory_report(args.dim, args.bins, args.rank).items():
        print(f"  {name:<13} {cost.bits:>14} bits  {cost.ratio_vs_fm:.4f}x vs FM")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    try:
        return args.func(args)
    except (DataError, ModelFormatError, OSError) as exc:
        print(f"binfm: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDivergedError as exc:
        print(f"binfm: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
