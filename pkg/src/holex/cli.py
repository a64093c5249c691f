"""Command-line entry point: ``holex <command> [flags]``.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 verification
failure.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .datasets import SyntheticSpec, generate_latent_graph, generate_synthetic, load_tsv, write_tsv
from .evaluation import evaluate_ranking
from .experiments import (
    bench_kernels,
    bench_scoring,
    check_equivalence,
    compare_losses,
    loglog_slope,
    synth_one,
    synth_verdicts,
)
from .models import init_model, save_checkpoint
from .training import LAMBDA_GRID, RANK_GRID, TrainingConfig, default_grid, grid_search, train

log = logging.getLogger("holex")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


def parse_int_list(text: str) -> list[int]:
    """``"1..16"``, ``"1,2,5"``, ``"8"`` or mixes like ``"1..3,8"``."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = part.split("..")
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise UsageError(f"bad integer list {text!r}") from None
    if not out:
        raise UsageError(f"empty integer list {text!r}")
    return out


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None


def parse_grid(text: str) -> list[dict]:
    """Grid override: a JSON list of points, a JSON file, or
    ``"rank=10,20;lam=0.1,0"`` (cross product)."""
    path = Path(text)
    if path.suffix == ".json" and path.exists():
        text = path.read_text()
    text = text.strip()
    if text.startswith("["):
        try:
            grid = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad --grid-override JSON: {exc}") from None
    else:
        axes = []
        for part in text.split(";"):
            if "=" not in part:
                raise UsageError(f"bad --grid-override axis {part!r}")
            key, vals = part.split("=", 1)
            key = {"k": "rank", "lambda": "lam"}.get(key.strip(), key.strip())
            conv = int if key == "rank" else float
            try:
                axes.append([(key, conv(v)) for v in vals.split(",") if v.strip()])
            except ValueError:
                raise UsageError(f"bad value in --grid-override axis {part!r}") from None
        grid = [dict(combo) for combo in itertools.product(*axes)]
    allowed = {"rank", "lam", "gamma", "learning_rate", "batch_size", "negatives_per_positive"}
    for point in grid:
        if not isinstance(point, dict) or set(point) - allowed:
            raise UsageError(f"grid points may only set {sorted(allowed)}")
    return grid


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def manifest(args, command: str, config: dict, outputs: dict, started: str) -> dict:
    return {
        "command": command,
        "argv": [a for a in getattr(args, "_argv", [])],
        "config": config,
        "seed": getattr(args, "seed", None),
        "code_version": __version__,
        "kernel_backend": BACKEND,
        "outputs": {k: str(v) for k, v in outputs.items()},
        "timestamps": {"started": started, "finished": _now()},
    }


def write_json(path: Path, obj) -> None:
    text = json.dumps(_finite_or_null(obj), indent=2, sort_keys=True, default=_json_default, allow_nan=False)
    path.write_text(text + "\n")


def _finite_or_null(obj):
    # strict JSON: undefined metrics are written as null
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite_or_null(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_null(v) for v in obj]
    return obj


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_from(args, **over) -> TrainingConfig:
    kw = dict(
        model=args.model, loss=args.loss, rank=args.k, lam=args.lam, gamma=args.gamma,
        learning_rate=args.lr, batch_size=args.batch, negatives_per_positive=args.negatives,
        max_epochs=args.max_epochs, eval_every=args.eval_every, patience=args.patience,
        seed=args.seed, valid_max_triples=args.valid_max,
    )
    kw.update(over)
    try:
        return TrainingConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _latent_store(args):
    kw = {"n_entities": args.n_entities, "n_relations": args.n_relations, "n_triples": args.n_triples,
          "temperature": args.temperature, "rank": args.planted_rank}
    return generate_latent_graph(**{k: v for k, v in kw.items() if v is not None}, seed=args.seed)


def _add_latent_flags(p):
    p.add_argument("--n-entities", type=int, default=None)
    p.add_argument("--n-relations", type=int, default=None)
    p.add_argument("--n-triples", type=int, default=None)
    p.add_argument("--temperature", type=float, default=None, help="sharpness of the planted object choice")
    p.add_argument("--planted-rank", type=int, default=None, help="rank of the generating model")


def _load_store(args):
    missing = [p for p in (args.train, args.valid, args.test) if p is None]
    if missing:
        raise UsageError("--train, --valid and --test are required")
    return load_tsv(args.train, args.valid, args.test)


# -- commands -----------------------------------------------------------------------

def cmd_train(args) -> int:
    started = _now()
    cfg = _config_from(args)
    store = _load_store(args)
    out = _out_dir(args)
    model = init_model(cfg.model, store.n_entities, store.n_relations, cfg.rank, cfg.seed)
    res = train(model, store, cfg)
    test = evaluate_ranking(res.model, store, "test")
    paths = {"checkpoint": out / "checkpoint.hxc", "log": out / "train_log.jsonl", "report": out / "report.json"}
    save_checkpoint(res.model, paths["checkpoint"], extra={"config": cfg.active()})
    paths["log"].write_text(res.log_lines())
    report = {
        "manifest": manifest(args, "train", {"training": cfg.active(), "dataset": store.report}, paths, started),
        "training": {"best_epoch": res.best_epoch, "epochs_run": res.epochs_run,
                     "best_valid_metric": res.best_metric, "metric": res.metric_name,
                     "final_loss": res.log[-1]["loss"]},
        "test": test.summary(),
    }
    write_json(paths["report"], report)
    print(json.dumps(report["test"], sort_keys=True))
    return EXIT_OK


def cmd_check_equivalence(args) -> int:
    started = _now()
    ranks = parse_int_list(args.k)
    if min(ranks) < 1:
        raise UsageError("ranks must be >= 1")
    rep = check_equivalence(ranks, args.trials, args.triples, args.seed, corrupt=args.corrupt_conversion)
    summary = rep.summary()
    verdict = "PASS" if rep.passed else "FAIL"
    print(f"{verdict} max conversion discrepancy {rep.max_conversion:.3e}, "
          f"max Fourier-form discrepancy {rep.max_fourier:.3e} (tol {summary['tolerance']:.0e})")
    if args.out:
        out = _out_dir(args)
        path = out / "equivalence.json"
        write_json(path, {"manifest": manifest(args, "check-equivalence", {
            "ranks": ranks, "trials": args.trials, "triples": args.triples,
            "corrupt_conversion": args.corrupt_conversion}, {"report": path}, started), "result": summary})
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_synth(args) -> int:
    started = _now()
    ranks = parse_int_list(args.ranks)
    lambdas = parse_float_list(args.lambdas) if args.lambdas else list(LAMBDA_GRID)
    models = [m.strip() for m in args.models.split(",")]
    for m in models:
        if m not in ("hole", "complex"):
            raise UsageError(f"unknown model {m!r}")
    spec = SyntheticSpec(n=args.n, seed=args.seed, folds=args.folds)
    base = _config_from(args, loss="logistic", rank=1)
    out = _out_dir(args)
    rows = []
    for m in models:
        for k in ranks:
            row = synth_one(m, k, spec, lambdas, base)
            rows.append(row)
            log.info("%s rank %d: AP sym %.4f anti %.4f overall %.4f", m, k,
                     row.ap_symmetric, row.ap_antisymmetric, row.ap_overall)
    paths = {}
    for panel in ("symmetric", "antisymmetric", "overall"):
        path = out / f"ap_{panel}.csv"
        write_csv(path, [{"model": r.model, "rank": r.rank, "ap": f"{getattr(r, 'ap_' + panel):.6f}"}
                         for r in rows], ["model", "rank", "ap"])
        paths[f"curve_{panel}"] = path
    paths["report"] = out / "synth_report.json"
    verdicts = synth_verdicts(rows) if set(models) == {"hole", "complex"} else {}
    write_json(paths["report"], {
        "manifest": manifest(args, "synth", {"synthetic": spec.__dict__, "ranks": ranks, "lambdas": lambdas,
                                             "models": models, "training": base.active()}, paths, started),
        "rows": [r.as_dict() for r in rows],
        "verdicts": verdicts,
    })
    for r in rows:
        print(f"{r.model:8s} rank {r.rank:3d}  AP sym {r.ap_symmetric:.4f}  "
              f"anti {r.ap_antisymmetric:.4f}  overall {r.ap_overall:.4f}")
    if verdicts:
        print(json.dumps(verdicts, sort_keys=True))
        if args.strict and not verdicts["passed"]:
            return EXIT_VERIFY
    return EXIT_OK


def cmd_grid(args) -> int:
    started = _now()
    base = _config_from(args)
    if args.grid_override:
        grid = parse_grid(args.grid_override)
    else:
        grid = default_grid(base.loss, parse_int_list(args.ranks) if args.ranks else RANK_GRID)
    store = _load_store(args)
    out = _out_dir(args)
    res = grid_search(store, base, grid, progress=lambda r: log.info("grid %s", r))
    test = evaluate_ranking(res.best_model, store, "test")
    paths = {"grid": out / "grid.csv", "report": out / "grid_report.json", "checkpoint": out / "best.hxc"}
    cols = sorted({k for r in res.rows for k in r}, key=lambda c: (c != "index", c))
    write_csv(paths["grid"], res.rows, cols)
    save_checkpoint(res.best_model, paths["checkpoint"], extra={"config": res.best_config.active()})
    write_json(paths["report"], {
        "manifest": manifest(args, "grid", {"base": base.active(), "grid": grid, "dataset": store.report},
                             paths, started),
        "rows": res.rows,
        "winner": {"config": res.best_config.active(), "valid_metric": res.best_metric, "test": test.summary()},
    })
    print(f"{len(res.rows)} configs; winner {res.best_config.active()} valid {res.best_metric:.4f} "
          f"test filtered MRR {test.mrr_filtered:.4f}")
    return EXIT_OK


def cmd_loss_gap(args) -> int:
    started = _now()
    base = _config_from(args)
    store = _load_store(args) if args.train else _latent_store(args)
    ranks = parse_int_list(args.ranks) if args.ranks else [base.rank]
    lambdas = parse_float_list(args.lambdas) if args.lambdas else None
    gammas = parse_float_list(args.gammas) if args.gammas else None
    lgrid = [{"rank": r, "lam": v} for r in ranks for v in lambdas] if lambdas else default_grid("logistic", ranks)
    mgrid = [{"rank": r, "gamma": v} for r in ranks for v in gammas] if gammas else default_grid("margin", ranks)
    out = _out_dir(args)
    res = compare_losses(store, base, lgrid, mgrid, progress=lambda r: log.info("grid %s", r))
    path = out / "loss_gap.json"
    write_json(path, {"manifest": manifest(args, "loss-gap", {"base": base.active(), "dataset": store.report,
                                                              "logistic_grid": lgrid, "margin_grid": mgrid},
                                           {"report": path}, started), "result": res})
    for loss in ("logistic", "margin"):
        t = res[loss]["test"]
        print(f"{loss:8s} filtered MRR {t['mrr_filtered']:.4f} raw {t['mrr_raw']:.4f} "
              f"H@1 {t['hits@1']:.4f} H@3 {t['hits@3']:.4f} H@10 {t['hits@10']:.4f}")
    print(f"gap (logistic - margin) {res['filtered_mrr_gap']:+.4f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    started = _now()
    out = _out_dir(args)
    rows = bench_scoring(range(args.min_exp, args.max_exp + 1), repeats=args.repeats, seed=args.seed)
    paths = {"csv": out / "bench_scoring.csv", "report": out / "bench_report.json"}
    write_csv(paths["csv"], rows, ["k", "method", "median_ns"])
    info = {m: loglog_slope(rows, m) for m in ("hole_fourier", "complex")}
    krows = []
    if args.kernels:
        krows = bench_kernels(seed=args.seed)
        paths["kernels_csv"] = out / "bench_kernels.csv"
        write_csv(paths["kernels_csv"], krows, ["model", "k", "backend", "median_us_per_batch"])
    write_json(paths["report"], {
        "manifest": manifest(args, "bench", {"min_exp": args.min_exp, "max_exp": args.max_exp,
                                             "repeats": args.repeats}, paths, started),
        "loglog_slopes": info, "rows": rows, "kernel_rows": krows,
    })
    for r in rows:
        print(f"K={r['k']:6d} {r['method']:13s} {r['median_ns']:14.0f} ns/score")
    print("log-log slope: " + ", ".join(f"{m} {s:.2f}" for m, s in info.items()))
    for r in krows:
        print(f"kernel {r['model']:7s} K={r['k']:4d} {r['backend']:6s} {r['median_us_per_batch']:10.1f} us/batch")
    return EXIT_OK


def cmd_make_data(args) -> int:
    if args.kind == "synthetic":
        store = generate_synthetic(SyntheticSpec(n=args.n, seed=args.seed, folds=args.folds))
    else:
        store = _latent_store(args)
    paths = write_tsv(store, args.out)
    print(json.dumps({**store.counts(), **{k: str(v) for k, v in paths.items()}}, sort_keys=True))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------

def _add_training_flags(p, with_data=True):
    p.add_argument("--model", choices=("hole", "complex"), default="complex")
    p.add_argument("--loss", choices=("margin", "logistic"), default="logistic")
    p.add_argument("--k", type=int, default=10, help="embedding rank K")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="L2 weight (logistic loss)")
    p.add_argument("--gamma", type=float, default=0.5, help="margin (margin loss)")
    p.add_argument("--lr", type=float, default=0.5, help="AdaGrad learning rate")
    p.add_argument("--batch", type=int, default=512)
    p.add_argument("--negatives", type=int, default=1, help="corruptions per positive")
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--eval-every", type=int, default=50)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--valid-max", type=int, default=None, help="cap on validation triples per check")
    p.add_argument("--seed", type=int, default=0)
    if with_data:
        p.add_argument("--train")
        p.add_argument("--valid")
        p.add_argument("--test")
    p.add_argument("--out", default="holex_out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="holex", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model and evaluate it on test")
    _add_training_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("check-equivalence", help="verify HolE = (2/K) ComplEx after conversion")
    p.add_argument("--k", default="1..16", help="ranks, e.g. 1..16 or 2,4,8")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--triples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--corrupt-conversion", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check_equivalence)

    p = sub.add_parser("synth", help="symmetric/antisymmetric AP-vs-rank sweep")
    _add_training_flags(p, with_data=False)
    p.add_argument("--ranks", default="1..50")
    p.add_argument("--models", default="complex,hole")
    p.add_argument("--lambdas", default=None, help="comma list; default is the full lambda grid")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--strict", action="store_true", help="exit 3 if the sweep verdict fails")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("grid", help="grid search with validation filtered MRR")
    _add_training_flags(p)
    p.add_argument("--grid-override", default=None)
    p.add_argument("--ranks", default=None, help="ranks for the default grid")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("loss-gap", help="logistic vs margin loss under matched budgets")
    _add_training_flags(p)
    p.add_argument("--ranks", default=None, help="comma list; default is --k")
    p.add_argument("--lambdas", default=None, help="comma list; default is the full lambda grid")
    p.add_argument("--gammas", default=None, help="comma list; default is the full margin grid")
    _add_latent_flags(p)
    p.set_defaults(func=cmd_loss_gap)

    p = sub.add_parser("bench", help="time spectral HolE scoring against ComplEx scoring")
    p.add_argument("--min-exp", type=int, default=8)
    p.add_argument("--max-exp", type=int, default=16)
    p.add_argument("--repeats", type=int, default=7)
    p.add_argument("--kernels", action="store_true", help="also time compiled vs NumPy kernels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="holex_out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("make-data", help="write a generated dataset as TSV files")
    p.add_argument("kind", choices=("synthetic", "latent"))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--folds", type=int, default=5)
    _add_latent_flags(p)
    p.set_defaults(func=cmd_make_data)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    args._argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"holex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"holex: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
