"""Compiled vs NumPy kernel backends.

Two measurements:

* per-batch score+gradient time of each backend, called directly;
* wall time of a short training run, once per backend, each in a fresh
  interpreter so the import-time backend switch (``HOLEX_PURE_PYTHON``) applies.

Usage: ``python benchmarks/bench_kernels.py [--ranks 8,32,128] [--csv out.csv]``
"""

import argparse
import csv
import json
import os
import subprocess
import sys

from holex._kernels import compiled_backend
from holex.experiments import bench_kernels

TRAIN_SNIPPET = """
import json, time
from holex import KERNEL_BACKEND
from holex.datasets import generate_latent_graph
from holex.models import init_model
from holex.training import TrainingConfig, train
store = generate_latent_graph(500, 10, 10000, seed=0)
cfg = TrainingConfig(model={model!r}, loss="logistic", rank={rank}, max_epochs={epochs}, eval_every=10**6)
m = init_model(cfg.model, store.n_entities, store.n_relations, cfg.rank, 0)
t0 = time.perf_counter()
train(m, store, cfg)
print(json.dumps({{"backend": KERNEL_BACKEND, "seconds": time.perf_counter() - t0}}))
"""


def time_training(model, rank, epochs, pure):
    env = dict(os.environ)
    env.pop("HOLEX_PURE_PYTHON", None)
    if pure:
        env["HOLEX_PURE_PYTHON"] = "1"
    code = TRAIN_SNIPPET.format(model=model, rank=rank, epochs=epochs)
    out = subprocess.run([sys.executable, "-c", code], env=env, check=True, capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ranks", default="8,16,32,64,128")
    ap.add_argument("--batch", type=int, default=1024)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=5)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()

    rows = bench_kernels([int(k) for k in args.ranks.split(",")], batch=args.batch, repeats=args.repeats)
    print(f"{'model':8s} {'K':>5s} {'backend':8s} {'us/batch':>10s}")
    for r in rows:
        print(f"{r['model']:8s} {r['k']:5d} {r['backend']:8s} {r['median_us_per_batch']:10.1f}")
    if compiled_backend is not None:
        by = {(r["model"], r["k"], r["backend"]): r["median_us_per_batch"] for r in rows}
        print("\nspeedup (python / cython):")
        for (model, k, b), t in by.items():
            if b == "cython":
                print(f"  {model:8s} K={k:<4d} {by[(model, k, 'python')] / t:6.1f}x")
    else:
        print("\ncompiled extension not built; only the NumPy backend was timed")

    print(f"\ntraining, {args.epochs} epochs on a 500-entity latent graph:")
    for model in ("complex", "hole"):
        for pure in ([False, True] if compiled_backend is not None else [True]):
            res = time_training(model, 32, args.epochs, pure)
            print(f"  {model:8s} {res['backend']:8s} {res['seconds']:7.2f}s")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["model", "k", "backend", "median_us_per_batch"], lineterminator="\n")
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
