"""Experiment drivers used by the CLI and the acceptance tests."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .datasets import SyntheticSpec, TripleStore, cv_rotate
from .evaluation import evaluate_ap, evaluate_ranking
from .models import (
    CUBE_ROOT_HALF,
    ComplExModel,
    HolEModel,
    compress_spectrum,
    hole_to_complex,
    init_model,
)
from .spectral import dft, fft_radix2
from .training import LAMBDA_GRID, TrainingConfig, derived_seed, grid_search, train

EQUIVALENCE_TOL = 1e-9


def normwise_discrepancy(a, b, scale):
    """``|a - b| / max(|a|, |b|, scale)`` elementwise."""
    a, b, scale = (np.asarray(v, dtype=np.float64) for v in (a, b, scale))
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), scale)


def _corrupted_conversion(model: HolEModel) -> ComplExModel:
    # Negative control: the always-real slots are left unscaled.
    def rows(x):
        z = compress_spectrum(x)
        z[:, : 2 if x.shape[1] % 2 == 0 else 1] /= CUBE_ROOT_HALF
        return z
    return ComplExModel.from_complex(rows(model.entity), rows(model.relation))


@dataclass
class EquivalenceReport:
    ranks: list
    trials: int
    triples_per_trial: int
    per_rank: dict = field(default_factory=dict)

    @property
    def max_conversion(self) -> float:
        return max(v["max_conversion"] for v in self.per_rank.values())

    @property
    def max_fourier(self) -> float:
        return max(v["max_fourier"] for v in self.per_rank.values())

    @property
    def passed(self) -> bool:
        return self.max_conversion <= EQUIVALENCE_TOL and self.max_fourier <= EQUIVALENCE_TOL

    def summary(self) -> dict:
        return {
            "ranks": self.ranks, "trials": self.trials, "triples_per_trial": self.triples_per_trial,
            "tolerance": EQUIVALENCE_TOL, "max_conversion_discrepancy": self.max_conversion,
            "max_fourier_discrepancy": self.max_fourier, "passed": self.passed,
            "per_rank": {str(k): v for k, v in self.per_rank.items()},
        }


def check_equivalence(ranks, trials: int = 100, triples: int = 100, seed: int = 0,
                      n_entities: int = 20, n_relations: int = 5, corrupt: bool = False) -> EquivalenceReport:
    """Compare HolE scores with ``2/K`` times the converted ComplEx scores.

    Also compares the direct correlation form against the frequency-domain
    trilinear form.  Discrepancies are normwise relative, with scale
    ``|r_p| |e_s| |e_o|``.
    """
    convert = _corrupted_conversion if corrupt else hole_to_complex
    report = EquivalenceReport(list(ranks), trials, triples)
    for k in ranks:
        worst_conv = worst_four = 0.0
        for t in range(trials):
            s_ = derived_seed(seed, k * 100003 + t)
            rng = np.random.default_rng(s_)
            hole = init_model("hole", n_entities, n_relations, k, s_)
            cplx = convert(hole)
            p = rng.integers(0, n_relations, triples)
            s = rng.integers(0, n_entities, triples)
            o = rng.integers(0, n_entities, triples)
            direct = hole.score(p, s, o)
            converted = (2.0 / k) * cplx.score(p, s, o)
            r, es, eo = hole.relation[p], hole.entity[s], hole.entity[o]
            spectral = np.sum(dft(r) * dft(es) * np.conj(dft(eo)), axis=1).real / k
            scale = np.linalg.norm(r, axis=1) * np.linalg.norm(es, axis=1) * np.linalg.norm(eo, axis=1)
            worst_conv = max(worst_conv, float(np.max(normwise_discrepancy(direct, converted, scale))))
            worst_four = max(worst_four, float(np.max(normwise_discrepancy(direct, spectral, scale))))
        report.per_rank[k] = {"max_conversion": worst_conv, "max_fourier": worst_four,
                              "complex_rank": (k // 2 + 1) if k % 2 == 0 else (k + 1) // 2}
    return report


# -- symmetric / antisymmetric sweep ------------------------------------------------

@dataclass
class SynthRow:
    model: str
    rank: int
    ap_symmetric: float
    ap_antisymmetric: float
    ap_overall: float
    lambdas: list

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def synth_one(kind: str, rank: int, spec: SyntheticSpec, lambdas=LAMBDA_GRID,
              base: TrainingConfig | None = None) -> SynthRow:
    """Cross-validated test AP at one rank; lambda chosen per fold on validation AP."""
    base = base or TrainingConfig()
    sym, anti, overall, chosen = [], [], [], []
    for fold, store in enumerate(cv_rotate(spec)):
        best = None
        for j, lam in enumerate(lambdas):
            seed = derived_seed(spec.seed, (rank * 1000 + fold) * 100 + j)
            cfg = base.replace(model=kind, loss="logistic", rank=rank, lam=lam, seed=seed)
            res = train(init_model(kind, store.n_entities, store.n_relations, rank, seed), store, cfg)
            if best is None or res.best_metric > best[0]:
                best = (res.best_metric, lam, res.model)
        rep = evaluate_ap(best[2], store, "test")
        sym.append(rep.per_relation.get("symmetric", math.nan))
        anti.append(rep.per_relation.get("antisymmetric", math.nan))
        overall.append(rep.overall)
        chosen.append(best[1])
    return SynthRow(kind, rank, _mean_defined(sym), _mean_defined(anti), _mean_defined(overall), chosen)


def _mean_defined(values) -> float:
    # folds without a positive for some relation have no AP; average the rest
    vals = [v for v in values if not math.isnan(v)]
    return float(np.mean(vals)) if vals else math.nan


def min_rank_reaching(rows, model: str, threshold: float):
    hits = [r.rank for r in rows if r.model == model and r.ap_overall >= threshold]
    return min(hits) if hits else None


def synth_verdicts(rows, threshold: float = 0.99, final_threshold: float = 0.995,
                   ratio: float = 0.6) -> dict:
    """The two checks made on the sweep: both models fit at the top rank, and
    ComplEx needs a markedly smaller rank than HolE."""
    out = {}
    top = max(r.rank for r in rows)
    for m in ("complex", "hole"):
        at_top = [r.ap_overall for r in rows if r.model == m and r.rank == top]
        out[f"{m}_ap_at_rank_{top}"] = at_top[0] if at_top else None
        out[f"{m}_min_rank_ap_{threshold}"] = min_rank_reaching(rows, m, threshold)
    c, h = out[f"complex_min_rank_ap_{threshold}"], out[f"hole_min_rank_ap_{threshold}"]
    out["rank_ratio"] = (c / h) if (c is not None and h) else None
    out["both_fit_at_top_rank"] = all(
        out[f"{m}_ap_at_rank_{top}"] is not None and out[f"{m}_ap_at_rank_{top}"] >= final_threshold
        for m in ("complex", "hole")
    )
    out["complex_smaller_rank"] = out["rank_ratio"] is not None and out["rank_ratio"] <= ratio
    out["passed"] = out["both_fit_at_top_rank"] and out["complex_smaller_rank"]
    return out


# -- loss comparison -----------------------------------------------------------------

def compare_losses(store: TripleStore, base: TrainingConfig, logistic_grid, margin_grid,
                   progress=None) -> dict:
    """Grid-search each loss under the same budget and report test metrics of
    each winner."""
    out = {}
    for loss, grid in (("logistic", logistic_grid), ("margin", margin_grid)):
        res = grid_search(store, base.replace(loss=loss), grid, progress=progress)
        test = evaluate_ranking(res.best_model, store, "test")
        out[loss] = {"best_config": res.best_config.active(), "valid_metric": res.best_metric,
                     "test": test.summary(), "grid": res.rows}
    out["filtered_mrr_gap"] = out["logistic"]["test"]["mrr_filtered"] - out["margin"]["test"]["mrr_filtered"]
    return out


# -- timing ----------------------------------------------------------------------------

def bench_scoring(exponents=range(8, 17), repeats: int = 7, work: int = 1 << 18, seed: int = 0) -> list:
    """Median nanoseconds per score: spectral HolE (radix-2 transforms) vs ComplEx.

    Each timed call scores ``work // K`` triples so per-call overhead stays
    small next to the arithmetic at every K.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for e in exponents:
        k = 2 ** e
        batch = max(1, work // k)
        r, s, o = (rng.normal(size=(batch, k)) for _ in range(3))
        cr, cs, co = (rng.normal(size=(batch, k)) + 1j * rng.normal(size=(batch, k)) for _ in range(3))

        def hole():
            return np.sum(fft_radix2(r) * fft_radix2(s) * np.conj(fft_radix2(o)), axis=1).real / k

        def cplx():
            return np.sum(cr * cs * np.conj(co), axis=1).real

        for name, fn in (("hole_fourier", hole), ("complex", cplx)):
            fn()
            times = []
            for _ in range(repeats):
                t0 = time.perf_counter_ns()
                fn()
                times.append((time.perf_counter_ns() - t0) / batch)
            rows.append({"k": k, "method": name, "median_ns": float(np.median(times))})
    return rows


def loglog_slope(rows, method: str) -> float:
    pts = [(r["k"], r["median_ns"]) for r in rows if r["method"] == method]
    if len({p[0] for p in pts}) < 2:
        return math.nan
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


def bench_kernels(ranks=(8, 16, 32, 64, 128), batch: int = 1024, n_entities: int = 2000,
                  repeats: int = 5, seed: int = 0) -> list:
    """Batch score+gradient timings of the compiled and NumPy kernel backends."""
    from . import _kernels

    backends = [("python", _kernels.python_backend)]
    if _kernels.compiled_backend is not None:
        backends.insert(0, ("cython", _kernels.compiled_backend))
    rng = np.random.default_rng(seed)
    rows = []
    for kind, code in (("hole", _kernels.HOLE), ("complex", _kernels.COMPLEX)):
        for k in ranks:
            w = k if kind == "hole" else 2 * k
            E = rng.normal(size=(n_entities, w))
            R = rng.normal(size=(50, w))
            p = rng.integers(0, 50, batch)
            s = rng.integers(0, n_entities, batch)
            o = rng.integers(0, n_entities, batch)
            wts = rng.normal(size=batch)
            p_slot = np.unique(p, return_inverse=True)[1].astype(np.int64)
            e_slot = np.unique(np.r_[s, o], return_inverse=True)[1].astype(np.int64)
            for name, mod in backends:
                times = []
                for _ in range(repeats):
                    gE = np.zeros((2 * batch, w))
                    gR = np.zeros((50, w))
                    t0 = time.perf_counter_ns()
                    mod.score_batch(code, E, R, p, s, o)
                    mod.grad_batch(code, E, R, p, s, o, wts, p_slot, e_slot[:batch], e_slot[batch:], gE, gR)
                    times.append(time.perf_counter_ns() - t0)
                rows.append({"model": kind, "k": k, "backend": name,
                             "median_us_per_batch": float(np.median(times)) / 1e3})
    return rows
