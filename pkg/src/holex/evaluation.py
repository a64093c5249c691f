"""Link-prediction ranking metrics and average precision."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datasets import TripleStore

HITS_AT = (1, 3, 10)
SIDES = ("subject", "object")
# Bound on the (triples x candidates) score block held in memory at once.
_BLOCK_CELLS = 1 << 22


@dataclass
class RankingReport:
    mrr_raw: float
    mrr_filtered: float
    hits: dict
    hits_raw: dict
    ranks: dict = field(repr=False)
    n_triples: int = 0

    def summary(self) -> dict:
        return {
            "n_triples": self.n_triples,
            "mrr_raw": self.mrr_raw,
            "mrr_filtered": self.mrr_filtered,
            **{f"hits@{n}": v for n, v in self.hits.items()},
            **{f"hits@{n}_raw": v for n, v in self.hits_raw.items()},
        }


@dataclass
class APReport:
    rank: int
    overall: float
    per_relation: dict

    def summary(self) -> dict:
        return {"rank": self.rank, "ap_overall": self.overall,
                **{f"ap_{k}": v for k, v in self.per_relation.items()}}


def rank_from_scores(scores, true_index: int, exclude=None) -> int:
    """``1 + #strictly higher + ceil(#ties / 2)`` among candidates not excluded.

    ``exclude`` lists candidate indices to drop (the true index is never
    dropped).  Ties are split pessimistically.
    """
    scores = np.asarray(scores, dtype=np.float64)
    target = scores[true_index]
    keep = np.ones(len(scores), dtype=bool)
    if exclude is not None and len(exclude):
        keep[np.asarray(exclude, dtype=np.int64)] = False
    keep[true_index] = False
    cand = scores[keep]
    higher = int(np.count_nonzero(cand > target))
    ties = int(np.count_nonzero(cand == target))
    return 1 + higher + (ties + 1) // 2


def _candidate_scores(model, p, s, o, side):
    n = model.n_entities
    cand = np.arange(n, dtype=np.int64)
    if side == "object":
        return model.score(np.full(n, p), np.full(n, s), cand)
    return model.score(np.full(n, p), cand, np.full(n, o))


def rank_triple(model, triple, store: TripleStore, mode: str = "filtered", side: str = "object") -> int:
    """Rank of the true entity when the ``side`` slot of ``(p, s, o)`` is replaced
    by every entity."""
    if mode not in ("raw", "filtered"):
        raise ValueError(f"mode must be raw or filtered, got {mode!r}")
    if side not in SIDES:
        raise ValueError(f"side must be subject or object, got {side!r}")
    p, s, o = (int(v) for v in triple[:3])
    if not store.contains(p, s, o):
        raise ValueError(f"triple {(p, s, o)} is not in the store")
    scores = _candidate_scores(model, p, s, o, side)
    exclude = None
    if mode == "filtered":
        by_ps, by_po = store.filters()
        exclude = by_ps.get((p, s), ()) if side == "object" else by_po.get((p, o), ())
    return rank_from_scores(scores, o if side == "object" else s, exclude)


def mrr_and_hits(ranks, hits_at=HITS_AT) -> dict:
    ranks = np.asarray(ranks, dtype=np.float64).ravel()
    if ranks.size == 0:
        raise ValueError("no ranks given")
    if np.any(ranks < 1):
        raise ValueError("ranks must be >= 1")
    return {
        "mrr": float(np.mean(1.0 / ranks)),
        "hits": {n: float(np.mean(ranks <= n)) for n in hits_at},
    }


def _block_scores(model, spectra, p, s, o, side):
    """Scores of every candidate for a block of triples, via the complex form."""
    ent, rel, scale = spectra
    if side == "object":
        q = rel[p] * ent[s]
        return scale * (q.real @ ent.real.T + q.imag @ ent.imag.T)
    q = rel[p] * np.conj(ent[o])
    return scale * (q.real @ ent.real.T - q.imag @ ent.imag.T)


def rank_all(model, triples, store: TripleStore, sides=SIDES) -> dict:
    """Raw and filtered ranks of every triple, per side.

    Returns ``{"subject_raw": ..., "subject_filtered": ..., "object_raw": ...,
    "object_filtered": ...}`` (only the requested sides).
    """
    triples = np.asarray(triples, dtype=np.int64)
    triples = triples.reshape(-1, triples.shape[-1])[:, :3]
    spectra = model.spectral_form()
    by_ps, by_po = store.filters()
    n = model.n_entities
    block = max(1, _BLOCK_CELLS // max(n, 1))
    out = {}
    for side in sides:
        raw = np.empty(len(triples), dtype=np.int64)
        filt = np.empty(len(triples), dtype=np.int64)
        for start in range(0, len(triples), block):
            chunk = triples[start:start + block]
            p, s, o = chunk[:, 0], chunk[:, 1], chunk[:, 2]
            scores = _block_scores(model, spectra, p, s, o, side)
            truth = o if side == "object" else s
            rows = np.arange(len(chunk))
            target = scores[rows, truth][:, None]
            higher = np.count_nonzero(scores > target, axis=1)
            ties = np.count_nonzero(scores == target, axis=1) - 1
            raw[start:start + len(chunk)] = 1 + higher + (ties + 1) // 2
            for i in rows:
                key = (int(p[i]), int(s[i])) if side == "object" else (int(p[i]), int(o[i]))
                excl = (by_ps if side == "object" else by_po).get(key)
                h, t = higher[i], ties[i]
                if excl is not None:
                    excl = excl[excl != truth[i]]
                    vals = scores[i, excl]
                    h -= np.count_nonzero(vals > target[i, 0])
                    t -= np.count_nonzero(vals == target[i, 0])
                filt[start + i] = 1 + h + (t + 1) // 2
        out[f"{side}_raw"] = raw
        out[f"{side}_filtered"] = filt
    return out


def evaluate_ranking(model, store: TripleStore, split: str = "test", max_triples: int | None = None,
                     sides=SIDES) -> RankingReport:
    """Pooled subject- and object-side ranking metrics over the split's positives."""
    triples = store.positives(split)
    if max_triples is not None:
        triples = triples[:max_triples]
    if len(triples) == 0:
        raise ValueError(f"split {split!r} has no positive triples")
    ranks = rank_all(model, triples, store, sides)
    pooled_raw = np.concatenate([ranks[f"{side}_raw"] for side in sides])
    pooled_filt = np.concatenate([ranks[f"{side}_filtered"] for side in sides])
    raw = mrr_and_hits(pooled_raw)
    filt = mrr_and_hits(pooled_filt)
    return RankingReport(raw["mrr"], filt["mrr"], filt["hits"], raw["hits"], ranks, len(triples))


def average_precision(scores, labels) -> float:
    """Mean over positives of precision at that positive's position.

    Sorted by descending score; ties keep input order (stable sort).
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    pos = labels == 1
    if not np.any(pos):
        raise ValueError("average precision needs at least one positive label")
    order = np.argsort(-scores, kind="stable")
    hit = pos[order]
    cum = np.cumsum(hit)
    ranks = np.arange(1, len(hit) + 1)
    return float(np.mean(cum[hit] / ranks[hit]))


def evaluate_ap(model, store: TripleStore, split: str = "test", relation_names=None) -> APReport:
    """AP over the labeled cells of ``split``: overall and per relation."""
    cells = store.split(split)
    scores = model.score(cells[:, 0], cells[:, 1], cells[:, 2])
    per = {}
    for rel in np.unique(cells[:, 0]):
        mask = cells[:, 0] == rel
        if np.any(cells[mask, 3] == 1):
            name = store.relations[rel] if relation_names is None else relation_names[rel]
            per[name] = average_precision(scores[mask], cells[mask, 3])
    overall = average_precision(scores, cells[:, 3]) if np.any(cells[:, 3] == 1) else math.nan
    return APReport(model.rank, overall, per)
