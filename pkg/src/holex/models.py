"""HolE and ComplEx parameter stores, scoring, gradients and conversion.

Both models keep their parameters as real float64 matrices so the trainer can
treat them alike.  A HolE row is the K-dim real embedding.  A ComplEx row of
rank K is 2K wide: real parts in ``[:K]``, imaginary parts in ``[K:]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import ClassVar

import numpy as np

from . import _kernels
from .spectral import (
    circular_correlation,
    circular_correlation_direct,
    dft,
    spectrum_alternating_sum,
    spectrum_sum,
)

# HolE switches from the direct correlation to the spectral path at this rank.
FOURIER_MIN_RANK = 64
CUBE_ROOT_HALF = 0.5 ** (1.0 / 3.0)


@dataclass
class EmbeddingModel:
    entity: np.ndarray
    relation: np.ndarray
    rank: int
    seed: int | None = None

    kind: ClassVar[str] = ""
    kernel_code: ClassVar[int] = -1

    def __post_init__(self):
        self.entity = np.ascontiguousarray(self.entity, dtype=np.float64)
        self.relation = np.ascontiguousarray(self.relation, dtype=np.float64)
        w = self.width
        if self.entity.ndim != 2 or self.entity.shape[1] != w:
            raise ValueError(f"entity matrix must be (N_e, {w}), got {self.entity.shape}")
        if self.relation.ndim != 2 or self.relation.shape[1] != w:
            raise ValueError(f"relation matrix must be (N_r, {w}), got {self.relation.shape}")
        if not (np.all(np.isfinite(self.entity)) and np.all(np.isfinite(self.relation))):
            raise ValueError("embeddings must be finite")

    @property
    def width(self) -> int:
        raise NotImplementedError

    @property
    def n_entities(self) -> int:
        return self.entity.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation.shape[0]

    @property
    def n_parameters(self) -> int:
        return self.entity.size + self.relation.size

    def copy(self):
        return type(self)(self.entity.copy(), self.relation.copy(), self.rank, self.seed)

    def check_ids(self, p, s, o):
        p, s, o = (np.asarray(v, dtype=np.int64) for v in (p, s, o))
        if p.size and (p.min() < 0 or p.max() >= self.n_relations):
            raise ValueError(f"relation id out of range [0, {self.n_relations})")
        for v in (s, o):
            if v.size and (v.min() < 0 or v.max() >= self.n_entities):
                raise ValueError(f"entity id out of range [0, {self.n_entities})")
        return p, s, o

    def score(self, p, s, o) -> np.ndarray:
        """Vectorized scores for aligned id arrays."""
        p, s, o = self.check_ids(np.atleast_1d(p), np.atleast_1d(s), np.atleast_1d(o))
        p, s, o = np.broadcast_arrays(p, s, o)
        return _kernels.score_batch(
            self.kernel_code, self.entity, self.relation,
            np.ascontiguousarray(p), np.ascontiguousarray(s), np.ascontiguousarray(o),
        )

    def spectral_form(self):
        """``(E, R, scale)`` complex matrices with ``score = scale * Re<r, e_s, conj(e_o)>``."""
        raise NotImplementedError


@dataclass
class HolEModel(EmbeddingModel):
    kind: ClassVar[str] = "hole"
    kernel_code: ClassVar[int] = _kernels.HOLE

    @property
    def width(self) -> int:
        return self.rank

    @property
    def entity_embeddings(self) -> np.ndarray:
        return self.entity

    @property
    def relation_embeddings(self) -> np.ndarray:
        return self.relation

    def spectral_form(self):
        return dft(self.entity), dft(self.relation), 1.0 / self.rank


@dataclass
class ComplExModel(EmbeddingModel):
    kind: ClassVar[str] = "complex"
    kernel_code: ClassVar[int] = _kernels.COMPLEX

    @property
    def width(self) -> int:
        return 2 * self.rank

    @property
    def entity_embeddings(self) -> np.ndarray:
        k = self.rank
        return self.entity[:, :k] + 1j * self.entity[:, k:]

    @property
    def relation_embeddings(self) -> np.ndarray:
        k = self.rank
        return self.relation[:, :k] + 1j * self.relation[:, k:]

    @classmethod
    def from_complex(cls, entity, relation, seed=None) -> "ComplExModel":
        entity = np.asarray(entity, dtype=np.complex128)
        relation = np.asarray(relation, dtype=np.complex128)
        return cls(
            np.hstack([entity.real, entity.imag]),
            np.hstack([relation.real, relation.imag]),
            entity.shape[1],
            seed,
        )

    def spectral_form(self):
        return self.entity_embeddings, self.relation_embeddings, 1.0


MODEL_TYPES = {"hole": HolEModel, "complex": ComplExModel}


def init_model(kind: str, n_entities: int, n_relations: int, rank: int, seed: int):
    """Gaussian init with standard deviation 1/sqrt(K), per real coordinate."""
    if kind not in MODEL_TYPES:
        raise ValueError(f"unknown model kind {kind!r}")
    if min(n_entities, n_relations, rank) < 1:
        raise ValueError("N_e, N_r and K must all be >= 1")
    cls = MODEL_TYPES[kind]
    width = rank if kind == "hole" else 2 * rank
    rng = np.random.default_rng(seed)
    std = 1.0 / np.sqrt(rank)
    entity = rng.normal(0.0, std, size=(n_entities, width))
    relation = rng.normal(0.0, std, size=(n_relations, width))
    return cls(entity, relation, rank, seed)


def score_hole(model: HolEModel, p: int, s: int, o: int, method: str = "auto") -> float:
    """``r_p . (e_s corr e_o)``.

    ``method`` is ``"direct"`` (O(K^2) correlation), ``"fourier"`` (correlation
    through the DFT) or ``"spectral"`` (the frequency-domain trilinear form
    ``(1/K) Re<F(r), F(e_s), conj(F(e_o))>``).  ``"auto"`` picks direct below
    :data:`FOURIER_MIN_RANK`.
    """
    model.check_ids(p, s, o)
    r, es, eo = model.relation[p], model.entity[s], model.entity[o]
    if method == "auto":
        method = "direct" if model.rank < FOURIER_MIN_RANK else "fourier"
    if method == "direct":
        return float(r @ circular_correlation_direct(es, eo))
    if method == "fourier":
        return float(r @ circular_correlation(es, eo))
    if method == "spectral":
        z = np.sum(dft(r) * dft(es) * np.conj(dft(eo))) / model.rank
        return float(z.real)
    raise ValueError(f"unknown method {method!r}")


def score_complex(model: ComplExModel, p: int, s: int, o: int) -> float:
    """``Re<r_p, e_s, conj(e_o)>``."""
    model.check_ids(p, s, o)
    r = model.relation_embeddings[p]
    es = model.entity_embeddings[s]
    eo = model.entity_embeddings[o]
    return float(np.sum(r * es * np.conj(eo)).real)


def compress_spectrum(x) -> np.ndarray:
    """Map real rows of length K to the half-spectrum complex rows.

    Odd K:  ``[c*s(x), F(x)_1 .. F(x)_{(K-1)/2}]``
    Even K: ``[c*s(x), c*t(x), F(x)_1 .. F(x)_{K/2-1}]``
    with ``c = (1/2)**(1/3)``, so a triple product of three rows carries 1/2 on
    the always-real slots.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    k = x.shape[1]
    spec = dft(x)
    head = [CUBE_ROOT_HALF * spectrum_sum(x)[:, None]]
    if k % 2 == 0:
        head.append(CUBE_ROOT_HALF * spectrum_alternating_sum(x)[:, None])
    half = (k + 1) // 2  # ceil(K/2)
    tail = spec[:, 1:half]
    return np.hstack([np.asarray(h, dtype=np.complex128) for h in head] + [tail])


def hole_to_complex(model: HolEModel) -> ComplExModel:
    """ComplEx model whose scores are ``K/2`` times the HolE scores."""
    return ComplExModel.from_complex(
        compress_spectrum(model.entity), compress_spectrum(model.relation), seed=model.seed
    )


def complex_rank_for(hole_rank: int) -> int:
    return hole_rank // 2 + 1 if hole_rank % 2 == 0 else (hole_rank + 1) // 2


@dataclass
class Gradient:
    """Sparse gradient: only rows touched by the batch are present."""

    entity_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    entity: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    relation_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    relation: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __len__(self):
        return len(self.entity_rows) + len(self.relation_rows)

    def items(self):
        for row, g in zip(self.entity_rows, self.entity):
            yield ("entity", int(row)), g
        for row, g in zip(self.relation_rows, self.relation):
            yield ("relation", int(row)), g

    def as_dict(self) -> dict:
        return dict(self.items())


def batch_gradient(model: EmbeddingModel, p, s, o, weights, l2: float = 0.0) -> Gradient:
    """``sum_b weights[b] * d score(p_b, s_b, o_b) / d theta`` as a sparse gradient.

    With ``l2 > 0`` the gradient of ``(l2 / 2) * (|r_p|^2 + |e_s|^2 + |e_o|^2)``
    is added once per triple occurrence.
    """
    p, s, o = model.check_ids(np.atleast_1d(p), np.atleast_1d(s), np.atleast_1d(o))
    weights = np.broadcast_to(np.asarray(weights, dtype=np.float64), p.shape)
    if l2 == 0.0:
        keep = weights != 0.0
        if not np.any(keep):
            return Gradient()
        p, s, o, weights = p[keep], s[keep], o[keep], weights[keep]
    w = np.ascontiguousarray(weights)
    rel_rows, p_slot = np.unique(p, return_inverse=True)
    ent_rows, ent_slot = np.unique(np.concatenate([s, o]), return_inverse=True)
    n = len(p)
    g_ent = np.zeros((len(ent_rows), model.width))
    g_rel = np.zeros((len(rel_rows), model.width))
    _kernels.grad_batch(
        model.kernel_code, model.entity, model.relation,
        np.ascontiguousarray(p), np.ascontiguousarray(s), np.ascontiguousarray(o), w,
        np.ascontiguousarray(p_slot, dtype=np.int64),
        np.ascontiguousarray(ent_slot[:n], dtype=np.int64),
        np.ascontiguousarray(ent_slot[n:], dtype=np.int64),
        g_ent, g_rel,
    )
    if l2 != 0.0:
        g_ent += l2 * np.bincount(ent_slot, minlength=len(ent_rows))[:, None] * model.entity[ent_rows]
        g_rel += l2 * np.bincount(p_slot, minlength=len(rel_rows))[:, None] * model.relation[rel_rows]
    return Gradient(ent_rows.astype(np.int64), g_ent, rel_rows.astype(np.int64), g_rel)


def grad_score(model: EmbeddingModel, weight: float, triple) -> Gradient:
    """Gradient of ``weight * score(p, s, o)``; ``triple`` is ``(p, s, o)``."""
    p, s, o = triple[:3]
    return batch_gradient(model, [p], [s], [o], [weight])


# -- checkpoints -------------------------------------------------------------

CHECKPOINT_MAGIC = "holex-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(model: EmbeddingModel, path, extra: dict | None = None) -> Path:
    """Write a JSON header line followed by little-endian float64 matrices.

    Layout: one UTF-8 JSON object terminated by ``\\n`` holding ``format``,
    ``version``, ``kind``, ``rank``, ``n_entities``, ``n_relations``, ``width``,
    ``seed`` and ``extra``; then the entity matrix and the relation matrix,
    each row-major ``<f8``.
    """
    path = Path(path)
    header = {
        "format": CHECKPOINT_MAGIC,
        "version": CHECKPOINT_VERSION,
        "kind": model.kind,
        "rank": model.rank,
        "n_entities": model.n_entities,
        "n_relations": model.n_relations,
        "width": model.width,
        "seed": model.seed,
        "dtype": "<f8",
        "extra": extra or {},
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(model.entity.astype("<f8").tobytes(order="C"))
        fh.write(model.relation.astype("<f8").tobytes(order="C"))
    return path


def load_checkpoint(path) -> EmbeddingModel:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a holex checkpoint")
        ne, nr, w = header["n_entities"], header["n_relations"], header["width"]
        entity = np.frombuffer(fh.read(ne * w * 8), dtype="<f8").reshape(ne, w)
        relation = np.frombuffer(fh.read(nr * w * 8), dtype="<f8").reshape(nr, w)
    cls = MODEL_TYPES[header["kind"]]
    return cls(entity.astype(np.float64), relation.astype(np.float64), header["rank"], header["seed"])
