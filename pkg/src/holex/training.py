"""Losses, negative sampling, AdaGrad and the training loop."""

from __future__ import annotations

import dataclasses
import itertools
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .datasets import LabeledTriple, TripleStore
from .evaluation import evaluate_ap, evaluate_ranking
from .models import EmbeddingModel, Gradient, batch_gradient, init_model

log = logging.getLogger(__name__)

ADAGRAD_EPS = 1e-8
RANK_GRID = (10, 20, 50, 100, 150, 200)
LAMBDA_GRID = (0.1, 0.03, 0.01, 0.003, 0.001, 0.0003, 0.0)
GAMMA_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


@dataclass(frozen=True)
class TrainingConfig:
    model: str = "complex"
    loss: str = "logistic"
    rank: int = 10
    lam: float = 0.0
    gamma: float = 0.5
    learning_rate: float = 0.5
    batch_size: int = 512
    negatives_per_positive: int = 1
    max_epochs: int = 1000
    eval_every: int = 50
    patience: int = 3
    seed: int = 0
    # cap on validation triples ranked at each check (None: all of them)
    valid_max_triples: int | None = None

    def __post_init__(self):
        if self.model not in ("hole", "complex"):
            raise ValueError(f"model must be hole or complex, got {self.model!r}")
        if self.loss not in ("logistic", "margin"):
            raise ValueError(f"loss must be logistic or margin, got {self.loss!r}")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.lam < 0 or self.gamma < 0:
            raise ValueError("lambda and gamma must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        for name in ("batch_size", "negatives_per_positive", "max_epochs", "eval_every", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def regularization(self) -> float:
        """lambda under the logistic loss; the margin loss carries none."""
        return self.lam if self.loss == "logistic" else 0.0

    @property
    def margin(self) -> float:
        return self.gamma if self.loss == "margin" else 0.0

    def active(self) -> dict:
        """Hyperparameters that actually influence this run."""
        d = dataclasses.asdict(self)
        d.pop("gamma" if self.loss == "logistic" else "lam")
        return d

    def replace(self, **kw) -> "TrainingConfig":
        return dataclasses.replace(self, **kw)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def margin_loss(score_pos, score_neg, gamma):
    """Hinge ``max(0, gamma + sigmoid(score_neg) - sigmoid(score_pos))``."""
    if np.any(np.asarray(gamma) < 0):
        raise ValueError("gamma must be non-negative")
    out = np.maximum(0.0, gamma + sigmoid(score_neg) - sigmoid(score_pos))
    return float(out) if np.ndim(out) == 0 else out


def logistic_loss(score, y):
    """``log(1 + exp(-y * score))``, overflow-safe."""
    out = np.logaddexp(0.0, -np.asarray(y, dtype=np.float64) * np.asarray(score, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


def corrupt_batch(triples, n_entities: int, rng: np.random.Generator) -> np.ndarray:
    """Replace subject or object (coin flip each) with a different uniform entity."""
    if n_entities < 2:
        raise ValueError("corruption needs at least 2 entities")
    triples = np.asarray(triples, dtype=np.int64)
    out = triples[:, :3].copy()
    b = len(out)
    on_subject = rng.random(b) < 0.5
    repl = rng.integers(0, n_entities - 1, size=b)
    col = np.where(on_subject, 1, 2)
    orig = out[np.arange(b), col]
    repl += repl >= orig
    out[np.arange(b), col] = repl
    return out


def sample_negative(triple: LabeledTriple, n_entities: int, rng: np.random.Generator) -> LabeledTriple:
    if triple.y != 1:
        raise ValueError("only positive triples are corrupted")
    p, s, o = corrupt_batch([(triple.p, triple.s, triple.o)], n_entities, rng)[0]
    return LabeledTriple(int(p), int(s), int(o), -1)


@dataclass
class OptimizerState:
    entity: np.ndarray
    relation: np.ndarray
    eps: float = ADAGRAD_EPS

    @classmethod
    def for_model(cls, model: EmbeddingModel, eps: float = ADAGRAD_EPS) -> "OptimizerState":
        return cls(np.zeros_like(model.entity), np.zeros_like(model.relation), eps)


def adagrad_step(state: OptimizerState, grad: Gradient, lr: float) -> Gradient:
    """Accumulate squared gradients and return the AdaGrad deltas (not applied)."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    deltas = {}
    for name in ("entity", "relation"):
        rows = getattr(grad, f"{name}_rows")
        g = getattr(grad, name)
        if len(rows) == 0:
            deltas[name] = (rows, g)
            continue
        acc = getattr(state, name)
        acc[rows] += g * g
        deltas[name] = (rows, -lr * g / (np.sqrt(acc[rows]) + state.eps))
    return Gradient(deltas["entity"][0], deltas["entity"][1], deltas["relation"][0], deltas["relation"][1])


def apply_adagrad(model: EmbeddingModel, state: OptimizerState, grad: Gradient, lr: float) -> None:
    """In-place AdaGrad update through the batch kernel."""
    if len(grad.entity_rows):
        _kernels.adagrad_update(model.entity, state.entity, grad.entity_rows,
                                np.ascontiguousarray(grad.entity), lr, state.eps)
    if len(grad.relation_rows):
        _kernels.adagrad_update(model.relation, state.relation, grad.relation_rows,
                                np.ascontiguousarray(grad.relation), lr, state.eps)


def project_unit_norm(model: EmbeddingModel, rows=None) -> None:
    """Rescale entity rows with L2 norm above 1 back onto the unit sphere."""
    ent = model.entity
    if rows is None:
        rows = np.arange(ent.shape[0])
    sub = ent[rows]
    norms = np.sqrt(np.einsum("ij,ij->i", sub, sub))
    over = norms > 1.0
    if np.any(over):
        idx = np.asarray(rows)[over]
        ent[idx] = sub[over] / norms[over, None]


def batch_objective(model: EmbeddingModel, cfg: TrainingConfig, batch) -> tuple[float, Gradient]:
    """Loss value and analytic gradient for one batch.

    Logistic: ``batch`` is ``(n, 4)`` labeled triples; the objective is the
    mean of ``log(1 + exp(-y*score)) + lam * (|r_p|^2 + |e_s|^2 + |e_o|^2)``.
    Margin: ``batch`` is ``(positives, negatives)`` aligned ``(n, 3)`` arrays;
    the objective is the mean hinge over pairs.
    """
    if cfg.loss == "logistic":
        cells = np.asarray(batch, dtype=np.int64)
        p, s, o, y = cells[:, 0], cells[:, 1], cells[:, 2], cells[:, 3].astype(np.float64)
        n = len(cells)
        scores = model.score(p, s, o)
        loss = logistic_loss(scores, y)
        weights = -y * sigmoid(-y * scores) / n
        lam = cfg.regularization
        grad = batch_gradient(model, p, s, o, weights, l2=2.0 * lam / n)
        total = float(np.sum(loss)) / n
        if lam > 0.0:
            total += lam / n * float(
                np.sum(model.relation[p] ** 2) + np.sum(model.entity[s] ** 2) + np.sum(model.entity[o] ** 2)
            )
        return total, grad

    pos, neg = (np.asarray(a, dtype=np.int64) for a in batch)
    n = len(pos)
    sp = model.score(pos[:, 0], pos[:, 1], pos[:, 2])
    sn = model.score(neg[:, 0], neg[:, 1], neg[:, 2])
    sig_p, sig_n = sigmoid(sp), sigmoid(sn)
    hinge = cfg.gamma + sig_n - sig_p
    active = hinge > 0.0
    total = float(np.sum(hinge[active])) / n
    w_pos = np.where(active, -sig_p * (1.0 - sig_p), 0.0) / n
    w_neg = np.where(active, sig_n * (1.0 - sig_n), 0.0) / n
    both = np.vstack([pos[:, :3], neg[:, :3]])
    grad = batch_gradient(model, both[:, 0], both[:, 1], both[:, 2], np.concatenate([w_pos, w_neg]))
    return total, grad


@dataclass
class TrainResult:
    model: EmbeddingModel
    log: list = field(default_factory=list)
    best_epoch: int = 0
    best_metric: float = float("-inf")
    epochs_run: int = 0
    metric_name: str = ""

    def log_lines(self) -> str:
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in self.log)


def validation_metric(model, store: TripleStore, cfg: TrainingConfig) -> tuple[str, float]:
    if store.closed_world:
        return "valid_ap", evaluate_ap(model, store, "valid").overall
    rep = evaluate_ranking(model, store, "valid", max_triples=cfg.valid_max_triples)
    return "valid_mrr_filtered", rep.mrr_filtered


def train(model: EmbeddingModel, store: TripleStore, cfg: TrainingConfig, progress=None) -> TrainResult:
    """AdaGrad with early stopping on a validation metric.

    Open-world stores are trained on positives with fresh corruptions drawn
    per batch; closed-world stores (observed negatives) use their labels as
    given and always use the logistic objective.  The returned model holds the
    parameters of the best validation check.
    """
    model = model.copy()
    if store.closed_world:
        cells = store.train
        if cfg.loss != "logistic":
            raise ValueError("closed-world stores are trained with the logistic loss")
    else:
        cells = store.train[store.train[:, 3] == 1]
    if len(cells) == 0:
        raise ValueError("training split is empty")
    has_valid = len(store.valid) > 0 and (store.closed_world or np.any(store.valid[:, 3] == 1))

    rng = np.random.default_rng(cfg.seed)
    state = OptimizerState.for_model(model)
    use_projection = cfg.loss == "margin"
    if use_projection:
        project_unit_norm(model)

    result = TrainResult(model=model.copy())
    bad_checks = 0
    n = len(cells)
    k_neg = cfg.negatives_per_positive
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            chunk = cells[order[start:start + cfg.batch_size]]
            if store.closed_world:
                batch = chunk
            else:
                pos = np.repeat(chunk[:, :3], k_neg, axis=0)
                neg = corrupt_batch(pos, store.n_entities, rng)
                if cfg.loss == "logistic":
                    batch = np.vstack([
                        np.column_stack([chunk[:, :3], np.ones(len(chunk), dtype=np.int64)]),
                        np.column_stack([neg, -np.ones(len(neg), dtype=np.int64)]),
                    ])
                else:
                    batch = (pos, neg)
            loss, grad = batch_objective(model, cfg, batch)
            losses.append(loss)
            apply_adagrad(model, state, grad, cfg.learning_rate)
            if use_projection:
                project_unit_norm(model, grad.entity_rows)
        record = {"epoch": epoch, "loss": float(np.mean(losses))}
        stop = False
        if has_valid and (epoch % cfg.eval_every == 0 or epoch == cfg.max_epochs):
            name, value = validation_metric(model, store, cfg)
            record[name] = value
            result.metric_name = name
            if value > result.best_metric:
                result.best_metric = value
                result.best_epoch = epoch
                result.model = model.copy()
                bad_checks = 0
            else:
                bad_checks += 1
                stop = bad_checks >= cfg.patience
        result.log.append(record)
        if progress is not None:
            progress(record)
        if stop:
            break
    result.epochs_run = epoch
    if not has_valid:
        result.model = model.copy()
        result.best_epoch = epoch
    return result


def default_grid(loss: str, ranks=RANK_GRID) -> list[dict]:
    if loss == "logistic":
        return [{"rank": k, "lam": lam} for k, lam in itertools.product(ranks, LAMBDA_GRID)]
    if loss == "margin":
        return [{"rank": k, "gamma": g} for k, g in itertools.product(ranks, GAMMA_GRID)]
    raise ValueError(f"unknown loss {loss!r}")


def derived_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


@dataclass
class GridResult:
    best_config: TrainingConfig
    best_model: EmbeddingModel
    best_metric: float
    rows: list


def grid_search(store: TripleStore, base: TrainingConfig, grid: list[dict] | None = None,
                progress=None) -> GridResult:
    """Train one model per grid point; keep the best validation metric.

    Point ``i`` gets its init and sampling seeds from ``(base.seed, i)``.
    """
    if len(store.valid) == 0:
        raise ValueError("grid search needs a validation split")
    grid = default_grid(base.loss) if grid is None else grid
    if not grid:
        raise ValueError("empty grid")
    rows = []
    best = None
    for i, point in enumerate(grid):
        seed = derived_seed(base.seed, i)
        cfg = base.replace(**point, seed=seed)
        model = init_model(cfg.model, store.n_entities, store.n_relations, cfg.rank, seed)
        res = train(model, store, cfg)
        row = {"index": i, **point, "seed": seed, "best_epoch": res.best_epoch,
               "epochs_run": res.epochs_run, res.metric_name or "valid_metric": res.best_metric}
        rows.append(row)
        if progress is not None:
            progress(row)
        if best is None or res.best_metric > best[2]:
            best = (cfg, res.model, res.best_metric)
    return GridResult(best[0], best[1], best[2], rows)
