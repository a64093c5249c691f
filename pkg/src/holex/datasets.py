"""Triple stores: TSV ingestion, the symmetric/antisymmetric toy tensor, and
a planted-factor graph generator used as an offline stand-in for FB15K-style
data."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")


class TripleParseError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledTriple:
    p: int
    s: int
    o: int
    y: int = 1

    def __post_init__(self):
        if self.y not in (1, -1):
            raise ValueError(f"label must be +1 or -1, got {self.y}")


def _empty():
    return np.zeros((0, 4), dtype=np.int64)


@dataclass
class TripleStore:
    """Dictionaries plus labeled splits.

    Each split is an ``(n, 4)`` int64 array with columns ``p, s, o, y``.
    ``closed_world`` marks stores whose negatives are observed (training then
    uses the labels as given instead of corrupting positives).
    """

    entities: list[str]
    relations: list[str]
    train: np.ndarray = field(default_factory=_empty)
    valid: np.ndarray = field(default_factory=_empty)
    test: np.ndarray = field(default_factory=_empty)
    closed_world: bool = False
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in SPLITS:
            arr = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1, 4)
            if arr.size and not np.all(np.isin(arr[:, 3], (1, -1))):
                raise ValueError(f"{name}: labels must be +1/-1")
            setattr(self, name, arr)
        self.entity_index = {e: i for i, e in enumerate(self.entities)}
        self.relation_index = {r: i for i, r in enumerate(self.relations)}
        if len(self.entity_index) != len(self.entities) or len(self.relation_index) != len(self.relations):
            raise ValueError("dictionary entries must be unique")
        self._filters = None
        self._known = None

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def split(self, name: str) -> np.ndarray:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def positives(self, name: str) -> np.ndarray:
        arr = self.split(name)
        return arr[arr[:, 3] == 1, :3]

    @property
    def known_true(self) -> set:
        """Every positive (p, s, o) of every split."""
        if self._known is None:
            self._known = {
                tuple(int(v) for v in t) for name in SPLITS for t in self.positives(name)
            }
        return self._known

    def filters(self):
        """Maps ``(p, s) -> true objects`` and ``(p, o) -> true subjects``."""
        if self._filters is None:
            by_ps: dict = {}
            by_po: dict = {}
            for p, s, o in self.known_true:
                by_ps.setdefault((p, s), []).append(o)
                by_po.setdefault((p, o), []).append(s)
            self._filters = (
                {k: np.array(sorted(v), dtype=np.int64) for k, v in by_ps.items()},
                {k: np.array(sorted(v), dtype=np.int64) for k, v in by_po.items()},
            )
        return self._filters

    def contains(self, p, s, o) -> bool:
        key = (int(p), int(s), int(o))
        if key in self.known_true:
            return True
        return any(
            np.any((arr[:, 0] == key[0]) & (arr[:, 1] == key[1]) & (arr[:, 2] == key[2]))
            for arr in (self.train, self.valid, self.test)
        )

    def entity_id(self, name: str) -> int:
        return self.entity_index[name]

    def relation_id(self, name: str) -> int:
        return self.relation_index[name]

    def counts(self) -> dict:
        out = {"n_entities": self.n_entities, "n_relations": self.n_relations}
        for name in SPLITS:
            arr = self.split(name)
            out[f"n_{name}"] = int(len(arr))
            out[f"n_{name}_positive"] = int(np.sum(arr[:, 3] == 1))
        return out


# -- TSV ----------------------------------------------------------------------

def _parse_line(line: str, path, lineno: int):
    fields = line.split("\t") if "\t" in line else line.split()
    fields = [f.strip() for f in fields]
    if len(fields) not in (3, 4) or not all(fields[:3]):
        raise TripleParseError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
    label = 1
    if len(fields) == 4:
        try:
            label = int(fields[3])
        except ValueError:
            label = 0
        if label not in (1, -1):
            raise TripleParseError(f"{path}:{lineno}: label must be 1 or -1, got {fields[3]!r}")
    return fields[0], fields[1], fields[2], label


def load_tsv(train_path, valid_path, test_path) -> TripleStore:
    """Read ``subject<TAB>relation<TAB>object[<TAB>label]`` files.

    Ids follow first appearance across train, valid, test.  Duplicates inside
    a split are dropped and counted in ``store.report``.
    """
    entities: dict[str, int] = {}
    relations: dict[str, int] = {}
    report = {"duplicates": {}, "test_only_entities": 0, "paths": {}}
    seen_in: dict[str, set] = {}
    arrays = {}
    any_negative = False
    for name, path in zip(SPLITS, (train_path, valid_path, test_path)):
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"triple file not found: {path}")
        report["paths"][name] = str(path)
        rows, seen, dups = [], set(), 0
        seen_in[name] = set()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                s, r, o, y = _parse_line(line.rstrip("\n"), path, lineno)
                si = entities.setdefault(s, len(entities))
                oi = entities.setdefault(o, len(entities))
                pi = relations.setdefault(r, len(relations))
                key = (pi, si, oi)
                if key in seen:
                    dups += 1
                    continue
                seen.add(key)
                seen_in[name].update((si, oi))
                any_negative |= y == -1
                rows.append((pi, si, oi, y))
        report["duplicates"][name] = dups
        if dups:
            log.warning("%s: dropped %d duplicate triples", path, dups)
        arrays[name] = np.array(rows, dtype=np.int64).reshape(-1, 4)
    test_only = seen_in["test"] - seen_in["train"] - seen_in["valid"]
    report["test_only_entities"] = len(test_only)
    if test_only:
        log.warning("%d entities appear only in the test split", len(test_only))
    store = TripleStore(
        list(entities), list(relations), arrays["train"], arrays["valid"], arrays["test"],
        closed_world=any_negative, report=report,
    )
    report.update(store.counts())
    return store


def write_tsv(store: TripleStore, out_dir, with_labels: bool | None = None) -> dict:
    """Write ``train.txt``/``valid.txt``/``test.txt``; a label column is added
    whenever the store holds negatives (or ``with_labels`` is set)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if with_labels is None:
        with_labels = any(np.any(store.split(n)[:, 3] == -1) for n in SPLITS)
    paths = {}
    for name in SPLITS:
        path = out_dir / f"{name}.txt"
        with open(path, "w", encoding="utf-8") as fh:
            for p, s, o, y in store.split(name):
                cols = [store.entities[s], store.relations[p], store.entities[o]]
                if with_labels:
                    cols.append(str(int(y)))
                fh.write("\t".join(cols) + "\n")
        paths[name] = path
    return paths


# -- symmetric / antisymmetric toy tensor ---------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 50
    seed: int = 0
    folds: int = 5
    valid_fold: int = 3
    test_fold: int = 4

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.folds < 3:
            raise ValueError("need at least 3 folds")
        if not (0 <= self.valid_fold < self.folds and 0 <= self.test_fold < self.folds):
            raise ValueError("fold indices must be < fold count")
        if self.valid_fold == self.test_fold:
            raise ValueError("validation and test folds must differ")


SYMMETRIC, ANTISYMMETRIC = 0, 1


def _synthetic_cells(spec: SyntheticSpec):
    """Upper-triangle cells and lower-triangle fold assignment; independent of
    which folds are used for validation/test."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    si, oi = np.triu_indices(n, k=1)
    upper = []
    lower = []
    for rel, sign in ((SYMMETRIC, 1), (ANTISYMMETRIC, -1)):
        labels = rng.choice(np.array([1, -1], dtype=np.int64), size=len(si))
        upper.append(np.column_stack([np.full_like(si, rel), si, oi, labels]))
        lower.append(np.column_stack([np.full_like(si, rel), oi, si, sign * labels]))
    upper = np.vstack(upper).astype(np.int64)
    lower = np.vstack(lower).astype(np.int64)
    order = rng.permutation(len(lower))
    folds = np.array_split(lower[order], spec.folds)
    return upper, folds


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> TripleStore:
    """Two relations over ``n`` entities, one symmetric and one antisymmetric.

    The strict upper triangles are always in train, diagonals are never
    stored, and the strict lower triangles are cut into ``spec.folds`` folds:
    one for validation, one for test, the rest for training.
    """
    upper, folds = _synthetic_cells(spec)
    train_folds = [f for i, f in enumerate(folds) if i not in (spec.valid_fold, spec.test_fold)]
    train = np.vstack([upper, *train_folds])
    store = TripleStore(
        [f"e{i}" for i in range(spec.n)],
        ["symmetric", "antisymmetric"],
        train,
        folds[spec.valid_fold],
        folds[spec.test_fold],
        closed_world=True,
    )
    store.report = {"synthetic": spec.__dict__.copy(), **store.counts()}
    return store


def cv_rotate(spec: SyntheticSpec = SyntheticSpec()):
    """The ``folds`` rotations: rotation i tests on fold i, validates on fold i+1."""
    for i in range(spec.folds):
        yield generate_synthetic(
            SyntheticSpec(spec.n, spec.seed, spec.folds, (i + 1) % spec.folds, i)
        )


# -- planted-factor graph ---------------------------------------------------------

def generate_latent_graph(
    n_entities: int = 2000,
    n_relations: int = 50,
    n_triples: int = 40000,
    rank: int = 8,
    temperature: float = 4.0,
    popularity_exponent: float = 1.0,
    valid_fraction: float = 0.05,
    test_fraction: float = 0.05,
    seed: int = 0,
) -> TripleStore:
    """Sample a link-prediction dataset from a hidden complex bilinear model.

    Subjects are drawn from a Zipf-like popularity law; each object is drawn
    from ``softmax(temperature * score(p, s, .))`` under a random rank-``rank``
    ComplEx model, which yields many-to-many relations with learnable
    structure.  Valid and test triples only use entities and relations seen in
    training.
    """
    if n_entities < 2 or n_relations < 1:
        raise ValueError("need at least 2 entities and 1 relation")
    rng = np.random.default_rng(seed)
    e = (rng.normal(size=(n_entities, rank)) + 1j * rng.normal(size=(n_entities, rank))) / np.sqrt(2 * rank)
    r = (rng.normal(size=(n_relations, rank)) + 1j * rng.normal(size=(n_relations, rank)))
    pop = 1.0 / np.arange(1, n_entities + 1) ** popularity_exponent
    pop = pop[rng.permutation(n_entities)]
    pop /= pop.sum()
    rel_pop = rng.dirichlet(np.full(n_relations, 2.0))

    triples = set()
    per_round = max(1, n_triples // 8)
    while len(triples) < n_triples:
        ps = rng.choice(n_relations, size=per_round, p=rel_pop)
        ss = rng.choice(n_entities, size=per_round, p=pop)
        q = r[ps] * e[ss]
        logits = temperature * np.sqrt(rank) * (q @ np.conj(e).T).real
        logits[np.arange(per_round), ss] = -np.inf
        logits -= logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        probs /= probs.sum(axis=1, keepdims=True)
        u = rng.random(per_round)[:, None]
        os_ = np.minimum((probs.cumsum(axis=1) < u).sum(axis=1), n_entities - 1)
        for t in zip(ps.tolist(), ss.tolist(), os_.tolist()):
            triples.add(t)
            if len(triples) >= n_triples:
                break
    arr = np.array(sorted(triples), dtype=np.int64)
    arr = arr[rng.permutation(len(arr))]
    n_hold = int(round((valid_fraction + test_fraction) * len(arr)))
    train, hold = arr[: len(arr) - n_hold], arr[len(arr) - n_hold:]
    ents = np.zeros(n_entities, dtype=bool)
    ents[train[:, 1]] = True
    ents[train[:, 2]] = True
    rels = np.zeros(n_relations, dtype=bool)
    rels[train[:, 0]] = True
    ok = ents[hold[:, 1]] & ents[hold[:, 2]] & rels[hold[:, 0]]
    train = np.vstack([train, hold[~ok]])
    hold = hold[ok]
    n_valid = int(round(len(hold) * valid_fraction / (valid_fraction + test_fraction)))
    ones = lambda a: np.column_stack([a, np.ones(len(a), dtype=np.int64)])
    store = TripleStore(
        [f"m{i}" for i in range(n_entities)],
        [f"rel{i}" for i in range(n_relations)],
        ones(train), ones(hold[:n_valid]), ones(hold[n_valid:]),
    )
    store.report = {
        "latent_graph": dict(
            n_entities=n_entities, n_relations=n_relations, n_triples=n_triples, rank=rank,
            temperature=temperature, popularity_exponent=popularity_exponent, seed=seed,
        ),
        **store.counts(),
    }
    return store
