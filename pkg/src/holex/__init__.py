"""HolE and ComplEx knowledge-graph embeddings.

Scoring functions, the holographic-to-complex conversion, training with the
margin and log-likelihood losses, and link-prediction / average-precision
evaluation.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .datasets import LabeledTriple, SyntheticSpec, TripleStore, cv_rotate, generate_synthetic, load_tsv
from .evaluation import average_precision, evaluate_ap, evaluate_ranking, mrr_and_hits, rank_triple
from .models import (
    ComplExModel,
    HolEModel,
    grad_score,
    hole_to_complex,
    init_model,
    load_checkpoint,
    save_checkpoint,
    score_complex,
    score_hole,
)
from .spectral import circular_correlation, dft, idft, parseval_dot, trilinear_product
from .training import TrainingConfig, grid_search, train

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND", "LabeledTriple", "SyntheticSpec", "TripleStore", "cv_rotate",
    "generate_synthetic", "load_tsv", "average_precision", "evaluate_ap", "evaluate_ranking",
    "mrr_and_hits", "rank_triple", "ComplExModel", "HolEModel", "grad_score", "hole_to_complex",
    "init_model", "load_checkpoint", "save_checkpoint", "score_complex", "score_hole",
    "circular_correlation", "dft", "idft", "parseval_dot", "trilinear_product",
    "TrainingConfig", "grid_search", "train",
]
