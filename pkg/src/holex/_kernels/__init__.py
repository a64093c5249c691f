"""Batch kernel backend, chosen once at import.

The compiled module is used when it was built and ``HOLEX_PURE_PYTHON`` is
unset; otherwise the NumPy fallback is loaded.  Both modules stay importable
for parity tests and benchmarks.
"""

import os

from . import _pykernels as python_backend

try:
    from . import _ckernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and not os.environ.get("HOLEX_PURE_PYTHON"):
    backend = compiled_backend
else:
    backend = python_backend

BACKEND = backend.NAME
HOLE, COMPLEX = 0, 1

score_batch = backend.score_batch
grad_batch = backend.grad_batch
adagrad_update = backend.adagrad_update

__all__ = [
    "BACKEND", "HOLE", "COMPLEX", "backend", "compiled_backend", "python_backend",
    "score_batch", "grad_batch", "adagrad_update",
]
