"""Rotation-invariant image retrieval toolkit.

Group-equivariant convolutional feature extraction (p4 / p4m), channel
attention, triplet metric learning, two-phase training and Recall@n
evaluation under rotated-query protocols.
"""

import os

# Pin BLAS to one thread before numpy loads: reproducibility first.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
del _var, os

from .tensor import Tensor, no_grad  # noqa: E402
from .prng import Prng, derive_seed  # noqa: E402

__version__ = "0.1.0"

__all__ = ["Tensor", "no_grad", "Prng", "derive_seed", "__version__"]
