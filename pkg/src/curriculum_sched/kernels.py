"""Backend selection for the scheduler kernels.

The compiled extension is used when it was built; otherwise the pure-Python
twin is loaded. Set ``CURRICULUM_SCHED_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

BACKEND: str

if os.environ.get("CURRICULUM_SCHED_PURE_PYTHON", "") not in ("", "0"):
    from ._pykernels import categorical_draws, decay_probabilities, weighted_permutation

    BACKEND = "python"
else:
    try:
        from ._kernels import (  # type: ignore[no-redef]
            categorical_draws,
            decay_probabilities,
            weighted_permutation,
        )

        BACKEND = "cython"
    except ImportError:  # extension not built
        from ._pykernels import categorical_draws, decay_probabilities, weighted_permutation

        BACKEND = "python"

__all__ = ["BACKEND", "categorical_draws", "decay_probabilities", "weighted_permutation"]
