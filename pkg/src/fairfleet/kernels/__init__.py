"""Backend dispatch for the numeric kernels.

The jit backend is used when numba imports cleanly; set
``FAIRFLEET_DISABLE_NUMBA=1`` to force the pure-numpy fallback. Both
backends expose the same functions and are cross-checked in the tests.
"""

from __future__ import annotations

import os

from . import numpy_backend

_flag = os.environ.get("FAIRFLEET_DISABLE_NUMBA", "").strip().lower()
_disabled = _flag in {"1", "true", "yes", "on"}

if not _disabled:
    try:
        from . import numba_backend as _impl
    except ImportError:
        _impl = numpy_backend
else:
    _impl = numpy_backend

BACKEND = _impl.NAME

policy_forward = _impl.policy_forward
ppo_loss_grads = _impl.ppo_loss_grads
gae = _impl.gae
adam_step = _impl.adam_step

__all__ = [
    "BACKEND",
    "policy_forward",
    "ppo_loss_grads",
    "gae",
    "adam_step",
    "numpy_backend",
]
