"""Backend selection for the hot kernels.

The compiled Cython extension is preferred. Setting the environment variable
``FEDOL_PURE_PYTHON=1`` (or a failed build) selects the numpy fallback.
"""

import os

from fedol import _fallback

ABSTAIN = _fallback.ABSTAIN

_compiled = None
if not os.environ.get("FEDOL_PURE_PYTHON"):
    try:
        from fedol import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

BACKEND = "cython" if _compiled is not None else "python"
_active = BACKENDS[BACKEND]


def get_backend(name=None):
    if name is None:
        return _active
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


def row_entropy(probs, backend=None):
    return get_backend(backend).row_entropy(probs)


def vote_labels(probs, entropies, thresholds, confidences, backend=None):
    return get_backend(backend).vote_labels(probs, entropies, thresholds, confidences)
