"""One-shot federated learning via confidence-weighted pseudo-labels and per-client distillation."""

from fedol.kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
