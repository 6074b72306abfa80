"""Numpy implementations of the hot kernels.

Used when the compiled ``fedol._kernels`` extension is unavailable or when
``FEDOL_PURE_PYTHON`` is set. Both backends sum over source models in index
order so they produce identical labels.
"""

import numpy as np

ABSTAIN = -1


def row_entropy(probs):
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0.0, probs * np.log(probs), 0.0)
    return -terms.sum(axis=-1)


def vote_labels(probs, entropies, thresholds, confidences):
    """Entropy-gated, confidence-weighted +/-1 vote for every sample.

    probs: (M, N, C) source predictions; entropies: (M, N);
    thresholds: (M,); confidences: (M, C). Returns int64 labels of
    length N with ``ABSTAIN`` where no source clears its threshold.
    """
    n_models, n_samples, n_classes = probs.shape
    num = np.zeros((n_samples, n_classes))
    den = np.zeros((n_samples, n_classes))
    any_admitted = np.zeros(n_samples, dtype=bool)
    cols = np.arange(n_classes)
    for m in range(n_models):
        admitted = entropies[m] <= thresholds[m]
        winners = probs[m].argmax(axis=1)
        votes = np.where(cols[None, :] == winners[:, None], 1.0, -1.0)
        weight = np.where(admitted[:, None], confidences[m][None, :], 0.0)
        num += weight * votes
        den += weight
        any_admitted |= admitted
    with np.errstate(divide="ignore", invalid="ignore"):
        agg = np.where(den > 0.0, num / den, -1.0)
    labels = agg.argmax(axis=1).astype(np.int64)
    labels[~any_admitted] = ABSTAIN
    return labels
