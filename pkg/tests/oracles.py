"""Independent reference implementations used as test oracles.

Nothing here imports fedol: the pseudo-label oracle is a literal loop over
samples and models using plain Python floats.
"""

import math

import numpy as np

ABSTAIN = -1


def _entropy(row):
    h = 0.0
    for p in row:
        if p > 0.0:
            h += p * math.log(p)
    return -h


def _argmax(values):
    best, best_v = 0, values[0]
    for i, v in enumerate(values):
        if v > best_v:
            best, best_v = i, v
    return best


def brute_force_pseudo_labels(sources, rho):
    """Pseudo-labels from the voting recipe, one sample at a time.

    ``sources``: list of N x C nested lists (one per source model). Returns a
    list of class indices or ABSTAIN.
    """
    n = len(sources[0])
    c = len(sources[0][0])
    rank = math.ceil(round(rho * n, 9))
    confidences, baselines, ents = [], [], []
    for mat in sources:
        confidences.append([sum(row[j] for row in mat) / n for j in range(c)])
        e = [_entropy(row) for row in mat]
        ents.append(e)
        baselines.append(sorted(e)[rank - 1])
    labels = []
    for i in range(n):
        reliable = [m for m in range(len(sources)) if ents[m][i] <= baselines[m]]
        if not reliable:
            labels.append(ABSTAIN)
            continue
        g = []
        for j in range(c):
            num = den = 0.0
            for m in reliable:
                y = 1.0 if _argmax(sources[m][i]) == j else -1.0
                num += confidences[m][j] * y
                den += confidences[m][j]
            g.append(num / den if den > 0.0 else -1.0)
        labels.append(_argmax(g))
    return labels


def random_prediction_set(rng, n, c, k):
    """Random source matrices with planted ties, one-hot rows and duplicates."""
    mats = []
    for _ in range(k):
        alpha = rng.choice([0.1, 0.5, 1.0, 5.0])
        mat = rng.dirichlet(np.full(c, alpha), size=n)
        kinds = rng.integers(0, 6, size=n)
        for i in range(n):
            if kinds[i] == 0:
                mat[i] = np.full(c, 1.0 / c)
            elif kinds[i] == 1:
                mat[i] = np.eye(c)[rng.integers(c)]
            elif kinds[i] == 2 and i > 0:
                mat[i] = mat[rng.integers(i)]
            elif kinds[i] == 3:
                tie = np.zeros(c)
                tie[:2] = 0.5
                mat[i] = rng.permutation(tie)
        mats.append(mat)
    return mats


def numeric_grad(loss_fn, params, h=1e-5):
    """Central differences of ``loss_fn()`` w.r.t. every entry of ``params`` (mutated in place)."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            up = loss_fn()
            p[idx] = orig - h
            down = loss_fn()
            p[idx] = orig
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric, floor=1e-6):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def hand_forward(weights, biases, x, activation="relu"):
    """Pure-Python MLP forward pass over nested lists."""
    out = []
    for row in x:
        h = list(row)
        for layer, (w, b) in enumerate(zip(weights, biases)):
            z = [sum(h[i] * w[i][j] for i in range(len(h))) + b[j] for j in range(len(b))]
            if layer < len(weights) - 1:
                z = [max(v, 0.0) if activation == "relu" else math.tanh(v) for v in z]
            h = z
        out.append(h)
    return out


def perceptron_separable(x, y, max_epochs=1000):
    """True if the perceptron finds a separating hyperplane (labels 0/1)."""
    xb = np.hstack([x, np.ones((len(x), 1))])
    s = np.where(np.asarray(y) == 1, 1.0, -1.0)
    w = np.zeros(xb.shape[1])
    for _ in range(max_epochs):
        mistakes = 0
        for xi, si in zip(xb, s):
            if si * (xi @ w) <= 0:
                w += si * xi
                mistakes += 1
        if mistakes == 0:
            return True
    return False


def nearest_center_accuracy(x, y, centers):
    d = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return float(np.mean(d.argmin(axis=1) == y))
