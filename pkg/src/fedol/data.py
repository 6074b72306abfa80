"""Synthetic datasets, public/private splits and non-IID client partitions."""

import csv
from dataclasses import dataclass

import numpy as np

from fedol.errors import InfeasiblePartitionError, PreconditionError, ShapeError


@dataclass
class Dataset:
    """Feature rows with class labels.

    ``labels`` is ``None`` for an unlabeled public pool. ``ids`` are the row
    numbers in the originating dataset and survive every split, which makes
    disjointness checks exact.
    """

    features: np.ndarray
    labels: np.ndarray | None
    n_classes: int
    ids: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ShapeError("features must be a 2-D matrix")
        n = self.features.shape[0]
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ShapeError(f"{n} rows but {self.labels.shape[0]} labels")
            if n and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
                raise ShapeError("label outside [0, n_classes)")
        self.ids = np.arange(n) if self.ids is None else np.asarray(self.ids, dtype=np.int64)

    def __len__(self):
        return self.features.shape[0]

    @property
    def dims(self):
        return self.features.shape[1]

    def subset(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        labels = None if self.labels is None else self.labels[rows]
        return Dataset(self.features[rows], labels, self.n_classes, self.ids[rows])

    def without_labels(self):
        return Dataset(self.features, None, self.n_classes, self.ids)


@dataclass(frozen=True)
class PartitionSpec:
    scheme: str  # "dirichlet" or "pathological"
    num_clients: int
    alpha: float = 1.0
    classes_per_client: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in ("dirichlet", "pathological"):
            raise ValueError(f"unknown partition scheme {self.scheme!r}")
        if self.num_clients < 1:
            raise PreconditionError("num_clients must be >= 1")
        if self.scheme == "dirichlet" and not self.alpha > 0:
            raise PreconditionError("alpha must be positive")
        if self.scheme == "pathological" and self.classes_per_client < 1:
            raise PreconditionError("classes_per_client must be >= 1")

    @property
    def label(self):
        if self.scheme == "dirichlet":
            return f"dir({self.alpha:g})"
        return f"path({self.classes_per_client})"


def _class_points(rng, center, count):
    return center + rng.standard_normal((count, center.shape[0]))


def make_centers(n_classes, dims, separation, seed):
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n_classes, dims))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    return separation * raw / np.where(norms > 0, norms, 1.0)


def make_synthetic(classes, dims, per_class, separation, seed, centers=None):
    """Isotropic unit-variance Gaussian blobs around centers on a sphere.

    Rows are grouped by class. Passing ``centers`` draws a fresh sample from
    an existing task (for held-out test sets).
    """
    if classes < 2 or dims < 2 or per_class < 1:
        raise PreconditionError("need classes >= 2, dims >= 2, per_class >= 1")
    if separation < 0:
        raise PreconditionError("separation must be non-negative")
    if centers is None:
        centers = make_centers(classes, dims, separation, seed)
    rng = np.random.default_rng([seed, 1])
    feats = np.concatenate([_class_points(rng, centers[c], per_class) for c in range(classes)])
    labels = np.repeat(np.arange(classes), per_class)
    return Dataset(feats, labels, classes)


def holdout(ds, count, seed):
    """Seeded uniform split into (``count`` rows, remainder); labels kept on both."""
    n = len(ds)
    if not 0 <= count < n:
        raise PreconditionError(f"holdout count {count} must be in [0, {n})")
    perm = np.random.default_rng(seed).permutation(n)
    return ds.subset(np.sort(perm[:count])), ds.subset(np.sort(perm[count:]))


def split_public(ds, public_count, seed):
    """Return (unlabeled public pool, labeled private remainder)."""
    public, private = holdout(ds, public_count, seed)
    return public.without_labels(), private


def _largest_remainder(weights, total):
    raw = np.asarray(weights, dtype=np.float64) * total
    counts = np.floor(raw).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        # stable sort: ties go to the lower client index
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def _repair_empty(assignment):
    sizes = [len(a) for a in assignment]
    while min(sizes) == 0:
        empty = sizes.index(0)
        donor = int(np.argmax(sizes))
        assignment[empty] = assignment[donor][-1:]
        assignment[donor] = assignment[donor][:-1]
        sizes[empty], sizes[donor] = 1, sizes[donor] - 1
    return assignment


def dirichlet_indices(labels, n_classes, num_clients, alpha, seed):
    """Row-index lists per client for a Dir(alpha) label-skew split."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise PreconditionError("cannot partition an empty dataset")
    if labels.size < num_clients:
        raise PreconditionError("fewer samples than clients")
    rng = np.random.default_rng(seed)
    parts = [[] for _ in range(num_clients)]
    for c in range(n_classes):
        rows = np.flatnonzero(labels == c)
        if rows.size == 0:
            continue
        rows = rng.permutation(rows)
        props = rng.dirichlet(np.full(num_clients, alpha))
        if not np.all(np.isfinite(props)) or props.sum() <= 0:
            # underflow at tiny alpha: all mass on one client
            props = np.zeros(num_clients)
            props[rng.integers(num_clients)] = 1.0
        counts = _largest_remainder(props / props.sum(), rows.size)
        for k, chunk in enumerate(np.split(rows, np.cumsum(counts)[:-1])):
            parts[k].extend(chunk.tolist())
    parts = _repair_empty(parts)
    return [np.sort(np.asarray(p, dtype=np.int64)) for p in parts]


def pathological_classes(n_classes, num_clients, classes_per_client, seed):
    """Balanced class assignment: client k takes a window of a seeded class cycle."""
    if classes_per_client > n_classes:
        raise PreconditionError("classes_per_client exceeds the class count")
    if num_clients * classes_per_client < n_classes:
        raise InfeasiblePartitionError(
            f"{num_clients} clients x {classes_per_client} classes cannot cover {n_classes} classes"
        )
    cycle = np.random.default_rng(seed).permutation(n_classes)
    return [
        [int(cycle[(k * classes_per_client + j) % n_classes]) for j in range(classes_per_client)]
        for k in range(num_clients)
    ]


def pathological_indices(labels, n_classes, num_clients, classes_per_client, seed):
    labels = np.asarray(labels)
    if labels.size == 0:
        raise PreconditionError("cannot partition an empty dataset")
    assigned = pathological_classes(n_classes, num_clients, classes_per_client, seed)
    rng = np.random.default_rng([seed, 1])
    parts = [[] for _ in range(num_clients)]
    for c in range(n_classes):
        holders = [k for k in range(num_clients) if c in assigned[k]]
        rows = rng.permutation(np.flatnonzero(labels == c))
        base, extra = divmod(rows.size, len(holders))
        start = 0
        for i, k in enumerate(holders):
            size = base + (1 if i < extra else 0)
            parts[k].extend(rows[start:start + size].tolist())
            start += size
    return [np.sort(np.asarray(p, dtype=np.int64)) for p in parts]


def partition_dirichlet(private, num_clients, alpha, seed):
    idx = dirichlet_indices(private.labels, private.n_classes, num_clients, alpha, seed)
    return [private.subset(i) for i in idx]


def partition_pathological(private, num_clients, classes_per_client, seed):
    idx = pathological_indices(
        private.labels, private.n_classes, num_clients, classes_per_client, seed
    )
    return [private.subset(i) for i in idx]


def partition(private, spec):
    if spec.scheme == "dirichlet":
        return partition_dirichlet(private, spec.num_clients, spec.alpha, spec.seed)
    return partition_pathological(private, spec.num_clients, spec.classes_per_client, spec.seed)


def write_csv(ds, path):
    """Header ``f0,...,f{d-1},label``; unlabeled pools omit the label column."""
    header = [f"f{j}" for j in range(ds.dims)]
    if ds.labels is not None:
        header.append("label")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(ds)):
            row = [repr(float(v)) for v in ds.features[i]]
            if ds.labels is not None:
                row.append(str(int(ds.labels[i])))
            writer.writerow(row)


def read_csv(path, n_classes=None):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    labeled = header[-1] == "label"
    d = len(header) - (1 if labeled else 0)
    feats = np.array([[float(v) for v in r[:d]] for r in body], dtype=np.float64).reshape(-1, d)
    labels = np.array([int(r[d]) for r in body], dtype=np.int64) if labeled else None
    if n_classes is None:
        if labels is None or labels.size == 0:
            raise PreconditionError("n_classes required for unlabeled or empty files")
        n_classes = int(labels.max()) + 1
    return Dataset(feats, labels, n_classes)
