"""Comparison strategies: local-only, parameter averaging and one-shot knowledge baselines."""

from dataclasses import dataclass

import numpy as np

from fedol import nn
from fedol.client import local_train
from fedol.errors import IncompatibleArchitectureError, PreconditionError
from fedol.seeding import derive_seed


@dataclass
class LocalResult:
    accuracies: list

    @property
    def mean(self):
        return float(np.mean(self.accuracies))

    @property
    def max(self):
        return float(np.max(self.accuracies))


def run_local(shards, specs, test, models=None):
    """Each client's own model scored on the shared test set.

    Pass ``models`` to reuse already trained client models.
    """
    if not shards or any(len(s) == 0 for s in shards):
        raise PreconditionError("every client needs a non-empty shard")
    if models is None:
        models = [local_train(spec, shard) for spec, shard in zip(specs, shards)]
    return LocalResult([nn.accuracy(m, test.features, test.labels) for m in models])


def run_fedavg(shards, arch, rounds, train, seed=0, mu=0.0, activation="relu",
               callback=None, init=None):
    """Multi-round parameter averaging, weighted by shard size.

    ``mu > 0`` adds the proximal term of FedProx to every client objective.
    ``callback(round, model)`` fires after each aggregation.
    """
    if rounds < 1:
        raise PreconditionError("rounds must be >= 1")
    if mu < 0:
        raise PreconditionError("mu must be non-negative")
    if isinstance(arch, (list, tuple)) and arch and isinstance(arch[0], (list, tuple)):
        if any(list(a) != list(arch[0]) for a in arch):
            raise IncompatibleArchitectureError("parameter averaging needs one shared architecture")
        arch = arch[0]
    sizes = np.array([len(s) for s in shards], dtype=np.float64)
    if np.any(sizes == 0):
        raise PreconditionError("every client needs a non-empty shard")
    model = init if init is not None else nn.init_mlp(arch, derive_seed(seed, "fedavg-init"), activation)
    for r in range(1, rounds + 1):
        anchor = [p.copy() for p in model.params()]
        local_models = []
        for k, shard in enumerate(shards):
            cfg = nn.TrainConfig(train.epochs, train.batch_size, train.learning_rate,
                                 derive_seed(train.seed, "fedavg-train", r, k))
            penalty = nn.ProximalPenalty(anchor, mu) if mu > 0 else None
            targets = nn.one_hot(shard.labels, shard.n_classes)
            local_models.append(nn.train_supervised(model, shard.features, targets, cfg, penalty))
        model = nn.average_models(local_models, sizes)
        if callback is not None:
            callback(r, model)
    return model


def run_fedprox(shards, arch, rounds, mu, train, seed=0, activation="relu", callback=None, init=None):
    return run_fedavg(shards, arch, rounds, train, seed=seed, mu=mu, activation=activation,
                      callback=callback, init=init)


def _probs(upload):
    return np.asarray(getattr(upload, "probs", upload), dtype=np.float64)


def ensemble_targets(uploads):
    """Uniform mean of client distributions (probability space)."""
    if not uploads:
        raise PreconditionError("no client uploads")
    return np.mean(np.stack([_probs(u) for u in uploads]), axis=0)


def min_entropy_labels(uploads):
    """Argmax of the least uncertain client per sample; lower client index wins ties."""
    if not uploads:
        raise PreconditionError("no client uploads")
    mats = np.stack([_probs(u) for u in uploads])
    chosen = nn.entropy(mats).argmin(axis=0)
    rows = np.arange(mats.shape[1])
    return mats[chosen, rows].argmax(axis=1)


def _server_cfg(train, label):
    return nn.TrainConfig(train.epochs, train.batch_size, train.learning_rate,
                          derive_seed(train.seed, label))


def run_feddf(uploads, public, server_arch, train, seed=0, activation="relu"):
    """Distil the uniformly averaged teacher distribution into a fresh server."""
    x = np.asarray(getattr(public, "features", public), dtype=np.float64)
    server = nn.init_mlp(server_arch, derive_seed(seed, "feddf-init"), activation)
    return nn.train_supervised(server, x, ensemble_targets(uploads), _server_cfg(train, "feddf-train"))


def run_min_entropy(uploads, public, server_arch, train, seed=0, activation="relu"):
    """Train a fresh server with plain CE on min-entropy hard labels."""
    x = np.asarray(getattr(public, "features", public), dtype=np.float64)
    labels = min_entropy_labels(uploads)
    server = nn.init_mlp(server_arch, derive_seed(seed, "mine-init"), activation)
    targets = nn.one_hot(labels, server.n_classes)
    return nn.train_supervised(server, x, targets, _server_cfg(train, "mine-train"))
