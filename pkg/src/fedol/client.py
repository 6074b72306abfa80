"""Client runtime: one local training pass and one prediction upload."""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from fedol import nn
from fedol.errors import PreconditionError, ShapeError
from fedol.seeding import derive_seed


@dataclass
class ClientSpec:
    id: int
    arch: list  # full layer sizes, input dim first, class count last
    train: nn.TrainConfig = field(default_factory=nn.TrainConfig)
    activation: str = "relu"

    def init_model(self):
        return nn.init_mlp(self.arch, derive_seed(self.train.seed, "client-init", self.id), self.activation)


@dataclass
class PredictionUpload:
    client_id: int
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 2:
            raise ShapeError("prediction matrix must be 2-D")

    @property
    def n_samples(self):
        return self.probs.shape[0]

    @property
    def n_classes(self):
        return self.probs.shape[1]

    def to_csv(self):
        buf = io.StringIO()
        buf.write(f"# client_id={self.client_id}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"p{c}" for c in range(self.n_classes)])
        for row in self.probs:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# client_id="):
            raise ValueError("missing client_id header comment")
        client_id = int(lines[0].split("=", 1)[1])
        rows = list(csv.reader(lines[1:]))
        header, body = rows[0], rows[1:]
        probs = np.array([[float(v) for v in r] for r in body], dtype=np.float64)
        return cls(client_id, probs.reshape(-1, len(header)))


def default_fleet(num_clients, dims, n_classes, train, hidden=((16,), (32, 16)), activation="relu"):
    """Alternate clients between the given hidden-layer layouts."""
    specs = []
    for k in range(num_clients):
        layout = hidden[k % len(hidden)]
        specs.append(ClientSpec(k, [dims, *layout, n_classes], train, activation))
    return specs


def local_train(spec, shard):
    if len(shard) == 0:
        raise PreconditionError(f"client {spec.id} has an empty shard")
    if shard.labels is None:
        raise PreconditionError("client shards must be labeled")
    if spec.arch[-1] != shard.n_classes:
        raise ShapeError("client output width must equal the class count")
    cfg = nn.TrainConfig(
        spec.train.epochs,
        spec.train.batch_size,
        spec.train.learning_rate,
        derive_seed(spec.train.seed, "client-train", spec.id),
    )
    targets = nn.one_hot(shard.labels, shard.n_classes)
    return nn.train_supervised(spec.init_model(), shard.features, targets, cfg)


def predict_public(model, public, client_id=0):
    if len(public) == 0:
        raise PreconditionError("public pool is empty")
    features = public.features if hasattr(public, "features") else np.asarray(public)
    return PredictionUpload(client_id, nn.predict_proba(model, features))
