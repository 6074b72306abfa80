"""Server-side one-shot distillation with confidence-weighted pseudo-label voting.

The server never sees client models or data, only each client's probability
matrix over the shared public pool. Each iteration regenerates pseudo-labels
from the sources that are confident enough (clients, plus the previous server
from the second iteration on) and then fits the server to an entropy-weighted
mix of client distributions and the pseudo-labels.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from fedol import kernels, nn
from fedol.errors import PreconditionError, ShapeError
from fedol.seeding import derive_seed

ABSTAIN = kernels.ABSTAIN


def _probs(upload):
    return np.asarray(getattr(upload, "probs", upload), dtype=np.float64)


def class_confidence(probs):
    """Column mean of a prediction matrix: the model's average class mass."""
    p = _probs(probs)
    if p.ndim != 2 or p.shape[0] == 0:
        raise PreconditionError("class confidence needs a non-empty (N, C) matrix")
    return p.mean(axis=0)


def admitted_count(rho, n):
    """``ceil(rho * n)``, guarded against float noise such as 0.15 * 100."""
    if not 0.0 < rho <= 1.0:
        raise PreconditionError(f"rho must lie in (0, 1], got {rho}")
    return max(1, math.ceil(round(rho * n, 9)))


def entropy_baseline(probs, rho, entropies=None):
    """The ceil(rho * N)-th smallest row entropy of a prediction matrix."""
    h = kernels.row_entropy(_probs(probs)) if entropies is None else np.asarray(entropies)
    if h.size == 0:
        raise PreconditionError("entropy baseline needs at least one row")
    k = admitted_count(rho, h.size)
    return float(np.sort(h, kind="stable")[k - 1])


def admitted_mask(probs, rho):
    h = kernels.row_entropy(_probs(probs))
    return h <= entropy_baseline(probs, rho, entropies=h)


def reliable_set(sample_probs, baselines):
    """Indices of models whose entropy on this sample is within their baseline."""
    if len(sample_probs) != len(baselines):
        raise ShapeError("one baseline per model required")
    return [
        m for m, (p, b) in enumerate(zip(sample_probs, baselines))
        if float(nn.entropy(p)) <= b
    ]


def vote_vector(probs):
    """+1 on the argmax class (lowest index on ties), -1 elsewhere."""
    p = np.asarray(probs, dtype=np.float64)
    votes = -np.ones_like(p)
    votes[int(np.argmax(p))] = 1.0
    return votes


def aggregate_vote(votes, confidences):
    """Per-class confidence-weighted mean of +/-1 votes.

    Classes on which no voter places any confidence get -1.
    """
    if len(votes) == 0:
        raise PreconditionError("aggregate_vote needs at least one reliable model")
    if len(votes) != len(confidences):
        raise ShapeError("votes and confidences must align")
    num = np.zeros_like(np.asarray(confidences[0], dtype=np.float64))
    den = np.zeros_like(num)
    for v, c in zip(votes, confidences):
        num += np.asarray(c) * np.asarray(v)
        den += np.asarray(c)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0.0, num / den, -1.0)


def generate_pseudo_labels(
    sources, confidences, rho, server_probs=None, server_confidence=None, backend=None
):
    """Hard pseudo-labels for the public pool, ``ABSTAIN`` where no source is reliable.

    ``sources`` are the client prediction matrices. The server joins as an
    extra source only when ``server_probs`` is given, which the training
    loop does from the second iteration on.
    """
    mats = [_probs(s) for s in sources]
    confs = [np.asarray(c, dtype=np.float64) for c in confidences]
    if server_probs is not None:
        mats.append(_probs(server_probs))
        confs.append(
            class_confidence(server_probs) if server_confidence is None
            else np.asarray(server_confidence, dtype=np.float64)
        )
    if not mats:
        raise PreconditionError("no source models")
    if len(mats) != len(confs):
        raise ShapeError("one confidence vector per source required")
    shape = mats[0].shape
    if any(m.shape != shape for m in mats):
        raise ShapeError("all prediction matrices must share one shape")
    stacked = np.ascontiguousarray(np.stack(mats))
    ent = kernels.row_entropy(stacked, backend=backend)
    thresholds = np.array([entropy_baseline(None, rho, entropies=h) for h in ent])
    return kernels.vote_labels(stacked, ent, thresholds, np.stack(confs), backend=backend)


def distill_weights(uploads, sample_index=None):
    """Softmax over clients of negative prediction entropy.

    Returns an ``(N, K)`` matrix, or the length-``K`` row for ``sample_index``.
    """
    if len(uploads) == 0:
        raise PreconditionError("need at least one client")
    ent = np.stack([nn.entropy(_probs(u)) for u in uploads], axis=-1)
    weights = nn.softmax(-ent)
    return weights if sample_index is None else weights[sample_index]


@dataclass
class ServerLoss:
    total: float
    distill: float
    pseudo: float
    grads: list


def _teacher_mix(uploads):
    """Per-sample λ-weighted teacher distribution and λ-weighted teacher entropy."""
    lam = distill_weights(uploads)
    mats = np.stack([_probs(u) for u in uploads])  # (K, N, C)
    mix = np.einsum("nk,knc->nc", lam, mats)
    ent = np.einsum("nk,kn->n", lam, nn.entropy(mats))
    return mix, ent


def _objective(model, x, mix, mix_entropy, pseudo, tau):
    acts, pre = nn._forward_cache(model, x)
    s = nn.softmax(acts[-1])
    n = x.shape[0]
    # Σ_k λ_k KL(p_k || s) = CE(Σ_k λ_k p_k, s) - Σ_k λ_k H(p_k)
    distill = float(np.mean(nn.cross_entropy(mix, s) - mix_entropy))
    dlogits = (s - mix) / n
    rows = np.flatnonzero(pseudo != ABSTAIN)
    pseudo_term = 0.0
    if rows.size:
        y = nn.one_hot(pseudo[rows], s.shape[1])
        pseudo_term = float(np.mean(nn.cross_entropy(y, s[rows])))
        dlogits[rows] += tau * (s[rows] - y) / rows.size
    grads = nn.backward(model, acts, pre, dlogits)
    return distill + tau * pseudo_term, distill, pseudo_term, grads


def server_loss(server, public, uploads, pseudo, tau):
    """Full-pool objective: weighted distillation KL plus tau times pseudo-label CE.

    Abstained samples are left out of the pseudo-label mean entirely.
    """
    x = np.asarray(getattr(public, "features", public), dtype=np.float64)
    pseudo = np.asarray(pseudo, dtype=np.int64)
    if pseudo.shape != (x.shape[0],):
        raise ShapeError("one pseudo-label per public sample required")
    if any(_probs(u).shape != (x.shape[0], server.n_classes) for u in uploads):
        raise ShapeError("uploads must be (N_u, C) matrices")
    lam = distill_weights(uploads)
    s = nn.predict_proba(server, x)
    kl = np.stack([nn.kl_divergence(_probs(u), s) for u in uploads], axis=-1)
    distill = float(np.mean((lam * kl).sum(axis=1)))
    mix, mix_entropy = _teacher_mix(uploads)
    _, _, pseudo_term, grads = _objective(server, x, mix, mix_entropy, pseudo, tau)
    return ServerLoss(distill + tau * pseudo_term, distill, pseudo_term, grads)


@dataclass(frozen=True)
class RhoSchedule:
    """Participation ratio for iteration t (1-based), capped at 1."""

    rho_start: float = 0.1
    rho_step: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.rho_start <= 1.0 or self.rho_step < 0:
            raise PreconditionError("need rho_start in (0, 1] and rho_step >= 0")

    def __call__(self, t):
        return min(1.0, round(self.rho_start + (t - 1) * self.rho_step, 12))


@dataclass
class FedolState:
    iteration: int
    server_model: nn.MlpModel
    uploads: list
    confidences: list
    pseudo_labels: np.ndarray
    tau: float
    rho: float = 0.0
    abstain_fraction: float = 0.0
    pseudo_accuracy: float | None = None
    distill_loss: float = 0.0
    pseudo_loss: float = 0.0
    epoch_losses: list = field(default_factory=list)


def run_fedol(
    uploads,
    public,
    server_arch,
    schedule=None,
    tau=0.2,
    iterations=10,
    train=None,
    seed=0,
    activation="relu",
    public_labels=None,
    callback=None,
    backend=None,
):
    """Alternate pseudo-label generation and server training; return the final server.

    ``callback(state)`` receives the ``FedolState`` after every iteration.
    ``public_labels`` (hidden ground truth) only feeds the diagnostics.
    """
    if iterations < 1:
        raise PreconditionError("iterations must be >= 1")
    if not uploads:
        raise PreconditionError("no client uploads")
    schedule = schedule or RhoSchedule()
    train = train or nn.TrainConfig()
    x = np.asarray(getattr(public, "features", public), dtype=np.float64)
    client_probs = [_probs(u) for u in uploads]
    client_conf = [class_confidence(p) for p in client_probs]
    mix, mix_entropy = _teacher_mix(client_probs)

    server = nn.init_mlp(server_arch, derive_seed(seed, "server-init"), activation)
    state = None
    for t in range(1, iterations + 1):
        rho = schedule(t)
        server_probs = nn.predict_proba(server, x) if t > 1 else None
        pseudo = generate_pseudo_labels(
            client_probs, client_conf, rho, server_probs=server_probs, backend=backend
        )

        def objective(model, idx, pseudo=pseudo):
            total, _, _, grads = _objective(model, x[idx], mix[idx], mix_entropy[idx], pseudo[idx], tau)
            return total, grads

        cfg = nn.TrainConfig(train.epochs, train.batch_size, train.learning_rate,
                             derive_seed(train.seed, "server-train", t))
        losses = []
        nn.minimize(server, x.shape[0], cfg, objective, on_epoch=lambda e, l: losses.append(l))

        total, distill, pseudo_term, _ = _objective(server, x, mix, mix_entropy, pseudo, tau)
        confs = client_conf + ([class_confidence(server_probs)] if server_probs is not None else [])
        labeled = pseudo != ABSTAIN
        state = FedolState(
            iteration=t,
            server_model=server,
            uploads=uploads,
            confidences=confs,
            pseudo_labels=pseudo,
            tau=tau,
            rho=rho,
            abstain_fraction=float(1.0 - labeled.mean()),
            distill_loss=distill,
            pseudo_loss=pseudo_term,
            epoch_losses=losses,
        )
        if public_labels is not None and labeled.any():
            truth = np.asarray(public_labels)
            state.pseudo_accuracy = float(np.mean(pseudo[labeled] == truth[labeled]))
        if callback is not None:
            callback(state)
    return server
