"""Experiment driver: data, clients, strategies, cost accounting and metric CSVs."""

import csv
import io
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from fedol import baselines, core, data, nn
from fedol.client import default_fleet, local_train, predict_public
from fedol.errors import LedgerError
from fedol.seeding import derive_seed

log = logging.getLogger(__name__)

METRIC_COLUMNS = (
    "strategy", "round", "seed", "partition", "test_accuracy",
    "abstain_fraction", "L_d", "L_u", "comm_bytes",
)
COST_COLUMNS = ("strategy", "client", "rounds", "upload_bytes", "parameter_bytes", "total_bytes")
KNOWLEDGE_STRATEGIES = ("feddf", "min_entropy", "fedol")
PARAMETER_STRATEGIES = ("fedavg", "fedprox")
ONE_SHOT_SCOPE = "knowledge"
MEGABYTE = 2 ** 20


def knowledge_upload_bytes(n_public, n_classes, bytes_per_value=8):
    return int(n_public) * int(n_classes) * int(bytes_per_value)


def parameter_upload_bytes(n_params, bytes_per_value=4):
    return int(n_params) * int(bytes_per_value)


def megabytes(n_bytes):
    return n_bytes / MEGABYTE


def mlp_param_count(layer_sizes):
    return int(sum(a * b + b for a, b in zip(layer_sizes[:-1], layer_sizes[1:])))


@dataclass
class CostReport:
    strategy: str
    upload_bytes: list  # per client, per round
    parameter_bytes: list  # per client
    rounds: int

    @property
    def total_bytes(self):
        return [u * self.rounds for u in self.upload_bytes]


def _client_archs(cfg):
    return [spec.arch for spec in default_fleet(cfg.num_clients, cfg.dims, cfg.classes, None,
                                                 cfg.client_hidden)]


def cost_report(cfg, strategy):
    """Per-client client-to-server bytes for one strategy."""
    archs = _client_archs(cfg)
    if strategy in PARAMETER_STRATEGIES:
        n = mlp_param_count([cfg.dims, *cfg.fedavg_hidden, cfg.classes])
        per = parameter_upload_bytes(n, cfg.parameter_bytes_per_value)
        return CostReport(strategy, [per] * cfg.num_clients, [per] * cfg.num_clients, cfg.fedavg_rounds)
    params = [parameter_upload_bytes(mlp_param_count(a), cfg.parameter_bytes_per_value) for a in archs]
    if strategy in KNOWLEDGE_STRATEGIES:
        per = knowledge_upload_bytes(cfg.public_count, cfg.classes, cfg.knowledge_bytes_per_value)
        return CostReport(strategy, [per] * cfg.num_clients, params, 1)
    return CostReport(strategy, [0] * cfg.num_clients, params, 0)


@dataclass
class MessageLedger:
    """Every client<->server message, keyed by scope."""

    entries: list = field(default_factory=list)

    def record(self, scope, client_id, direction, round_=1):
        if direction not in ("upload", "download"):
            raise ValueError(f"bad direction {direction!r}")
        self.entries.append((scope, int(client_id), direction, int(round_)))

    def counts(self, scope, direction):
        return Counter(c for s, c, d, _ in self.entries if s == scope and d == direction)


def one_shot_ledger_check(ledger, clients, scope=ONE_SHOT_SCOPE):
    """Every client sent exactly one upload and received nothing in ``scope``."""
    ups = ledger.counts(scope, "upload")
    downs = ledger.counts(scope, "download")
    for c in clients:
        if ups.get(c, 0) != 1:
            raise LedgerError(f"client {c} sent {ups.get(c, 0)} uploads, expected 1", c, ups.get(c, 0))
        if downs.get(c, 0):
            raise LedgerError(f"client {c} received {downs[c]} server messages", c, downs[c])
    return True


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return "" if math.isnan(value) else repr(float(value))
    return str(value)


def metrics_csv(rows, timestamp=None):
    buf = io.StringIO()
    stamp = timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
    buf.write(f"# generated {stamp}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in METRIC_COLUMNS])
    return buf.getvalue()


def cost_csv(cfg, strategies):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COST_COLUMNS)
    for strategy in strategies:
        rep = cost_report(cfg, strategy)
        for k, (up, par, tot) in enumerate(zip(rep.upload_bytes, rep.parameter_bytes, rep.total_bytes)):
            writer.writerow([strategy, k, rep.rounds, up, par, tot])
    return buf.getvalue()


@dataclass
class ExperimentResult:
    rows: list
    ledgers: list  # one MessageLedger per group
    failures: list  # (partition, seed, strategy, message)
    groups: list  # (partition label, seed)


def _train_cfg(cfg, seed, server=False):
    if server:
        return nn.TrainConfig(
            cfg.server_epochs or cfg.epochs,
            cfg.server_batch_size or cfg.batch_size,
            cfg.server_learning_rate or cfg.learning_rate,
            seed,
        )
    return nn.TrainConfig(cfg.epochs, cfg.batch_size, cfg.learning_rate, seed)


def _prepare(cfg, scheme, seed):
    data_seed = derive_seed(seed, "data")
    ds = data.make_synthetic(cfg.classes, cfg.dims, cfg.per_class, cfg.separation, data_seed)
    centers = data.make_centers(cfg.classes, cfg.dims, cfg.separation, data_seed)
    test_per_class = -(-cfg.test_count // cfg.classes)
    test = data.make_synthetic(cfg.classes, cfg.dims, test_per_class, cfg.separation,
                               derive_seed(seed, "test"), centers=centers)
    if len(test) > cfg.test_count:
        test, _ = data.holdout(test, cfg.test_count, derive_seed(seed, "test-trim"))
    public, private = data.holdout(ds, cfg.public_count, derive_seed(seed, "split"))
    spec = cfg.partition_spec(scheme, derive_seed(seed, "partition"))
    shards = data.partition(private, spec)
    return public, shards, test, spec


def run_group(cfg, scheme, seed, strategies, ledger, failures):
    """One (partition, seed) run of every requested strategy; returns metric rows."""
    public, shards, test, spec = _prepare(cfg, scheme, seed)
    label = spec.label
    rows = []
    base = {"seed": seed, "partition": label}
    client_train = _train_cfg(cfg, derive_seed(seed, "clients"))
    server_train = _train_cfg(cfg, derive_seed(seed, "server"), server=True)
    fleet = default_fleet(cfg.num_clients, cfg.dims, cfg.classes, client_train,
                          cfg.client_hidden, cfg.client_activation)
    server_arch = [cfg.dims, *cfg.server_hidden, cfg.classes]
    n_clients = len(shards)
    knowledge_bytes = n_clients * knowledge_upload_bytes(
        len(public), cfg.classes, cfg.knowledge_bytes_per_value)

    models, uploads = None, None
    public_pool = public.without_labels()
    if any(s in KNOWLEDGE_STRATEGIES or s == "local" for s in strategies):
        models = [local_train(spec_k, shard) for spec_k, shard in zip(fleet, shards)]
    if any(s in KNOWLEDGE_STRATEGIES for s in strategies):
        uploads = []
        for spec_k, model in zip(fleet, models):
            uploads.append(predict_public(model, public_pool, spec_k.id))
            ledger.record(ONE_SHOT_SCOPE, spec_k.id, "upload")

    def acc(model):
        return nn.accuracy(model, test.features, test.labels)

    for strategy in strategies:
        try:
            if strategy == "local":
                res = baselines.run_local(shards, fleet, test, models=models)
                rows.append({**base, "strategy": "local", "round": 0, "test_accuracy": res.mean,
                             "comm_bytes": 0})
            elif strategy in PARAMETER_STRATEGIES:
                arch = [cfg.dims, *cfg.fedavg_hidden, cfg.classes]
                per_round = n_clients * parameter_upload_bytes(mlp_param_count(arch),
                                                               cfg.parameter_bytes_per_value)
                mu = cfg.fedprox_mu if strategy == "fedprox" else 0.0

                def on_round(r, model, strategy=strategy, per_round=per_round):
                    for k in range(n_clients):
                        ledger.record(strategy, k, "download", r)
                        ledger.record(strategy, k, "upload", r)
                    rows.append({**base, "strategy": strategy, "round": r,
                                 "test_accuracy": acc(model), "comm_bytes": r * per_round})

                baselines.run_fedavg(shards, arch, cfg.fedavg_rounds, client_train,
                                     seed=derive_seed(seed, strategy), mu=mu,
                                     activation=cfg.client_activation, callback=on_round)
            elif strategy == "feddf":
                model = baselines.run_feddf(uploads, public_pool, server_arch, server_train,
                                            seed=derive_seed(seed, "feddf"),
                                            activation=cfg.server_activation)
                rows.append({**base, "strategy": "feddf", "round": 1, "test_accuracy": acc(model),
                             "comm_bytes": knowledge_bytes})
            elif strategy == "min_entropy":
                model = baselines.run_min_entropy(uploads, public_pool, server_arch, server_train,
                                                  seed=derive_seed(seed, "min_entropy"),
                                                  activation=cfg.server_activation)
                rows.append({**base, "strategy": "min_entropy", "round": 1,
                             "test_accuracy": acc(model), "comm_bytes": knowledge_bytes})
            elif strategy == "fedol":
                def on_iter(state):
                    rows.append({**base, "strategy": "fedol", "round": state.iteration,
                                 "test_accuracy": acc(state.server_model),
                                 "abstain_fraction": state.abstain_fraction,
                                 "L_d": state.distill_loss, "L_u": state.pseudo_loss,
                                 "comm_bytes": knowledge_bytes})

                core.run_fedol(
                    uploads, public_pool, server_arch,
                    schedule=core.RhoSchedule(cfg.rho_start, cfg.rho_step),
                    tau=cfg.tau, iterations=cfg.iterations, train=server_train,
                    seed=derive_seed(seed, "fedol"), activation=cfg.server_activation,
                    public_labels=public.labels, callback=on_iter,
                )
            else:
                raise ValueError(f"unknown strategy {strategy!r}")
        except Exception as exc:  # one failing strategy must not stop the others
            log.error("strategy %s failed (partition %s, seed %s): %s", strategy, label, seed, exc)
            failures.append((label, seed, strategy, f"{type(exc).__name__}: {exc}"))
    if uploads is not None:
        one_shot_ledger_check(ledger, [s.id for s in fleet])
    return rows


def run_experiment(cfg, strategies=None, seeds=None):
    """Run every (partition, seed) group; returns rows in a fixed order."""
    strategies = list(strategies or cfg.strategies)
    seeds = list(cfg.seeds if seeds is None else seeds)
    rows, ledgers, failures, groups = [], [], [], []
    for scheme in cfg.partitions:
        for seed in seeds:
            ledger = MessageLedger()
            try:
                rows.extend(run_group(cfg, scheme, seed, strategies, ledger, failures))
            except Exception as exc:
                log.error("group %s seed %s failed: %s", scheme, seed, exc)
                failures.append((cfg.partition_spec(scheme, 0).label, seed, "*",
                                 f"{type(exc).__name__}: {exc}"))
            ledgers.append(ledger)
            groups.append((cfg.partition_spec(scheme, 0).label, seed))
    return ExperimentResult(rows, ledgers, failures, groups)
