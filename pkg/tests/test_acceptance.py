"""Acceptance gate. Each test checks one criterion at its stated tolerance and
reports a PASS/FAIL line in the terminal summary."""

import math
import time
from collections import defaultdict

import numpy as np
import pytest

from fedol import cli, core, data, harness, nn
from fedol.config import parse_config

from oracles import brute_force_pseudo_labels, max_relative_error, numeric_grad, random_prediction_set

# Desk-scale task shared by the directional comparison. Separation 2 and lr 0.02
# keep clients well short of saturation; see the notes for the regime sweep.
DIRECTIONAL = """\
[experiment]
seeds = 0, 1, 2, 3, 4
strategies = local, feddf, min_entropy, fedol
[dataset]
classes = 10
dims = 16
per_class = 200
separation = 2.0
public_count = 500
[partition]
schemes = dirichlet:1, dirichlet:0.05, pathological:3, pathological:2
num_clients = 10
[train]
epochs = 50
batch_size = 64
learning_rate = 0.02
"""


def test_c1_pseudo_label_oracle(verdict):
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(200):
        n, c, k = int(rng.integers(1, 51)), int(rng.integers(2, 6)), int(rng.integers(1, 5))
        rho = float(rng.choice(np.round(np.arange(0.05, 1.0001, 0.05), 2)))
        mats = random_prediction_set(rng, n, c, k)
        got = core.generate_pseudo_labels(mats, [core.class_confidence(m) for m in mats], rho)
        mismatches += got.tolist() != brute_force_pseudo_labels([m.tolist() for m in mats], rho)
    elapsed = time.perf_counter() - start
    verdict(mismatches == 0 and elapsed < 10,
            f"{200 - mismatches}/200 instances match the brute-force oracle in {elapsed:.2f}s")


def test_c2_server_loss_gradient(verdict):
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    worst = 0.0
    for i in range(20):
        d, c, k, n = (int(v) for v in (rng.integers(2, 5), rng.integers(2, 5), rng.integers(1, 4), rng.integers(2, 8)))
        hidden = [int(h) for h in rng.integers(2, 6, size=int(rng.integers(1, 3)))]
        server = nn.init_mlp([d, *hidden, c], seed=i, activation=("tanh", "relu")[i % 2])
        for b in server.biases:  # keep relu units off their kink
            b += rng.uniform(0.05, 0.3, size=b.shape) * rng.choice([-1, 1], size=b.shape)
        x = rng.normal(size=(n, d))
        uploads = [rng.dirichlet(np.ones(c), size=n) for _ in range(k)]
        pseudo = rng.integers(-1, c, size=n)
        tau = float(rng.uniform(0, 1))
        res = core.server_loss(server, x, uploads, pseudo, tau)
        num = numeric_grad(lambda: core.server_loss(server, x, uploads, pseudo, tau).total,
                           server.params(), h=1e-5)
        worst = max(worst, max_relative_error(res.grads, num))
    elapsed = time.perf_counter() - start
    verdict(worst < 1e-4 and elapsed < 30, f"max relative error {worst:.2e} over 20 instances in {elapsed:.2f}s")


def test_c3_identities(verdict):
    rng = np.random.default_rng(3)
    gaps = []
    for _ in range(1000):
        c = int(rng.integers(2, 11))
        u, v = rng.dirichlet(np.ones(c)), rng.dirichlet(np.ones(c))
        gaps.append(abs(nn.cross_entropy(u, v) - nn.kl_divergence(u, v) - nn.entropy(u)))
    ce_gap = max(gaps)
    sm_gap = np.abs(nn.softmax(rng.normal(scale=10, size=(1000, 7))).sum(axis=1) - 1).max()
    mats = [rng.dirichlet(np.ones(6), size=40) for _ in range(5)]
    c2_gap = max(abs(core.class_confidence(m).sum() - 1) for m in mats)
    lam_gap = np.abs(core.distill_weights(mats).sum(axis=1) - 1).max()
    worst = max(ce_gap, sm_gap, c2_gap, lam_gap)
    verdict(worst <= 1e-9, f"CE-KL-H {ce_gap:.1e}, softmax {sm_gap:.1e}, C2 {c2_gap:.1e}, lambda {lam_gap:.1e}")


def test_c4_monotone_gating(verdict):
    rng = np.random.default_rng(4)
    rhos = np.round(np.arange(0.1, 1.0001, 0.05), 2)
    violations = 0
    for _ in range(50):
        n, c = int(rng.integers(5, 200)), int(rng.integers(2, 10))
        p = rng.dirichlet(np.full(c, rng.uniform(0.1, 3)), size=n)
        p[rng.integers(n)] = 1.0 / c  # plant ties at the maximum entropy
        prev = np.zeros(n, dtype=bool)
        for rho in rhos:
            mask = core.admitted_mask(p, rho)
            violations += bool(np.any(prev & ~mask))
            prev = mask
        violations += not prev.all()
    verdict(violations == 0, f"{violations} inclusion violations over 50 matrices x {len(rhos)} steps")


@pytest.fixture(scope="module")
def directional_run():
    start = time.perf_counter()
    res = harness.run_experiment(parse_config(DIRECTIONAL))
    return res, time.perf_counter() - start


def test_c5_directional_comparison(directional_run, verdict):
    res, elapsed = directional_run
    final = defaultdict(list)
    last = max(r["round"] for r in res.rows if r["strategy"] == "fedol")
    for r in res.rows:
        if r["strategy"] != "fedol" or r["round"] == last:
            final[r["partition"], r["strategy"]].append(r["test_accuracy"])
    parts = ["dir(1)", "dir(0.05)", "path(3)", "path(2)"]
    wins, notes = 0, []
    for part in parts:
        med = {s: float(np.median(final[part, s])) for s in ("fedol", "local", "min_entropy", "feddf")}
        won = all(med["fedol"] >= med[s] for s in ("local", "min_entropy", "feddf"))
        wins += won
        notes.append(f"{part} fedol={med['fedol']:.3f} mine={med['min_entropy']:.3f} "
                     f"feddf={med['feddf']:.3f} local={med['local']:.3f}{'' if won else ' (lost)'}")
    ok = wins >= 3 and not res.failures and elapsed < 600
    verdict(ok, f"FedOL leads in {wins}/4 partitions in {elapsed:.0f}s; " + "; ".join(notes))


def test_c6_cost_and_ledger(directional_run, verdict):
    res, _ = directional_run
    cfg = parse_config("[dataset]\nper_class = 1000\npublic_count = 5000\n")
    upload = harness.cost_report(cfg, "fedol").upload_bytes[0]
    mb = harness.megabytes(harness.parameter_upload_bytes(17_000_000, 4))
    ledgers_ok = all(harness.one_shot_ledger_check(led, range(10)) for led in res.ledgers)
    ok = upload == 400_000 and abs(mb - 65.14) / 65.14 < 0.01 and ledgers_ok and len(res.ledgers) == 20
    verdict(ok, f"knowledge upload {upload} B; 17M params = {mb:.2f} MB "
                f"({100 * abs(mb - 65.14) / 65.14:.2f}% off 65.14); {len(res.ledgers)} one-shot ledgers pass")


def test_c7_cli_determinism(tmp_path, verdict):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("[dataset]\nclasses = 4\ndims = 6\nper_class = 40\npublic_count = 40\n"
                   "[partition]\nnum_clients = 4\nschemes = dir:0.3, path:2\n"
                   "[train]\nepochs = 3\nlearning_rate = 0.02\n[fedol]\niterations = 3\n[fedavg]\nrounds = 3\n")
    codes, bodies = [], []
    for name in ("a", "b"):
        codes.append(cli.main(["run", str(cfg), "--seed", "11", "--out", str(tmp_path / name)]))
        bodies.append((tmp_path / name / "metrics.csv").read_bytes().split(b"\n", 1)[1])
    ok = codes == [0, 0] and bodies[0] == bodies[1]
    verdict(ok, f"exit codes {codes}; metrics bodies identical: {bodies[0] == bodies[1]} ({len(bodies[0])} bytes)")


def _exact_partition(private, shards):
    ids = np.concatenate([s.ids for s in shards])
    return len(ids) == len(set(ids.tolist())) and sorted(ids.tolist()) == sorted(private.ids.tolist())


def test_c8_partitions(verdict):
    rng = np.random.default_rng(8)
    bad = {"dirichlet": 0, "pathological": 0}
    for _ in range(50):
        c, per, k = int(rng.integers(2, 11)), int(rng.integers(1, 40)), int(rng.integers(1, 12))
        ds = data.make_synthetic(c, 2, per, 1.0, seed=int(rng.integers(2**31)))
        if len(ds) >= k:
            shards = data.partition_dirichlet(ds, k, float(10 ** rng.uniform(-2, 1)), int(rng.integers(2**31)))
            bad["dirichlet"] += not _exact_partition(ds, shards)
        ic = int(rng.integers(math.ceil(c / k), c + 1))
        shards = data.partition_pathological(ds, k, ic, int(rng.integers(2**31)))
        bad["pathological"] += not (_exact_partition(ds, shards)
                                    and all(len(np.unique(s.labels)) == ic for s in shards))

    labels = np.repeat(np.arange(10), 100)
    ds = data.Dataset(np.zeros((1000, 2)), labels, 10)

    def max_share(alpha):
        return np.mean([np.bincount(s.labels, minlength=10).max() / len(s)
                        for seed in range(20) for s in data.partition_dirichlet(ds, 10, alpha, seed)])

    low, high = max_share(0.05), max_share(1.0)
    ok = not any(bad.values()) and low > high
    verdict(ok, f"violations {bad}; mean max-class-share {low:.3f} at alpha=0.05 vs {high:.3f} at alpha=1")
