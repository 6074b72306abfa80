"""Experiment configuration: INI-style sections with a default for every key."""

import configparser
import re
from dataclasses import dataclass, field

from fedol.data import PartitionSpec
from fedol.errors import ConfigError

STRATEGIES = ("local", "fedavg", "fedprox", "feddf", "min_entropy", "fedol")

# section -> key -> default (as written in a config file)
DEFAULTS = {
    "experiment": {
        "seeds": "0",
        "strategies": ", ".join(STRATEGIES),
    },
    "dataset": {
        "classes": "10",
        "dims": "16",
        "per_class": "200",
        "separation": "4.0",
        "public_count": "500",
        "test_count": "1000",
    },
    "partition": {
        "schemes": "dirichlet:1.0",
        "num_clients": "10",
    },
    "clients": {
        "hidden": "16 | 32, 16",
        "activation": "relu",
    },
    "train": {
        "epochs": "50",
        "batch_size": "64",
        "learning_rate": "0.001",
    },
    "server": {
        "hidden": "64, 64",
        "activation": "relu",
        "epochs": "",
        "batch_size": "",
        "learning_rate": "",
    },
    "fedol": {
        "tau": "0.2",
        "rho_start": "0.1",
        "rho_step": "0.05",
        "iterations": "10",
    },
    "fedavg": {
        "rounds": "10",
        "mu": "0.01",
        "hidden": "32, 16",
    },
    "cost": {
        "knowledge_bytes_per_value": "8",
        "parameter_bytes_per_value": "4",
    },
}


@dataclass
class ExperimentConfig:
    seeds: list = field(default_factory=lambda: [0])
    strategies: list = field(default_factory=lambda: list(STRATEGIES))
    classes: int = 10
    dims: int = 16
    per_class: int = 200
    separation: float = 4.0
    public_count: int = 500
    test_count: int = 1000
    partitions: list = field(default_factory=lambda: [("dirichlet", 1.0)])
    num_clients: int = 10
    client_hidden: list = field(default_factory=lambda: [[16], [32, 16]])
    client_activation: str = "relu"
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 0.001
    server_hidden: list = field(default_factory=lambda: [64, 64])
    server_activation: str = "relu"
    server_epochs: int | None = None
    server_batch_size: int | None = None
    server_learning_rate: float | None = None
    tau: float = 0.2
    rho_start: float = 0.1
    rho_step: float = 0.05
    iterations: int = 10
    fedavg_rounds: int = 10
    fedprox_mu: float = 0.01
    fedavg_hidden: list = field(default_factory=lambda: [32, 16])
    knowledge_bytes_per_value: int = 8
    parameter_bytes_per_value: int = 4

    def partition_spec(self, scheme, seed):
        kind, value = scheme
        if kind == "dirichlet":
            return PartitionSpec("dirichlet", self.num_clients, alpha=value, seed=seed)
        return PartitionSpec("pathological", self.num_clients, classes_per_client=int(value), seed=seed)

    @property
    def private_count(self):
        return self.classes * self.per_class - self.public_count


def _line_of(text, section, key=None):
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[(.+)\]$", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return lineno
            continue
        if current == section and key is not None:
            if re.match(rf"{re.escape(key)}\s*[=:]", line):
                return lineno
    return None


def _int_list(value):
    return [int(v) for v in value.replace(",", " ").split()]


def _partition_list(value):
    out = []
    for token in value.split(","):
        token = token.strip()
        if not token:
            continue
        kind, _, arg = token.partition(":")
        kind = {"dir": "dirichlet", "path": "pathological"}.get(kind.strip(), kind.strip())
        if kind not in ("dirichlet", "pathological") or not arg:
            raise ValueError(f"bad partition {token!r}; use dirichlet:<alpha> or pathological:<classes>")
        out.append((kind, float(arg) if kind == "dirichlet" else int(arg)))
    if not out:
        raise ValueError("at least one partition scheme required")
    return out


def _layouts(value):
    return [_int_list(part) for part in value.split("|") if part.strip()]


_FIELDS = {
    ("experiment", "seeds"): ("seeds", _int_list),
    ("experiment", "strategies"): ("strategies", lambda v: [s.strip() for s in v.split(",") if s.strip()]),
    ("dataset", "classes"): ("classes", int),
    ("dataset", "dims"): ("dims", int),
    ("dataset", "per_class"): ("per_class", int),
    ("dataset", "separation"): ("separation", float),
    ("dataset", "public_count"): ("public_count", int),
    ("dataset", "test_count"): ("test_count", int),
    ("partition", "schemes"): ("partitions", _partition_list),
    ("partition", "num_clients"): ("num_clients", int),
    ("clients", "hidden"): ("client_hidden", _layouts),
    ("clients", "activation"): ("client_activation", str),
    ("train", "epochs"): ("epochs", int),
    ("train", "batch_size"): ("batch_size", int),
    ("train", "learning_rate"): ("learning_rate", float),
    ("server", "hidden"): ("server_hidden", _int_list),
    ("server", "activation"): ("server_activation", str),
    ("server", "epochs"): ("server_epochs", lambda v: int(v) if v else None),
    ("server", "batch_size"): ("server_batch_size", lambda v: int(v) if v else None),
    ("server", "learning_rate"): ("server_learning_rate", lambda v: float(v) if v else None),
    ("fedol", "tau"): ("tau", float),
    ("fedol", "rho_start"): ("rho_start", float),
    ("fedol", "rho_step"): ("rho_step", float),
    ("fedol", "iterations"): ("iterations", int),
    ("fedavg", "rounds"): ("fedavg_rounds", int),
    ("fedavg", "mu"): ("fedprox_mu", float),
    ("fedavg", "hidden"): ("fedavg_hidden", _int_list),
    ("cost", "knowledge_bytes_per_value"): ("knowledge_bytes_per_value", int),
    ("cost", "parameter_bytes_per_value"): ("parameter_bytes_per_value", int),
}


def _validate(cfg, where):
    def need(cond, section, key, msg):
        if not cond:
            raise ConfigError(f"[{section}] {key}: {msg}", where(section, key))

    need(cfg.seeds, "experiment", "seeds", "at least one seed required")
    for s in cfg.strategies:
        need(s in STRATEGIES, "experiment", "strategies", f"unknown strategy {s!r}")
    need(cfg.classes >= 2, "dataset", "classes", "must be >= 2")
    need(cfg.dims >= 2, "dataset", "dims", "must be >= 2")
    need(cfg.per_class >= 1, "dataset", "per_class", "must be >= 1")
    need(cfg.separation >= 0, "dataset", "separation", "must be >= 0")
    need(0 < cfg.public_count < cfg.classes * cfg.per_class, "dataset", "public_count",
         "must be positive and smaller than classes * per_class")
    need(cfg.test_count >= 1, "dataset", "test_count", "must be >= 1")
    need(cfg.num_clients >= 1, "partition", "num_clients", "must be >= 1")
    need(cfg.private_count >= cfg.num_clients, "partition", "num_clients",
         "more clients than private samples")
    for kind, value in cfg.partitions:
        if kind == "dirichlet":
            need(value > 0, "partition", "schemes", "dirichlet alpha must be positive")
        else:
            need(1 <= value <= cfg.classes, "partition", "schemes",
                 "pathological classes must lie in [1, classes]")
            need(cfg.num_clients * value >= cfg.classes, "partition", "schemes",
                 f"num_clients * {value} cannot cover {cfg.classes} classes")
    need(cfg.client_hidden, "clients", "hidden", "at least one layout required")
    for section, key, act in (("clients", "activation", cfg.client_activation),
                              ("server", "activation", cfg.server_activation)):
        need(act in ("relu", "tanh"), section, key, "must be relu or tanh")
    need(cfg.epochs >= 1, "train", "epochs", "must be >= 1")
    need(cfg.batch_size >= 1, "train", "batch_size", "must be >= 1")
    need(cfg.learning_rate > 0, "train", "learning_rate", "must be positive")
    need(cfg.tau >= 0, "fedol", "tau", "must be >= 0")
    need(0 < cfg.rho_start <= 1, "fedol", "rho_start", "must lie in (0, 1]")
    need(cfg.rho_step >= 0, "fedol", "rho_step", "must be >= 0")
    need(cfg.iterations >= 1, "fedol", "iterations", "must be >= 1")
    need(cfg.fedavg_rounds >= 1, "fedavg", "rounds", "must be >= 1")
    need(cfg.fedprox_mu >= 0, "fedavg", "mu", "must be >= 0")
    need(cfg.knowledge_bytes_per_value >= 1, "cost", "knowledge_bytes_per_value", "must be >= 1")
    need(cfg.parameter_bytes_per_value >= 1, "cost", "parameter_bytes_per_value", "must be >= 1")
    return cfg


def parse_config(text):
    """Parse config text; raises ``ConfigError`` naming the offending line."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " "), getattr(exc, "lineno", None)) from None

    def where(section, key=None):
        return _line_of(text, section, key)

    kwargs = {}
    for section in parser.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]", where(section))
        for key in parser[section]:
            if key not in DEFAULTS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", where(section, key))
    for (section, key), (attr, conv) in _FIELDS.items():
        raw = parser.get(section, key, fallback=DEFAULTS[section][key]).strip()
        try:
            kwargs[attr] = conv(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}", where(section, key)) from None
    return _validate(ExperimentConfig(**kwargs), where)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def _fmt_list(values):
    return ", ".join(str(v) for v in values)


def resolved_text(cfg):
    """Config file text with every default materialized."""
    server = lambda v: "" if v is None else str(v)  # noqa: E731
    values = {
        "experiment": {"seeds": _fmt_list(cfg.seeds), "strategies": _fmt_list(cfg.strategies)},
        "dataset": {
            "classes": cfg.classes, "dims": cfg.dims, "per_class": cfg.per_class,
            "separation": repr(cfg.separation), "public_count": cfg.public_count,
            "test_count": cfg.test_count,
        },
        "partition": {
            "schemes": ", ".join(f"{k}:{v!r}" for k, v in cfg.partitions),
            "num_clients": cfg.num_clients,
        },
        "clients": {
            "hidden": " | ".join(_fmt_list(h) for h in cfg.client_hidden),
            "activation": cfg.client_activation,
        },
        "train": {"epochs": cfg.epochs, "batch_size": cfg.batch_size,
                  "learning_rate": repr(cfg.learning_rate)},
        "server": {
            "hidden": _fmt_list(cfg.server_hidden), "activation": cfg.server_activation,
            "epochs": server(cfg.server_epochs), "batch_size": server(cfg.server_batch_size),
            "learning_rate": server(cfg.server_learning_rate),
        },
        "fedol": {"tau": repr(cfg.tau), "rho_start": repr(cfg.rho_start),
                  "rho_step": repr(cfg.rho_step), "iterations": cfg.iterations},
        "fedavg": {"rounds": cfg.fedavg_rounds, "mu": repr(cfg.fedprox_mu),
                   "hidden": _fmt_list(cfg.fedavg_hidden)},
        "cost": {"knowledge_bytes_per_value": cfg.knowledge_bytes_per_value,
                 "parameter_bytes_per_value": cfg.parameter_bytes_per_value},
    }
    lines = []
    for section, entries in values.items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in entries.items())
        lines.append("")
    return "\n".join(lines)
