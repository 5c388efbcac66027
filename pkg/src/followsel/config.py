"""Plain-text run configuration.

One ``key = value`` pair per line; ``#`` starts a comment. Relative paths are
resolved against the directory holding the config file. Recognized keys::

    graph        = edges.txt            # src dst [weight] per line, .gz allowed
    weights      = unit | column | random | random:LOW:HIGH | random:SEED:LOW:HIGH
    extract_scc  = true                 # keep only the largest strongly connected component
    mode         = P2 | P1
    alpha        = VECTOR               # trust in leader T
    beta         = VECTOR               # trust in leader Q (P2 only)
    b            = VECTOR               # weights of the cost, normalized to sum 1
    x0           = VECTOR               # P1 initial opinions
    T            = 1.0                  # P1 leader opinion
    K            = 5
    K_range      = 1:10 | 1,10,25       # overrides K
    methods      = greedy, swap:1:greedy, pgm_rlxd, pgm_aprx, degree, pagerank, brute
    gamma_grid   = 0.001, 0.01          # optional, for pgm_aprx
    backend      = auto | dense | iterative
    seed         = 0

``VECTOR`` is one of ``uniform[:VALUE]``, ``zero``, ``file:PATH`` (one value per
line in node order, or ``LABEL VALUE`` pairs), ``topk_outdegree:COUNT:VALUE`` or
``first_nonbeta:COUNT:VALUE`` (the ``COUNT`` lowest-numbered nodes with
``beta = 0``).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .graph import Network, WeightMode, extract_largest_scc, load_edge_list
from .objective import Instance

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


METHOD_NAMES = ("greedy", "swap", "pgm_rlxd", "pgm_aprx", "degree", "pagerank", "brute")
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class Method:
    """A solver request. ``swap`` carries the cycle count and the initial-set method."""

    name: str
    cycles: int = 1
    init: str = "empty"

    @classmethod
    def parse(cls, text: str) -> "Method":
        parts = text.strip().split(":")
        name = parts[0]
        if name not in METHOD_NAMES:
            raise ConfigError(f"unknown method {text!r}; choose from {', '.join(METHOD_NAMES)}")
        if name != "swap":
            if len(parts) > 1:
                raise ConfigError(f"method {name!r} takes no parameters")
            return cls(name)
        cycles = 1
        init = "empty"
        if len(parts) > 1 and parts[1]:
            try:
                cycles = int(parts[1])
            except ValueError:
                raise ConfigError(f"swap cycle count must be an integer in {text!r}") from None
            if cycles < 1:
                raise ConfigError("swap needs at least one cycle")
        if len(parts) > 2:
            init = parts[2]
            if init not in ("empty", "greedy", "pgm_aprx", "degree", "pagerank", "random"):
                raise ConfigError(f"unknown swap initializer {init!r}")
        if len(parts) > 3:
            raise ConfigError(f"too many fields in {text!r}; expected swap[:M[:INIT]]")
        return cls(name, cycles, init)

    @property
    def label(self) -> str:
        return f"swap:{self.cycles}:{self.init}" if self.name == "swap" else self.name


@dataclass
class RunConfig:
    graph_path: Path | None = None
    weight_mode: str = "unit"
    extract_scc: bool = True
    mode: str = "P2"
    alpha_spec: str = "uniform:1"
    beta_spec: str = "zero"
    b_spec: str = "uniform"
    x0_spec: str = "zero"
    T: float = 1.0
    Ks: tuple = (1,)
    methods: tuple = (Method("greedy"),)
    gamma_grid: tuple | None = None
    backend: str = "auto"
    seed: int = 0
    base_dir: Path = field(default_factory=Path.cwd)

    def validate(self):
        if self.mode not in ("P1", "P2"):
            raise ConfigError(f"mode must be P1 or P2, got {self.mode!r}")
        if not self.Ks or min(self.Ks) < 1:
            raise ConfigError("every budget K must be at least 1")
        if self.backend not in ("auto", "dense", "iterative"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.graph_path is None:
            raise ConfigError("no graph given (set 'graph' in the config or pass --graph)")
        return self


def parse_K_range(text: str) -> tuple:
    text = text.strip()
    m = re.fullmatch(r"(\d+)\s*:\s*(\d+)(?:\s*:\s*(\d+))?", text)
    if m:
        lo, hi, step = int(m[1]), int(m[2]), int(m[3] or 1)
        if hi < lo or step < 1:
            raise ConfigError(f"bad K range {text!r}")
        return tuple(range(lo, hi + 1, step))
    try:
        Ks = tuple(int(t) for t in re.split(r"[,\s]+", text) if t)
    except ValueError:
        raise ConfigError(f"bad K list {text!r}; use LO:HI[:STEP] or comma-separated integers") from None
    if not Ks:
        raise ConfigError("empty K list")
    return Ks


def _parse_bool(key, value):
    v = value.lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ConfigError(f"{key} must be true or false, got {value!r}")


def load_config(path) -> RunConfig:
    path = Path(path)
    cfg = RunConfig(base_dir=path.resolve().parent)
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in text.split("=", 1))
            try:
                apply_setting(cfg, key, value)
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return cfg


def apply_setting(cfg: RunConfig, key: str, value: str):
    try:
        if key == "graph":
            cfg.graph_path = Path(value)
        elif key == "weights":
            WeightMode.parse(value)
            cfg.weight_mode = value
        elif key == "extract_scc":
            cfg.extract_scc = _parse_bool(key, value)
        elif key == "mode":
            cfg.mode = value.upper()
        elif key in ("alpha", "beta", "b", "x0"):
            setattr(cfg, f"{key}_spec", value)
        elif key == "T":
            cfg.T = float(value)
        elif key == "K":
            cfg.Ks = (int(value),)
        elif key == "K_range":
            cfg.Ks = parse_K_range(value)
        elif key == "methods":
            cfg.methods = tuple(Method.parse(t) for t in value.split(",") if t.strip())
        elif key == "gamma_grid":
            cfg.gamma_grid = tuple(float(t) for t in value.split(",") if t.strip())
        elif key == "backend":
            cfg.backend = value
        elif key == "seed":
            cfg.seed = int(value)
        else:
            raise ConfigError(f"unknown key {key!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None


def _resolve(cfg: RunConfig, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else cfg.base_dir / p


def _read_vector_file(path: Path, net: Network, name: str) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            t = line.split("#", 1)[0].split()
            if t:
                rows.append(t)
    if rows and all(len(r) == 1 for r in rows):
        v = np.array([float(r[0]) for r in rows])
        if v.size != net.n:
            raise ConfigError(f"{name} file {path} has {v.size} values for {net.n} nodes")
        return v
    if not all(len(r) == 2 for r in rows):
        raise ConfigError(f"{name} file {path}: use one value per line or 'LABEL VALUE' pairs")
    index = {str(lab): i for i, lab in enumerate(net.labels)} if net.labels else \
        {str(i): i for i in range(net.n)}
    v = np.zeros(net.n)
    dropped = 0
    for lab, val in rows:
        if lab in index:
            v[index[lab]] = float(val)
        else:
            dropped += 1
    if dropped:
        log.warning("%s file %s: %d labels are not in the graph and were ignored", name, path, dropped)
    return v


def expand_vector(spec: str, net: Network, name: str, cfg: RunConfig | None = None,
                  beta: np.ndarray | None = None) -> np.ndarray:
    """Turn a vector spec into a length-``n`` array."""
    parts = spec.strip().split(":")
    kind = parts[0]
    n = net.n
    try:
        if kind == "zero":
            return np.zeros(n)
        if kind == "uniform":
            return np.full(n, float(parts[1]) if len(parts) > 1 else 1.0)
        if kind == "file":
            path = spec.split(":", 1)[1]
            return _read_vector_file(_resolve(cfg, path) if cfg else Path(path), net, name)
        if kind == "topk_outdegree":
            count, value = int(parts[1]), float(parts[2])
            order = np.lexsort((np.arange(n), -net.out_sum))
            v = np.zeros(n)
            v[order[: min(count, n)]] = value
            return v
        if kind == "first_nonbeta":
            count, value = int(parts[1]), float(parts[2])
            free = np.arange(n) if beta is None else np.flatnonzero(beta == 0)
            v = np.zeros(n)
            v[free[:count]] = value
            return v
    except (IndexError, ValueError):
        raise ConfigError(f"malformed {name} spec {spec!r}") from None
    raise ConfigError(f"unknown {name} spec {spec!r}")


def load_network(cfg: RunConfig) -> Network:
    wm = WeightMode.parse(cfg.weight_mode, seed=cfg.seed)
    net = load_edge_list(_resolve(cfg, cfg.graph_path), wm)
    if cfg.extract_scc:
        big = extract_largest_scc(net)
        if big.n != net.n:
            log.info("kept the largest strongly connected component: %d of %d nodes", big.n, net.n)
        net = big
    return net


def build_instance(cfg: RunConfig, net: Network, K: int | None = None) -> Instance:
    K = cfg.Ks[0] if K is None else K
    b = expand_vector(cfg.b_spec, net, "b", cfg)
    if b.sum() <= 0:
        raise ConfigError("b has no positive entry")
    if abs(b.sum() - 1.0) > 1e-9 and not cfg.b_spec.startswith("uniform"):
        log.warning("b sums to %.6g; normalizing to 1", b.sum())
    b = b / b.sum()
    if cfg.mode == "P2":
        beta = expand_vector(cfg.beta_spec, net, "beta", cfg)
        alpha = expand_vector(cfg.alpha_spec, net, "alpha", cfg, beta=beta)
        return Instance.p2(net, alpha, beta, b, K)
    alpha = expand_vector(cfg.alpha_spec, net, "alpha", cfg)
    x0 = expand_vector(cfg.x0_spec, net, "x0", cfg)
    return Instance.p1(net, alpha, b, x0, cfg.T, K)


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
