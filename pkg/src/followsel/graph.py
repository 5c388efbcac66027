"""Weighted directed networks: ingestion, SCC extraction, validation, Laplacian.

An edge ``(i, j, w)`` means agent ``i`` listens to agent ``j`` with weight ``w``;
row ``i`` of the weight matrix ``W`` holds the weights agent ``i`` puts on others.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

log = logging.getLogger(__name__)


class GraphError(ValueError):
    """Malformed input or a network that violates a structural requirement."""


class ParseError(GraphError):
    def __init__(self, path, lineno, msg):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class WeightMode:
    """How edge weights are assigned while reading an edge list.

    ``unit`` sets every weight to 1, ``column`` reads the optional third column
    (default 1), ``random`` draws i.i.d. weights per distinct edge from the
    half-open interval ``(low, high]`` with numpy's PCG64 generator seeded by
    ``seed``.
    """

    kind: str = "unit"
    seed: int = 0
    low: float = 0.0
    high: float = 1.0

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "WeightMode":
        parts = text.strip().split(":")
        kind = parts[0]
        if kind in ("unit", "column"):
            return cls(kind)
        if kind == "random":
            if len(parts) == 1:
                return cls("random", seed)
            if len(parts) == 3:
                return cls("random", seed, float(parts[1]), float(parts[2]))
            if len(parts) == 4:
                return cls("random", int(parts[1]), float(parts[2]), float(parts[3]))
        raise GraphError(f"bad weight mode {text!r}; expected unit, column or random[:seed]:low:high")


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable weighted digraph on nodes ``0..n-1``.

    Parallel edges are merged by summing. Self-loops are kept in ``W`` and in
    ``out_sum`` but cancel in the Laplacian.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    labels: tuple = field(default=())

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64)
        dst = np.asarray(self.dst, dtype=np.int64)
        w = np.asarray(self.weight, dtype=np.float64)
        if not (src.shape == dst.shape == w.shape):
            raise GraphError("src, dst and weight must have equal length")
        if src.size and (src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= self.n):
            raise GraphError("node id out of range")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise GraphError("edge weights must be finite and positive")
        # merge duplicates, canonical (src, dst) order
        W = sp.coo_matrix((w, (src, dst)), shape=(self.n, self.n)).tocsr()
        W.sum_duplicates()
        W.sort_indices()
        coo = W.tocoo()
        for name, arr in (("src", coo.row.astype(np.int64)), ("dst", coo.col.astype(np.int64)),
                          ("weight", coo.data.astype(np.float64))):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        labels = tuple(self.labels) if self.labels else tuple(str(i) for i in range(self.n))
        if len(labels) != self.n:
            raise GraphError("label map length differs from node count")
        object.__setattr__(self, "labels", labels)

    @property
    def n_edges(self) -> int:
        return int(self.src.size)

    @cached_property
    def W(self) -> sp.csr_matrix:
        """Full weight matrix including self-loops."""
        return sp.csr_matrix((self.weight, (self.src, self.dst)), shape=(self.n, self.n))

    @cached_property
    def W_off(self) -> sp.csr_matrix:
        """Off-diagonal part of ``W`` (int32 indices, sorted)."""
        keep = self.src != self.dst
        M = sp.csr_matrix((self.weight[keep], (self.src[keep], self.dst[keep])),
                          shape=(self.n, self.n))
        M.sort_indices()
        M.indices = M.indices.astype(np.int32)
        M.indptr = M.indptr.astype(np.int32)
        return M

    @cached_property
    def W_off_T(self) -> sp.csr_matrix:
        M = self.W_off.T.tocsr()
        M.sort_indices()
        M.indices = M.indices.astype(np.int32)
        M.indptr = M.indptr.astype(np.int32)
        return M

    @cached_property
    def out_sum(self) -> np.ndarray:
        """Per-node ``sum_j w_ij`` including any self-loop."""
        return np.bincount(self.src, weights=self.weight, minlength=self.n)

    @cached_property
    def self_loops(self) -> np.ndarray:
        loops = np.zeros(self.n)
        mask = self.src == self.dst
        loops[self.src[mask]] = self.weight[mask]
        return loops

    @cached_property
    def lap_diag(self) -> np.ndarray:
        """Laplacian diagonal ``L_ii = sum_{j != i} w_ij``."""
        return self.out_sum - self.self_loops

    def laplacian(self) -> sp.csr_matrix:
        return (sp.diags(self.lap_diag) - self.W_off).tocsr()

    def dense_weights(self) -> np.ndarray:
        return self.W.toarray()

    def subgraph(self, nodes) -> "Network":
        """Induced subgraph on ``nodes``; ids are renumbered in increasing order."""
        nodes = np.unique(np.asarray(nodes, dtype=np.int64))
        remap = -np.ones(self.n, dtype=np.int64)
        remap[nodes] = np.arange(nodes.size)
        keep = (remap[self.src] >= 0) & (remap[self.dst] >= 0)
        return Network(int(nodes.size), remap[self.src[keep]], remap[self.dst[keep]],
                       self.weight[keep], tuple(self.labels[i] for i in nodes))

    @classmethod
    def from_dense(cls, W, labels=()) -> "Network":
        W = np.asarray(W, dtype=np.float64)
        src, dst = np.nonzero(W)
        return cls(W.shape[0], src, dst, W[src, dst], labels)


def _sort_labels(tokens):
    try:
        return sorted(tokens, key=int)
    except ValueError:
        return sorted(tokens)


def load_edge_list(path, weight_mode="unit") -> Network:
    """Read a whitespace-separated ``src dst [weight]`` file.

    Lines starting with ``#`` and blank lines are skipped. Node labels are
    compacted to ``0..n-1`` in increasing label order (numeric when every label
    is an integer), so the original numbering sequence is preserved.
    """
    if isinstance(weight_mode, str):
        weight_mode = WeightMode.parse(weight_mode)
    path = Path(path)
    opener = open
    if path.suffix == ".gz":
        import gzip

        opener = gzip.open
    raw_src, raw_dst, raw_w = [], [], []
    with opener(path, "rt") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) not in (2, 3):
                raise ParseError(path, lineno, f"expected 'src dst [weight]', got {text!r}")
            w = 1.0
            if len(parts) == 3 and weight_mode.kind == "column":
                try:
                    w = float(parts[2])
                except ValueError:
                    raise ParseError(path, lineno, f"weight {parts[2]!r} is not a number") from None
                if not np.isfinite(w) or w <= 0:
                    raise GraphError(f"{path}:{lineno}: nonpositive weight {parts[2]}")
            raw_src.append(parts[0])
            raw_dst.append(parts[1])
            raw_w.append(w)

    labels = _sort_labels(set(raw_src) | set(raw_dst))
    index = {lab: i for i, lab in enumerate(labels)}
    src = np.fromiter((index[s] for s in raw_src), dtype=np.int64, count=len(raw_src))
    dst = np.fromiter((index[d] for d in raw_dst), dtype=np.int64, count=len(raw_dst))
    w = np.asarray(raw_w, dtype=np.float64)
    net = Network(len(labels), src, dst, w, tuple(labels))
    if weight_mode.kind == "random":
        net = randomize_weights(net, weight_mode.seed, weight_mode.low, weight_mode.high)
    return net


def randomize_weights(net: Network, seed: int, low: float = 0.0, high: float = 1.0) -> Network:
    """Replace every distinct edge weight by an i.i.d. draw from ``(low, high]``."""
    if not high > low >= 0:
        raise GraphError("random weights need 0 <= low < high")
    rng = np.random.default_rng(seed)
    w = low + (high - low) * (1.0 - rng.random(net.n_edges))
    return Network(net.n, net.src, net.dst, w, net.labels)


def strongly_connected_components(net: Network):
    """Label array of strongly connected components (scipy's Pearce/Tarjan variant)."""
    ncomp, lab = connected_components(net.W, directed=True, connection="strong")
    return ncomp, lab


def extract_largest_scc(net: Network) -> Network:
    """Induced subgraph on the largest SCC; ties go to the component holding the smallest id."""
    if net.n == 0:
        raise GraphError("empty graph has no strongly connected component")
    ncomp, lab = strongly_connected_components(net)
    sizes = np.bincount(lab, minlength=ncomp)
    first = np.full(ncomp, net.n)
    np.minimum.at(first, lab, np.arange(net.n))
    best = min(range(ncomp), key=lambda c: (-sizes[c], first[c]))
    return net.subgraph(np.flatnonzero(lab == best))


@dataclass
class Diagnostics:
    n: int
    n_edges: int
    n_scc: int
    strongly_connected: bool
    has_self_loop: bool
    weights_positive: bool
    messages: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        """True when the solver entry points accept the network."""
        return self.strongly_connected and self.weights_positive and self.n > 0

    def report(self) -> str:
        lines = [
            f"nodes: {self.n}",
            f"edges: {self.n_edges}",
            f"strongly connected: {'yes' if self.strongly_connected else 'no'} ({self.n_scc} components)",
            f"positive self-loop: {'yes' if self.has_self_loop else 'no'}",
            f"positive weights: {'yes' if self.weights_positive else 'no'}",
        ]
        lines.extend(self.messages)
        return "\n".join(lines)


def validate(net: Network) -> Diagnostics:
    """Check strong connectivity, positive weights and the presence of a self-loop."""
    ncomp, _ = strongly_connected_components(net) if net.n else (0, None)
    diag = Diagnostics(
        n=net.n,
        n_edges=net.n_edges,
        n_scc=int(ncomp),
        strongly_connected=net.n > 0 and ncomp == 1,
        has_self_loop=bool(np.any(net.self_loops > 0)),
        weights_positive=bool(np.all(net.weight > 0)),
    )
    if not diag.strongly_connected:
        diag.messages.append(
            f"error: graph is not strongly connected ({ncomp} components); extract the largest SCC first"
        )
    if not diag.has_self_loop:
        diag.messages.append(
            "warning: no positive self-loop; objective values are defined but the "
            "consensus simulation may oscillate on periodic graphs"
        )
    return diag


def require_valid(net: Network) -> None:
    diag = validate(net)
    if not diag.ok:
        raise GraphError("; ".join(m for m in diag.messages if m.startswith("error")) or "invalid network")


def laplacian_apply(net: Network, x) -> np.ndarray:
    """Sparse product ``L x`` with ``L = diag(W 1) - W``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.n,):
        raise ValueError(f"expected vector of length {net.n}, got shape {x.shape}")
    return net.lap_diag * x - net.W_off @ x


def write_label_map(net: Network, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(["node", "label"])
        for i, lab in enumerate(net.labels):
            writer.writerow([i, lab])


def random_network(n: int, out_degree: float, seed: int, self_loops: int = 1,
                   low: float = 0.0, high: float = 1.0) -> Network:
    """Seeded strongly connected digraph: a random Hamiltonian cycle plus random chords.

    Roughly ``n * out_degree`` edges with weights drawn from ``(low, high]``.
    The first ``self_loops`` nodes of the cycle receive a positive self-loop.
    """
    if n < 2:
        raise GraphError("need at least two nodes")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    src = [perm, perm[: min(self_loops, n)]]
    dst = [np.roll(perm, -1), perm[: min(self_loops, n)]]
    extra = max(int(round(n * out_degree)) - n, 0)
    if extra:
        s = rng.integers(0, n, size=extra)
        d = rng.integers(0, n - 1, size=extra)
        d = d + (d >= s)  # no self-loops among chords
        src.append(s)
        dst.append(d)
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    pairs = np.unique(np.stack([src, dst], axis=1), axis=0)
    w = low + (high - low) * (1.0 - rng.random(len(pairs)))
    return Network(n, pairs[:, 0], pairs[:, 1], w)
