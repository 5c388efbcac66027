"""Reference selections: degree and PageRank rankings, plus exhaustive search."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .objective import Instance, eval_J

log = logging.getLogger(__name__)

BRUTE_FORCE_CAP = 2_000_000


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class BaselineKind:
    kind: str
    damping: float = 0.85
    tol: float = 1e-10

    def __post_init__(self):
        if self.kind not in ("degree", "pagerank", "brute_force"):
            raise ValueError(f"unknown baseline {self.kind!r}")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")


def _top_k(scores, pool, K):
    pool = np.asarray(pool, dtype=np.int64)
    s = np.asarray(scores)[pool]
    order = np.lexsort((pool, -s))
    return tuple(sorted(int(v) for v in pool[order[:K]]))


def select_by_degree(inst: Instance, K: int | None = None) -> tuple:
    """Top-``K`` eligible nodes by weighted out-degree."""
    K = inst.K if K is None else K
    return _top_k(inst.net.out_sum, inst.eligible, K)


def pagerank(net, damping=0.85, tol=1e-10, max_iter=10_000) -> np.ndarray:
    """Power iteration on the row-normalized weights; dangling mass spreads uniformly."""
    n = net.n
    out = net.out_sum
    WT = net.W.T.tocsr()
    dangling = out <= 0
    inv = np.where(dangling, 0.0, 1.0 / np.where(dangling, 1.0, out))
    r = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        spread = WT @ (r * inv)
        new = damping * (spread + r[dangling].sum() / n) + (1.0 - damping) / n
        new /= new.sum()
        if np.abs(new - r).sum() <= tol:
            return new
        r = new
    log.warning("PageRank did not reach tolerance %g in %d iterations", tol, max_iter)
    return r


def select_by_pagerank(inst: Instance, K: int | None = None, damping=0.85, tol=1e-10) -> tuple:
    K = inst.K if K is None else K
    BaselineKind("pagerank", damping, tol)
    return _top_k(pagerank(inst.net, damping, tol), inst.eligible, K)


def brute_force(inst: Instance, K: int | None = None, cap: int = BRUTE_FORCE_CAP, backend="dense"):
    """Exact minimizer of ``J`` over subsets of the eligible nodes with at most ``K`` members.

    ``J`` is nonincreasing in the set, so only subsets of size ``min(K, |V_alpha|)``
    are scanned. Ties go to the lexicographically first subset.
    """
    K = inst.K if K is None else K
    E = [int(v) for v in inst.eligible]
    k = min(K, len(E))
    count = math.comb(len(E), k)
    if count > cap:
        raise BudgetExceeded(
            f"{count} subsets of size {k} from {len(E)} eligible nodes exceed the cap {cap}; "
            "use a smaller graph, fewer eligible nodes, or a smaller K")
    best_set, best_J = None, math.inf
    for sub in itertools.combinations(E, k):
        J = eval_J(inst, sub, backend)
        if J < best_J - 1e-15 * abs(best_J) or best_set is None:
            best_set, best_J = sub, J
    return tuple(best_set), float(best_J)


def brute_force_all_sizes(inst: Instance, K: int | None = None, cap: int = BRUTE_FORCE_CAP):
    """Like :func:`brute_force` but scanning every size up to ``K`` (test oracle)."""
    K = inst.K if K is None else K
    E = [int(v) for v in inst.eligible]
    lo = 0 if inst.has_beta else 1  # J(empty) is singular without beta
    sizes = range(lo, min(K, len(E)) + 1)
    total = sum(math.comb(len(E), k) for k in sizes)
    if total > cap:
        raise BudgetExceeded(f"{total} subsets exceed the cap {cap}")
    best_set, best_J = None, math.inf
    for k in sizes:
        for sub in itertools.combinations(E, k):
            J = eval_J(inst, sub)
            if J < best_J:
                best_set, best_J = sub, J
    return tuple(best_set), float(best_J)


def all_subset_values(inst: Instance, nodes=None) -> dict:
    """``J`` for every subset of ``nodes`` (default: all nodes), keyed by frozenset.

    The empty set is left out when ``beta`` is zero, since ``J`` is undefined there.
    """
    nodes = list(range(inst.n)) if nodes is None else [int(v) for v in nodes]
    out = {}
    for k in range(0 if inst.has_beta else 1, len(nodes) + 1):
        for sub in itertools.combinations(nodes, k):
            out[frozenset(sub)] = eval_J(inst, sub)
    return out


__all__ = [
    "BRUTE_FORCE_CAP",
    "BaselineKind",
    "BudgetExceeded",
    "all_subset_values",
    "brute_force",
    "brute_force_all_sizes",
    "pagerank",
    "select_by_degree",
    "select_by_pagerank",
]
