"""Shared fixtures and independent oracles.

Oracles here deliberately avoid the package's solvers: J is computed with
``numpy.linalg.solve`` on a Laplacian assembled from a dense weight matrix, and
strongly connected components come from a recursive Tarjan implementation.
"""

from __future__ import annotations

import itertools
import math
import sys
from pathlib import Path

import numpy as np
import pytest

from followsel.graph import Network
from followsel.objective import Instance

DATA = Path(__file__).parent / "data"


# ---------------------------------------------------------------- oracles

def dense_Y(W, alpha, beta, S=()):
    W = np.asarray(W, dtype=float)
    L = np.diag(W.sum(axis=1)) - W
    d = np.zeros(len(W))
    for v in S:
        d[v] = alpha[v]
    return L + np.diag(beta) + np.diag(d)


def dense_J(W, alpha, beta, b, c, S=()):
    Y = dense_Y(W, alpha, beta, S)
    try:
        x = np.linalg.solve(Y, c)
    except np.linalg.LinAlgError:
        return math.inf
    if not np.all(np.isfinite(x)) or np.linalg.cond(Y) > 1e14:
        return math.inf
    return float(b @ x)


def inst_J(inst, S=()):
    return dense_J(inst.net.dense_weights(), inst.alpha, inst.beta, inst.b, inst.c, S)


def dense_f(inst, y):
    W = inst.net.dense_weights()
    Y = np.diag(W.sum(1)) - W + np.diag(inst.beta) + np.diag(np.asarray(y) * inst.alpha)
    return float(inst.b @ np.linalg.solve(Y, inst.c))


def exhaustive_opt(inst, K=None):
    """Minimum of J over all subsets of V_alpha with at most K members."""
    K = inst.K if K is None else K
    E = list(map(int, inst.eligible))
    best = (math.inf, ())
    for k in range(1, min(K, len(E)) + 1):
        for sub in itertools.combinations(E, k):
            best = min(best, (inst_J(inst, sub), sub))
    return best[1], best[0]


def naive_greedy(inst):
    """Greedy by recomputing J from scratch for every candidate."""
    S = []
    for _ in range(inst.K):
        best = None
        for v in map(int, inst.eligible):
            if v in S:
                continue
            J = inst_J(inst, S + [v])
            if best is None or J < best[0] - 1e-12 * abs(J):
                best = (J, v)
        if best is None:
            break
        if S and not best[0] < inst_J(inst, S):
            break
        S.append(best[1])
    return S


def tarjan_scc(n, edges):
    sys.setrecursionlimit(max(10_000, 4 * n))
    adj = [[] for _ in range(n)]
    for s, d in edges:
        adj[s].append(d)
    index, low, on, stack, comps = {}, {}, set(), [], []
    counter = itertools.count()

    def visit(v):
        index[v] = low[v] = next(counter)
        stack.append(v)
        on.add(v)
        for w in adj[v]:
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in on:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on.discard(w)
                comp.append(w)
                if w == v:
                    break
            comps.append(sorted(comp))

    for v in range(n):
        if v not in index:
            visit(v)
    return comps


# ------------------------------------------------------------ generators

def random_dense_W(n, rng, density=0.4, self_loop=True):
    """Strongly connected random weights: a random Hamiltonian cycle plus extra edges."""
    W = np.where(rng.random((n, n)) < density, rng.uniform(0.1, 1.0, (n, n)), 0.0)
    np.fill_diagonal(W, 0.0)
    perm = rng.permutation(n)
    for i in range(n):
        a, b = perm[i], perm[(i + 1) % n]
        W[a, b] = max(W[a, b], rng.uniform(0.1, 1.0))
    if self_loop:
        W[perm[0], perm[0]] = rng.uniform(0.1, 1.0)
    return W


def random_instance(rng, n=None, mode=None, K=None, n_range=(4, 10), K_range=(1, 3),
                    eligible_frac=0.8):
    n = int(rng.integers(n_range[0], n_range[1] + 1)) if n is None else n
    mode = mode or ("P1" if rng.random() < 0.5 else "P2")
    K = int(rng.integers(K_range[0], K_range[1] + 1)) if K is None else K
    W = random_dense_W(n, rng)
    net = Network.from_dense(W)
    alpha = np.where(rng.random(n) < eligible_frac, rng.uniform(0.5, 5.0, n), 0.0)
    if not np.any(alpha > 0):
        alpha[rng.integers(n)] = 1.0
    b = rng.random(n) + 0.05
    b /= b.sum()
    if mode == "P1":
        x0 = rng.random(n)
        return Instance.p1(net, alpha, b, x0, 1.0, K)
    beta = np.where(rng.random(n) < 0.4, rng.uniform(0.2, 3.0, n), 0.0)
    if not np.any(beta > 0):
        beta[rng.integers(n)] = 1.0
    return Instance.p2(net, alpha, beta, b, K)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_cycle_p2():
    """Unit 2-cycle, alpha=(2,2), beta=(1,0), b=(.5,.5), c=beta."""
    net = Network.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))
    return Instance.p2(net, np.array([2.0, 2.0]), np.array([1.0, 0.0]), np.array([0.5, 0.5]), 1)


@pytest.fixture
def two_cycle_p1():
    net = Network.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))
    return Instance.p1(net, np.array([2.0, 2.0]), np.array([0.5, 0.5]), np.zeros(2), 1.0, 1)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
