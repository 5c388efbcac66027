"""Acceptance checks 1-9. Each test appends one PASS/FAIL line to ``REPORT``;
the lines are echoed at the end of the pytest run (see ``conftest.py``)."""

import itertools
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from followsel.baselines import brute_force
from followsel.convex import pgm_solve
from followsel.dynamics import total_error_with_horizon
from followsel.graph import Network, extract_largest_scc, load_edge_list, random_network, randomize_weights
from followsel.greedy import certify, curvature, greedy_add, greedy_swap
from followsel.objective import Instance, LinearSystem, eval_J, eval_f, grad_f, hessian_f

from conftest import dense_Y, random_dense_W, random_instance

REPORT = []
DATA = Path(__file__).parent / "data"


def record(num, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}"
    REPORT.append(line)
    print(line)
    return ok


def oracle_instances(count=200, seed=20240601):
    rng = np.random.default_rng(seed)
    for k in range(count):
        yield random_instance(rng, mode="P1" if k % 2 else "P2")


# 1 ---------------------------------------------------------------------------

def _anchored_opt(inst, vstar):
    E = [int(v) for v in inst.eligible if v != vstar]
    k = min(inst.K, len(E) + 1) - 1
    return min(eval_J(inst, (vstar,) + c) for c in itertools.combinations(E, k))


def _c1_scan():
    rng = np.random.default_rng(7)
    worst, bad, literal_bad = 0.0, [], []
    for idx, inst in enumerate(oracle_instances()):
        _, J_opt = brute_force(inst)
        g, _ = greedy_add(inst)
        curv = curvature(inst)
        cert = certify(inst, g.members, curv=curv)
        s0, _ = greedy_swap(inst, (), 1)
        k0 = rng.choice(inst.eligible, size=min(inst.K, inst.eligible.size), replace=False)
        sr, _ = greedy_swap(inst, k0, 3)
        uppers = [cert.J_upper, eval_J(inst, s0.members), eval_J(inst, sr.members)]
        lowers = [cert.J_lower, cert.J_global_lower]
        gaps = [l - J_opt for l in lowers] + [J_opt - u for u in uppers]
        # ratio guarantee: baseline - J_G >= R * (baseline - reference optimum)
        ref = J_opt if inst.has_beta else _anchored_opt(inst, curv.baseline_node)
        gaps.append(cert.R * (cert.baseline - ref) - (cert.baseline - cert.J_upper))
        if not inst.has_beta:
            gaps.append(cert.J_lower_anchored - ref)
            if cert.R * (cert.baseline - J_opt) - (cert.baseline - cert.J_upper) > 1e-9:
                literal_bad.append(idx)
        worst = max(worst, *gaps)
        if max(gaps) > 1e-9:
            bad.append(idx)
    return worst, bad, literal_bad


_C1 = {}


def c1_results():
    if not _C1:
        t0 = time.perf_counter()
        _C1["scan"] = _c1_scan()
        _C1["seconds"] = time.perf_counter() - t0
    return _C1["scan"], _C1["seconds"]


def test_c1_oracle_equivalence():
    (worst, bad, literal_bad), dt = c1_results()
    sound = not bad and dt < 60
    record(1, sound and not literal_bad,
           f"200 instances, {dt:.1f}s; brackets and ratio (beta=0: vs best set containing v*) "
           f"worst violation {worst:.2e}, failures {bad[:5]}; beta=0 ratio against the unconstrained "
           f"optimum fails on {len(literal_bad)} instances {literal_bad[:5]}")
    assert sound


@pytest.mark.xfail(strict=True, reason="with beta = 0 the curvature ratio only bounds sets containing v*; "
                   "the optimum can avoid v* (counterexamples found by exhaustive search)")
def test_c1_beta_zero_ratio_against_unconstrained_optimum():
    (_, _, literal_bad), _ = c1_results()
    assert not literal_bad


# 2 ---------------------------------------------------------------------------

def _subsets(nodes):
    return [frozenset(c) for k in range(len(nodes) + 1) for c in itertools.combinations(nodes, k)]


def test_c2_supermodularity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    worst_marg, checks = 0.0, 0
    for _ in range(50):
        inst = random_instance(rng, n_range=(4, 8))
        E = [int(v) for v in inst.eligible]
        subs = [s for s in _subsets(E) if s or inst.has_beta]
        J = {s: eval_J(inst, s, "dense") for s in subs}
        for T in subs:
            for S in _subsets(sorted(T)):
                if S not in J:
                    continue
                for v in E:
                    if v in T:
                        continue
                    lhs = J[S] - J[S | {v}]
                    rhs = J[T] - J[T | {v}]
                    worst_marg = max(worst_marg, rhs - lhs)
                    checks += 1
    worst_mat, mat_checks = 0.0, 0
    for _ in range(50):
        n = int(rng.integers(3, 7))
        W = random_dense_W(n, rng)
        alpha = rng.uniform(0.5, 4.0, n)
        beta = np.where(rng.random(n) < 0.5, rng.uniform(0.1, 2.0, n), 0.0)
        nodes = list(range(n))
        F = {}
        for s in _subsets(nodes):
            if s or beta.any():
                F[s] = np.linalg.inv(dense_Y(W, alpha, beta, sorted(s)))
        for T in F:
            for S in _subsets(sorted(T)):
                if S not in F:
                    continue
                for v in nodes:
                    if v in T:
                        continue
                    diff = (F[T] - F[T | {v}]) - (F[S] - F[S | {v}])
                    worst_mat = max(worst_mat, float(diff.max()))
                    mat_checks += 1
    dt = time.perf_counter() - t0
    ok = record(2, worst_marg <= 1e-12 and worst_mat <= 1e-10 and dt < 30,
                f"{checks} marginal checks (worst {worst_marg:.1e}), {mat_checks} matrix checks "
                f"(worst {worst_mat:.1e}), {dt:.1f}s")
    assert ok


# 3 ---------------------------------------------------------------------------

def test_c3_convexity_and_gradient():
    t0 = time.perf_counter()
    rng = np.random.default_rng(13)
    insts = [random_instance(rng, n_range=(4, 9)) for _ in range(10)]
    worst_fd, worst_eig = 0.0, math.inf
    for k in range(50):
        inst = insts[k % 10]
        y = rng.uniform(0.1, 0.9, inst.n)
        g = grad_f(inst, y, "dense")
        h = 1e-6
        fd = np.empty(inst.n)
        for i in range(inst.n):
            e = np.zeros(inst.n)
            e[i] = h
            fd[i] = (eval_f(inst, y + e, "dense") - eval_f(inst, y - e, "dense")) / (2 * h)
        scale = np.maximum(np.abs(g), 1e-8 * max(np.abs(g).max(), 1e-300))
        mask = np.abs(g) > 1e-12
        worst_fd = max(worst_fd, float(np.max(np.abs(fd - g)[mask] / scale[mask])) if mask.any() else 0.0)
        worst_eig = min(worst_eig, float(np.linalg.eigvalsh(hessian_f(inst, y)).min()))
    worst_seg = -math.inf
    for k in range(500):
        inst = insts[k % 10]
        y1, y2 = rng.random(inst.n), rng.random(inst.n)
        if not inst.has_beta:
            y1, y2 = np.maximum(y1, 0.05), np.maximum(y2, 0.05)
        lam = rng.random()
        lhs = eval_f(inst, lam * y1 + (1 - lam) * y2, "dense")
        rhs = lam * eval_f(inst, y1, "dense") + (1 - lam) * eval_f(inst, y2, "dense")
        worst_seg = max(worst_seg, (lhs - rhs) / max(abs(rhs), 1.0))
    dt = time.perf_counter() - t0
    ok = record(3, worst_fd <= 1e-5 and worst_eig >= -1e-9 and worst_seg <= 1e-12 and dt < 30,
                f"FD rel err {worst_fd:.1e}, min Hessian eig {worst_eig:.1e}, "
                f"segment excess {worst_seg:.1e}, {dt:.1f}s")
    assert ok


# 4 ---------------------------------------------------------------------------

def test_c4_triple_product_nonnegative():
    t0 = time.perf_counter()
    rng = np.random.default_rng(17)
    worst = math.inf
    for _ in range(100):
        n = int(rng.integers(1, 6))
        A = rng.random((n, n)) * (rng.random((n, n)) < 0.7)
        V = np.diag(rng.normal(size=n))
        m = int(rng.integers(0, 6))
        P = [np.linalg.matrix_power(A, i) for i in range(m + 1)]
        total = sum(P[i] @ V @ P[j] @ V @ P[m - i - j] for i in range(m + 1) for j in range(m + 1 - i))
        scale = max(1.0, float(np.abs(total).max()))
        worst = min(worst, float(total.min()) / scale)
    dt = time.perf_counter() - t0
    ok = record(4, worst >= -1e-12 and dt < 5, f"100 draws, min scaled entry {worst:.2e}, {dt:.2f}s")
    assert ok


# 5 ---------------------------------------------------------------------------

def test_c5_dynamics_tightness():
    rng = np.random.default_rng(19)
    worst_tight, worst_bound = 0.0, -math.inf
    for k in range(40):
        base = random_instance(rng, mode="P1", n_range=(4, 9))
        T = 1.0
        mixed = k >= 20
        x0 = rng.uniform(0.0, 2.0, base.n) if mixed else rng.uniform(0.0, 1.0, base.n)
        inst = Instance.p1(base.net, base.alpha, base.b, x0, T, base.K)
        S = greedy_add(inst)[0].members
        emp, _ = total_error_with_horizon(inst, S, x0, T=T)
        J = eval_J(inst, S, "dense")
        if mixed:
            worst_bound = max(worst_bound, emp - J)
        else:
            worst_tight = max(worst_tight, abs(emp - J))
    ok = record(5, worst_tight <= 1e-6 and worst_bound <= 1e-9,
                f"xi0<=0: max |emp-J| {worst_tight:.1e}; mixed sign: max emp-J {worst_bound:.1e}")
    assert ok


# 6 ---------------------------------------------------------------------------

def _fresh(inst, members):
    d = np.zeros(inst.n)
    idx = list(members)
    d[idx] = inst.alpha[idx]
    return LinearSystem(inst, d, "dense").inverse()


def test_c6_update_formulas():
    rng = np.random.default_rng(23)
    worst, steps = 0.0, 0

    def check(state):
        nonlocal worst, steps
        if getattr(state, "phantom", None) is not None:
            return
        worst = max(worst, float(np.abs(state.P - _fresh(state.inst, state.members)).max()))
        steps += 1

    for mode in ("P2", "P1"):
        n = 200
        net = random_network(n, 5.0, seed=int(rng.integers(1 << 30)), self_loops=5)
        alpha = rng.uniform(0.5, 5.0, n)
        b = rng.random(n)
        b /= b.sum()
        if mode == "P2":
            beta = np.where(rng.random(n) < 0.1, rng.uniform(0.5, 3.0, n), 0.0)
            inst = Instance.p2(net, alpha, beta, b, 15)
        else:
            inst = Instance.p1(net, alpha, b, rng.random(n), 1.0, 15)
        greedy_add(inst, "dense", callback=check, refresh_every=0)
        k0 = rng.choice(n, 15, replace=False)
        greedy_swap(inst, k0, 3, "dense", callback=check, refresh_every=0)
    ok = record(6, worst <= 1e-8, f"{steps} cached states vs fresh inverses at n=200, max abs diff {worst:.1e}")
    assert ok


# 7 ---------------------------------------------------------------------------

def _fixtures():
    net = Network.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))
    yield Instance.p2(net, np.array([2.0, 2.0]), np.array([1.0, 0.0]), np.array([0.5, 0.5]), 1)
    from followsel.config import build_instance, load_config, load_network

    cfg = load_config(DATA / "desk50.cfg")
    dnet = load_network(cfg)
    for K in (1, 3, 5, 10):
        yield build_instance(cfg, dnet, K)
    yield from oracle_instances(100, seed=99)


def test_c7_swap_equivalence():
    rng = np.random.default_rng(29)
    mismatch, nonmono, min_ratio, count = [], 0, math.inf, 0
    for idx, inst in enumerate(_fixtures()):
        g, _ = greedy_add(inst, "dense")
        s, _ = greedy_swap(inst, (), 1)
        if s.members != g.members:
            mismatch.append(idx)
        k0 = rng.choice(inst.eligible, size=min(inst.K, inst.eligible.size), replace=False)
        sw, cycles = greedy_swap(inst, k0, 5)
        Js = [eval_J(inst, sorted(k0))] + [c.J for c in cycles]
        nonmono += any(b > a + 1e-12 * abs(a) for a, b in zip(Js, Js[1:]))
        if inst.mode == "P2" and inst.n <= 10:
            _, J_opt = brute_force(inst)
            r = (1 - eval_J(inst, sw.members)) / (1 - J_opt)
            min_ratio = min(min_ratio, r)
        count += 1
    ok = record(7, not mismatch and nonmono == 0 and min_ratio > 0.5,
                f"{count} fixtures, swap(empty,1)!=greedy on {len(mismatch)}, "
                f"non-monotone runs {nonmono}, min interchange ratio {min_ratio:.4f}")
    assert ok


# 8 ---------------------------------------------------------------------------

SWEEP_K = (1, 10, 25, 50, 90, 120)


def wiki_analog(seed=0, n=1300, m=39456, loops=3):
    """Seeded strongly connected digraph with heavy-tailed in- and out-degrees.

    A Hamiltonian cycle keeps it strongly connected; the remaining edges are
    drawn with endpoint probabilities following independent Zipf-like profiles.
    """
    rng = np.random.default_rng(seed)
    wo = np.arange(1, n + 1) ** (-1 / 1.1)
    wi = wo[rng.permutation(n)]
    perm = rng.permutation(n)
    cyc = np.stack([perm, np.roll(perm, -1)], 1)
    s = rng.choice(n, 3 * m, p=wo / wo.sum())
    d = rng.choice(n, 3 * m, p=wi / wi.sum())
    keep = s != d
    pairs = np.unique(np.r_[cyc, np.stack([s[keep], d[keep]], 1)], axis=0)
    on_cycle = set(map(tuple, cyc.tolist()))
    is_cyc = np.array([tuple(p) in on_cycle for p in pairs.tolist()])
    extra = np.flatnonzero(~is_cyc)
    chosen = np.sort(np.r_[np.flatnonzero(is_cyc), rng.choice(extra, m - n - loops, replace=False)])
    pairs = np.r_[pairs[chosen], np.stack([perm[:loops], perm[:loops]], 1)]
    return Network(n, pairs[:, 0], pairs[:, 1], 1.0 - rng.random(len(pairs)))


def wiki_instance(net, K=max(SWEEP_K)):
    n = net.n
    top = np.lexsort((np.arange(n), -net.out_sum))[:50]
    beta = np.zeros(n)
    beta[top] = 1e6
    rest = [v for v in range(n) if beta[v] == 0][:1000]
    alpha = np.zeros(n)
    alpha[rest] = 10.0
    return Instance.p2(net, alpha, beta, np.full(n, 1.0 / n), K)


def ratio_sweep(inst):
    _, tr = greedy_add(inst, "dense")
    Jg = [p.J_after for p in tr.picks]
    floors = []
    for K in SWEEP_K:
        lower = pgm_solve(inst.with_budget(K)).dual_bound
        floors.append((1 - Jg[K - 1]) / (1 - lower))
    return floors


def _wiki_file():
    env = os.environ.get("FOLLOWSEL_WIKI_VOTE")
    cands = [Path(env)] if env else []
    cands += [DATA / "wiki-Vote.txt", DATA / "wiki-Vote.txt.gz"]
    return next((p for p in cands if p.exists()), None)


def _judge(floors):
    Ks = np.array(SWEEP_K)
    above = all(f > 1 - 1 / math.e for f in floors)
    ranks = np.argsort(np.argsort(floors))
    rho = float(np.corrcoef(ranks, np.arange(len(Ks)))[0, 1])
    upward = floors[-1] > floors[0] and rho > 0
    reach = any(f >= 0.9 for f, K in zip(floors, Ks) if K <= 150)
    return above and upward and reach, rho


@pytest.mark.slow
def test_c8_ratio_floor_sweep():
    t0 = time.perf_counter()
    path = _wiki_file()
    if path is not None:
        raw = randomize_weights(load_edge_list(path, "unit"), seed=2024)
        net = extract_largest_scc(raw)
        source = f"{path.name} SCC ({net.n} nodes, {net.n_edges} edges)"
    else:
        net = wiki_analog()
        source = f"heavy-tailed analog ({net.n} nodes, {net.n_edges} edges; wiki-Vote file absent)"
    floors = ratio_sweep(wiki_instance(net))
    ok, rho = _judge(floors)
    dt = time.perf_counter() - t0
    shown = ", ".join(f"K={K}:{f:.3f}" for K, f in zip(SWEEP_K, floors))
    ok = record(8, ok and dt <= 1800, f"{source}: {shown}; rank corr {rho:.2f}; {dt:.0f}s")
    assert ok


@pytest.mark.slow
def test_c8_real_graph_size():
    path = _wiki_file()
    if path is None:
        pytest.skip("wiki-Vote edge list not available offline; set FOLLOWSEL_WIKI_VOTE to check 1300/39456")
    net = extract_largest_scc(load_edge_list(path, "unit"))
    assert (net.n, net.n_edges) == (1300, 39456)


@pytest.mark.slow
@pytest.mark.xfail(reason="relaxation gap at small K on homogeneous-degree graphs; see notes", strict=False)
def test_c8_uniform_degree_analog():
    net = random_network(1300, 39456 / 1300, seed=2024, self_loops=3)
    floors = ratio_sweep(wiki_instance(net))
    ok, _ = _judge(floors)
    shown = ", ".join(f"K={K}:{f:.3f}" for K, f in zip(SWEEP_K, floors))
    REPORT.append(f"criterion 8 (supplementary, uniform-degree analog): {'PASS' if ok else 'FAIL'}  {shown}")
    assert ok


# 9 ---------------------------------------------------------------------------

def _scaling_instance(n, K=20):
    net = random_network(n, 10.0, seed=1, self_loops=n)
    rng = np.random.default_rng(2)
    beta = np.zeros(n)
    beta[rng.choice(n, n // 100, replace=False)] = 1.0
    alpha = np.where(beta == 0, 10.0, 0.0)
    return Instance.p2(net, alpha, beta, np.full(n, 1.0 / n), K)


def _pick_times(inst):
    stamps = [time.perf_counter()]
    _, trace = greedy_add(inst, "iterative", callback=lambda st: stamps.append(time.perf_counter()))
    return np.diff(stamps), stamps[-1] - stamps[0], trace


@pytest.mark.slow
def test_c9_scaling():
    sizes = (2500, 5000, 10_000)
    medians = []
    for n in sizes:
        inst = _scaling_instance(n)
        per_pick, total, trace = _pick_times(inst)
        medians.append(float(np.median(per_pick)))
    edges = inst.net.n_edges
    slope = float(np.polyfit(np.log(sizes), np.log(medians), 1)[0])
    ok = record(9, total <= 300 and len(trace.picks) == 20 and slope < 2,
                f"n=1e4, {edges} edges: 20 picks in {total:.0f}s; median pick "
                + ", ".join(f"{m:.2f}s" for m in medians) + f" at n={sizes}; log-log slope {slope:.2f}")
    assert ok
