"""Command line interface: ``followsel validate | solve | sweep-ratio | simulate``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import baselines, convex, dynamics, greedy
from .config import (
    ConfigError,
    Method,
    RunConfig,
    build_instance,
    expand_vector,
    load_config,
    load_network,
    parse_K_range,
)
from .graph import GraphError, WeightMode, load_edge_list, validate
from .objective import ConvergenceError, Instance, SingularSystemError, eval_J

log = logging.getLogger("followsel")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2
RATIO_THRESHOLDS = (0.7, 0.9)


@dataclass
class Row:
    K: int
    method: str
    J_upper: float
    J_lower: float
    iterations: int
    members: tuple
    seconds: float
    ratio_bound: float = math.nan


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        return repr(x)
    return str(x)


class Context:
    """Per-instance quantities shared by every method at every budget."""

    def __init__(self, cfg: RunConfig, inst: Instance):
        self.cfg = cfg
        self.inst = inst
        self._curv = None
        self._J_all = None
        self._path = None
        self._lock = threading.Lock()

    @property
    def gamma_path(self):
        with self._lock:
            if self._path is None:
                cfg = convex.PgmConfig(backend=self.cfg.backend, rel_cost_tol=1e-10)
                self._path = convex.solve_gamma_path(self.inst, self.cfg.gamma_grid, cfg)
            return self._path

    def aprx(self, inst):
        return convex.select_from_path(inst, self.gamma_path, inst.K, self.cfg.backend)

    @property
    def curvature(self):
        if self._curv is None:
            self._curv = greedy.curvature(self.inst, self.cfg.backend)
        return self._curv

    @property
    def J_all(self) -> float:
        if self._J_all is None:
            self._J_all = eval_J(self.inst, tuple(self.inst.eligible), self.cfg.backend)
        return self._J_all


def _swap_init(ctx: Context, inst: Instance, init: str, K: int):
    if init == "empty":
        return ()
    if init == "greedy":
        return greedy.greedy_add(inst, ctx.cfg.backend)[0].members
    if init == "pgm_aprx":
        return ctx.aprx(inst).selection
    if init == "degree":
        return baselines.select_by_degree(inst, K)
    if init == "pagerank":
        return baselines.select_by_pagerank(inst, K)
    rng = np.random.default_rng([ctx.cfg.seed, K])
    E = inst.eligible
    return tuple(sorted(int(v) for v in rng.choice(E, size=min(K, E.size), replace=False)))


def run_method(ctx: Context, method: Method, K: int) -> Row:
    inst = ctx.inst.with_budget(K)
    backend = ctx.cfg.backend
    t0 = time.perf_counter()
    if method.name == "greedy":
        sel, trace = greedy.greedy_add(inst, backend)
        cert = greedy.certify(inst, sel.members, backend, ctx.curvature)
        up, low, iters, members = cert.J_upper, cert.J_lower, len(trace.picks), sel.members
    elif method.name == "swap":
        K0 = _swap_init(ctx, inst, method.init, K)
        sel, cycles = greedy.greedy_swap(inst, K0, method.cycles, "dense" if inst.n <= inst.dense_threshold else backend)
        up, low, iters, members = eval_J(inst, sel.members, backend), ctx.J_all, len(cycles), sel.members
    elif method.name == "pgm_rlxd":
        rep = convex.pgm_solve(inst, convex.PgmConfig(backend=backend))
        up, low, iters, members = rep.f_rounded, rep.dual_bound, rep.iters, rep.rounded_set
    elif method.name == "pgm_aprx":
        res = ctx.aprx(inst)
        up, low, members = res.J, ctx.J_all, res.selection
        iters = sum(r.iters for r in res.reports)
    elif method.name in ("degree", "pagerank"):
        pick = baselines.select_by_degree if method.name == "degree" else baselines.select_by_pagerank
        members = pick(inst, K)
        up, low, iters = eval_J(inst, members, backend), ctx.J_all, 0
    elif method.name == "brute":
        members, up = baselines.brute_force(inst, K)
        low, iters = up, 0
    else:  # pragma: no cover - Method.parse rejects unknown names
        raise ConfigError(method.name)
    low = min(low, up)
    return Row(K, method.label, float(up), float(low), int(iters), tuple(members),
               time.perf_counter() - t0)


def _fill_ratio(rows, mode):
    """``(1 - J_upper) / (1 - best lower bound at this K)`` for P2; blank for P1."""
    if mode != "P2":
        return
    best = {}
    for r in rows:
        best[r.K] = max(best.get(r.K, -math.inf), r.J_lower)
    for r in rows:
        den = 1.0 - best[r.K]
        r.ratio_bound = (1.0 - r.J_upper) / den if den > 0 else math.nan


def solve_rows(cfg: RunConfig, workers: int = 1):
    net = load_network(cfg)
    inst = build_instance(cfg, net)
    ctx = Context(cfg, inst)
    if any(m.name == "greedy" for m in cfg.methods):
        _ = ctx.curvature  # computed once, outside the worker pool
    jobs = [(K, m) for K in cfg.Ks for m in cfg.methods]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda km: run_method(ctx, km[1], km[0]), jobs))
    else:
        rows = [run_method(ctx, m, K) for K, m in jobs]
    _fill_ratio(rows, cfg.mode)
    return net, inst, rows


def _labels(net, members):
    if net.labels:
        return " ".join(str(net.labels[v]) for v in members)
    return " ".join(str(v) for v in members)


def _writer(fh):
    return csv.writer(fh, lineterminator="\r\n")


def write_solve_outputs(out: Path, net, rows):
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["K", "method", "J_upper", "J_lower", "ratio_bound", "iterations"])
        for r in rows:
            w.writerow([r.K, r.method, _fmt(r.J_upper), _fmt(r.J_lower), _fmt(r.ratio_bound), r.iterations])
    with open(_sidecar(out, "selections"), "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["K", "method", "size", "members"])
        for r in rows:
            w.writerow([r.K, r.method, len(r.members), _labels(net, r.members)])
    with open(_sidecar(out, "timings"), "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["K", "method", "seconds"])
        for r in rows:
            w.writerow([r.K, r.method, f"{r.seconds:.6f}"])


def _sidecar(out: Path, tag: str) -> Path:
    return out.with_name(f"{out.stem}.{tag}{out.suffix or '.csv'}")


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.graph:
        cfg.graph_path = Path(args.graph).resolve()
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "method", None):
        cfg.methods = tuple(Method.parse(m) for m in args.method)
    if getattr(args, "K", None) is not None:
        cfg.Ks = (args.K,)
    if getattr(args, "K_range", None):
        cfg.Ks = parse_K_range(args.K_range)
    return cfg.validate()


def cmd_validate(args) -> int:
    cfg = _config_from_args(args)
    wm = WeightMode.parse(cfg.weight_mode, seed=cfg.seed)
    path = cfg.graph_path if cfg.graph_path.is_absolute() else cfg.base_dir / cfg.graph_path
    raw = load_edge_list(path, wm)
    diag = validate(raw)
    print(f"graph: {raw.n} nodes, {raw.n_edges} edges")
    print(diag.report())
    ok = diag.ok
    if not ok and cfg.extract_scc:
        big = load_network(cfg)
        print(f"note: solve would keep the largest strongly connected component ({big.n} nodes)")
    try:
        net = load_network(cfg)
        inst = build_instance(cfg, net)
        print(f"instance: mode {inst.mode}, |V_alpha| = {inst.eligible.size}, "
              f"|V_beta| = {int(np.count_nonzero(inst.beta))}, K = {list(cfg.Ks)}")
    except (ConfigError, GraphError, ValueError) as exc:
        print(f"error: {exc}")
        ok = False
    return EXIT_OK if ok else EXIT_INVALID


def cmd_solve(args) -> int:
    cfg = _config_from_args(args)
    net, _, rows = solve_rows(cfg, args.workers)
    out = Path(args.out)
    write_solve_outputs(out, net, rows)
    bad = [r for r in rows if r.J_lower > r.J_upper]
    if bad:  # pragma: no cover - J_lower is clamped in run_method
        log.error("lower bound above upper bound in %d rows", len(bad))
        return EXIT_NUMERIC
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def cmd_sweep_ratio(args) -> int:
    cfg = _config_from_args(args)
    names = {m.name for m in cfg.methods}
    need = [Method("greedy"), Method("pgm_rlxd")]
    cfg.methods = tuple(m for m in need if m.name not in names) + tuple(cfg.methods)
    if cfg.mode != "P2":
        raise ConfigError("sweep-ratio compares 1 - J values and needs a P2 instance")
    net, inst, rows = solve_rows(cfg, args.workers)
    out = Path(args.out)
    by = {(r.K, r.method): r for r in rows}
    with open(out, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["K", "J_greedy", "f_rlxd_lower", "ratio_floor", "R_sigma_K"]
                   + [f"floor_ge_{t}" for t in RATIO_THRESHOLDS])
        sigma = greedy.curvature(inst, cfg.backend).sigma
        for K in cfg.Ks:
            g, p = by[(K, "greedy")], by[(K, "pgm_rlxd")]
            den = 1.0 - p.J_lower
            floor = (1.0 - g.J_upper) / den if den > 0 else math.nan
            R_sig = greedy.ratio_R(sigma, K)
            w.writerow([K, _fmt(g.J_upper), _fmt(p.J_lower), _fmt(floor), _fmt(R_sig)]
                       + [int(floor >= t) for t in RATIO_THRESHOLDS])
    write_solve_outputs(_sidecar(out, "rows"), net, rows)
    print(f"wrote ratio sweep for {len(cfg.Ks)} budgets to {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    net = load_network(cfg)
    inst = build_instance(cfg, net)
    labels = {str(lab): i for i, lab in enumerate(net.labels)} if net.labels else {}
    members = []
    for tok in args.members.split(","):
        tok = tok.strip()
        if tok:
            if labels and tok not in labels:
                raise ConfigError(f"node {tok!r} is not in the graph")
            members.append(labels[tok] if labels else int(tok))
    if inst.mode == "P1":
        x0 = expand_vector(cfg.x0_spec, net, "x0", cfg)
        state = dynamics.OpinionState(x0, 0, cfg.T, 0.0)
        sL = None
    else:
        state = dynamics.OpinionState(np.zeros(inst.n), 0, 0.0, 1.0)
        sL = (inst.beta > 0).astype(float)
    traj = [state.x.copy()]
    for _ in range(args.steps):
        state = dynamics.step(state, inst, members, sL)
        traj.append(state.x.copy())
    dynamics.write_trajectory(args.out, traj)
    print(f"wrote {len(traj)} states to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="followsel", description="Select direct followers for a leader in a weighted digraph.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, methods=True):
        sp.add_argument("--config", help="key = value run configuration")
        sp.add_argument("--graph", help="edge list (overrides the config)")
        sp.add_argument("--seed", type=int)
        if methods:
            sp.add_argument("--method", action="append", help="repeatable; e.g. greedy, swap:1:greedy, pgm_rlxd")
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--K", type=int)
            g.add_argument("--K-range", dest="K_range", help="LO:HI[:STEP] or comma list")
            sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("validate", help="check the graph and configuration")
    common(sp, methods=False)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("solve", help="run the selected methods for each K")
    common(sp)
    sp.add_argument("--out", default="results.csv")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep-ratio", help="greedy vs relaxation ratio floor per K")
    common(sp)
    sp.add_argument("--out", default="ratio.csv")
    sp.set_defaults(func=cmd_sweep_ratio)

    sp = sub.add_parser("simulate", help="write an opinion trajectory for a given follower set")
    common(sp, methods=False)
    sp.add_argument("--members", required=True, help="comma-separated node labels")
    sp.add_argument("--steps", type=int, default=100)
    sp.add_argument("--out", default="trajectory.csv")
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, GraphError, FileNotFoundError, baselines.BudgetExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConvergenceError, SingularSystemError, convex.DivergenceError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
