"""Continuous relaxations solved by projected gradient descent.

Two problems share the solver:

* the relaxation ``min f(y)`` over ``{y in [0,1]^N : sum(y) <= K}`` whose optimum
  lower-bounds every selection of size ``K``;
* the l1-penalized problem ``min f(y) + gamma * sum(y)`` over the box, whose
  rounded solutions give upper bounds.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .objective import (
    Instance,
    SingularSystemError,
    eval_J,
    lambda_min_hessian,
    lipschitz_Lf,
    value_and_grad,
)

log = logging.getLogger(__name__)

SPARSITY_THRESHOLD = 0.01


class DivergenceError(ArithmeticError):
    pass


@dataclass
class PgmConfig:
    """Settings for :func:`pgm_solve`.

    ``step_mode`` is ``"constant"`` (step ``1/L_f``, needs ``beta != 0``) or
    ``"armijo"`` (backtracking along the projection arc). ``feasible_set`` is
    ``"box"`` or ``"capped"`` (box intersected with ``sum(y) <= K``).
    """

    step_mode: str = "armijo"
    armijo_c1: float = 1e-4
    armijo_shrink: float = 0.5
    tol_grad_map: float = 1e-8
    max_iters: int = 10_000
    rel_cost_tol: float = 0.0
    gamma: float = 0.0
    feasible_set: str = "capped"
    backend: str = "auto"
    track_curvature: bool = False

    def __post_init__(self):
        if self.step_mode not in ("constant", "armijo"):
            raise ValueError("step_mode must be 'constant' or 'armijo'")
        if self.feasible_set not in ("box", "capped"):
            raise ValueError("feasible_set must be 'box' or 'capped'")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if not 0 < self.armijo_shrink < 1:
            raise ValueError("armijo_shrink must lie in (0, 1)")


@dataclass
class RelaxReport:
    y_star: np.ndarray
    f_star: float
    g_star: float
    dual_bound: float
    rounded_set: tuple
    f_rounded: float
    iters: int
    converged: bool
    history: list = field(default_factory=list, repr=False)
    rate_estimate: float | None = None
    solver: str = "pgm"


def project_box(y) -> np.ndarray:
    return np.clip(np.asarray(y, dtype=np.float64), 0.0, 1.0)


def project_box_capped_simplex(y, K, tol=1e-12, max_iter=200) -> np.ndarray:
    """Euclidean projection onto ``{z in [0,1]^N : sum(z) <= K}``.

    If the clamped point already satisfies the cap it is the answer; otherwise
    the multiplier ``lam`` of the cap solves ``sum(clip(y - lam, 0, 1)) = K`` and
    is found by bisection.
    """
    y = np.asarray(y, dtype=np.float64)
    if K < 0:
        raise ValueError("K must be nonnegative")
    z = np.clip(y, 0.0, 1.0)
    if z.sum() <= K:
        return z
    lo, hi = 0.0, float(np.max(y))
    for _ in range(max_iter):
        lam = 0.5 * (lo + hi)
        s = np.clip(y - lam, 0.0, 1.0).sum()
        if abs(s - K) <= tol:
            break
        if s > K:
            lo = lam
        else:
            hi = lam
    return np.clip(y - lam, 0.0, 1.0)


def round_topK(y, K, warn=True) -> tuple:
    """Indices of the ``K`` largest positive entries (ties to the smaller id)."""
    y = np.asarray(y, dtype=np.float64)
    order = np.lexsort((np.arange(y.size), -y))
    picked = [int(i) for i in order[:K] if y[i] > 0]
    if not picked and warn:
        log.warning("rounding an all-zero point gives the empty set")
    return tuple(sorted(picked))


def _project(cfg: PgmConfig, K):
    if cfg.feasible_set == "box":
        return project_box
    return lambda y: project_box_capped_simplex(y, K)


def _linear_min(cfg: PgmConfig, g, K) -> float:
    """``min_z g^T z`` over the feasible set (used for the duality-gap bound)."""
    neg = np.minimum(g, 0.0)
    if cfg.feasible_set == "box":
        return float(neg.sum())
    return float(np.sort(neg)[: int(math.floor(K))].sum())


def _default_y0(inst: Instance, cfg: PgmConfig):
    if cfg.feasible_set == "capped":
        return np.full(inst.n, min(inst.K / inst.n, 1.0))
    return np.ones(inst.n)


def pgm_solve(inst: Instance, cfg: PgmConfig | None = None, y0=None, round_K=None) -> RelaxReport:
    """Projected gradient iteration ``y <- Proj[y - mu (grad f(y) + gamma 1)]``.

    The returned ``dual_bound`` is ``g(y) + min_z grad g(y)^T (z - y)``, a certified
    lower bound on the optimal value by convexity. ``round_K`` (default ``K``)
    sets how many entries the rounding keeps; 0 skips rounding.
    """
    cfg = cfg or PgmConfig()
    K = inst.K
    proj = _project(cfg, K)
    y = _default_y0(inst, cfg) if y0 is None else np.asarray(y0, dtype=np.float64).copy()
    if np.max(np.abs(proj(y) - y)) > 1e-12:
        raise ValueError("y0 is not feasible")
    gamma = cfg.gamma
    Lf = lipschitz_Lf(inst)[0] if (cfg.step_mode == "constant" or inst.has_beta) else math.inf
    if cfg.step_mode == "constant" and not math.isfinite(Lf):
        raise ValueError("constant steps need a finite Lipschitz constant (beta != 0); use armijo")

    def evaluate(z):
        try:
            f, g = value_and_grad(inst, z, cfg.backend)
        except SingularSystemError:
            return math.inf, None
        return f + gamma * z.sum(), g + gamma

    g_val, grad = evaluate(y)
    if not math.isfinite(g_val):
        raise ValueError("objective is infinite at y0 (beta = 0 needs y0 * alpha != 0)")
    mu = 1.0 / Lf if math.isfinite(Lf) and Lf > 0 else 1.0 / max(np.max(np.abs(grad)), 1e-12)
    history = [g_val]
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        if cfg.step_mode == "constant":
            y_new = proj(y - mu * grad)
            g_new, grad_new = evaluate(y_new)
        else:
            mu = mu / cfg.armijo_shrink
            while True:
                y_new = proj(y - mu * grad)
                if float(np.max(np.abs(y_new - y))) <= cfg.tol_grad_map:
                    g_new, grad_new = g_val, grad
                    break
                g_new, grad_new = evaluate(y_new)
                slack = 4 * np.finfo(float).eps * abs(g_val)
                if math.isfinite(g_new) and g_new <= g_val + cfg.armijo_c1 * float(grad @ (y_new - y)) + slack:
                    break
                mu *= cfg.armijo_shrink
                if mu < 1e-300:
                    raise DivergenceError(f"Armijo backtracking collapsed at iteration {it}")
        if not math.isfinite(g_new) or np.any(~np.isfinite(y_new)):
            raise DivergenceError(f"iterate {it} is not finite: g={g_new}, |y|={np.linalg.norm(y_new)}")
        step = float(np.max(np.abs(y_new - y)))
        rel = abs(g_new - g_val) <= cfg.rel_cost_tol * abs(g_new)
        y, g_val, grad = y_new, g_new, grad_new
        history.append(g_val)
        if step <= cfg.tol_grad_map or (cfg.rel_cost_tol > 0 and rel):
            converged = True
            break
    f_val = g_val - gamma * y.sum()
    dual = g_val + _linear_min(cfg, grad, K) - float(grad @ y)
    rk = K if round_K is None else round_K
    rounded = round_topK(y, rk) if rk else ()
    f_round = eval_J(inst, rounded, cfg.backend) if rk else math.nan
    rate = None
    if cfg.track_curvature and math.isfinite(Lf) and inst.n <= inst.dense_threshold:
        lam = lambda_min_hessian(inst, y)
        if lam > 0:
            rate = math.sqrt(max(1.0 - lam / Lf, 0.0))
    return RelaxReport(y, f_val, g_val, dual, rounded, f_round, it, converged, history, rate)


@dataclass
class GammaSweepResult:
    gamma: float
    selection: tuple
    J: float
    gamma_bar: float | None
    cards: list
    reports: list = field(default_factory=list, repr=False)
    warning: str | None = None


def default_gamma_grid(inst: Instance, points=16, backend="auto"):
    # at y = 0 the gradient is steepest, so gamma = |grad f(0)|_inf already forces y* = 0
    y0 = np.zeros(inst.n) if inst.has_beta else np.full(inst.n, min(inst.K / inst.n, 1.0))
    _, g = value_and_grad(inst, y0, backend)
    scale = float(np.max(np.abs(g)))
    return list(scale * np.logspace(-4, 0, points))


@dataclass
class GammaPath:
    """Solutions of the l1-penalized problem along a grid of ``gamma``.

    The path does not depend on the budget, so one path serves every ``K``.
    """

    grid: list
    reports: list
    cards: list


def solve_gamma_path(inst: Instance, grid=None, cfg: PgmConfig | None = None) -> GammaPath:
    base = cfg or PgmConfig(rel_cost_tol=1e-10)
    grid = sorted(default_gamma_grid(inst, backend=base.backend) if grid is None else grid)
    if not grid or any(g < 0 for g in grid):
        raise ValueError("gamma grid must be nonempty and nonnegative")
    reports, cards = [], []
    y0 = None
    # largest gamma first: each solution warm-starts the next, sparser to denser
    for gam in reversed(grid):
        c = PgmConfig(**{**base.__dict__, "gamma": float(gam), "feasible_set": "box"})
        rep = pgm_solve(inst, c, y0, round_K=0)
        reports.append(rep)
        cards.append(int(np.sum(rep.y_star > SPARSITY_THRESHOLD)))
        if np.any(rep.y_star * inst.alpha > 0) or inst.has_beta:
            y0 = rep.y_star
    reports.reverse()
    cards.reverse()
    if any(a < b for a, b in zip(cards, cards[1:])):
        log.info("support size is not monotone in gamma on this instance: %s", cards)
    return GammaPath(grid, reports, cards)


def select_from_path(inst: Instance, path: GammaPath, K: int | None = None, backend="auto") -> GammaSweepResult:
    K = inst.K if K is None else K
    grid, cards = path.grid, path.cards
    sparse_ok = [i for i, c in enumerate(cards) if c <= K]
    warning = None
    if sparse_ok:
        ibar = sparse_ok[0]
        gamma_bar = grid[ibar]
        pool = range(ibar + 1)
    else:
        gamma_bar = None
        pool = range(len(grid))
        warning = f"no gamma in the grid gives at most K={K} entries above {SPARSITY_THRESHOLD}"
        log.warning(warning)
    best = None
    for i in pool:
        sel = round_topK(path.reports[i].y_star, K, warn=False)
        J = eval_J(inst, sel, backend)
        if best is None or (J, grid[i]) < best[0]:
            best = ((J, grid[i]), i, sel)
    (J, gam), i, sel = best
    return GammaSweepResult(gam, sel, J, gamma_bar, cards, path.reports, warning)


def gamma_sweep(inst: Instance, grid=None, cfg: PgmConfig | None = None) -> GammaSweepResult:
    """Solve the l1-penalized problem over a grid of ``gamma`` and keep the best rounding.

    ``gamma_bar`` is the smallest grid value whose solution has at most ``K``
    entries above 0.01; only ``gamma <= gamma_bar`` compete for the final answer.
    """
    path = solve_gamma_path(inst, grid, cfg)
    return select_from_path(inst, path, inst.K, (cfg or PgmConfig()).backend)
