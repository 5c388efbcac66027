"""Greedy adding, greedy swapping, curvature and approximation certificates."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .inverse import DenseInverse, make_state, pick_best
from .objective import Instance, Selection, eval_J

log = logging.getLogger(__name__)

SWAP_EPS = 1e-12


@dataclass
class Pick:
    node: int
    delta: float
    J_after: float


@dataclass
class GreedyTrace:
    picks: list = field(default_factory=list)
    J_final: float = math.inf
    rank1_updates: int = 0

    @property
    def nodes(self):
        return [p.node for p in self.picks]


@dataclass
class SwapCycle:
    m: int
    members: tuple
    J: float
    swaps: int


@dataclass
class RatioCertificate:
    sigma: float
    R: float
    J_upper: float
    J_lower: float
    baseline: float
    J_global_lower: float
    baseline_node: int | None = None
    # with beta = 0 the ratio only bounds the best K-set that contains the
    # baseline node; J_lower then falls back to J(V_alpha)
    J_lower_anchored: float | None = None


def _anchor(inst: Instance):
    # any eligible node works; the first one keeps runs deterministic
    return None if inst.has_beta else int(inst.eligible[0])


def _first_pick_via_phantom(state, cands):
    """Score ``J({v})`` for every ``v`` against the phantom member and keep the best."""
    a = state.phantom
    others = cands[cands != a]
    scores = np.zeros(cands.size)
    if others.size:
        scores[cands != a] = state.swap_scores(a, others)
    i = pick_best(scores, cands, state.J)
    v = int(cands[i])
    state.drop_phantom_for(v)
    return v


def _add_step(state, inst):
    """One greedy addition. Returns ``(node, delta)`` or ``None`` when nothing improves."""
    cands = np.setdiff1d(inst.eligible, state.members, assume_unique=True)
    if cands.size == 0:
        return None
    if state.phantom is not None:
        v = _first_pick_via_phantom(state, cands)
        return v, math.inf
    v, delta = state.best_add(cands)
    if delta <= 0:
        return None
    state.add(v)
    return v, delta


def greedy_add(inst: Instance, backend="auto", callback=None, **state_kw):
    """Greedy Adding with rank-1 inverse updates.

    Each step adds the eligible node with the largest decrease
    ``b^T P[:, v] P[v, :] c / (1/alpha_v + P_vv)``. With ``beta = 0`` the
    first step compares ``J({v})`` directly since ``J(empty)`` is infinite.
    """
    state = make_state(inst, backend, (), _anchor(inst), **state_kw)
    trace = GreedyTrace()
    for _ in range(inst.K):
        step = _add_step(state, inst)
        if step is None:
            break
        v, delta = step
        trace.picks.append(Pick(v, delta, state.J))
        if callback is not None:
            callback(state)
    trace.J_final = state.J if trace.picks else eval_J(inst, ())
    trace.rank1_updates = getattr(state, "total_updates", len(trace.picks))
    sel = Selection(tuple(state.members), inst.n)
    if isinstance(state, DenseInverse):
        sel.cache = state.P
    return sel, trace


def greedy_swap(inst: Instance, K0=(), M=1, backend="dense", callback=None, **state_kw):
    """Greedy Swapping: ``M`` cycles revising each member in turn.

    In position ``i`` the member ``t_i`` is replaced by the eligible non-member
    giving the smallest objective, or kept if no swap lowers ``J`` by more than
    ``1e-12 J``. Positions beyond ``|K0|`` are filled by greedy additions, so
    ``K0 = ()`` with ``M = 1`` reproduces :func:`greedy_add`.
    """
    K0 = [int(v) for v in K0]
    if len(set(K0)) != len(K0):
        raise ValueError("initial set has duplicates")
    if len(K0) > inst.K:
        raise ValueError(f"initial set has {len(K0)} members, budget is {inst.K}")
    bad = [v for v in K0 if inst.alpha[v] <= 0]
    if bad:
        raise ValueError(f"initial set contains nodes outside V_alpha: {bad}")
    order = sorted(K0)
    state = make_state(inst, backend, order, _anchor(inst) if not order else None, **state_kw)
    cycles = []
    for m in range(1, M + 1):
        new, swaps = [], 0
        for i in range(inst.K):
            if i < len(order):
                t = order[i]
                cands = np.setdiff1d(inst.eligible, state.members, assume_unique=True)
                keep = True
                if cands.size:
                    v, delta = state.best_swap(t, cands)
                    if delta > SWAP_EPS * abs(state.J):
                        state.swap(t, v)
                        new.append(v)
                        swaps += 1
                        keep = False
                if keep:
                    new.append(t)
            else:
                step = _add_step(state, inst)
                if step is None:
                    break
                new.append(step[0])
            if callback is not None:
                callback(state)
        cycles.append(SwapCycle(m, tuple(new), state.J, swaps))
        fixed = set(new) == set(order)
        order = new
        if fixed:
            break
    sel = Selection(tuple(order), inst.n)
    return sel, cycles


def ratio_R(sigma: float, K: int) -> float:
    """``(1/sigma) (1 - (1 - sigma/K)^K)``, equal to 1 at ``sigma = 0`` and for ``K <= 1``."""
    if not 0.0 <= sigma <= 1.0:
        raise ValueError("curvature must lie in [0, 1]")
    if K <= 1 or sigma < 1e-15:
        return 1.0
    return -math.expm1(K * math.log1p(-sigma / K)) / sigma


@dataclass
class Curvature:
    sigma: float
    baseline: float
    baseline_node: int | None
    J_all: float


def curvature(inst: Instance, backend="auto") -> Curvature:
    """Curvature of the set function driving the greedy guarantee.

    With ``beta != 0``: ``1 - min_x [J(V_a - x) - J(V_a)] / [J(empty) - J({x})]``.
    With ``beta = 0`` the baseline is ``J({v*})`` for the best single node ``v*``
    and the minimum runs over ``x != v*`` with ``J({v*}) - J({v*, x})`` below.
    """
    E = inst.eligible
    full = make_state(inst, backend, E)
    J_all = full.J
    if inst.has_beta:
        empty = make_state(inst, backend)
        baseline = empty.J
        gain = empty.add_scores(E)
        loss = full.removal_scores(E)
        vstar = None
    else:
        single = make_state(inst, backend, (), _anchor(inst))
        vstar = _first_pick_via_phantom(single, E)
        baseline = single.J
        rest = E[E != vstar]
        if rest.size == 0:
            log.warning("|V_alpha| < 2: curvature undefined, using sigma = 0 (greedy is optimal)")
            return Curvature(0.0, baseline, vstar, J_all)
        gain = single.add_scores(rest)
        loss = full.removal_scores(rest)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(gain > 0, loss / gain, np.inf)
    sigma = 1.0 - float(np.min(ratio))
    return Curvature(min(max(sigma, 0.0), 1.0), baseline, vstar, J_all)


def curvature_sigma(inst: Instance, backend="auto") -> float:
    return curvature(inst, backend).sigma


def certify(inst: Instance, selection, backend="auto", curv: Curvature | None = None) -> RatioCertificate:
    """Lower bounds on the optimum from the greedy value and the curvature ratio.

    With ``beta != 0`` the ratio bound holds for the unconstrained optimum.
    With ``beta = 0`` it only holds among sets containing the best single node
    ``v*`` (the optimum may avoid ``v*``), so that value is reported as
    ``J_lower_anchored`` and ``J_lower`` is ``J(V_alpha)``.
    """
    members = tuple(selection)
    curv = curv or curvature(inst, backend)
    J_up = eval_J(inst, members, backend)
    R = ratio_R(curv.sigma, inst.K if inst.has_beta else inst.K - 1)
    J_ratio = min(curv.baseline - (curv.baseline - J_up) / R, J_up)
    if inst.has_beta:
        J_low, anchored = max(J_ratio, min(curv.J_all, J_up)), None
    else:
        J_low, anchored = min(curv.J_all, J_up), J_ratio
    return RatioCertificate(curv.sigma, R, J_up, J_low, curv.baseline, curv.J_all,
                            curv.baseline_node, anchored)