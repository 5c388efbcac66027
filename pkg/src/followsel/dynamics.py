"""Opinion dynamics with one or two leaders.

Agent ``i`` updates to a weighted average of its neighbours' opinions and, if
selected, the leader opinions ``T`` (trust ``alpha_i``) and ``Q`` (trust ``beta_i``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .objective import Instance


class AssumptionError(ValueError):
    """The leader has no selected follower with positive trust."""


@dataclass
class OpinionState:
    x: np.ndarray
    t: int = 0
    T: float = 1.0
    Q: float = 0.0


def _members_vector(n, S):
    if S is None:
        return np.zeros(n)
    S = np.asarray(S, dtype=np.float64)
    if S.shape == (n,):
        return S
    s = np.zeros(n)
    idx = [int(v) for v in np.atleast_1d(S)]
    s[idx] = 1.0
    return s


def step(state: OpinionState, inst: Instance, sK, sL=None) -> OpinionState:
    """One synchronous update of every agent.

    ``sK`` and ``sL`` are 0/1 selection vectors (or node lists) of the two leaders.
    """
    n = inst.n
    sK = _members_vector(n, sK)
    sL = _members_vector(n, sL)
    a = sK * inst.alpha
    bq = sL * inst.beta
    den = a + bq + inst.net.out_sum
    bad = np.flatnonzero(den <= 0)
    if bad.size:
        raise ZeroDivisionError(f"node {int(bad[0])} has no neighbours and no leader link")
    num = a * state.T + bq * state.Q + inst.net.W @ state.x
    return OpinionState(num / den, state.t + 1, state.T, state.Q)


def _check_assumption(inst: Instance, S):
    S = [int(v) for v in S]
    if not any(inst.alpha[v] > 0 for v in S):
        raise AssumptionError("no selected follower has positive trust in the leader (Assumption 2)")


@dataclass
class ConsensusResult:
    converged: bool
    steps: int
    x: np.ndarray
    rate: float
    errors: list = field(default_factory=list)


def _error_map(inst: Instance, S):
    """``xi -> A xi`` with ``A = diag(W 1 + alpha_S)^{-1} W``."""
    d = inst.net.out_sum + _members_vector(inst.n, S) * inst.alpha
    W = inst.net.W
    return lambda xi: (W @ xi) / d


def _tail_rate(errors, floor=1e-250):
    errs = [e for e in errors if e > floor]
    if len(errs) < 3:
        return math.nan
    k = max(2, len(errs) // 4)
    tail = errs[-k:]
    return (tail[-1] / tail[0]) ** (1.0 / (len(tail) - 1))


def simulate_to_consensus(inst: Instance, S, T, x0, tol=1e-10, max_steps=100_000,
                          trajectory=None) -> ConsensusResult:
    """Run the single-leader dynamics until ``max_i |x_i - T| <= tol``.

    ``rate`` is the geometric mean of ``|xi(t+1)|_inf / |xi(t)|_inf`` over the
    last quarter of the run. Pass a list as ``trajectory`` to collect every state.
    """
    _check_assumption(inst, S)
    sK = _members_vector(inst.n, S)
    state = OpinionState(np.asarray(x0, dtype=np.float64).copy(), 0, float(T), 0.0)
    errors = [float(np.max(np.abs(state.x - T)))]
    if trajectory is not None:
        trajectory.append(state.x.copy())
    converged = errors[0] <= tol
    while not converged and state.t < max_steps:
        state = step(state, inst, sK)
        errors.append(float(np.max(np.abs(state.x - T))))
        if trajectory is not None:
            trajectory.append(state.x.copy())
        converged = errors[-1] <= tol
    return ConsensusResult(converged, state.t, state.x, _tail_rate(errors), errors)


def empirical_total_error(inst: Instance, S, x0, horizon=None, T=1.0, tol=1e-12,
                          max_steps=1_000_000) -> float:
    """``sum_{t=1..horizon} b^T |xi(t)|`` for ``xi(t) = x(t) - T 1``.

    With ``horizon=None`` the sum runs until a geometric tail estimate built from
    the observed contraction rate falls below ``tol`` times the running total.
    """
    return total_error_with_horizon(inst, S, x0, horizon, T, tol, max_steps)[0]


def total_error_with_horizon(inst: Instance, S, x0, horizon=None, T=1.0, tol=1e-12,
                             max_steps=1_000_000):
    _check_assumption(inst, S)
    apply_A = _error_map(inst, S)
    xi = np.asarray(x0, dtype=np.float64) - T
    total = 0.0
    norms = [float(np.max(np.abs(xi)))]
    t = 0
    limit = max_steps if horizon is None else int(horizon)
    while t < limit:
        xi = apply_A(xi)
        t += 1
        total += float(inst.b @ np.abs(xi))
        nrm = float(np.max(np.abs(xi)))
        norms.append(nrm)
        if horizon is None:
            if nrm == 0.0:
                break
            if t >= 20:
                window = norms[-11:]
                if window[0] > 0:
                    rho = (window[-1] / window[0]) ** 0.1
                    if rho < 1.0 and nrm * rho / (1.0 - rho) <= tol * max(total, 1e-300):
                        break
    return total, t


def write_trajectory(path, trajectory, t0=0):
    """CSV with columns ``t, x_0, ..., x_{n-1}``."""
    rows = list(trajectory)
    n = len(rows[0]) if rows else 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(["t"] + [f"x_{i}" for i in range(n)])
        for k, x in enumerate(rows):
            writer.writerow([t0 + k] + [repr(float(v)) for v in x])


def steady_state(inst: Instance, S, T=0.0, Q=1.0) -> np.ndarray:
    """Two-leader limit ``(L_beta + diag(alpha_S))^{-1} (beta Q + alpha_S T)`` by a direct solve."""
    from .objective import LinearSystem

    a = _members_vector(inst.n, S) * inst.alpha
    sys_ = LinearSystem(inst, a)
    return sys_.solve(inst.beta * Q + a * T)
