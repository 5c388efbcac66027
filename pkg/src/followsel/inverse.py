"""Inverse of ``Y_S = L_beta + Gamma_S`` kept current under low-rank changes of ``S``.

Adding ``k`` to ``S`` is a rank-1 change ``alpha_k e_k e_k^T``; by Woodbury::

    P_{S+k} = P - P[:, k] P[k, :] / (1/alpha_k + P_kk)

Swapping ``t`` out and ``v`` in is the rank-2 analogue with the bordered 2x2 block
``[[P_tt - 1/alpha_t, P_tv], [P_vt, P_vv + 1/alpha_v]]``.

:class:`DenseInverse` stores ``P`` explicitly. :class:`ImplicitInverse` never forms
``P``: it keeps a base system solved by Jacobi sweeps plus the list of rank-1
corrections applied since, which is enough to produce any row, column or
diagonal entry of the current inverse.

When ``beta = 0`` the empty set gives a singular system. Both classes then
accept a *phantom* member, a node whose trust is present in the matrix but that
does not belong to the selection; the first real pick replaces it by a swap.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .objective import DEFAULT_TOL, Instance, LinearSystem, jacobi

REFRESH_EVERY = 50
TIE_RTOL = 1e-12


def pick_best(scores, cands, scale):
    """Index into ``cands`` of the largest score; near-ties go to the smallest id."""
    best = float(np.max(scores))
    tol = TIE_RTOL * (abs(scale) + abs(best))
    near = np.flatnonzero(scores >= best - tol)
    i = near[np.argmin(np.asarray(cands)[near])]
    return int(i)


class _InverseState:
    inst: Instance
    members: list
    phantom: int | None
    u: np.ndarray
    w: np.ndarray
    J: float

    def _active(self):
        act = list(self.members)
        if self.phantom is not None:
            act.append(self.phantom)
        return act

    @property
    def alpha_inv(self):
        return self._alpha_inv

    def add_scores(self, cands) -> np.ndarray:
        """``J(S) - J(S + v)`` for each candidate ``v``."""
        cands = np.asarray(cands, dtype=np.int64)
        return self.u[cands] * self.w[cands] / (self._alpha_inv[cands] + self.diag(cands))

    def removal_scores(self, nodes) -> np.ndarray:
        """``J(S - x) - J(S)`` for members ``x`` (``inf`` when the result is singular)."""
        nodes = np.asarray(nodes, dtype=np.int64)
        den = self._alpha_inv[nodes] - self.diag(nodes)
        with np.errstate(divide="ignore"):
            out = self.u[nodes] * self.w[nodes] / den
        out[den <= 0] = np.inf
        return out

    def best_add(self, cands):
        cands = np.asarray(cands, dtype=np.int64)
        scores = self.add_scores(cands)
        i = pick_best(scores, cands, self.J)
        return int(cands[i]), float(scores[i])

    def best_swap(self, t, cands):
        cands = np.asarray(cands, dtype=np.int64)
        scores = self.swap_scores(t, cands)
        i = pick_best(scores, cands, self.J)
        return int(cands[i]), float(scores[i])

    def drop_phantom_for(self, v):
        """Make ``v`` the first real member, replacing the phantom."""
        a = self.phantom
        if a is None:
            raise RuntimeError("no phantom member")
        self.phantom = None
        if v == a:
            self.members.append(int(a))
        else:
            self.members.append(int(a))
            self.swap(a, v)


class DenseInverse(_InverseState):
    """Explicit ``P = (L_beta + Gamma_S)^{-1}`` with Woodbury updates."""

    def __init__(self, inst: Instance, members=(), phantom=None, refresh_every=REFRESH_EVERY,
                 kernel_backend=None):
        self.inst = inst
        self.members = [int(v) for v in members]
        self.phantom = None if phantom is None else int(phantom)
        self.refresh_every = refresh_every
        self._alpha_inv = inst.alpha_inv
        self._rank1 = kernels.get("rank1_update", kernel_backend)
        self._rank2 = kernels.get("rank2_update", kernel_backend)
        self._swap_scores = kernels.get("swap_scores", kernel_backend)
        self.n_updates = 0
        self.total_updates = 0
        self.refresh()

    def fresh_inverse(self) -> np.ndarray:
        d = np.zeros(self.inst.n)
        act = self._active()
        d[act] = self.inst.alpha[act]
        return LinearSystem(self.inst, d, "dense").inverse()

    def refresh(self):
        self.P = np.ascontiguousarray(self.fresh_inverse())
        self.u = self.P.T @ self.inst.b
        self.w = self.P @ self.inst.c
        self.J = float(self.inst.b @ self.w)
        self.n_updates = 0

    def _tick(self):
        self.n_updates += 1
        self.total_updates += 1
        if self.refresh_every and self.n_updates >= self.refresh_every:
            self.refresh()

    def diag(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return self.P[idx, idx]

    def col(self, k):
        return self.P[:, k].copy()

    def row(self, k):
        return self.P[k, :].copy()

    def _modify(self, k, den):
        x, z = self.col(k), self.row(k)
        uk, wk = self.u[k], self.w[k]
        self._rank1(self.P, x, z, 1.0 / den)
        self.u = self.u - z * (uk / den)
        self.w = self.w - x * (wk / den)
        self.J -= uk * wk / den

    def add(self, k):
        k = int(k)
        self._modify(k, self._alpha_inv[k] + self.P[k, k])
        self.members.append(k)
        self._tick()

    def remove(self, t):
        t = int(t)
        self._modify(t, self.P[t, t] - self._alpha_inv[t])
        self.members.remove(t)
        self._tick()

    def swap_scores(self, t, cands) -> np.ndarray:
        cands = np.ascontiguousarray(cands, dtype=np.int64)
        return self._swap_scores(self.P, int(t), float(self._alpha_inv[t]), cands,
                                 self._alpha_inv, self.u, self.w)

    def swap(self, t, v):
        """Replace member ``t`` by ``v`` with one rank-2 update."""
        t, v = int(t), int(v)
        P = self.P
        B = np.array([[P[t, t] - self._alpha_inv[t], P[t, v]],
                      [P[v, t], P[v, v] + self._alpha_inv[v]]])
        Minv = np.linalg.inv(B)
        ct, cv, rt, rv = self.col(t), self.col(v), self.row(t), self.row(v)
        ub = np.array([self.u[t], self.u[v]])
        wb = np.array([self.w[t], self.w[v]])
        ru = ub @ Minv
        qw = Minv @ wb
        self._rank2(P, ct, cv, rt, rv, Minv[0, 0], Minv[0, 1], Minv[1, 0], Minv[1, 1])
        self.u = self.u - ru[0] * rt - ru[1] * rv
        self.w = self.w - qw[0] * ct - qw[1] * cv
        self.J -= float(ub @ qw)
        self.members[self.members.index(t)] = v
        self._tick()

    def drift(self) -> float:
        """Largest elementwise gap between the cached and a freshly computed inverse."""
        return float(np.max(np.abs(self.P - self.fresh_inverse())))


class ImplicitInverse(_InverseState):
    """Matrix-free inverse: Jacobi solves against a fixed base plus stored corrections."""

    def __init__(self, inst: Instance, members=(), phantom=None, tol=DEFAULT_TOL, max_iter=None):
        self.inst = inst
        self.members = [int(v) for v in members]
        self.phantom = None if phantom is None else int(phantom)
        self.tol = tol
        self.max_iter = max_iter or 100_000
        self._alpha_inv = inst.alpha_inv
        act = self._active()
        d = np.zeros(inst.n)
        d[act] = inst.alpha[act]
        # validates nonsingularity without factorizing
        LinearSystem(inst, d, "iterative")
        self._base_diag = inst.base_diag() + d
        self._diag_cache = {}
        self._X, self._Z, self._den = [], [], []
        self.n_solves = 0
        self.u = self._solve(inst.b, transpose=True)
        self.w = self._solve(inst.c)
        self.J = float(inst.b @ self.w)

    def _solve(self, rhs, transpose=False):
        self.n_solves += 1
        return jacobi(self.inst.net, self._base_diag, rhs, transpose, self.tol, self.max_iter)

    def _unit(self, k):
        e = np.zeros(self.inst.n)
        e[k] = 1.0
        return e

    def _base_col(self, k):
        x = self._solve(self._unit(k))
        self._diag_cache[int(k)] = x[k]
        return x

    def _base_row(self, k):
        z = self._solve(self._unit(k), transpose=True)
        self._diag_cache[int(k)] = z[k]
        return z

    def col(self, k):
        x = self._base_col(k)
        for X, Z, den in zip(self._X, self._Z, self._den):
            x -= X * (Z[k] / den)
        return x

    def row(self, k):
        z = self._base_row(k)
        for X, Z, den in zip(self._X, self._Z, self._den):
            z -= Z * (X[k] / den)
        return z

    def is_cached(self, k) -> bool:
        return int(k) in self._diag_cache

    def diag(self, idx):
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        out = np.empty(idx.size)
        for j, k in enumerate(idx):
            k = int(k)
            if k not in self._diag_cache:
                self._base_col(k)
            out[j] = self._diag_cache[k]
        for X, Z, den in zip(self._X, self._Z, self._den):
            out -= X[idx] * Z[idx] / den
        return out

    def _modify(self, k, alpha_inv_signed):
        x, z = self.col(k), self.row(k)
        den = alpha_inv_signed + x[k]
        uk, wk = self.u[k], self.w[k]
        self._X.append(x)
        self._Z.append(z)
        self._den.append(den)
        self.u = self.u - z * (uk / den)
        self.w = self.w - x * (wk / den)
        self.J -= uk * wk / den

    def add(self, k):
        k = int(k)
        self._modify(k, self._alpha_inv[k])
        self.members.append(k)

    def remove(self, t):
        t = int(t)
        self._modify(t, -self._alpha_inv[t])
        self.members.remove(t)

    def swap(self, t, v):
        # add first so every intermediate system stays nonsingular
        t, v = int(t), int(v)
        self._modify(v, self._alpha_inv[v])
        self._modify(t, -self._alpha_inv[t])
        self.members[self.members.index(t)] = v

    def swap_scores(self, t, cands) -> np.ndarray:
        cands = np.asarray(cands, dtype=np.int64)
        ct, rt = self.col(t), self.row(t)
        a = ct[t] - self._alpha_inv[t]
        d = self.diag(cands) + self._alpha_inv[cands]
        ptv, pvt = rt[cands], ct[cands]
        det = a * d - ptv * pvt
        ut, wt = self.u[t], self.w[t]
        uv, wv = self.u[cands], self.w[cands]
        return (ut * d * wt - ut * ptv * wv - uv * pvt * wt + uv * a * wv) / det

    def best_add(self, cands):
        """Exact arg-max of the add score, solving only for candidates that can still win.

        ``P_vv >= 1 / Y_vv`` for the inverse of an M-matrix, which bounds every
        unsolved candidate's score from above.
        """
        cands = np.asarray(cands, dtype=np.int64)
        uw = self.u[cands] * self.w[cands]
        ainv = self._alpha_inv[cands]
        cached = np.array([self.is_cached(v) for v in cands], dtype=bool)
        scores = np.full(cands.size, -np.inf)
        if cached.any():
            scores[cached] = uw[cached] / (ainv[cached] + self.diag(cands[cached]))
        ydiag = self.inst.base_diag()[cands]
        upper = uw / (ainv + 1.0 / ydiag)
        order = np.flatnonzero(~cached)
        order = order[np.lexsort((cands[order], -upper[order]))]
        best = scores.max() if cached.any() else -np.inf
        for i in order:
            if np.isfinite(best) and upper[i] < best - TIE_RTOL * (abs(self.J) + abs(best)):
                break
            scores[i] = uw[i] / (ainv[i] + self.diag([cands[i]])[0])
            best = max(best, scores[i])
        i = pick_best(scores, cands, self.J)
        return int(cands[i]), float(scores[i])


def make_state(inst: Instance, backend="auto", members=(), phantom=None, **kw):
    if inst.backend(backend) == "dense":
        return DenseInverse(inst, members, phantom, **kw)
    return ImplicitInverse(inst, members, phantom, **kw)
