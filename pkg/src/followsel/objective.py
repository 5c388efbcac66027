"""The influence cost ``J(S) = b^T (L_beta + diag(alpha_S))^{-1} c`` and its relaxation.

``L_beta = L + diag(beta)`` where ``L`` is the weighted Laplacian. The relaxed
cost ``f(y)`` replaces the indicator of ``S`` by ``y in [0, 1]^N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from . import kernels
from .graph import Network, require_valid

#: Trust level of a fully anchored follower. Only ``eval_J`` accepts it.
INFINITE_TRUST = math.inf

DENSE_THRESHOLD = 2000
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000

MODES = ("P1", "P2", "generic")


class SingularSystemError(ArithmeticError):
    """``L_beta + diag(alpha_S)`` is singular (``beta = 0`` and no selected trust)."""


class ConvergenceError(ArithmeticError):
    def __init__(self, msg, residual=None, iterations=None):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class Instance:
    """One selection problem on a fixed network."""

    net: Network
    alpha: np.ndarray
    beta: np.ndarray
    b: np.ndarray
    c: np.ndarray
    K: int = 1
    mode: str = "generic"
    dense_threshold: int = DENSE_THRESHOLD

    def __post_init__(self):
        n = self.net.n
        for name in ("alpha", "beta", "b", "c"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have length {n}, got shape {arr.shape}")
            if np.any(np.isnan(arr)) or np.any(arr < 0):
                raise ValueError(f"{name} must be nonnegative")
            if name != "alpha" and not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if int(self.K) < 1:
            raise ValueError("budget K must be at least 1")
        object.__setattr__(self, "K", int(self.K))
        if abs(self.b.sum() - 1.0) > 1e-9:
            raise ValueError(f"b must sum to 1 (sums to {self.b.sum():.12g})")
        if not np.any(self.c > 0):
            raise ValueError("c must have a positive entry")
        if not np.any(self.alpha > 0):
            raise ValueError("alpha has no positive entry; the eligible set V_alpha is empty")
        if self.mode == "P1" and np.any(self.beta != 0):
            raise ValueError("P1 instances have beta = 0")
        if self.mode == "P2":
            if not np.any(self.beta > 0):
                raise ValueError("P2 instances need a nonzero beta")
            if not np.array_equal(self.c, self.beta):
                raise ValueError("P2 instances have c = beta")
        require_valid(self.net)

    @classmethod
    def p1(cls, net, alpha, b, x0, T, K=1, **kw) -> "Instance":
        """Single-leader instance; ``c = |W (x0 - T 1)|`` with self-loops included in ``W``."""
        xi0 = np.asarray(x0, dtype=np.float64) - float(T)
        c = np.abs(net.W @ xi0)
        return cls(net, alpha, np.zeros(net.n), b, c, K, "P1", **kw)

    @classmethod
    def p2(cls, net, alpha, beta, b, K=1, **kw) -> "Instance":
        """Competing-leader instance with ``T = 0``, ``Q = 1`` and ``c = beta``."""
        beta = np.asarray(beta, dtype=np.float64)
        return cls(net, alpha, beta, b, beta.copy(), K, "P2", **kw)

    def with_budget(self, K: int) -> "Instance":
        return Instance(self.net, self.alpha, self.beta, self.b, self.c, K, self.mode,
                        self.dense_threshold)

    @property
    def n(self) -> int:
        return self.net.n

    @property
    def has_beta(self) -> bool:
        return bool(np.any(self.beta > 0))

    @property
    def eligible(self) -> np.ndarray:
        """Sorted ids of ``V_alpha = {i : alpha_i > 0}``."""
        return np.flatnonzero(self.alpha > 0)

    @property
    def alpha_inv(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1.0 / self.alpha

    def base_diag(self) -> np.ndarray:
        """Diagonal of ``L_beta``."""
        return self.net.lap_diag + self.beta

    def backend(self, requested: str = "auto") -> str:
        if requested == "auto":
            return "dense" if self.n <= self.dense_threshold else "iterative"
        if requested not in ("dense", "iterative"):
            raise ValueError(f"unknown backend {requested!r}")
        return requested


@dataclass
class Selection:
    """A follower set with its indicator vector and optional cached inverse."""

    members: tuple
    n: int
    cache: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.members = tuple(sorted(int(v) for v in self.members))

    @property
    def s(self) -> np.ndarray:
        s = np.zeros(self.n)
        s[list(self.members)] = 1.0
        return s

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


def indicator(n: int, S) -> np.ndarray:
    s = np.zeros(n)
    idx = list(S)
    if idx:
        s[idx] = 1.0
    return s


class LinearSystem:
    """``Y = L_beta + diag(d)`` with dense LU or Jacobi sweeps behind one interface."""

    def __init__(self, inst: Instance, d, backend="auto", tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
        d = np.asarray(d, dtype=np.float64)
        if not np.all(np.isfinite(d)):
            raise ValueError("infinite trust is not supported here")
        if not inst.has_beta and not np.any(d > 0):
            raise SingularSystemError(
                "L_beta + diag(alpha_S) is singular: beta = 0 and no selected node has positive trust"
            )
        self.inst = inst
        self.d = d
        self.diag = inst.base_diag() + d
        self.backend = inst.backend(backend)
        self.tol = tol
        self.max_iter = max_iter
        self._lu = None
        if self.backend == "dense":
            self._lu = la.lu_factor(self.dense(), check_finite=False)

    def dense(self) -> np.ndarray:
        Y = -self.inst.net.W_off.toarray()
        Y[np.diag_indices_from(Y)] += self.diag
        return Y

    def sparse(self) -> sp.csr_matrix:
        return (sp.diags(self.diag) - self.inst.net.W_off).tocsr()

    def solve(self, rhs, transpose=False, x0=None) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=np.float64)
        if self._lu is not None:
            return la.lu_solve(self._lu, rhs, trans=1 if transpose else 0, check_finite=False)
        return jacobi(self.inst.net, self.diag, rhs, transpose, self.tol, self.max_iter, x0)

    def inverse(self) -> np.ndarray:
        if self._lu is not None:
            return la.lu_solve(self._lu, np.eye(self.inst.n), check_finite=False)
        return np.linalg.inv(self.dense())


def jacobi(net: Network, diag, rhs, transpose=False, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, x0=None):
    """Fixed-point sweeps ``u <- D^{-1}(rhs - E u)`` with ``E = -W_off`` (or its transpose)."""
    M = net.W_off_T if transpose else net.W_off
    x0 = np.zeros(net.n) if x0 is None else np.ascontiguousarray(x0, dtype=np.float64)
    diag = np.ascontiguousarray(diag, dtype=np.float64)
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    x, iters, resid = kernels.jacobi_solve(M.indptr, M.indices, M.data, diag, rhs, x0,
                                           float(tol), int(max_iter))
    if resid > tol:
        raise ConvergenceError(
            f"fixed-point solve stalled after {iters} sweeps with relative residual {resid:.3e}; "
            "the system is close to singular (contraction coefficient near 1)",
            residual=resid, iterations=iters,
        )
    return x


def solve_Y(inst: Instance, y, rhs, transpose=False, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, x0=None):
    """Solve ``Y x = rhs`` (or ``Y^T x = rhs``) by Jacobi sweeps using only sparse products."""
    d = _relaxed_diag(inst, y)
    if not inst.has_beta and not np.any(d > 0):
        raise SingularSystemError("beta = 0 and y * alpha = 0: contraction coefficient is 1, no solution")
    return jacobi(inst.net, inst.base_diag() + d, rhs, transpose, tol, max_iter, x0)


def _relaxed_diag(inst: Instance, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (inst.n,):
        raise ValueError(f"y must have length {inst.n}")
    if np.any(y < -1e-12) or np.any(y > 1 + 1e-12):
        raise ValueError("y must lie in [0, 1]^N")
    if not np.all(np.isfinite(inst.alpha[y > 0])):
        raise ValueError("the relaxed objective does not accept infinite trust")
    with np.errstate(invalid="ignore"):
        d = np.where(y > 0, inst.alpha * y, 0.0)
    return d


def eval_J(inst: Instance, S, backend="auto", tol=DEFAULT_TOL) -> float:
    """``J(S)``; ``+inf`` when the system is singular and the instance is not P1."""
    S = sorted(set(int(v) for v in S))
    d = np.zeros(inst.n)
    d[S] = inst.alpha[S]
    anchored = np.isinf(d)
    if anchored.any():
        return _eval_J_anchored(inst, d, anchored)
    try:
        sys_ = LinearSystem(inst, d, backend, tol)
    except SingularSystemError:
        if inst.mode == "P1":
            raise
        return math.inf
    return float(inst.b @ sys_.solve(inst.c))


def _eval_J_anchored(inst: Instance, d, anchored) -> float:
    # fully anchored followers sit at the leader's opinion: their error is 0
    free = np.flatnonzero(~anchored)
    if free.size == 0:
        return 0.0
    Y = -inst.net.W_off.toarray()
    Y[np.diag_indices_from(Y)] += inst.base_diag() + np.where(anchored, 0.0, d)
    Yff = Y[np.ix_(free, free)]
    x = np.linalg.solve(Yff, inst.c[free])
    return float(inst.b[free] @ x)


@dataclass
class RelaxedPoint:
    """Fractional selection ``y`` with lazily filled objective and gradient."""

    y: np.ndarray
    f_val: Optional[float] = None
    grad: Optional[np.ndarray] = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        if np.any(self.y < -1e-12) or np.any(self.y > 1 + 1e-12):
            raise ValueError("y must lie in [0, 1]^N")

    def evaluate(self, inst: Instance, backend="auto") -> "RelaxedPoint":
        sys_ = LinearSystem(inst, _relaxed_diag(inst, self.y), backend)
        u = sys_.solve(inst.b, transpose=True)
        v = sys_.solve(inst.c, x0=None)
        self.f_val = float(inst.b @ v)
        self.grad = -u * inst.alpha * v
        return self


def _point(y):
    return y.y if isinstance(y, RelaxedPoint) else np.asarray(y, dtype=np.float64)


def eval_f(inst: Instance, y, backend="auto") -> float:
    sys_ = LinearSystem(inst, _relaxed_diag(inst, _point(y)), backend)
    return float(inst.b @ sys_.solve(inst.c))


def grad_f(inst: Instance, y, backend="auto") -> np.ndarray:
    """``-(Y^{-T} b) * alpha * (Y^{-1} c)``; every entry is nonpositive."""
    sys_ = LinearSystem(inst, _relaxed_diag(inst, _point(y)), backend)
    u = sys_.solve(inst.b, transpose=True)
    v = sys_.solve(inst.c)
    return -u * inst.alpha * v


def value_and_grad(inst: Instance, y, backend="auto"):
    sys_ = LinearSystem(inst, _relaxed_diag(inst, _point(y)), backend)
    u = sys_.solve(inst.b, transpose=True)
    v = sys_.solve(inst.c)
    return float(inst.b @ v), -u * inst.alpha * v


def hessian_f(inst: Instance, y) -> np.ndarray:
    """Dense Hessian ``H + H^T`` with ``H = diag(alpha*u) Y^{-1} diag(alpha*v)``."""
    sys_ = LinearSystem(inst, _relaxed_diag(inst, _point(y)), "dense")
    P = sys_.inverse()
    u = P.T @ inst.b
    v = P @ inst.c
    H = (inst.alpha * u)[:, None] * P * (inst.alpha * v)[None, :]
    return H + H.T


def lambda_min_hessian(inst: Instance, y) -> float:
    """Smallest Hessian eigenvalue at one point (not the global strong-convexity constant)."""
    return float(np.linalg.eigvalsh(hessian_f(inst, y))[0])


def lipschitz_Lf(inst: Instance, tol=1e-12, max_iter=10_000):
    """``(rho(H(0)), N * max_ij H(0)_ij)``; both ``inf`` when ``beta = 0``."""
    if not inst.has_beta:
        return math.inf, math.inf
    H = hessian_f(inst, np.zeros(inst.n))
    bound = inst.n * float(H.max())
    return power_iteration_sym(H, tol, max_iter), bound


def power_iteration_sym(H, tol=1e-12, max_iter=10_000) -> float:
    """Spectral radius of a symmetric nonnegative matrix.

    The iteration runs on ``H + tau I`` with ``tau`` the largest diagonal entry so
    that an eigenvalue ``-rho`` cannot stall it.
    """
    n = H.shape[0]
    tau = float(np.max(np.diag(H))) if n else 0.0
    x = np.ones(n) / math.sqrt(n)
    lam = 0.0
    for _ in range(max_iter):
        z = H @ x + tau * x
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return 0.0
        new = float(x @ z)
        x = z / nz
        if abs(new - lam) <= tol * max(abs(new), 1e-300):
            lam = new
            break
        lam = new
    return lam - tau
