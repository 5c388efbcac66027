"""Pure numpy/scipy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np
import scipy.sparse as sp


def jacobi_solve(indptr, indices, data, diag, rhs, x0, tol, max_iter):
    n = diag.shape[0]
    W = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    scale = np.max(np.abs(rhs)) if n else 0.0
    if scale == 0.0:
        return np.zeros(n), 0, 0.0
    x = np.array(x0, dtype=np.float64, copy=True)
    it = 0
    while True:
        s = rhs + W @ x
        rmax = np.max(np.abs(s - diag * x))
        if rmax <= tol * scale or it >= max_iter:
            break
        x = s / diag
        it += 1
    return x, it, rmax / scale


def rank1_update(P, col, row, scale):
    P -= scale * np.outer(col, row)


def rank2_update(P, col_t, col_v, row_t, row_v, m00, m01, m10, m11):
    C = np.column_stack((col_t, col_v))
    R = np.vstack((row_t, row_v))
    P -= C @ np.array([[m00, m01], [m10, m11]]) @ R


def swap_scores(P, t, alpha_inv_t, cands, alpha_inv, u, w):
    a = P[t, t] - alpha_inv_t
    d = P[cands, cands] + alpha_inv[cands]
    ptv = P[t, cands]
    pvt = P[cands, t]
    det = a * d - ptv * pvt
    ut, wt = u[t], w[t]
    uv, wv = u[cands], w[cands]
    return (ut * d * wt - ut * ptv * wv - uv * pvt * wt + uv * a * wv) / det
