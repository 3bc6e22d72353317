"""Pure-numpy versions of the inner loops in ``_kernels.pyx``."""
import numpy as np


def pgd_code(G, P, C0, lam, eta, cmax, tol, max_iters):
    """Projected gradient iterations for the nonnegative coding problem.

    Iterates ``C <- clip(C - eta * (2 G C - 2 P + lam), 0, cmax)`` until the
    Frobenius change is at most ``tol * (1 + ||C||_F)``.
    Returns ``(C, iterations)``.
    """
    C = np.array(C0, dtype=np.float64, copy=True)
    n_done = 0
    for it in range(max_iters):
        grad = 2.0 * (G @ C) - 2.0 * P + lam
        C_new = np.clip(C - eta * grad, 0.0, cmax)
        diff = np.sqrt(np.sum((C_new - C) ** 2))
        C = C_new
        n_done = it + 1
        if not np.isfinite(diff):
            raise FloatingPointError("non-finite values in coding iteration")
        if diff <= tol * (1.0 + np.sqrt(np.sum(C * C))):
            break
    return C, n_done


def cyclic_columns(U0, A, B, umax, tol, max_iters):
    """Cyclic column-wise projected gradient sweeps on ``tr(U A U^T) - 2 tr(B^T U)``.

    Column ``i`` moves by ``-(U A[:, i] - B[:, i]) / (A[i, i] + 1)``.
    """
    U = np.array(U0, dtype=np.float64, copy=True)
    R = U.shape[1]
    n_done = 0
    for sweep in range(max_iters):
        prev = U.copy()
        for i in range(R):
            g = U @ A[:, i] - B[:, i]
            U[:, i] = np.clip(U[:, i] - g / (A[i, i] + 1.0), 0.0, umax)
        diff = np.sqrt(np.sum((U - prev) ** 2))
        n_done = sweep + 1
        if not np.isfinite(diff):
            raise FloatingPointError("non-finite values in factor update")
        if diff <= tol * (1.0 + np.sqrt(np.sum(U * U))):
            break
    return U, n_done
