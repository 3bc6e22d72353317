"""Independent reference solvers used by several test modules."""
import itertools

import numpy as np

from ocpdl.tensor_core import unfold, vectorize


def dictionary_matrix(factors):
    """Materialized ``I_1...I_n x R`` atom matrix built column by column."""
    cols = []
    for r in range(factors[0].shape[1]):
        atom = factors[0][:, r]
        for U in factors[1:]:
            atom = np.multiply.outer(atom, U[:, r])
        cols.append(vectorize(atom))
    return np.stack(cols, axis=1)


def lasso_objective(W, x, c, lam):
    return float(np.sum((x - W @ c) ** 2) + lam * np.sum(np.abs(c)))


def active_set_code(W, x, lam):
    """Exact minimizer of ``||x - W c||^2 + lam ||c||_1`` over ``c >= 0`` by
    enumerating every support and keeping the best feasible stationary point."""
    R = W.shape[1]
    best_c, best = np.zeros(R), lasso_objective(W, x, np.zeros(R), lam)
    G, p = W.T @ W, W.T @ x
    for size in range(1, R + 1):
        for support in itertools.combinations(range(R), size):
            S = list(support)
            sol, *_ = np.linalg.lstsq(G[np.ix_(S, S)], p[S] - lam / 2.0, rcond=None)
            if np.any(sol < 0):
                continue
            c = np.zeros(R)
            c[S] = sol
            val = lasso_objective(W, x, c, lam)
            if val < best:
                best_c, best = c, val
    return best_c, best


def expanded_surrogate(A, B, factors, X, C):
    """``||X - cp_eval(U, C)||^2 - ||X||^2`` by direct reconstruction."""
    W = dictionary_matrix(factors)
    Xmat = unfold(X, X.ndim - 1).T
    return float(np.sum((Xmat - W @ C) ** 2) - np.sum(Xmat ** 2))
