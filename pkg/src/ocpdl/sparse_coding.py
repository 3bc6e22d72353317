"""Nonnegative sparse coding against a CP-dictionary.

Solves ``min_{C >= 0} ||X - cp_eval(U, C)||_F^2 + lam * sum(C)`` by projected
gradient descent with step ``1 / (2 tr(G))``, where ``G = W^T W`` is the Gram
matrix of the (never materialized) Khatri-Rao dictionary ``W``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .tensor_core import ShapeError, check_loadings, contract_atoms, gram_hadamard


class DegenerateDictionaryError(ValueError):
    """All atoms are zero, so the coding step size is undefined."""


@dataclass(frozen=True)
class CodingSettings:
    lam: float = 0.0
    tol: float = 1e-8
    max_iters: int = 200
    c_max: float = math.inf
    ridge: float = 0.0
    warm_start: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.c_max > 0:
            raise ValueError("c_max must be positive")


def code_gram(factors: Sequence[np.ndarray]) -> np.ndarray:
    """``W^T W = U_n^T U_n * ... * U_1^T U_1`` (Hadamard), R x R."""
    return gram_hadamard(factors)


def _as_batch(X: np.ndarray, factors: Sequence[np.ndarray]) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    n = len(factors)
    if X.ndim == n:
        X = X[..., None]
    if X.ndim != n + 1:
        raise ShapeError(f"expected a {n}- or {n + 1}-mode tensor, got {X.ndim} modes")
    check_loadings(factors, X.shape[:n])
    return X


def code_rhs(X: np.ndarray, factors: Sequence[np.ndarray]) -> np.ndarray:
    """``W^T unfold(X, n).T`` as an R x b matrix, computed by per-atom contractions.

    ``X`` may be a single n-mode tensor (b = 1) or a stack along mode n+1.
    """
    X = _as_batch(X, factors)
    return contract_atoms(X, factors)


def coding_objective(X, factors, C, lam) -> float:
    """``||X - cp_eval(U, C)||_F^2 + lam * ||C||_1`` evaluated through G and P."""
    X = _as_batch(X, factors)
    G = code_gram(factors)
    P = code_rhs(X, factors)
    return _objective_from_gram(float(np.sum(X * X)), G, P, C, lam)


def _objective_from_gram(xx, G, P, C, lam):
    val = xx - 2.0 * float(np.sum(P * C)) + float(np.sum(C * (G @ C))) + lam * float(np.sum(np.abs(C)))
    # roundoff can push an exact fit slightly below zero
    return max(val, 0.0)


def sparse_code(X: np.ndarray, factors: Sequence[np.ndarray],
                settings: CodingSettings = CodingSettings(),
                C0: np.ndarray | None = None) -> np.ndarray:
    """Nonnegative (optionally boxed) l1-regularized code of ``X``.

    Parameters
    ----------
    X : ndarray
        ``I_1 x ... x I_n`` tensor or ``I_1 x ... x I_n x b`` stack.
    factors : sequence of ndarray
        Loading matrices ``U_j`` of shape ``(I_j, R)``.
    settings : CodingSettings
    C0 : ndarray, optional
        Starting point, used only when ``settings.warm_start`` is set.

    Returns
    -------
    C : ndarray of shape (R, b)
    """
    X = _as_batch(X, factors)
    G = code_gram(factors)
    P = code_rhs(X, factors)
    return _solve(G, P, float(np.sum(X * X)), settings, C0)


def _solve(G, P, xx, settings, C0=None):
    R, b = P.shape
    if settings.ridge > 0:
        G = G + settings.ridge * np.eye(R)
    trace = float(np.trace(G))
    if trace <= 0.0:
        raise DegenerateDictionaryError("dictionary has no nonzero atom (tr(G) = 0)")
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(P))):
        raise FloatingPointError("non-finite dictionary or data")
    eta = 1.0 / (2.0 * trace)
    if settings.warm_start and C0 is not None:
        start = np.clip(np.asarray(C0, dtype=np.float64), 0.0, settings.c_max)
    else:
        start = np.zeros((R, b))
    C, _ = kernels.pgd_code(G, P, start, settings.lam, eta, settings.c_max,
                            settings.tol, settings.max_iters)
    if settings.warm_start and C0 is not None:
        # a poor warm start must not end above the zero code
        if _objective_from_gram(xx, G, P, C, settings.lam) > xx:
            C = np.zeros((R, b))
    return C


def loss(X: np.ndarray, factors: Sequence[np.ndarray],
         settings: CodingSettings = CodingSettings(),
         C0: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Coding loss and the code that attains it."""
    X = _as_batch(X, factors)
    G = code_gram(factors)
    P = code_rhs(X, factors)
    xx = float(np.sum(X * X))
    C = _solve(G, P, xx, settings, C0)
    return _objective_from_gram(xx, G, P, C, settings.lam), C
