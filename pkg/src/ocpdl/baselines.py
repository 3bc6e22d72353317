"""Offline nonnegative CP baselines: ALS, multiplicative updates, and the
last-mode refit used to score subsampled online runs on the full tensor."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dict_update import FactorSettings, IntermediateAggregates, update_factor
from .sparse_coding import CodingSettings, sparse_code
from .tensor_core import check_loadings, gram_hadamard, mttkrp, ShapeError

MU_EPS = 1e-12


@dataclass(frozen=True)
class SweepSettings:
    u_max: float = 1e6
    inner_tol: float = 1e-8
    inner_max_iters: int = 100
    mu_eps: float = MU_EPS


def cp_objective(X: np.ndarray, factors: Sequence[np.ndarray]) -> float:
    """``||X - cp_out(U) summed over atoms||_F^2`` from Grams and one MTTKRP."""
    X = np.asarray(X, dtype=np.float64)
    check_loadings(factors, X.shape)
    G = gram_hadamard(factors)
    M = mttkrp(X, factors, 0)
    val = float(np.sum(X * X)) - 2.0 * float(np.sum(M * factors[0])) + float(np.sum(G))
    return max(val, 0.0)


def cp_full(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Sum of the rank-1 atoms, i.e. the reconstructed n-mode tensor."""
    letters = "abcdefghijklmnopqrstuvw"[: len(factors)]
    spec = ",".join(f"{c}z" for c in letters) + "->" + letters
    return np.einsum(spec, *factors, optimize=True)


def als_sweep(X: np.ndarray, factors: Sequence[np.ndarray],
              settings: SweepSettings = SweepSettings()) -> list:
    """One pass of nonnegative ALS; each factor's subproblem reuses ``update_factor``."""
    X = np.asarray(X, dtype=np.float64)
    check_loadings(factors, X.shape)
    current = [np.array(U, dtype=np.float64, copy=True) for U in factors]
    fs = FactorSettings(u_max=settings.u_max, tol=settings.inner_tol,
                        max_iters=settings.inner_max_iters)
    for j in range(len(current)):
        agg = IntermediateAggregates(gram_hadamard(current, skip=j), mttkrp(X, current, j), j)
        current[j] = update_factor(current[j], agg, fs)
    return current


def mu_sweep(X: np.ndarray, factors: Sequence[np.ndarray],
             settings: SweepSettings = SweepSettings()) -> list:
    """One pass of multiplicative updates ``U <- U * M / (U A + eps)``."""
    X = np.asarray(X, dtype=np.float64)
    check_loadings(factors, X.shape)
    current = [np.array(U, dtype=np.float64, copy=True) for U in factors]
    for j in range(len(current)):
        A = gram_hadamard(current, skip=j)
        M = mttkrp(X, current, j)
        current[j] = current[j] * M / (current[j] @ A + settings.mu_eps)
    return current


def refit_last_mode(X_full: np.ndarray, partial: Sequence[np.ndarray], lam: float = 0.0,
                    settings: CodingSettings | None = None) -> list:
    """Recompute the last loading matrix by coding every last-mode slice of
    ``X_full`` against ``cp_out(partial)``; returns ``[*partial, U_n]``."""
    X_full = np.asarray(X_full, dtype=np.float64)
    n = len(partial) + 1
    if X_full.ndim != n:
        raise ShapeError(f"expected a {n}-mode tensor, got {X_full.ndim} modes")
    if settings is None:
        settings = CodingSettings(lam=lam)
    C = sparse_code(X_full, partial, settings)
    return [np.array(U, dtype=np.float64, copy=True) for U in partial] + [C.T.copy()]
