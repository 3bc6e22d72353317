"""Intermediate aggregation and the per-factor constrained quadratic update."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .tensor_core import ShapeError, check_loadings, gram_hadamard


@dataclass
class IntermediateAggregates:
    A_bar: np.ndarray  # R x R
    B_bar: np.ndarray  # I_j x R
    mode: int


@dataclass(frozen=True)
class FactorSettings:
    u_max: float = 1e6
    tol: float = 1e-8
    max_iters: int = 100


def _einsum_letters(n):
    if n > 23:
        raise ShapeError("too many modes")
    return "abcdefghijklmnopqrstuvw"[:n]


def slice_contract(B: np.ndarray, factors: Sequence[np.ndarray], skip: int | None = None) -> np.ndarray:
    """Contract each last-mode slice ``B(,r)`` with the r-th factor columns.

    Returns a length-R vector, or with ``skip=j`` the ``I_j x R`` matrix whose
    r-th column leaves mode j uncontracted.
    """
    n = len(factors)
    idx = _einsum_letters(n)
    terms, ops = [idx + "z"], [B]
    for k, U in enumerate(factors):
        if k != skip:
            terms.append(idx[k] + "z")
            ops.append(U)
    out = "z" if skip is None else idx[skip] + "z"
    return np.einsum(",".join(terms) + "->" + out, *ops, optimize=True)


def _check_aggregate_shapes(A, B, factors):
    R = check_loadings(factors, B.shape[:-1])
    if A.shape != (R, R) or B.shape[-1] != R:
        raise ShapeError(f"aggregates {A.shape}, {B.shape} do not match rank {R}")


def intermediate_aggregation(A: np.ndarray, B: np.ndarray, factors: Sequence[np.ndarray],
                             mode: int) -> IntermediateAggregates:
    """``A_bar = A * (Hadamard of U_k^T U_k, k != mode)`` and ``B_bar`` from the
    slice contractions of ``B`` over every mode except ``mode``."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    _check_aggregate_shapes(A, B, factors)
    if not 0 <= mode < len(factors):
        raise ShapeError(f"mode {mode} out of range")
    A_bar = A * gram_hadamard(factors, skip=mode)
    B_bar = slice_contract(B, factors, skip=mode)
    return IntermediateAggregates(A_bar, B_bar, mode)


def block_objective(U: np.ndarray, agg: IntermediateAggregates) -> float:
    """``tr(U A_bar U^T) - 2 tr(B_bar^T U)``."""
    return float(np.sum((U @ agg.A_bar) * U) - 2.0 * np.sum(agg.B_bar * U))


def update_factor(U: np.ndarray, agg: IntermediateAggregates,
                  settings: FactorSettings = FactorSettings()) -> np.ndarray:
    """Minimize the block quadratic over ``[0, u_max]`` by cyclic column steps.

    Each column moves by ``-(U A_bar[:, i] - B_bar[:, i]) / (A_bar[i, i] + 1)``
    and is clipped back into the box.  Every column step is a descent step, so
    the block objective never increases.
    """
    if not (np.all(np.isfinite(agg.A_bar)) and np.all(np.isfinite(agg.B_bar))):
        raise FloatingPointError("non-finite intermediate aggregates")
    if agg.B_bar.shape != U.shape:
        raise ShapeError(f"B_bar {agg.B_bar.shape} does not match factor {U.shape}")
    U_new, _ = kernels.cyclic_columns(U, agg.A_bar, agg.B_bar, settings.u_max,
                                      settings.tol, settings.max_iters)
    return U_new


def surrogate_g(A: np.ndarray, B: np.ndarray, factors: Sequence[np.ndarray]) -> float:
    """``tr(A G) - 2 sum_r <B(,r), atom_r>`` with ``G`` the Hadamard Gram product."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    _check_aggregate_shapes(A, B, factors)
    return float(np.sum(A * gram_hadamard(factors)) - 2.0 * np.sum(slice_contract(B, factors)))


def lindeberg_sweep(A, B, factors, settings: FactorSettings = FactorSettings(),
                    skip_aggregation: bool = False):
    """Update ``U_1, ..., U_n`` in order, each against the already-updated ones.

    Returns the new factors and, per mode, the aggregates used for its update.
    ``skip_aggregation`` replaces ``A_bar`` by ``A`` (ignores the other factors'
    Grams); it exists only as a deliberately broken control for diagnostics.
    """
    current = [np.array(U, dtype=np.float64, copy=True) for U in factors]
    used = []
    for j in range(len(current)):
        agg = intermediate_aggregation(A, B, current, j)
        if skip_aggregation:
            agg = IntermediateAggregates(np.array(A, dtype=np.float64), agg.B_bar, j)
        current[j] = update_factor(current[j], agg, settings)
        used.append(agg)
    return current, used
