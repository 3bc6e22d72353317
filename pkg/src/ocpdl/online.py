"""Online CP-dictionary learning.

Each minibatch ``X_t`` (shape ``I_1 x ... x I_n x b``) is coded against the
current dictionary, folded into the aggregates

    A_t = (1 - w_t) A_{t-1} + w_t C_t C_t^T
    B_t = (1 - w_t) B_{t-1} + w_t X_t x_{n+1} C_t^T

and the loading matrices are then updated one mode at a time against the
already-updated predecessors.  Only ``(A_t, B_t)`` and a scalar constant are
carried between steps unless diagnostic mode keeps the full history.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dict_update import FactorSettings, lindeberg_sweep, surrogate_g
from .sparse_coding import CodingSettings, loss
from .tensor_core import ShapeError, check_loadings, frob_norm, read_dtf, write_dtf

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    rank: int
    batch_size: int = 1
    lam: float = 0.0
    beta: float = 1.0
    balanced: bool = False
    T: int = 100
    seed: int = 0
    coding_tol: float = 1e-8
    coding_max_iters: int = 200
    c_max: float = math.inf
    ridge: float = 0.0
    factor_tol: float = 1e-8
    factor_max_iters: int = 100
    u_max: float = 1e6
    diagnostic: bool = False
    skip_aggregation: bool = False  # broken-on-purpose control, never for real runs

    def __post_init__(self):
        if self.rank < 1 or self.batch_size < 1 or self.T < 1:
            raise ValueError("rank, batch_size and T must be at least 1")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if not self.balanced:
            if not 0 < self.beta <= 1:
                raise ValueError("beta must lie in (0, 1]")
            if self.beta <= 0.75:
                log.warning("beta=%g is outside (3/4, 1]; convergence guarantees do not apply",
                            self.beta)

    @property
    def coding(self) -> CodingSettings:
        return CodingSettings(lam=self.lam, tol=self.coding_tol, max_iters=self.coding_max_iters,
                              c_max=self.c_max, ridge=self.ridge)

    @property
    def factor(self) -> FactorSettings:
        return FactorSettings(u_max=self.u_max, tol=self.factor_tol,
                              max_iters=self.factor_max_iters)


def weight(t: int, cfg: RunConfig) -> float:
    if t < 1:
        raise ValueError("t must be at least 1")
    if cfg.balanced:
        return 1.0 / t
    return float(t) ** (-cfg.beta)


@dataclass
class AggregateState:
    A: np.ndarray
    B: np.ndarray
    loadings: list
    t: int = 0
    const: float = 0.0      # weighted running sum of ||X_s||^2 + lam ||C_s||_1
    fhat: float = 0.0       # surrogate value at the current loadings
    max_batch_norm: float = 0.0
    # diagnostic mode only: (batch, code, weight coefficient) per past step
    history: list | None = None


@dataclass
class TraceRecord:
    t: int
    weight: float
    surrogate: float            # fhat_t(D_t)
    surrogate_pre: float        # fhat_t(D_{t-1}) from the recursion
    batch_loss: float           # loss(X_t, D_{t-1})
    displacement: float         # ||D_t - D_{t-1}||_F
    code_norm: float
    wall_seconds: float
    g_pre: float = 0.0
    g_post: float = 0.0
    growth_margin: float = 0.0  # sum_j lambda_min(A_bar_j) ||U_j - U_j'||_F^2
    batch_norm: float = 0.0
    A_norm: float = 0.0
    B_norm: float = 0.0
    empirical_loss: float | None = None
    batch_residual: float = 0.0  # ||X_t - cp_eval(D_{t-1}, C_t)||_F^2, no penalty term


def random_loadings(shape: Sequence[int], rank: int, rng) -> list:
    return [rng.uniform(0.0, 1.0, size=(d, rank)) for d in shape]


def init(cfg: RunConfig, shape: Sequence[int], loadings: Sequence[np.ndarray] | None = None,
         rng=None) -> AggregateState:
    """Zero aggregates and either the given loadings or seeded uniform[0, 1] draws."""
    shape = tuple(int(d) for d in shape)
    if loadings is None:
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        loadings = random_loadings(shape, cfg.rank, rng)
    else:
        loadings = [np.array(U, dtype=np.float64, copy=True) for U in loadings]
        R = check_loadings(loadings, shape)
        if R != cfg.rank:
            raise ShapeError(f"loadings have rank {R}, config says {cfg.rank}")
    R = cfg.rank
    return AggregateState(
        A=np.zeros((R, R)),
        B=np.zeros(shape + (R,)),
        loadings=loadings,
        history=[] if cfg.diagnostic else None,
    )


def _batch(batch, n):
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim == n:
        batch = batch[..., None]
    return batch


def step(state: AggregateState, batch: np.ndarray, cfg: RunConfig) -> tuple[AggregateState, TraceRecord]:
    """One coding / aggregation / dictionary-sweep iteration."""
    start = time.perf_counter()
    n = len(state.loadings)
    X = _batch(batch, n)
    if X.shape[:n] != state.B.shape[:n]:
        raise ShapeError(f"batch leading shape {X.shape[:n]} != {state.B.shape[:n]}")
    if np.any(X < 0):
        log.warning("minibatch has negative entries")
    t = state.t + 1
    w = weight(t, cfg)
    old = state.loadings

    batch_loss, C = loss(X, old, cfg.coding)
    A = (1.0 - w) * state.A + w * (C @ C.T)
    B = (1.0 - w) * state.B + w * np.tensordot(X, C, axes=([n], [1]))
    xx = float(np.sum(X * X))
    const = (1.0 - w) * state.const + w * (xx + cfg.lam * float(np.sum(C)))
    fhat_pre = (1.0 - w) * state.fhat + w * batch_loss

    g_pre = surrogate_g(A, B, old)
    new, used = lindeberg_sweep(A, B, old, cfg.factor, skip_aggregation=cfg.skip_aggregation)
    g_post = surrogate_g(A, B, new)
    fhat = g_post + const

    margin = 0.0
    sq = 0.0
    for U0, U1, agg in zip(old, new, used):
        d2 = float(np.sum((U1 - U0) ** 2))
        sq += d2
        margin += float(np.linalg.eigvalsh(agg.A_bar)[0]) * d2

    batch_norm = math.sqrt(xx)
    history = state.history
    if history is not None:
        history = [(Xs, Cs, coef * (1.0 - w)) for Xs, Cs, coef in history]
        history.append((X, C, w))

    new_state = AggregateState(A=A, B=B, loadings=new, t=t, const=const, fhat=fhat,
                               max_batch_norm=max(state.max_batch_norm, batch_norm),
                               history=history)
    rec = TraceRecord(
        t=t, weight=w, surrogate=fhat, surrogate_pre=fhat_pre, batch_loss=batch_loss,
        displacement=math.sqrt(sq), code_norm=frob_norm(C),
        wall_seconds=0.0, g_pre=g_pre, g_post=g_post, growth_margin=margin,
        batch_norm=batch_norm, A_norm=frob_norm(A), B_norm=frob_norm(B),
        batch_residual=max(batch_loss - cfg.lam * float(np.sum(C)), 0.0),
    )
    rec.wall_seconds = time.perf_counter() - start
    if history is not None:
        rec.empirical_loss = empirical_loss(history, new, cfg)
    return new_state, rec


def empirical_loss(history, loadings, cfg: RunConfig) -> float:
    """Weighted average of ``loss(X_s, loadings)`` over the stored history.

    Each batch is re-coded starting from the code it received when it
    arrived, so the re-coded loss never exceeds the one carried by the
    surrogate.
    """
    if history is None:
        raise RuntimeError("empirical loss needs diagnostic mode (stored history)")
    settings = dataclasses.replace(cfg.coding, warm_start=True)
    total = 0.0
    for Xs, Cs, coef in history:
        val, _ = loss(Xs, loadings, settings, C0=Cs)
        total += coef * val
    return total


def fit(stream: Iterable[np.ndarray], cfg: RunConfig,
        loadings: Sequence[np.ndarray] | None = None, callback=None):
    """Run up to ``cfg.T`` steps over ``stream``; returns ``(loadings, trace)``.

    ``callback(state, record)`` is invoked after every step when given.
    """
    state = None
    trace = []
    for X in stream:
        if state is not None and state.t >= cfg.T:
            break
        if state is None:
            X = np.asarray(X, dtype=np.float64)
            n = X.ndim - 1 if loadings is None else len(loadings)
            state = init(cfg, X.shape[:n], loadings)
        state, rec = step(state, X, cfg)
        trace.append(rec)
        if callback is not None:
            callback(state, rec)
    if state is None:
        raise ValueError("empty stream")
    return state.loadings, trace


def fit_state(stream, cfg, state: AggregateState, callback=None):
    """Continue a run from an existing state (e.g. a loaded checkpoint)."""
    trace = []
    for X in stream:
        if state.t >= cfg.T:
            break
        state, rec = step(state, X, cfg)
        trace.append(rec)
        if callback is not None:
            callback(state, rec)
    return state, trace


# -- checkpoints -------------------------------------------------------------


def save_checkpoint(directory, state: AggregateState, cfg: RunConfig) -> None:
    """DTF1 files for A, B and each U_j plus a ``manifest.txt`` of key=value lines."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_dtf(d / "A.dtf1", state.A)
    write_dtf(d / "B.dtf1", state.B)
    for j, U in enumerate(state.loadings):
        write_dtf(d / f"U{j + 1}.dtf1", U)
    fields = {
        "t": state.t,
        "n_modes": len(state.loadings),
        "beta": cfg.beta,
        "balanced": int(cfg.balanced),
        "lambda": cfg.lam,
        "R": cfg.rank,
        "b": cfg.batch_size,
        "seed": cfg.seed,
        "c_t": state.const,
        "fhat": state.fhat,
        "max_batch_norm": state.max_batch_norm,
    }
    lines = [f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in fields.items()]
    (d / "manifest.txt").write_text("\n".join(lines) + "\n")


def load_checkpoint(directory) -> tuple[AggregateState, dict]:
    d = Path(directory)
    manifest = {}
    for line in (d / "manifest.txt").read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            manifest[key.strip()] = value.strip()
    n = int(manifest["n_modes"])
    loadings = [read_dtf(d / f"U{j + 1}.dtf1") for j in range(n)]
    A = read_dtf(d / "A.dtf1")
    state = AggregateState(
        A=A, B=read_dtf(d / "B.dtf1"), loadings=loadings, t=int(manifest["t"]),
        const=float(manifest["c_t"]), fhat=float(manifest["fhat"]),
        max_batch_norm=float(manifest["max_batch_norm"]),
    )
    return state, manifest


__all__ = [
    "RunConfig", "AggregateState", "TraceRecord", "weight", "init", "step", "fit",
    "fit_state", "empirical_loss", "random_loadings", "save_checkpoint", "load_checkpoint",
]
