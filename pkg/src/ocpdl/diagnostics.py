"""Invariant checks over an online run's trace.

Each check returns a :class:`CheckResult` with the worst-case margin (how far
the tightest step is from violating the inequality; negative means violated
beyond the allowed slack).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .online import TraceRecord


@dataclass
class CheckResult:
    name: str
    status: str          # "PASS", "FAIL" or "N/A"
    margin: float
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status != "FAIL"

    def line(self) -> str:
        return f"{self.status:<4}  {self.name:<22} worst margin {self.margin:+.3e}  {self.detail}".rstrip()


def _result(name, margin, detail=""):
    return CheckResult(name, "PASS" if margin >= 0 else "FAIL", float(margin), detail)


def surrogate_dominance(trace: Sequence[TraceRecord], slack: float = 1e-8) -> CheckResult:
    """fhat_t(D_t) >= f_t(D_t)."""
    if any(r.empirical_loss is None for r in trace):
        return CheckResult("surrogate_dominance", "N/A", float("nan"), "needs diagnostic mode")
    worst = min(r.surrogate - r.empirical_loss for r in trace)
    return _result("surrogate_dominance", worst + slack, f"min fhat-f = {worst:.3e}")


def forward_monotonicity(trace: Sequence[TraceRecord], slack: float = 1e-9) -> CheckResult:
    """fhat_t(D_{t-1}) >= fhat_t(D_t)."""
    worst = min(r.surrogate_pre - r.surrogate for r in trace)
    return _result("forward_monotonicity", worst + slack, f"min decrease = {worst:.3e}")


def second_order_growth(trace: Sequence[TraceRecord], slack: float = 1e-6) -> CheckResult:
    """g_t(D_{t-1}) - g_t(D_t) >= sum_j lambda_min(A_bar_j) ||U_j - U_j'||^2."""
    worst = min(r.g_pre - r.g_post - r.growth_margin for r in trace)
    return _result("second_order_growth", worst + slack, f"min excess = {worst:.3e}")


def one_step_bound(trace: Sequence[TraceRecord], slack: float = 1e-8) -> CheckResult:
    """fhat_{t+1}(D_{t+1}) - fhat_t(D_t) <= w_{t+1} (loss(X_{t+1}, D_t) - f_t(D_t))."""
    if len(trace) < 2:
        return CheckResult("one_step_bound", "N/A", float("nan"), "needs two steps")
    if any(r.empirical_loss is None for r in trace):
        return CheckResult("one_step_bound", "N/A", float("nan"), "needs diagnostic mode")
    worst = np.inf
    for prev, cur in zip(trace[:-1], trace[1:]):
        rhs = cur.weight * (cur.batch_loss - prev.empirical_loss)
        worst = min(worst, rhs - (cur.surrogate - prev.surrogate))
    return _result("one_step_bound", worst + slack, f"min slack = {worst:.3e}")


def aggregate_bounds(trace: Sequence[TraceRecord], lam: float, slack: float = 1e-9) -> CheckResult:
    """||A_t|| <= M^4 / lam^2 and ||B_t|| <= M^3 / lam, M the largest batch norm so far."""
    if lam <= 0:
        return CheckResult("aggregate_bounds", "N/A", float("nan"), "requires lambda > 0")
    M = 0.0
    worst = np.inf
    for r in trace:
        M = max(M, r.batch_norm)
        a_cap, b_cap = M ** 4 / lam ** 2, M ** 3 / lam
        worst = min(worst, (a_cap - r.A_norm) / max(a_cap, 1.0), (b_cap - r.B_norm) / max(b_cap, 1.0))
    return _result("aggregate_bounds", worst + slack, f"min relative headroom = {worst:.3e}")


def iterate_stability(trace: Sequence[TraceRecord], window: int = 50, ratio: float = 0.2) -> CheckResult:
    """Mean displacement over the last window <= ratio * mean over the first."""
    window = min(window, max(len(trace) // 4, 1))
    d = np.array([r.displacement for r in trace])
    first, last = d[:window].mean(), d[-window:].mean()
    if first == 0.0:
        return CheckResult("iterate_stability", "N/A", float("nan"), "no movement in first window")
    measured = last / first
    return _result("iterate_stability", ratio - measured, f"last/first = {measured:.3e} (window {window})")


def run_all(trace: Sequence[TraceRecord], lam: float) -> list:
    return [
        surrogate_dominance(trace),
        forward_monotonicity(trace),
        second_order_growth(trace),
        one_step_bound(trace),
        aggregate_bounds(trace, lam),
        iterate_stability(trace),
    ]
