"""
Performance and efficiency indicators.

This module records the per-step observables of a run and aggregates them
into the run-level indicators: volatility, volume, leverage, default
frequency, adjusted investor return, hypothetical manager profit, bank
losses, cost of capital and the log-return distribution.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from config.config import HISTOGRAM_BINS, MANAGEMENT_FEE, PERFORMANCE_FEE
from src.models import Scheme, SimParams, StepReport
from src.regulation import effective_interest_basle


class RunHistory:
    """Preallocated per-step arrays of one run, filled by record()."""

    def __init__(self, steps: int, num_funds: int):
        T, H = steps, num_funds
        self.n = 0
        self.num_funds = H
        self.price = np.zeros(T)
        self.log_return = np.zeros(T)
        self.sigma = np.zeros(T)
        self.lambda_adapt = np.zeros(T)
        self.bank_loss = np.zeros(T)
        self.unpaid_premium = np.zeros(T)
        self.shares_traded = np.zeros(T)
        self.defaults = np.zeros(T, dtype=int)
        self.shares = np.zeros((T, H))
        self.wealth = np.zeros((T, H))
        self.leverage = np.zeros((T, H))
        self.flow = np.zeros((T, H))
        self.cost = np.zeros((T, H))
        self.effective_rate = np.full((T, H), math.nan)
        self.active = np.zeros((T, H), dtype=bool)
        self.failed = np.zeros((T, H), dtype=bool)
        self.reborn = np.zeros((T, H), dtype=bool)

    def record(self, report: StepReport) -> None:
        k = self.n
        self.price[k] = report.price
        self.log_return[k] = report.log_return
        self.sigma[k] = report.sigma
        self.lambda_adapt[k] = report.lambda_adapt
        self.bank_loss[k] = report.bank_loss_this_step
        self.unpaid_premium[k] = report.unpaid_premium_this_step
        self.shares_traded[k] = report.shares_traded
        self.defaults[k] = report.defaults_this_step
        self.shares[k] = report.demand
        self.wealth[k] = report.wealth
        self.leverage[k] = report.leverage
        self.flow[k] = report.flow
        self.cost[k] = report.cost
        self.effective_rate[k] = report.effective_rate
        self.active[k] = report.active
        self.failed[k] = report.failed
        self.reborn[k] = report.reborn
        self.n += 1

    @classmethod
    def from_reports(cls, reports: Sequence[StepReport], num_funds: int) -> "RunHistory":
        history = cls(len(reports), num_funds)
        for report in reports:
            history.record(report)
        return history

    def to_frame(self, betas: Sequence[float]) -> pd.DataFrame:
        """Timeseries of price, volatility, cap and fund wealth."""
        n = self.n
        frame = pd.DataFrame({
            "t": np.arange(1, n + 1),
            "price": self.price[:n],
            "log_return": self.log_return[:n],
            "sigma": self.sigma[:n],
            "lambda_adapt": self.lambda_adapt[:n],
            "defaults": self.defaults[:n],
            "bank_loss": self.bank_loss[:n],
        })
        for h, beta in enumerate(betas):
            frame[f"wealth_beta{beta:g}"] = self.wealth[:n, h]
            frame[f"leverage_beta{beta:g}"] = self.leverage[:n, h]
        return frame


@dataclass(frozen=True)
class FundWindow:
    """Measurement window of one fund: from (re)birth or block start to failure or end."""

    start: int
    end: int
    w_start: float
    w_end: float
    total_flows: float
    total_expenses: float
    mean_aum: float
    failed: bool

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass
class RunMetrics:
    """Run-level indicators; rates are annualized with steps_per_year."""

    n_steps: int
    volatility_index: float
    avg_volume: float
    avg_leverage: float
    default_prob_annual: float
    default_prob_annual_mean: float
    r_adj: float
    r_adj_lifetime: float
    r_adj_survivors: float
    manager_profit: float
    bank_losses_annual: float
    bank_loss_total: float
    unpaid_premiums_annual: float
    effective_interest_annual: float
    return_skew: float
    return_excess_kurtosis: float
    default_prob_annual_by_fund: Tuple[float, ...] = ()
    histogram_edges: np.ndarray = field(default_factory=lambda: np.empty(0))
    histogram_probs: np.ndarray = field(default_factory=lambda: np.empty(0))

    def scalars(self) -> Dict[str, float]:
        """Scalar indicators keyed by field name, in declaration order."""
        values = asdict(self)
        for key in ("default_prob_annual_by_fund", "histogram_edges", "histogram_probs"):
            values.pop(key)
        return values


def _window(history: RunHistory, h: int, start: int, end: int, w_start: float,
            w_end: float, failed: bool) -> FundWindow:
    steps = slice(start + 1, end + 1)
    aum = np.abs(history.shares[steps, h]) * history.price[steps]
    return FundWindow(
        start=start,
        end=end,
        w_start=w_start,
        w_end=0.0 if failed else w_end,
        total_flows=float(history.flow[steps, h].sum()),
        total_expenses=float(-history.cost[steps, h].sum()),
        mean_aum=float(aum.mean()) if aum.size else 0.0,
        failed=failed,
    )


def fund_windows(history: RunHistory, h: int, W0: float,
                 block: Optional[int] = None) -> List[FundWindow]:
    """
    Split a fund's history into measurement windows.

    Windows open at t=0 and at each rebirth, and close at failure or at the
    end of the run. With block set, they are also cut at every block
    boundary, reopening with the wealth held at that boundary.

    Args:
        history: Recorded run
        h: Fund index
        W0: Initial wealth of a (re)born fund
        block: Optional block length in steps (a year of steps)

    Returns:
        Windows in chronological order
    """
    windows: List[FundWindow] = []
    start, w_start, is_open = -1, W0, True
    for k in range(history.n):
        if block and k > 0 and k % block == 0 and is_open:
            if k - 1 > start:
                windows.append(_window(history, h, start, k - 1, w_start,
                                       history.wealth[k - 1, h], False))
            start, w_start = k - 1, history.wealth[k - 1, h]
        if is_open and history.failed[k, h]:
            windows.append(_window(history, h, start, k, w_start, 0.0, True))
            is_open = False
        elif history.reborn[k, h]:
            start, w_start, is_open = k, W0, True
    last = history.n - 1
    if is_open and last > start:
        windows.append(_window(history, h, start, last, w_start, history.wealth[last, h], False))
    return windows


def adjusted_return(w_start: float, w_end: float, total_flows: float,
                    total_expenses: float, failed: bool = False) -> float:
    """
    Investor return net of deposits and withdrawals, with expenses added back.

    A failed fund ends the window with zero wealth.
    """
    w_final = 0.0 if failed else w_end
    return (w_final - total_flows + total_expenses) / w_start - 1.0


def window_return(window: FundWindow) -> float:
    return adjusted_return(window.w_start, window.w_end, window.total_flows,
                           window.total_expenses, window.failed)


def manager_profit(windows: Sequence[FundWindow], steps_per_year: int,
                   n_years: int) -> float:
    """
    Average annual fee income of a fund manager (indicator only).

    Each year earns the management fee on the average assets under
    management plus the performance fee on a positive adjusted return. A
    year in which the fund fails earns nothing.

    Args:
        windows: Windows already cut at year boundaries
        steps_per_year: Calibration of one year in steps
        n_years: Number of (possibly partial) years in the run

    Returns:
        Mean annual profit in currency
    """
    if n_years <= 0:
        return 0.0
    income: Dict[int, float] = {}
    failed_years = set()
    for window in windows:
        year = (window.start + 1) // steps_per_year
        if window.failed:
            failed_years.add(year)
            continue
        fee = MANAGEMENT_FEE * window.mean_aum * window.length / steps_per_year
        fee += PERFORMANCE_FEE * max(0.0, window_return(window)) * window.w_start
        income[year] = income.get(year, 0.0) + fee
    total = sum(v for year, v in sorted(income.items()) if year not in failed_years)
    return total / n_years


def return_histogram(returns: np.ndarray, bins: int = HISTOGRAM_BINS
                     ) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform-bin histogram over the observed range, as probabilities."""
    if returns.size == 0:
        return np.zeros(bins + 1), np.zeros(bins)
    counts, edges = np.histogram(returns, bins=bins)
    return edges, counts / returns.size


def rebin_histograms(histograms: Sequence[Tuple[np.ndarray, np.ndarray]],
                     bins: int = HISTOGRAM_BINS,
                     value_range: Optional[Tuple[float, float]] = None
                     ) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pool histograms with different ranges onto one shared grid.

    Bin masses are moved to the shared bin holding their centre. The grid
    spans all inputs unless value_range is given.
    """
    usable = [(e, p) for e, p in histograms if p.size and p.sum() > 0.0]
    if not usable:
        return np.zeros(bins + 1), np.zeros(bins)
    if value_range is None:
        lo = min(float(e[0]) for e, _ in usable)
        hi = max(float(e[-1]) for e, _ in usable)
    else:
        lo, hi = value_range
    centres = np.concatenate([0.5 * (e[:-1] + e[1:]) for e, _ in usable])
    weights = np.concatenate([p for _, p in usable])
    probs, edges = np.histogram(centres, bins=bins, range=(lo, hi), weights=weights)
    return edges, probs / weights.sum()


def _nominal_rate(params: SimParams) -> float:
    if params.scheme is Scheme.BASLE:
        return effective_interest_basle(params.i_b, params.S)
    return params.i_b


def run_metrics(history: RunHistory, params: SimParams) -> RunMetrics:
    """
    Aggregate a complete run into its indicators.

    Fund-level indicators (default probability, adjusted returns, manager
    profit) refer to the most aggressive fund. r_adj averages the adjusted
    return over year blocks; r_adj_lifetime averages whole windows from
    birth to failure or the end of the run, and grows with the horizon.
    """
    n, H = history.n, history.num_funds
    spy = params.steps_per_year
    returns = history.log_return[:n]

    volatility = float(np.std(returns)) if n else 0.0
    if n > 2 and volatility > 0.0:
        skew = float(stats.skew(returns))
        kurt = float(stats.kurtosis(returns, fisher=True))
    else:
        skew, kurt = 0.0, 0.0

    if H and n:
        avg_volume = float(history.shares_traded[:n].sum()) / (H * n)
        avg_leverage = float(history.leverage[:n].sum()) / (H * n)
        failures = history.failed[:n].sum(axis=0)
        default_by_fund = tuple(float(c) * spy / n for c in failures)
        top = int(np.argmax(params.betas))

        lifetimes = fund_windows(history, top, params.W0)
        yearly = fund_windows(history, top, params.W0, block=spy)
        lifetime_returns = [window_return(w) for w in lifetimes]
        survivor_returns = [window_return(w) for w in lifetimes if not w.failed]
        yearly_returns = [window_return(w) for w in yearly]
        r_adj = float(np.mean(yearly_returns)) if yearly_returns else math.nan
        r_adj_lifetime = float(np.mean(lifetime_returns)) if lifetime_returns else math.nan
        r_adj_survivors = float(np.mean(survivor_returns)) if survivor_returns else math.nan
        profit = manager_profit(yearly, spy, math.ceil(n / spy))
        default_headline = default_by_fund[top]
        default_mean = float(np.mean(default_by_fund))
    else:
        avg_volume = avg_leverage = 0.0
        default_by_fund = ()
        default_headline = default_mean = 0.0
        r_adj = r_adj_lifetime = r_adj_survivors = math.nan
        profit = 0.0

    rates = history.effective_rate[:n]
    finite = rates[np.isfinite(rates)]
    per_step_rate = float(finite.mean()) if finite.size else _nominal_rate(params)

    bank_total = float(history.bank_loss[:n].sum())
    edges, probs = return_histogram(returns)
    return RunMetrics(
        n_steps=n,
        volatility_index=volatility,
        avg_volume=avg_volume,
        avg_leverage=avg_leverage,
        default_prob_annual=default_headline,
        default_prob_annual_mean=default_mean,
        r_adj=r_adj,
        r_adj_lifetime=r_adj_lifetime,
        r_adj_survivors=r_adj_survivors,
        manager_profit=profit,
        bank_losses_annual=bank_total * spy / n if n else 0.0,
        bank_loss_total=bank_total,
        unpaid_premiums_annual=float(history.unpaid_premium[:n].sum()) * spy / n if n else 0.0,
        effective_interest_annual=per_step_rate * spy,
        return_skew=skew,
        return_excess_kurtosis=kurt,
        default_prob_annual_by_fund=default_by_fund,
        histogram_edges=edges,
        histogram_probs=probs,
    )
