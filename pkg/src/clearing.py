"""
Market clearing module.

This module computes the value investors' demand and solves the clearing
condition D_n + sum_h D_h = N for the price by one-dimensional root finding.

Multiplied by p the excess demand reads

    phi(p) = xi - N*p + sum_h W_h(p) * g_h(p)

where g_h = clip(beta_h*(V - p), floor, lambda) is the position-to-wealth
ratio and W_h is at most quadratic in p. phi is therefore piecewise cubic
with an analytic slope, which the default Newton solver exploits.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from config.config import (
    BRACKET_FACTOR, MAX_BRACKET_EXPANSIONS, PRICE_TOLERANCE,
    CLEARING_RESIDUAL, ROOT_METHODS, DEFAULT_ROOT_METHOD
)
from src.models import FundState

logger = logging.getLogger(__name__)

# absolute part of the bracket-width stopping rule; the relative part is tol
_XTOL = 1e-300
_MAX_ITER = 2000


class ClearingFailure(RuntimeError):
    """Raised when the clearing price cannot be bracketed or resolved."""

    def __init__(self, message: str, xi: float, bracket: Tuple[float, float],
                 lambda_adapt: float, excess_lo: float, excess_hi: float,
                 num_funds: int):
        super().__init__(
            f"{message} (xi={xi:.6g}, bracket=[{bracket[0]:.6g}, {bracket[1]:.6g}], "
            f"lambda_adapt={lambda_adapt:.6g}, excess=[{excess_lo:.6g}, {excess_hi:.6g}], "
            f"active_funds={num_funds})"
        )
        self.xi = xi
        self.bracket = bracket
        self.lambda_adapt = lambda_adapt
        self.excess_lo = excess_lo
        self.excess_hi = excess_hi
        self.num_funds = num_funds


class FundBook(NamedTuple):
    """Column view of the active funds' previous-step holdings."""

    beta: np.ndarray
    shares: np.ndarray
    cash: np.ndarray

    @classmethod
    def from_funds(cls, funds: Sequence[FundState],
                   costs: Optional[Sequence[float]] = None) -> "FundBook":
        """Book of funds; costs, when given, are folded into the cash column."""
        cash = np.array([f.cash for f in funds], dtype=float)
        if costs is not None:
            cash = cash + np.asarray(costs, dtype=float)
        return cls(
            beta=np.array([f.beta for f in funds], dtype=float),
            shares=np.array([f.shares for f in funds], dtype=float),
            cash=cash,
        )

    @classmethod
    def empty(cls) -> "FundBook":
        return cls(np.empty(0), np.empty(0), np.empty(0))

    def __len__(self) -> int:
        return len(self.beta)


class FlowGain(NamedTuple):
    """
    Investor flow folded into wealth.

    With R = shares*p + cash the wealth after the flow is R*max(0, k0 + k1*p)
    when R > 0, and R otherwise.
    """

    k0: np.ndarray
    k1: np.ndarray


@dataclass
class ClearingProblem:
    """
    One clearing instance.

    Attributes:
        xi: Noise trader dollar demand
        funds: Previous-step holdings of the active funds
        lambda_adapt: Leverage cap in force this step
        N: Total asset supply
        short_selling: Whether funds may go short
        bracket: Initial price bracket (p_lo, p_hi)
        V: Fundamental value
        tol: Relative price accuracy at which the solver stops
        symmetric_short: Use -lambda*W/p instead of (1-lambda)*W/p as the short cap
        flow_gain: Investor flow response; wealth is marked-to-price when None
        method: Root finder, one of ROOT_METHODS
    """

    xi: float
    funds: FundBook
    lambda_adapt: float
    N: float
    short_selling: bool
    bracket: Tuple[float, float]
    V: float = 1.0
    tol: float = PRICE_TOLERANCE
    symmetric_short: bool = False
    flow_gain: Optional[FlowGain] = None
    method: str = DEFAULT_ROOT_METHOD
    _rows: List[Tuple[float, float, float, float, float]] = field(
        default_factory=list, init=False, repr=False, compare=False)

    def __post_init__(self):
        lo, hi = self.bracket
        if not 0.0 < lo < hi:
            raise ValueError(f"Invalid bracket [{lo}, {hi}]")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.xi <= 0.0:
            raise ValueError("noise demand xi must be positive")
        if self.method not in ROOT_METHODS:
            raise ValueError(f"Unknown root method '{self.method}'; valid: {', '.join(ROOT_METHODS)}")
        n = len(self.funds)
        if self.flow_gain is None:
            k0, k1 = [1.0] * n, [0.0] * n
        else:
            k0, k1 = self.flow_gain.k0.tolist(), self.flow_gain.k1.tolist()
        self._rows = list(zip(self.funds.beta.tolist(), self.funds.shares.tolist(),
                              self.funds.cash.tolist(), k0, k1))

    @property
    def floor(self) -> float:
        """Lower bound of the position-to-wealth ratio."""
        if self.short_selling and self.symmetric_short:
            return -self.lambda_adapt
        if self.short_selling and self.lambda_adapt > 1.0:
            return 1.0 - self.lambda_adapt
        return 0.0

    def wealth(self, p: float) -> np.ndarray:
        redeemable = self.funds.shares * p + self.funds.cash
        if self.flow_gain is None:
            return redeemable
        gain = np.maximum(0.0, self.flow_gain.k0 + self.flow_gain.k1 * p)
        return np.where(redeemable > 0.0, redeemable * gain, redeemable)

    def demands(self, p: float) -> np.ndarray:
        return fund_demand(self.funds, p, self.lambda_adapt, self.short_selling,
                           V=self.V, wealth=self.wealth(p),
                           symmetric_short=self.symmetric_short)

    def scaled_excess(self, p: float) -> Tuple[float, float]:
        """
        Excess demand in dollars, p * (D_n + sum_h D_h - N), and its slope in p.

        Scalar twin of demands(); funds with non-positive wealth contribute
        nothing.
        """
        total = self.xi - self.N * p
        slope = -self.N
        cap = self.lambda_adapt
        floor = self.floor
        m = self.V - p
        for beta, shares, cash, k0, k1 in self._rows:
            redeemable = shares * p + cash
            if redeemable <= 0.0:
                continue
            gain = k0 + k1 * p
            if gain <= 0.0:
                continue
            w = redeemable * gain
            dw = shares * gain + redeemable * k1
            ratio = beta * m
            if ratio >= cap:
                total += w * cap
                slope += dw * cap
            elif ratio <= floor:
                total += w * floor
                slope += dw * floor
            else:
                total += w * ratio
                slope += dw * ratio - w * beta
        return total, slope


def fund_demand(fund, p: float, lambda_adapt: float, short_selling: bool,
                V: float = 1.0, wealth=None, symmetric_short: bool = False):
    """
    Demand of one fund (FundState) or a book of funds (FundBook) at price p.

    The position value is beta*m*W, capped at lambda*W on the long side and
    at (1-lambda)*W on the short side; without short selling (or with
    lambda <= 1) the floor is 0. A fund with W <= 0 demands nothing.

    Args:
        fund: Anything with beta, shares and cash attributes
        p: Candidate price
        lambda_adapt: Leverage cap in force
        short_selling: Whether the short branch is enabled
        V: Fundamental value
        wealth: Wealth at p; defaults to shares * p + cash
        symmetric_short: Use -lambda as the short cap multiplier

    Returns:
        Shares demanded (float for a single fund, array for a book)
    """
    beta = np.asarray(fund.beta, dtype=float)
    if wealth is None:
        wealth = np.asarray(fund.shares, dtype=float) * p + np.asarray(fund.cash, dtype=float)
    w = np.asarray(wealth, dtype=float)
    solvent = w > 0.0
    w_pos = np.where(solvent, w, 0.0)

    m = V - p
    upper = lambda_adapt * w_pos / p
    if short_selling and symmetric_short:
        lower = -lambda_adapt * w_pos / p
    elif short_selling and lambda_adapt > 1.0:
        lower = (1.0 - lambda_adapt) * w_pos / p
    else:
        lower = np.zeros_like(w_pos)
    demand = np.clip(beta * m * w_pos / p, lower, upper)

    if demand.ndim == 0:
        return float(demand)
    return demand


def aggregate_excess_demand(problem: ClearingProblem, p: float) -> float:
    """Noise demand plus fund demand minus supply, in shares."""
    return problem.scaled_excess(p)[0] / p


def _expand_bracket(problem: ClearingProblem, excess: Callable[[float], float]):
    lo, hi = problem.bracket
    f_lo, f_hi = excess(lo), excess(hi)
    expansions = 0
    while f_lo > 0.0 and f_hi > 0.0 or f_lo < 0.0 and f_hi < 0.0:
        if expansions >= MAX_BRACKET_EXPANSIONS:
            raise ClearingFailure(
                f"No sign change after {expansions} bracket expansions",
                problem.xi, (lo, hi), problem.lambda_adapt, f_lo, f_hi, len(problem.funds)
            )
        if f_hi > 0.0:
            hi *= BRACKET_FACTOR
            f_hi = excess(hi)
        else:
            lo /= BRACKET_FACTOR
            f_lo = excess(lo)
        expansions += 1
        logger.debug("Clearing bracket expanded to [%.6g, %.6g]", lo, hi)
    return lo, hi, f_lo, f_hi


def sentinel_bracket(problem: ClearingProblem) -> Tuple[float, float]:
    """
    Prices at which the excess demand is known to be positive and negative.

    Below min(V, xi/N) every solvent fund is long or flat, so demand exceeds
    supply; above max(V, xi/N) every fund is short or flat and it falls short.
    """
    anchor = problem.xi / problem.N
    return 0.5 * min(problem.V, anchor), 2.0 * max(problem.V, anchor)


def _newton(problem: ClearingProblem) -> float:
    """Newton steps on phi(p), falling back to bisection outside the bracket."""
    lo, hi = sentinel_bracket(problem)
    f_lo = problem.scaled_excess(lo)[0]
    f_hi = problem.scaled_excess(hi)[0]
    if not (f_lo > 0.0 and f_hi < 0.0):
        raise ClearingFailure("Sentinel prices do not bracket the root", problem.xi,
                              (lo, hi), problem.lambda_adapt, f_lo / lo, f_hi / hi,
                              len(problem.funds))

    x = math.sqrt(problem.bracket[0] * problem.bracket[1])
    if not lo < x < hi:
        x = 0.5 * (lo + hi)
    last_step = hi - lo
    for _ in range(_MAX_ITER):
        f, slope = problem.scaled_excess(x)
        if f == 0.0:
            return x
        if f > 0.0:
            lo = x
        else:
            hi = x

        candidate = x - f / slope if slope < 0.0 else math.nan
        if not lo < candidate < hi or abs(2.0 * f) > abs(last_step * slope):
            candidate = 0.5 * (lo + hi)
        last_step = abs(candidate - x)
        x = candidate
        if last_step <= problem.tol * x or hi - lo <= problem.tol * x:
            return x

    raise ClearingFailure(f"No convergence after {_MAX_ITER} iterations", problem.xi,
                          (lo, hi), problem.lambda_adapt, math.nan, math.nan,
                          len(problem.funds))


def clear_price(problem: ClearingProblem) -> float:
    """
    Solve the market clearing condition for the price.

    'newton' works from the analytic sentinel bracket. 'bisect' and 'brentq'
    expand problem.bracket geometrically until the excess demand changes
    sign, then narrow it until its relative width drops below problem.tol.

    Args:
        problem: Clearing instance

    Returns:
        Clearing price p > 0

    Raises:
        ClearingFailure: If no sign change is found within the allowed
            expansions, or the excess demand at the solution exceeds
            CLEARING_RESIDUAL * N
    """
    def excess(p: float) -> float:
        return aggregate_excess_demand(problem, p)

    if problem.method == "newton":
        price = _newton(problem)
    else:
        lo, hi, f_lo, f_hi = _expand_bracket(problem, excess)
        if f_lo == 0.0:
            return lo
        if f_hi == 0.0:
            return hi
        solver = optimize.bisect if problem.method == "bisect" else optimize.brentq
        price = solver(excess, lo, hi, xtol=_XTOL, rtol=problem.tol, maxiter=_MAX_ITER)

    residual = excess(price)
    if abs(residual) > CLEARING_RESIDUAL * problem.N:
        raise ClearingFailure(f"Residual excess demand {residual:.3g} at p={price:.12g}",
                              problem.xi, problem.bracket, problem.lambda_adapt,
                              residual, residual, len(problem.funds))
    return price
