"""
Perfect-hedge module.

Under this policy every leveraged position carries a one-step option (a put
for longs, a call for shorts) struck where the collateral exactly repays the
loan. This module prices those options with Black-Scholes, charges their
premiums to the funds and derives the leverage cap implied by a ceiling on
hedging costs.
"""

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from scipy import optimize
from scipy.special import ndtr

from config.config import HEDGE_LAMBDA_RTOL, OPTION_MATURITY, RISK_FREE_RATE
from src.models import FundState, Scheme, SimParams
from src.regulation import Policy

# lower end of the short-side bracket; the call strike diverges at lambda = 1
_SHORT_LAMBDA_FLOOR = 1.0 + 1e-12


class OptionKind(str, Enum):
    PUT = "put"
    CALL = "call"


@dataclass(frozen=True)
class HedgeParams:
    """
    Option pricing parameters of the perfect-hedge scheme.

    The maximum hedging cost is the premium of the option struck at
    lambda_max under the benchmark volatility, so the cap equals lambda_max
    exactly when the historical volatility equals sigma_b.
    """

    theta: float
    sigma_b: float
    lambda_max: float
    T_opt: float = OPTION_MATURITY
    r: float = RISK_FREE_RATE

    def __post_init__(self):
        if self.theta <= 0.0:
            raise ValueError("theta must be positive")
        if self.T_opt <= 0.0:
            raise ValueError("T_opt must be positive")

    @classmethod
    def from_params(cls, params: SimParams) -> "HedgeParams":
        return cls(theta=params.theta, sigma_b=params.sigma_b, lambda_max=params.lambda_max)


def hedge_strikes(p: float, lambda_h: float, kind: OptionKind = OptionKind.PUT) -> float:
    """
    Strike at which the collateral exactly covers the loan.

    Args:
        p: Price at which the position is formed
        lambda_h: Leverage of the position
        kind: PUT for a long position, CALL for a short one

    Returns:
        Strike price

    Raises:
        ValueError: For lambda < 1, or lambda <= 1 on a call
    """
    kind = OptionKind(kind)
    if kind is OptionKind.PUT:
        if lambda_h < 1.0:
            raise ValueError(f"Put strike needs lambda >= 1, got {lambda_h}")
        return p * (1.0 - 1.0 / lambda_h)
    if lambda_h <= 1.0:
        raise ValueError(f"Call strike needs lambda > 1 (short positions), got {lambda_h}")
    return p * (1.0 + 1.0 / (lambda_h - 1.0))


def bs_price(kind: OptionKind, spot: float, strike: float, sigma_eff: float,
             T_opt: float = OPTION_MATURITY, r: float = RISK_FREE_RATE) -> float:
    """
    Black-Scholes value of a European option.

    With zero volatility the discounted intrinsic value is returned.
    """
    kind = OptionKind(kind)
    discount = math.exp(-r * T_opt)
    if strike <= 0.0:
        return 0.0 if kind is OptionKind.PUT else spot
    vol = sigma_eff * math.sqrt(T_opt)
    if vol <= 0.0:
        if kind is OptionKind.PUT:
            return max(0.0, strike * discount - spot)
        return max(0.0, spot - strike * discount)

    d1 = (math.log(spot / strike) + (r + 0.5 * sigma_eff * sigma_eff) * T_opt) / vol
    d2 = d1 - vol
    if kind is OptionKind.PUT:
        value = strike * discount * ndtr(-d2) - spot * ndtr(-d1)
    else:
        value = spot * ndtr(d1) - strike * discount * ndtr(d2)
    return max(0.0, float(value))


def hedge_premium(kind: OptionKind, p: float, lambda_h: float, sigma: float,
                  params: HedgeParams) -> float:
    """Premium per share of the hedge for a position of leverage lambda_h."""
    strike = hedge_strikes(p, lambda_h, kind)
    return bs_price(kind, p, strike, params.theta * sigma, params.T_opt, params.r)


def hedge_cost(fund: FundState) -> float:
    """
    Hedging cost of the previous position: -D*P for longs, +D*C for shorts.

    The premium was priced when the position was formed.
    """
    return -abs(fund.shares) * fund.premium


def effective_spread(p: float, lambda_h: float, premium: float, short: bool = False) -> float:
    """
    Hedging premium expressed as an interest rate on the loan.

    Returns NaN for a long position without a loan (lambda <= 1).
    """
    if short:
        return premium / p
    if lambda_h <= 1.0:
        return math.nan
    return premium / (p * (1.0 - 1.0 / lambda_h))


@lru_cache(maxsize=None)
def hedge_cost_cap(kind: OptionKind, params: HedgeParams) -> float:
    """Premium per unit of price of the option struck at lambda_max under sigma_b."""
    return hedge_premium(kind, 1.0, params.lambda_max, params.sigma_b, params)


def _solve_side(kind: OptionKind, sigma: float, params: HedgeParams, lower: float) -> float:
    # premiums are homogeneous of degree one in price, so the cap is solved at p = 1
    lambda_max = params.lambda_max
    if sigma <= params.sigma_b:
        return lambda_max
    cost_cap = hedge_cost_cap(kind, params)

    def excess_cost(lam: float) -> float:
        return hedge_premium(kind, 1.0, lam, sigma, params) - cost_cap

    if excess_cost(lambda_max) <= 0.0:
        return lambda_max
    if excess_cost(lower) >= 0.0:
        return lower
    return optimize.brentq(excess_cost, lower, lambda_max, xtol=1e-300,
                           rtol=HEDGE_LAMBDA_RTOL, maxiter=500)


def adaptive_lambda_hedge(p: float, sigma: float, params: HedgeParams,
                          short_selling: bool = True) -> float:
    """
    Leverage cap implied by the ceiling on hedging costs.

    Solves premium(p, theta*sigma, strike(p, lambda)) = P_max for lambda on
    the put side and, with short selling, on the call side, and returns the
    smallest of those and lambda_max, never below 1.

    Args:
        p: Current price; premiums scale with it, so the cap does not
        sigma: Historical volatility
        params: Option pricing parameters
        short_selling: Whether the call-side cap applies

    Returns:
        Adaptive maximum leverage in [1, lambda_max]
    """
    if params.lambda_max <= 1.0:
        return 1.0
    cap = _solve_side(OptionKind.PUT, sigma, params, 1.0)
    if short_selling:
        cap = min(cap, _solve_side(OptionKind.CALL, sigma, params, _SHORT_LAMBDA_FLOOR))
    return max(1.0, min(params.lambda_max, cap))


class PerfectHedgePolicy(Policy):
    """Leverage capped by a hedging-cost ceiling; funds pay the option premiums."""

    scheme = Scheme.PERFECT_HEDGE

    def __init__(self, params: SimParams):
        super().__init__(params)
        self.hedge = HedgeParams.from_params(params)

    def lambda_adapt(self, price: float, sigma: float) -> float:
        return adaptive_lambda_hedge(price, sigma, self.hedge, self.params.short_selling)

    def cost_term(self, fund: FundState) -> float:
        return hedge_cost(fund)

    def open_position(self, fund: FundState, price: float, sigma: float) -> float:
        lambda_h = fund.leverage(price)
        fund.premium = 0.0
        if fund.shares > 0.0 and lambda_h > 1.0:
            fund.premium = hedge_premium(OptionKind.PUT, price, lambda_h, sigma, self.hedge)
            return effective_spread(price, lambda_h, fund.premium)
        if fund.shares < 0.0 and lambda_h > 1.0:
            fund.premium = hedge_premium(OptionKind.CALL, price, lambda_h, sigma, self.hedge)
            return effective_spread(price, lambda_h, fund.premium, short=True)
        return math.nan
