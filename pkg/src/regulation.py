"""
Credit regulation module.

This module implements the Basle II policy (haircuts, volatility-adaptive
maximum leverage and spreads) and the unregulated policy, which only imposes
a fixed leverage cap.
"""

import math
from dataclasses import dataclass

from src.models import FundState, Scheme, SimParams


@dataclass(frozen=True)
class BasleParams:
    """
    Haircut and spread parameters of the Basle scheme.

    Attributes:
        H_min: Minimum haircut, 1/lambda_max
        Phi: Confidence scale, 1/(lambda_max * sigma_b)
        c: Fixed cost
        T_hold: Holding duration of the collateral in steps
        S: Spread per step
        i_b: Benchmark rate per step
        sigma_b: Benchmark volatility
    """

    H_min: float
    Phi: float
    S: float
    i_b: float
    sigma_b: float
    c: float = 0.0
    T_hold: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.H_min <= 1.0:
            raise ValueError("H_min must lie in (0, 1]")
        if self.Phi <= 0.0:
            raise ValueError("Phi must be positive")
        if self.S < 0.0:
            raise ValueError("S must be non-negative")

    @classmethod
    def from_params(cls, params: SimParams) -> "BasleParams":
        return cls(
            H_min=1.0 / params.lambda_max,
            Phi=1.0 / (params.lambda_max * params.sigma_b),
            S=params.S,
            i_b=params.i_b,
            sigma_b=params.sigma_b,
        )


def net_exposure(E: float, k: float, H_e: float, H_col: float) -> float:
    """Exposure left after haircut-adjusted collateral, never negative."""
    return max(0.0, E * (1.0 + H_e) - k * (1.0 - H_col))


def basle_haircut(sigma: float, params: BasleParams) -> float:
    """
    Volatility-dependent haircut clamped to [H_min, 1].

    The same formula gives the collateral haircut for long loans and the
    exposure haircut for short positions.
    """
    raw = params.Phi * sigma * math.sqrt(params.T_hold) + params.c
    return min(max(params.H_min, raw), 1.0)


def adaptive_lambda_basle(sigma: float, sigma_b: float, lambda_max: float) -> float:
    """Maximum leverage implied by the haircut at zero net exposure."""
    if sigma <= 0.0:
        return lambda_max
    return max(lambda_max * min(1.0, sigma_b / sigma), 1.0)


def spread_cost(fund: FundState, p_prev: float, S: float) -> float:
    """
    Borrowing cost charged for the previous step.

    Args:
        fund: Fund holding its previous-step position
        p_prev: Price at which that position was formed
        S: Rate charged per step

    Returns:
        Cost term added to wealth (zero or negative)
    """
    if fund.shares < 0.0:
        return fund.shares * p_prev * S
    if fund.cash < 0.0:
        return fund.cash * S
    return 0.0


def effective_interest_basle(i_b: float, S: float) -> float:
    """Per-step interest rate on loans under the Basle scheme."""
    return i_b + S


class Policy:
    """
    Interface of a credit regime as seen by the simulation.

    A policy supplies the leverage cap for a step, the cost term charged on
    the previous position, and, once the new position is known, the interest
    rate it implies.
    """

    scheme: Scheme

    def __init__(self, params: SimParams):
        self.params = params

    def lambda_adapt(self, price: float, sigma: float) -> float:
        raise NotImplementedError

    def cost_term(self, fund: FundState) -> float:
        raise NotImplementedError

    def open_position(self, fund: FundState, price: float, sigma: float) -> float:
        """
        Book the new position's financing terms on the fund.

        Returns:
            Effective per-step rate of the position's loan, NaN without a loan
        """
        raise NotImplementedError

    @property
    def nominal_rate(self) -> float:
        """Per-step rate reported when no loan is ever outstanding."""
        return self.params.i_b


class UnregulatedPolicy(Policy):
    """Fixed leverage cap, free borrowing."""

    scheme = Scheme.UNREGULATED

    def lambda_adapt(self, price: float, sigma: float) -> float:
        return self.params.lambda_max

    def cost_term(self, fund: FundState) -> float:
        return 0.0

    def open_position(self, fund: FundState, price: float, sigma: float) -> float:
        fund.premium = 0.0
        return self.params.i_b if fund.has_loan() else math.nan


class BaslePolicy(Policy):
    """Haircut-driven adaptive leverage cap plus a fixed spread on loans."""

    scheme = Scheme.BASLE

    def __init__(self, params: SimParams):
        super().__init__(params)
        self.basle = BasleParams.from_params(params)
        self.rate = effective_interest_basle(params.i_b, params.S)

    def lambda_adapt(self, price: float, sigma: float) -> float:
        return adaptive_lambda_basle(sigma, self.params.sigma_b, self.params.lambda_max)

    def haircut(self, sigma: float) -> float:
        return basle_haircut(sigma, self.basle)

    def cost_term(self, fund: FundState) -> float:
        return spread_cost(fund, fund.entry_price, self.rate)

    def open_position(self, fund: FundState, price: float, sigma: float) -> float:
        fund.premium = 0.0
        return self.rate if fund.has_loan() else math.nan

    @property
    def nominal_rate(self) -> float:
        return self.rate
