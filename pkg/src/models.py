"""
Domain types for the leverage regulation simulator.

This module holds the exogenous parameter set, the per-fund state, the noise
trader and market state, and the per-step report emitted by the simulation.
"""

import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Deque, Optional, Tuple

import numpy as np

from config.config import (
    NUM_FUNDS, BETAS, RHO, SIGMA_N, FUNDAMENTAL_VALUE, TOTAL_SUPPLY,
    BENCHMARK_RETURN, PERF_EMA_WEIGHT, FLOW_SENSITIVITY, INITIAL_WEALTH,
    CRITICAL_WEALTH, REINTRO_STEPS, VOL_WINDOW, VOL_SCALE, BENCHMARK_VOL,
    SPREAD, BENCHMARK_RATE, LAMBDA_MAX, STEPS_PER_YEAR
)


class InvalidParameters(ValueError):
    """Raised when a parameter set violates its invariants."""


class Scheme(str, Enum):
    """Credit regulation regime."""

    UNREGULATED = "unregulated"
    BASLE = "basle"
    PERFECT_HEDGE = "perfect_hedge"

    @property
    def code(self) -> int:
        """Stable integer used in seed derivation."""
        return list(Scheme).index(self)

    @classmethod
    def parse(cls, name: "str | Scheme") -> "Scheme":
        if isinstance(name, Scheme):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise ValueError(f"Unknown scheme '{name}'; valid schemes: {valid}") from None


@dataclass(frozen=True)
class SimParams:
    """
    Full exogenous parameter set of one simulation.

    Attributes mirror the calibration table: OU noise (rho, sigma_n), market
    (V, N), fund investor (r_b, a, b), lifecycle (W0, W_crit, T_reintro),
    regulation (tau, theta, sigma_b, S, i_b, lambda_max) and the scheme.
    """

    num_funds: int = NUM_FUNDS
    betas: Tuple[float, ...] = BETAS
    rho: float = RHO
    sigma_n: float = SIGMA_N
    V: float = FUNDAMENTAL_VALUE
    N: float = TOTAL_SUPPLY
    r_b: float = BENCHMARK_RETURN
    a: float = PERF_EMA_WEIGHT
    b: float = FLOW_SENSITIVITY
    W0: float = INITIAL_WEALTH
    W_crit: float = CRITICAL_WEALTH
    T_reintro: int = REINTRO_STEPS
    tau: int = VOL_WINDOW
    theta: float = VOL_SCALE
    sigma_b: float = BENCHMARK_VOL
    S: float = SPREAD
    i_b: float = BENCHMARK_RATE
    lambda_max: float = LAMBDA_MAX
    short_selling: bool = True
    symmetric_short: bool = False
    scheme: Scheme = Scheme.UNREGULATED
    steps_per_year: int = STEPS_PER_YEAR

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))

    @property
    def log_fundamental_demand(self) -> float:
        """Stationary mean log(V*N) of the noise trader's dollar demand."""
        return math.log(self.V * self.N)

    def validate(self) -> "SimParams":
        """
        Check every parameter invariant.

        Returns:
            The parameter set itself, for chaining

        Raises:
            InvalidParameters: naming the first offending field
        """
        checks = [
            (0.0 < self.rho < 1.0, "rho", "must lie in (0, 1)"),
            (self.sigma_n >= 0.0, "sigma_n", "must be non-negative"),
            (self.N > 0.0, "N", "must be positive"),
            (self.V > 0.0, "V", "must be positive"),
            (self.lambda_max >= 1.0, "lambda_max", "must be at least 1"),
            (self.tau >= 2, "tau", "must be at least 2"),
            (self.W0 > 0.0, "W0", "must be positive"),
            (self.W_crit > 0.0, "W_crit", "must be positive"),
            (self.T_reintro >= 1, "T_reintro", "must be at least 1"),
            (self.num_funds >= 0, "num_funds", "must be non-negative"),
            (len(self.betas) == self.num_funds, "betas",
             f"needs exactly num_funds={self.num_funds} entries"),
            (all(b > 0.0 for b in self.betas), "betas", "must be strictly positive"),
            (len(set(self.betas)) == len(self.betas), "betas", "must be distinct"),
            (0.0 < self.a <= 1.0, "a", "must lie in (0, 1]"),
            (self.b >= 0.0, "b", "must be non-negative"),
            (self.theta > 0.0, "theta", "must be positive"),
            (self.sigma_b > 0.0, "sigma_b", "must be positive"),
            (self.S >= 0.0, "S", "must be non-negative"),
            (self.steps_per_year >= 1, "steps_per_year", "must be at least 1"),
        ]
        for ok, name, reason in checks:
            if not ok:
                raise InvalidParameters(f"SimParams.{name} {reason}")
        return self

    def with_overrides(self, **overrides) -> "SimParams":
        """Copy with some fields replaced, keeping betas and num_funds consistent."""
        if "betas" in overrides and "num_funds" not in overrides:
            overrides["num_funds"] = len(overrides["betas"])
        return replace(self, **overrides)

    @classmethod
    def noise_only(cls, **overrides) -> "SimParams":
        """Parameter set without any fund managers."""
        return cls(num_funds=0, betas=(), **overrides)


class FundStatus(str, Enum):
    """Lifecycle state of a fund."""

    ACTIVE = "active"
    DEFAULTED = "defaulted"


@dataclass
class FundState:
    """
    One heterogeneous fund manager.

    Cash is negative when the fund borrows, shares are negative when it is
    short. While active, wealth == shares * price + cash after every step.
    """

    beta: float
    shares: float
    cash: float
    wealth: float
    perf_ema: float
    m_crit_long: float
    m_crit_short: float
    status: FundStatus = FundStatus.ACTIVE
    steps_remaining: int = 0
    cum_flows: float = 0.0
    cum_expenses: float = 0.0
    # option premium per share bought at the last position entry
    premium: float = 0.0
    # price at which the current position was formed
    entry_price: float = FUNDAMENTAL_VALUE

    @classmethod
    def newborn(cls, beta: float, params: SimParams, price: Optional[float] = None) -> "FundState":
        """Fresh all-cash fund with initial wealth W0."""
        return cls(
            beta=beta,
            shares=0.0,
            cash=params.W0,
            wealth=params.W0,
            perf_ema=0.0,
            m_crit_long=params.lambda_max / beta,
            m_crit_short=(1.0 - params.lambda_max) / beta,
            entry_price=params.V if price is None else price,
        )

    @property
    def active(self) -> bool:
        return self.status is FundStatus.ACTIVE

    def leverage(self, price: float) -> float:
        """
        Leverage at the given price.

        Long positions use position value over wealth; short positions use
        the asset side of the balance sheet over wealth. An empty book has
        leverage 0.
        """
        if not self.active or self.wealth <= 0.0 or self.shares == 0.0:
            return 0.0
        value = self.shares * price
        if self.shares > 0.0:
            return value / self.wealth
        return 1.0 - value / self.wealth

    def has_loan(self) -> bool:
        """True when the fund borrows cash (leveraged long) or shares (short)."""
        return self.active and (self.shares < 0.0 or (self.shares > 0.0 and self.cash < 0.0))


@dataclass
class NoiseState:
    """Log dollar demand of the representative noise trader."""

    log_xi: float

    @property
    def xi(self) -> float:
        return math.exp(self.log_xi)

    @classmethod
    def stationary(cls, params: SimParams) -> "NoiseState":
        return cls(log_xi=params.log_fundamental_demand)


@dataclass
class MarketState:
    """Current price, rolling log-return window and step counter."""

    price: float
    tau: int
    t: int = 0
    sigma_hist: float = 0.0
    return_window: Deque[float] = field(default_factory=deque)

    def __post_init__(self):
        self.return_window = deque(self.return_window, maxlen=self.tau)

    def mispricing(self, V: float) -> float:
        return V - self.price

    def record_return(self, new_price: float) -> float:
        """Append the log-return to new_price and refresh the historical volatility."""
        r = math.log(new_price) - math.log(self.price)
        self.return_window.append(r)
        self.price = new_price
        self.t += 1
        if len(self.return_window) == self.tau:
            self.sigma_hist = float(np.std(np.fromiter(self.return_window, dtype=float)))
        return r

    def volatility(self, sigma_b: float) -> float:
        """Historical volatility, or sigma_b until the window is full."""
        if len(self.return_window) < self.tau:
            return sigma_b
        return self.sigma_hist


@dataclass
class StepReport:
    """Observables emitted by one simulation step."""

    t: int
    price: float
    mispricing: float
    log_return: float
    sigma: float
    lambda_adapt: float
    demand: np.ndarray
    wealth: np.ndarray
    leverage: np.ndarray
    flow: np.ndarray
    cost: np.ndarray
    active: np.ndarray
    failed: np.ndarray
    reborn: np.ndarray
    effective_rate: np.ndarray
    defaults_this_step: int
    bank_loss_this_step: float
    unpaid_premium_this_step: float
    shares_traded: float
