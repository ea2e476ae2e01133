"""
Simulation core.

This module advances the market by one timestep: noise trader update,
leverage cap from the active policy, market clearing, wealth and investor
flow updates, and fund default and reintroduction.
"""

import logging
import math
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from config.config import BRACKET_FACTOR, DEFAULT_ROOT_METHOD
from src.clearing import ClearingProblem, FlowGain, FundBook, clear_price
from src.models import (
    FundState, FundStatus, MarketState, NoiseState, Scheme, SimParams, StepReport
)
from src.options import PerfectHedgePolicy
from src.regulation import BaslePolicy, Policy, UnregulatedPolicy

logger = logging.getLogger(__name__)

_POLICIES = {
    Scheme.UNREGULATED: UnregulatedPolicy,
    Scheme.BASLE: BaslePolicy,
    Scheme.PERFECT_HEDGE: PerfectHedgePolicy,
}


def make_policy(params: SimParams) -> Policy:
    """Instantiate the policy for params.scheme."""
    return _POLICIES[Scheme.parse(params.scheme)](params)


def ou_step(noise: NoiseState, draw: float, params: SimParams) -> NoiseState:
    """Advance the log noise demand by one Ornstein-Uhlenbeck step."""
    log_xi = (params.rho * noise.log_xi + params.sigma_n * draw
              + (1.0 - params.rho) * params.log_fundamental_demand)
    return NoiseState(log_xi=log_xi)


def performance_update(perf_prev, shares_prev, wealth_prev, p_prev: float,
                       p_new: float, a: float):
    """Exponential moving average of the fund's trading return."""
    rate = shares_prev * (p_new - p_prev) / wealth_prev
    return (1.0 - a) * perf_prev + a * rate


def investor_flow(perf_ema, redeemable, params: SimParams):
    """
    Deposit (positive) or withdrawal (negative) of the fund investor.

    The fraction moved is b times the excess performance over the benchmark,
    never below -1, and is applied to the redeemable cash only when that is
    positive. Works element-wise on arrays.
    """
    if isinstance(perf_ema, np.ndarray) or isinstance(redeemable, np.ndarray):
        fraction = np.maximum(-1.0, params.b * (perf_ema - params.r_b))
        return fraction * np.maximum(0.0, redeemable)
    return max(-1.0, params.b * (perf_ema - params.r_b)) * max(0.0, redeemable)


def flow_gain(funds: List[FundState], p_prev: float, params: SimParams) -> FlowGain:
    """
    Linear-in-price investor response of the active funds.

    After the flow a fund with redeemable cash R > 0 holds
    R * max(0, 1 + b*(perf(p) - r_b)), and perf(p) is linear in p.
    """
    a, b = params.a, params.b
    k0 = np.empty(len(funds))
    k1 = np.empty(len(funds))
    for i, fund in enumerate(funds):
        slope = a * fund.shares / fund.wealth
        k1[i] = b * slope
        k0[i] = 1.0 + b * ((1.0 - a) * fund.perf_ema - slope * p_prev - params.r_b)
    return FlowGain(k0=k0, k1=k1)


def redeemable_cash(fund: FundState, p: float, policy: Policy) -> float:
    """
    Cash left if the previous position were sold at p and the bank paid first.

    The policy cost term is exactly the scheme's adjustment: spread for Basle,
    option premium for perfect hedge, nothing when unregulated.
    """
    return fund.shares * p + fund.cash + policy.cost_term(fund)


def update_wealth(fund: FundState, p_prev: float, p_new: float, flow: float,
                  cost: float, new_shares: Optional[float] = None) -> FundState:
    """
    Apply trading P&L, investor flow and policy cost, then rebalance.

    Args:
        fund: Active fund holding its previous position
        p_prev: Previous price
        p_new: Clearing price
        flow: Investor flow
        cost: Policy cost term (zero or negative)
        new_shares: Position cleared at p_new; unchanged when None

    Returns:
        The same fund, updated so that wealth == shares * p_new + cash
    """
    fund.wealth = fund.wealth + fund.shares * (p_new - p_prev) + flow + cost
    if new_shares is not None:
        fund.shares = float(new_shares)
    fund.cash = fund.wealth - fund.shares * p_new
    return fund


class DefaultOutcome(NamedTuple):
    bank_loss: float = 0.0
    unpaid_premium: float = 0.0
    failed: bool = False
    reborn: bool = False
    payout: float = 0.0


def handle_default_and_reintro(fund: FundState, p: float, params: SimParams,
                               cost: float = 0.0) -> DefaultOutcome:
    """
    Shut down insolvent or sub-critical funds and revive expired ones.

    A fund with negative wealth defaults: its position is sold and the
    unrepaid loan is lost by the bank (under perfect hedge the option covers
    the loan and only the unpaid premium leaks). A fund below W_crit is
    liquidated and its residual wealth returned to the investor. Either way
    it is replaced by a fresh fund with the same aggression after T_reintro
    steps.

    Args:
        fund: Fund after this step's wealth update
        p: Clearing price
        params: Simulation parameters
        cost: Policy cost term charged this step

    Returns:
        Outcome with bank loss, unpaid premium and lifecycle flags
    """
    if fund.status is FundStatus.DEFAULTED:
        fund.steps_remaining -= 1
        if fund.steps_remaining > 0:
            return DefaultOutcome()
        newborn = FundState.newborn(fund.beta, params, price=p)
        fund.__dict__.update(newborn.__dict__)
        logger.debug("Fund beta=%g reintroduced with W0=%g", fund.beta, params.W0)
        return DefaultOutcome(reborn=True)

    if fund.wealth < 0.0:
        shortfall = max(0.0, -(fund.shares * p + fund.cash))
        if params.scheme is Scheme.PERFECT_HEDGE:
            outcome = DefaultOutcome(unpaid_premium=min(shortfall, -cost), failed=True)
        else:
            outcome = DefaultOutcome(bank_loss=shortfall, failed=True)
        logger.debug("Fund beta=%g defaulted at p=%.6g, shortfall %.6g", fund.beta, p, shortfall)
    elif fund.wealth < params.W_crit:
        payout = fund.shares * p + fund.cash
        fund.cum_flows -= payout
        outcome = DefaultOutcome(failed=True, payout=payout)
        logger.debug("Fund beta=%g shut down below W_crit with W=%.6g", fund.beta, fund.wealth)
    else:
        return DefaultOutcome()

    fund.shares = 0.0
    fund.cash = 0.0
    fund.wealth = 0.0
    fund.premium = 0.0
    fund.status = FundStatus.DEFAULTED
    fund.steps_remaining = params.T_reintro
    return outcome


def step(market: MarketState, funds: List[FundState], noise: NoiseState,
         policy: Policy, rng: np.random.Generator,
         root_method: str = DEFAULT_ROOT_METHOD
         ) -> Tuple[MarketState, List[FundState], NoiseState, StepReport]:
    """
    Advance the whole market by one timestep.

    Order: noise update, volatility and leverage cap, clearing, return
    window, per-fund P&L / cost / flow, defaults and reintroductions.

    Raises:
        ClearingFailure: If the clearing price cannot be bracketed or resolved
    """
    params = policy.params
    noise = ou_step(noise, rng.standard_normal(), params)
    p_prev = market.price
    sigma = market.volatility(params.sigma_b)
    lambda_adapt = policy.lambda_adapt(p_prev, sigma)

    active_idx = [h for h, f in enumerate(funds) if f.active]
    active = [funds[h] for h in active_idx]
    costs = [policy.cost_term(f) for f in active]
    book = FundBook.from_funds(active, costs) if active else FundBook.empty()
    gain = flow_gain(active, p_prev, params) if active else None

    problem = ClearingProblem(
        xi=noise.xi,
        funds=book,
        lambda_adapt=lambda_adapt,
        N=params.N,
        short_selling=params.short_selling,
        bracket=(p_prev / BRACKET_FACTOR, p_prev * BRACKET_FACTOR),
        V=params.V,
        symmetric_short=params.symmetric_short,
        flow_gain=gain,
        method=root_method,
    )
    price = clear_price(problem)
    new_shares = problem.demands(price) if active else np.empty(0)
    log_return = market.record_return(price)

    H = len(funds)
    prev_shares = np.array([f.shares for f in funds], dtype=float)
    flow = np.zeros(H)
    cost = np.zeros(H)
    for i, h in enumerate(active_idx):
        fund = funds[h]
        fund.perf_ema = performance_update(fund.perf_ema, fund.shares, fund.wealth,
                                           p_prev, price, params.a)
        redeemable = redeemable_cash(fund, price, policy)
        flow[h] = investor_flow(fund.perf_ema, redeemable, params)
        cost[h] = costs[i]
        update_wealth(fund, p_prev, price, flow[h], cost[h], new_shares[i])
        fund.cum_flows += flow[h]
        fund.cum_expenses -= cost[h]

    failed = np.zeros(H, dtype=bool)
    reborn = np.zeros(H, dtype=bool)
    effective_rate = np.full(H, math.nan)
    bank_loss = 0.0
    unpaid = 0.0
    for h, fund in enumerate(funds):
        outcome = handle_default_and_reintro(fund, price, params, cost[h])
        failed[h] = outcome.failed
        reborn[h] = outcome.reborn
        flow[h] -= outcome.payout
        bank_loss += outcome.bank_loss
        unpaid += outcome.unpaid_premium
        if fund.active and not outcome.reborn:
            effective_rate[h] = policy.open_position(fund, price, sigma)
        fund.entry_price = price

    shares = np.array([f.shares for f in funds], dtype=float)
    report = StepReport(
        t=market.t,
        price=price,
        mispricing=params.V - price,
        log_return=log_return,
        sigma=sigma,
        lambda_adapt=lambda_adapt,
        demand=shares,
        wealth=np.array([f.wealth for f in funds], dtype=float),
        leverage=np.array([f.leverage(price) for f in funds], dtype=float),
        flow=flow,
        cost=cost,
        active=np.array([f.active for f in funds], dtype=bool),
        failed=failed,
        reborn=reborn,
        effective_rate=effective_rate,
        defaults_this_step=int(failed.sum()),
        bank_loss_this_step=bank_loss,
        unpaid_premium_this_step=unpaid,
        shares_traded=float(np.abs(shares - prev_shares).sum()),
    )
    return market, funds, noise, report


class Simulation:
    """
    One seeded simulation run.

    Owns its random generator, market, noise trader and funds exclusively,
    so independent runs can execute in parallel.
    """

    def __init__(self, params: SimParams, seed=None,
                 rng: Optional[np.random.Generator] = None,
                 root_method: str = DEFAULT_ROOT_METHOD):
        """
        Initialize the simulation.

        Args:
            params: Validated or raw parameter set
            seed: Seed (int or SeedSequence) for a fresh generator
            rng: Generator to use instead of seed
            root_method: Clearing root finder
        """
        self.params = params.validate()
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.policy = make_policy(params)
        self.root_method = root_method
        self.noise = NoiseState.stationary(params)
        self.market = MarketState(price=params.V, tau=params.tau)
        self.funds = [FundState.newborn(beta, params) for beta in params.betas]

    def step(self) -> StepReport:
        self.market, self.funds, self.noise, report = step(
            self.market, self.funds, self.noise, self.policy, self.rng, self.root_method
        )
        return report

    def run(self, steps: int, recorder=None) -> List[StepReport]:
        """
        Run a number of steps.

        Args:
            steps: Number of timesteps
            recorder: Optional object whose record(report) receives each report;
                when given, reports are not kept in memory

        Returns:
            The step reports (empty when a recorder is given)
        """
        reports = []
        for _ in range(steps):
            report = self.step()
            if recorder is not None:
                recorder.record(report)
            else:
                reports.append(report)
        return reports
