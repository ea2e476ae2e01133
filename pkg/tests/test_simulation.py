import math

import numpy as np
import pytest

from config.config import CLEARING_RESIDUAL, LEVERAGE_TOLERANCE, SELF_FINANCING_TOLERANCE
from src.models import FundStatus, NoiseState, Scheme, SimParams
from src.regulation import BaslePolicy, UnregulatedPolicy
from src.options import PerfectHedgePolicy
from src.simulation import (
    Simulation, flow_gain, handle_default_and_reintro, investor_flow, make_policy, ou_step,
    performance_update, redeemable_cash, update_wealth
)

from conftest import make_fund


def test_ou_fixed_point():
    params = SimParams(sigma_n=0.0)
    noise = NoiseState.stationary(params)
    assert ou_step(noise, 1.7, params).log_xi == pytest.approx(params.log_fundamental_demand)


def test_ou_mean_reversion_step():
    params = SimParams(sigma_n=0.0, rho=0.99)
    noise = NoiseState(log_xi=params.log_fundamental_demand + 1.0)
    assert ou_step(noise, 0.0, params).log_xi == pytest.approx(
        params.log_fundamental_demand + 0.99)


def test_ou_increment_statistics(default_params):
    rng = np.random.default_rng(2024)
    noise = NoiseState.stationary(default_params)
    draws = rng.standard_normal(200_000)
    path = np.empty(draws.size)
    for k, draw in enumerate(draws):
        noise = ou_step(noise, draw, default_params)
        path[k] = noise.log_xi
    expected = default_params.sigma_n * math.sqrt(2.0 / (1.0 + default_params.rho))
    assert np.std(np.diff(path)) == pytest.approx(expected, rel=0.05)
    assert np.mean(path) == pytest.approx(default_params.log_fundamental_demand, rel=0.01)


def test_update_wealth_identity_case(default_params):
    fund = make_fund(default_params, shares=1e6, cash=-5e5)
    update_wealth(fund, 1.0, 1.0, 0.0, 0.0)
    assert fund.wealth == pytest.approx(5e5)


def test_update_wealth_trading_loss(default_params):
    fund = make_fund(default_params, shares=1e6, cash=1e6)
    update_wealth(fund, 1.0, 0.95, 0.0, 0.0)
    assert fund.wealth == pytest.approx(2e6 - 5e4)
    assert fund.cash == pytest.approx(fund.wealth - fund.shares * 0.95)


def test_update_wealth_rebalances_self_financing(default_params):
    fund = make_fund(default_params, shares=1e6, cash=1e6)
    update_wealth(fund, 1.0, 1.05, 1e4, -150.0, new_shares=3e6)
    assert fund.wealth == pytest.approx(2e6 + 5e4 + 1e4 - 150.0)
    assert fund.shares == 3e6
    drift = abs(fund.wealth - (fund.shares * 1.05 + fund.cash))
    assert drift <= SELF_FINANCING_TOLERANCE * fund.wealth


def test_performance_update():
    perf = performance_update(0.0, 1e6, 2e6, 1.0, 1.1, 0.1)
    assert perf == pytest.approx(0.1 * 0.05)


@pytest.mark.parametrize("excess, redeemable, expected", [
    (0.0, 1e6, 0.0),
    (0.1, 1e6, 1.5e4),
    (-100.0, 1e6, -1e6),
    (-0.2, -5e4, 0.0),
])
def test_investor_flow(default_params, excess, redeemable, expected):
    flow = investor_flow(default_params.r_b + excess, redeemable, default_params)
    assert flow == pytest.approx(expected)
    assert flow >= -max(0.0, redeemable)


def test_investor_flow_on_arrays(default_params):
    flows = investor_flow(np.array([default_params.r_b, default_params.r_b + 0.1]),
                          np.array([1e6, 1e6]), default_params)
    np.testing.assert_allclose(flows, [0.0, 1.5e4])


@pytest.mark.parametrize("shares, cash, perf", [
    (1e6, 1e6, 0.0),
    (3e6, -1e6, 0.02),
    (-1e6, 3e6, -0.05),
    (2e6, -1.5e6, -2.0),
])
@pytest.mark.parametrize("price", [0.6, 0.95, 1.2])
def test_flow_gain_matches_explicit_flow(default_params, shares, cash, perf, price):
    fund = make_fund(default_params, shares=shares, cash=cash)
    fund.perf_ema = perf
    gain = flow_gain([fund], 1.0, default_params)

    redeemable = shares * price + cash
    perf_new = performance_update(perf, shares, fund.wealth, 1.0, price, default_params.a)
    expected = redeemable + investor_flow(perf_new, redeemable, default_params)
    if redeemable > 0.0:
        actual = redeemable * max(0.0, gain.k0[0] + gain.k1[0] * price)
    else:
        actual = redeemable
    assert actual == pytest.approx(expected, rel=1e-12, abs=1e-6)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_redeemable_cash_all_cash_fund(scheme):
    params = SimParams(scheme=scheme)
    fund = make_fund(params, shares=0.0, cash=5e5)
    assert redeemable_cash(fund, 0.9, make_policy(params)) == pytest.approx(5e5)


def test_redeemable_cash_unregulated():
    params = SimParams()
    fund = make_fund(params, shares=1e6, cash=-8e5)
    assert redeemable_cash(fund, 0.9, UnregulatedPolicy(params)) == pytest.approx(1e5)


def test_redeemable_cash_basle_long():
    params = SimParams(scheme=Scheme.BASLE, S=0.00015)
    fund = make_fund(params, shares=1e6, cash=-8e5)
    assert redeemable_cash(fund, 0.9, BaslePolicy(params)) == pytest.approx(99_880.0)


def test_redeemable_cash_hedge_long():
    params = SimParams(scheme=Scheme.PERFECT_HEDGE)
    fund = make_fund(params, shares=1e6, cash=-8e5)
    fund.premium = 0.002
    assert redeemable_cash(fund, 0.9, PerfectHedgePolicy(params)) == pytest.approx(1e5 - 2e3)


def test_make_policy_matches_scheme():
    assert isinstance(make_policy(SimParams(scheme="basle")), BaslePolicy)
    assert isinstance(make_policy(SimParams(scheme="perfect_hedge")), PerfectHedgePolicy)
    assert isinstance(make_policy(SimParams()), UnregulatedPolicy)


def test_shutdown_below_critical_wealth(default_params):
    fund = make_fund(default_params, shares=0.0, cash=1.5e5)
    outcome = handle_default_and_reintro(fund, 1.0, default_params)
    assert outcome.failed
    assert outcome.bank_loss == 0.0
    assert outcome.payout == pytest.approx(1.5e5)
    assert fund.status is FundStatus.DEFAULTED
    assert fund.steps_remaining == default_params.T_reintro
    assert fund.shares == 0.0 and fund.wealth == 0.0


def test_default_with_bank_loss(default_params):
    fund = make_fund(default_params, shares=1e6, cash=-6e5, price=0.5)
    assert fund.wealth == pytest.approx(-1e5)
    outcome = handle_default_and_reintro(fund, 0.5, default_params)
    assert outcome.failed
    assert outcome.bank_loss == pytest.approx(1e5)
    assert outcome.payout == 0.0
    assert fund.status is FundStatus.DEFAULTED


def test_hedged_default_leaves_bank_whole():
    params = SimParams(scheme=Scheme.PERFECT_HEDGE)
    fund = make_fund(params, shares=1e6, cash=-6e5, price=0.5)
    outcome = handle_default_and_reintro(fund, 0.5, params, cost=-2e4)
    assert outcome.bank_loss == 0.0
    assert outcome.unpaid_premium == pytest.approx(2e4)


def test_zero_wealth_is_not_a_default(default_params):
    fund = make_fund(default_params, shares=0.0, cash=0.0)
    outcome = handle_default_and_reintro(fund, 1.0, default_params)
    assert outcome.bank_loss == 0.0
    # still below the survival floor, so the fund is shut down
    assert outcome.failed


def test_healthy_fund_is_untouched(default_params):
    fund = make_fund(default_params, shares=1e6, cash=1e6)
    outcome = handle_default_and_reintro(fund, 1.0, default_params)
    assert not outcome.failed and not outcome.reborn
    assert fund.active


def test_reintroduction_after_countdown(default_params):
    fund = make_fund(default_params, beta=35.0)
    fund.status = FundStatus.DEFAULTED
    fund.steps_remaining = 1
    fund.wealth = fund.cash = 0.0
    fund.perf_ema = -0.3
    outcome = handle_default_and_reintro(fund, 0.8, default_params)
    assert outcome.reborn
    assert fund.active
    assert fund.beta == 35.0
    assert fund.wealth == default_params.W0
    assert fund.perf_ema == 0.0
    assert fund.cum_flows == 0.0 and fund.cum_expenses == 0.0


def test_noise_only_price_is_noise_demand_over_supply(noise_params):
    sim = Simulation(noise_params, seed=3)
    for _ in range(20):
        report = sim.step()
        assert report.price == pytest.approx(sim.noise.xi / noise_params.N, rel=1e-10)
        assert report.shares_traded == 0.0


def test_long_only_fund_sits_out_overpricing():
    params = SimParams(num_funds=1, betas=(10.0,), short_selling=False, sigma_n=0.0)
    sim = Simulation(params, seed=0)
    sim.noise = NoiseState(log_xi=params.log_fundamental_demand + 1.0)
    report = sim.step()
    assert report.price == pytest.approx(math.exp(0.99), rel=1e-10)
    assert report.demand[0] == 0.0
    assert report.flow[0] == pytest.approx(0.15 * (0.0 - 0.003) * 2e6)
    assert report.wealth[0] == pytest.approx(2e6 + report.flow[0])


def test_fixed_seed_is_deterministic(default_params):
    first = Simulation(default_params, seed=7).run(100)
    second = Simulation(default_params, seed=7).run(100)
    assert [r.price for r in first] == [r.price for r in second]
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.wealth, b.wealth)
        np.testing.assert_array_equal(a.demand, b.demand)


def test_different_seeds_differ(default_params):
    first = Simulation(default_params, seed=1).run(20)
    second = Simulation(default_params, seed=2).run(20)
    assert [r.price for r in first] != [r.price for r in second]


@pytest.mark.parametrize("scheme", list(Scheme))
@pytest.mark.parametrize("lambda_max", [3.0, 15.0])
def test_step_invariants(scheme, lambda_max):
    params = SimParams(scheme=scheme, lambda_max=lambda_max)
    sim = Simulation(params, seed=11)
    for _ in range(300):
        report = sim.step()
        price = report.price
        assert price > 0.0
        assert report.bank_loss_this_step >= 0.0
        assert report.shares_traded >= 0.0
        assert 1.0 <= report.lambda_adapt <= lambda_max
        for fund in sim.funds:
            if not fund.active:
                continue
            drift = abs(fund.wealth - (fund.shares * price + fund.cash))
            assert drift <= SELF_FINANCING_TOLERANCE * max(1.0, abs(fund.wealth))
            assert fund.leverage(price) <= report.lambda_adapt + LEVERAGE_TOLERANCE
        if report.defaults_this_step == 0:
            residual = sim.noise.xi / price + report.demand.sum() - params.N
            assert abs(residual) <= CLEARING_RESIDUAL * params.N
        if scheme is Scheme.PERFECT_HEDGE:
            assert report.bank_loss_this_step == 0.0
        if scheme is Scheme.UNREGULATED:
            assert report.lambda_adapt == lambda_max


def test_unit_lambda_disables_shorting():
    params = SimParams(lambda_max=1.0, short_selling=True)
    sim = Simulation(params, seed=5)
    for _ in range(200):
        report = sim.step()
        assert np.all(report.demand >= 0.0)


def test_run_with_recorder_keeps_no_reports(default_params):
    seen = []

    class Recorder:
        def record(self, report):
            seen.append(report.t)

    assert Simulation(default_params, seed=1).run(15, recorder=Recorder()) == []
    assert seen == list(range(1, 16))


@pytest.mark.parametrize("scheme", list(Scheme))
def test_root_methods_give_the_same_path(scheme):
    params = SimParams(scheme=scheme, lambda_max=8.0)
    paths = {
        method: [r.price for r in Simulation(params, seed=5, root_method=method).run(40)]
        for method in ("newton", "brentq")
    }
    np.testing.assert_allclose(paths["newton"], paths["brentq"], rtol=1e-8)
