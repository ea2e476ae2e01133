import numpy as np
import pytest

from config.config import CLEARING_RESIDUAL, ROOT_METHODS
from src.clearing import (
    ClearingFailure, ClearingProblem, FlowGain, FundBook, aggregate_excess_demand,
    clear_price, fund_demand, sentinel_bracket
)
from src.models import SimParams

from conftest import make_fund

N = 1e9


def _problem(xi, funds=None, lambda_adapt=5.0, short_selling=True, bracket=(0.02, 50.0),
             **kwargs):
    return ClearingProblem(xi=xi, funds=funds if funds is not None else FundBook.empty(),
                           lambda_adapt=lambda_adapt, N=N, short_selling=short_selling,
                           bracket=bracket, **kwargs)


def test_zero_mispricing_means_zero_demand():
    fund = make_fund(SimParams())
    assert fund_demand(fund, 1.0, 5.0, short_selling=True) == 0.0
    assert fund_demand(fund, 1.0, 5.0, short_selling=False) == 0.0


def test_linear_branch_demand():
    fund = make_fund(SimParams())
    demand = fund_demand(fund, 0.98, 5.0, short_selling=False, wealth=2e6)
    assert demand == pytest.approx(10 * 0.02 * 2e6 / 0.98)
    assert demand * 0.98 == pytest.approx(0.4 * 2e6)


def test_long_cap_branch_demand():
    fund = make_fund(SimParams())
    assert fund_demand(fund, 0.4, 5.0, short_selling=False, wealth=2e6) == pytest.approx(2.5e7)


def test_short_cap_branch_demand():
    fund = make_fund(SimParams())
    demand = fund_demand(fund, 1.5, 5.0, short_selling=True, wealth=2e6)
    assert demand == pytest.approx((1 - 5) * 2e6 / 1.5)


def test_long_only_floor_and_unit_cap():
    fund = make_fund(SimParams())
    assert fund_demand(fund, 1.5, 5.0, short_selling=False, wealth=2e6) == 0.0
    # with lambda = 1 the short branch is closed even when shorting is allowed
    assert fund_demand(fund, 1.5, 1.0, short_selling=True, wealth=2e6) == 0.0


def test_symmetric_short_variant():
    fund = make_fund(SimParams())
    demand = fund_demand(fund, 1.5, 5.0, short_selling=True, wealth=2e6, symmetric_short=True)
    assert demand == pytest.approx(-5 * 2e6 / 1.5)


def test_insolvent_fund_demands_nothing():
    fund = make_fund(SimParams())
    assert fund_demand(fund, 0.5, 5.0, short_selling=True, wealth=0.0) == 0.0
    assert fund_demand(fund, 0.5, 5.0, short_selling=True, wealth=-1e5) == 0.0


@pytest.mark.parametrize("kink", [0.5, 1.4])
def test_demand_is_continuous_at_kinks(kink):
    # beta = 10, lambda = 5: long kink at m = 0.5, short kink at m = -0.4
    fund = make_fund(SimParams())
    eps = 1e-9
    below = fund_demand(fund, kink - eps, 5.0, short_selling=True, wealth=2e6)
    above = fund_demand(fund, kink + eps, 5.0, short_selling=True, wealth=2e6)
    assert abs(below - above) < 1e-6 * abs(below)


def test_book_demand_is_vectorized():
    book = FundBook(beta=np.array([5.0, 50.0]), shares=np.zeros(2), cash=np.full(2, 2e6))
    demand = fund_demand(book, 0.9, 5.0, short_selling=True)
    np.testing.assert_allclose(demand, [5 * 0.1 * 2e6 / 0.9, 5 * 2e6 / 0.9])


def test_noise_only_excess_demand():
    problem = _problem(9.5e8)
    assert aggregate_excess_demand(problem, 0.95) == pytest.approx(0.0, abs=1e-6)
    assert aggregate_excess_demand(problem, 0.90) > 0.0


def test_noise_only_clearing_price():
    price = clear_price(_problem(9.5e8))
    assert price == pytest.approx(0.95, rel=1e-10)


def test_single_linear_fund_clearing_price(single_fund_book):
    price = clear_price(_problem(9.5e8, single_fund_book))
    expected = (9.5e8 + 10 * 1.0 * 2e6) / (1e9 + 10 * 2e6)
    assert price == pytest.approx(expected, rel=1e-10)
    # linear branch is self-consistent
    assert 1.0 - price < 5.0 / 10.0


@pytest.mark.parametrize("method", ROOT_METHODS)
def test_clearing_residual_contract(method):
    book = FundBook(beta=np.arange(5.0, 55.0, 5.0), shares=np.full(10, 1e6),
                    cash=np.full(10, -5e5))
    problem = _problem(1.02e9, book, lambda_adapt=10.0, method=method)
    price = clear_price(problem)
    assert price > 0.0
    assert abs(aggregate_excess_demand(problem, price)) <= CLEARING_RESIDUAL * N


def test_excess_demand_monotone_long_only():
    book = FundBook(beta=np.arange(5.0, 55.0, 5.0), shares=np.zeros(10), cash=np.full(10, 2e6))
    problem = _problem(9.8e8, book, lambda_adapt=10.0, short_selling=False)
    grid = np.linspace(0.05, 3.0, 100)
    excess = np.array([aggregate_excess_demand(problem, p) for p in grid])
    assert np.all(np.diff(excess) <= 0.0)


def test_bracket_is_expanded(single_fund_book):
    price = clear_price(_problem(9.5e8, single_fund_book, bracket=(2.0, 3.0),
                                 method="bisect"))
    assert price == pytest.approx((9.5e8 + 2e7) / 1.02e9, rel=1e-10)


def test_clearing_failure_carries_diagnostics():
    problem = ClearingProblem(xi=1e30, funds=FundBook.empty(), lambda_adapt=3.0, N=1.0,
                              short_selling=True, bracket=(1.0, 2.0), method="bisect")
    with pytest.raises(ClearingFailure) as info:
        clear_price(problem)
    assert info.value.xi == 1e30
    assert info.value.num_funds == 0
    assert info.value.excess_lo > 0.0 and info.value.excess_hi > 0.0
    assert "bracket" in str(info.value)


@pytest.mark.parametrize("kwargs", [
    {"bracket": (1.0, 1.0)},
    {"bracket": (-1.0, 1.0)},
    {"tol": 0.0},
    {"method": "secant"},
])
def test_invalid_problem_is_rejected(kwargs):
    args = {"bracket": (0.5, 2.0)}
    args.update(kwargs)
    with pytest.raises(ValueError):
        _problem(9.5e8, **args)


def test_nonpositive_noise_demand_is_rejected():
    with pytest.raises(ValueError, match="xi"):
        _problem(0.0)


def _mixed_book():
    # long fund insolvent below p = 0.5, short fund insolvent above p = 3
    return FundBook(beta=np.array([5.0, 50.0, 20.0]),
                    shares=np.array([1e6, -1e6, 0.0]),
                    cash=np.array([-5e5, 3e6, 2e6]))


def _mixed_gain():
    return FlowGain(k0=np.array([1.0, 1.2, 0.9]), k1=np.array([0.1, -0.1, 0.0]))


@pytest.mark.parametrize("p", [0.3, 0.7, 0.95, 1.3, 2.5, 3.5])
def test_scalar_excess_matches_book_demand(p):
    problem = _problem(1.02e9, _mixed_book(), flow_gain=_mixed_gain())
    expected = problem.xi / p - N + float(np.sum(problem.demands(p)))
    assert aggregate_excess_demand(problem, p) == pytest.approx(expected, rel=1e-12, abs=1e-3)


@pytest.mark.parametrize("p", [0.3, 0.7, 0.95, 1.3, 2.5])
def test_scaled_excess_slope_matches_finite_difference(p):
    problem = _problem(1.02e9, _mixed_book(), flow_gain=_mixed_gain())
    h = 1e-6
    numeric = (problem.scaled_excess(p + h)[0] - problem.scaled_excess(p - h)[0]) / (2 * h)
    assert problem.scaled_excess(p)[1] == pytest.approx(numeric, rel=1e-5)


def test_flow_gain_wealth():
    problem = _problem(1.02e9, _mixed_book(), flow_gain=_mixed_gain())
    wealth = problem.wealth(0.4)
    # redeemable is -1e5 for the long fund: no flow, wealth stays negative
    assert wealth[0] == pytest.approx(-1e5)
    assert wealth[1] == pytest.approx(2.6e6 * (1.2 - 0.04))
    assert wealth[2] == pytest.approx(2e6 * 0.9)


def test_book_folds_costs_into_cash(default_params):
    funds = [make_fund(default_params, shares=1e6, cash=-5e5), make_fund(default_params)]
    book = FundBook.from_funds(funds, costs=[-100.0, 0.0])
    np.testing.assert_allclose(book.cash, [-5e5 - 100.0, 2e6])


@pytest.mark.parametrize("xi", [8e8, 1.0e9, 1.3e9])
def test_sentinel_bracket_signs(xi):
    problem = _problem(xi, _mixed_book(), flow_gain=_mixed_gain(), lambda_adapt=15.0)
    lo, hi = sentinel_bracket(problem)
    assert aggregate_excess_demand(problem, lo) > 0.0
    assert aggregate_excess_demand(problem, hi) < 0.0


@pytest.mark.parametrize("lambda_adapt", [0.5, 1.0, 5.0, 15.0])
@pytest.mark.parametrize("xi", [7e8, 1.0e9, 1.4e9])
def test_newton_agrees_with_brentq(lambda_adapt, xi):
    book = FundBook(beta=np.arange(5.0, 55.0, 5.0), shares=np.linspace(-2e6, 4e6, 10),
                    cash=np.linspace(4e6, -1e6, 10))
    gain = FlowGain(k0=np.linspace(0.9, 1.1, 10), k1=np.linspace(-0.05, 0.05, 10))
    prices = {
        method: clear_price(_problem(xi, book, lambda_adapt=lambda_adapt, flow_gain=gain,
                                     method=method))
        for method in ("newton", "brentq")
    }
    assert prices["newton"] == pytest.approx(prices["brentq"], rel=1e-10)


def test_newton_ignores_a_far_initial_bracket(single_fund_book):
    price = clear_price(_problem(9.5e8, single_fund_book, bracket=(40.0, 60.0),
                                 method="newton"))
    assert price == pytest.approx((9.5e8 + 2e7) / 1.02e9, rel=1e-10)


def test_loose_tolerance_residual_is_a_failure():
    problem = _problem(9.5e8, tol=0.5, method="bisect")
    with pytest.raises(ClearingFailure, match="Residual"):
        clear_price(problem)
