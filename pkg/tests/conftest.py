"""Shared fixtures for the simulator test suite."""

import numpy as np
import pytest

from src.clearing import FundBook
from src.models import FundState, Scheme, SimParams


@pytest.fixture
def default_params():
    """Calibration table values with lambda_max = 10."""
    return SimParams().validate()


@pytest.fixture
def noise_params():
    return SimParams.noise_only().validate()


@pytest.fixture
def single_fund_book():
    """One all-cash fund with beta = 10 and W = 2e6."""
    return FundBook(beta=np.array([10.0]), shares=np.array([0.0]), cash=np.array([2e6]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_fund(params: SimParams, shares: float = 0.0, cash: float = 2e6,
              price: float = 1.0, beta: float = 10.0) -> FundState:
    """Active fund whose wealth satisfies the self-financing identity at price."""
    fund = FundState.newborn(beta, params, price=price)
    fund.shares = shares
    fund.cash = cash
    fund.wealth = shares * price + cash
    return fund


def scheme_params(scheme: Scheme, **overrides) -> SimParams:
    return SimParams(scheme=scheme, **overrides).validate()
