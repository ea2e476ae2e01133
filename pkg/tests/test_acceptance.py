"""
Desk-scale behaviour checks.

These run a full three-scheme sweep (15 leverage caps x 20 seeds x 5e4
steps) and are deselected by default. Run them with:

    pytest -m acceptance
"""

import os

import numpy as np
import pytest
from scipy import stats

from config.config import DEFAULT_SEED
from src.models import Scheme, SimParams
from src.runner import ExperimentConfig, sweep
from src.utils import resolve_workers

pytestmark = pytest.mark.acceptance

GRID = tuple(float(k) for k in range(1, 16))
RUNS = 20
STEPS = 50_000


def _workers() -> int:
    return resolve_workers(None, os.cpu_count() or 1)


@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    config = ExperimentConfig(
        lambda_max_grid=GRID,
        schemes=tuple(Scheme),
        n_runs=RUNS,
        steps=STEPS,
        master_seed=DEFAULT_SEED,
        output_dir=tmp_path_factory.mktemp("desk"),
        emit=("runs", "aggregate"),
        workers=_workers(),
        root_method="newton",
    )
    return sweep(config).aggregate


@pytest.fixture(scope="module")
def noise_only(tmp_path_factory):
    config = ExperimentConfig(
        params=SimParams.noise_only(),
        lambda_max_grid=(15.0,),
        schemes=(Scheme.UNREGULATED,),
        n_runs=RUNS,
        steps=STEPS,
        master_seed=DEFAULT_SEED,
        output_dir=tmp_path_factory.mktemp("noise"),
        emit=("runs", "aggregate"),
        workers=_workers(),
        root_method="newton",
    )
    return sweep(config).aggregate.iloc[0]


def _series(table, scheme: Scheme, column: str) -> np.ndarray:
    rows = table[table["scheme"] == scheme.value].sort_values("lambda_max")
    return rows[f"{column}_mean"].to_numpy(dtype=float)


def _at(table, scheme: Scheme, lambda_max: float, column: str) -> float:
    rows = table[(table["scheme"] == scheme.value) & (table["lambda_max"] == lambda_max)]
    return float(rows[f"{column}_mean"].iloc[0])


def test_no_failed_runs(desk):
    assert (desk["n_failed"] == 0).all()


def test_fat_tails_at_high_leverage(desk, noise_only):
    baseline = noise_only["return_excess_kurtosis_mean"]
    levered = _at(desk, Scheme.UNREGULATED, 15.0, "return_excess_kurtosis")
    assert levered >= 3.0 * abs(baseline)
    assert levered > baseline


def test_long_only_returns_are_negatively_skewed(tmp_path):
    config = ExperimentConfig(
        params=SimParams(short_selling=False),
        lambda_max_grid=(15.0,),
        schemes=(Scheme.UNREGULATED,),
        n_runs=RUNS,
        steps=STEPS,
        master_seed=DEFAULT_SEED,
        output_dir=tmp_path,
        emit=("runs", "aggregate"),
        workers=_workers(),
        root_method="newton",
    )
    assert sweep(config).aggregate.iloc[0]["return_skew_mean"] < 0.0


def test_unregulated_volatility_falls_with_leverage(desk):
    volatility = _series(desk, Scheme.UNREGULATED, "volatility_index")[:10]
    rho, _ = stats.spearmanr(GRID[:10], volatility)
    assert rho <= -0.8
    assert 0.4 <= volatility[9] / volatility[0] <= 0.7


def test_volume_grows_with_leverage(desk):
    assert (_at(desk, Scheme.UNREGULATED, 3.0, "avg_volume")
            >= 2.5 * _at(desk, Scheme.UNREGULATED, 1.0, "avg_volume"))


def test_average_leverage_shape(desk):
    leverage = _series(desk, Scheme.UNREGULATED, "avg_leverage")
    assert 0.2 <= leverage[0] <= 0.6
    peak = int(np.argmax(leverage))
    assert 3 <= GRID[peak] <= 7
    assert leverage[peak] < 2.5
    plateau = leverage[np.array(GRID) > 10.0]
    assert np.all((plateau >= 1.0) & (plateau <= 2.0))


@pytest.mark.parametrize("scheme", [Scheme.BASLE, Scheme.PERFECT_HEDGE])
def test_regulated_defaults_cross_unregulated(desk, scheme):
    regulated = _series(desk, scheme, "default_prob_annual")
    unregulated = _series(desk, Scheme.UNREGULATED, "default_prob_annual")
    grid = np.array(GRID)
    assert np.all(regulated[grid >= 13.0] > unregulated[grid >= 13.0])
    assert np.all(regulated[grid <= 4.0] <= unregulated[grid <= 4.0])


def test_bank_losses_ordering(desk):
    unregulated = _series(desk, Scheme.UNREGULATED, "bank_losses_annual")
    basle = _series(desk, Scheme.BASLE, "bank_losses_annual")
    hedge = _series(desk, Scheme.PERFECT_HEDGE, "bank_losses_annual")
    assert np.all(hedge == 0.0)
    assert np.all(unregulated >= basle)
    assert np.all(basle >= hedge)


def test_investor_return_peaks_are_ordered(desk):
    peaks = {scheme: GRID[int(np.argmax(_series(desk, scheme, "r_adj")))] for scheme in Scheme}
    assert peaks[Scheme.UNREGULATED] < peaks[Scheme.PERFECT_HEDGE] < peaks[Scheme.BASLE]
    assert abs(peaks[Scheme.UNREGULATED] - 4.0) <= 2.0
    assert abs(peaks[Scheme.PERFECT_HEDGE] - 6.0) <= 2.0
    assert abs(peaks[Scheme.BASLE] - 8.0) <= 2.0
