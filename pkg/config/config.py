"""
Configuration settings for the leverage regulation simulator.

This module centralizes all default parameters including the market and
fund calibration, solver tolerances, indicator conventions and output paths.
"""

import logging
from pathlib import Path

# Base Directory
BASE_DIR = Path(__file__).resolve().parent.parent

# Directory Paths
OUTPUT_DIR = BASE_DIR / "results"
CONFIG_DIR = BASE_DIR / "config"
DESK_CONFIG = CONFIG_DIR / "desk.yaml"
BASELINE_CONFIG = CONFIG_DIR / "baseline.yaml"

# Output Layout
RUNS_SUBDIR = "runs"
HISTOGRAM_SUBDIR = "histograms"
TRACE_SUBDIR = "traces"
PLOT_SUBDIR = "plots"
AGGREGATE_FILE = "aggregate.csv"

# Market Parameters
NUM_FUNDS = 10
BETAS = tuple(float(b) for b in range(5, 55, 5))
RHO = 0.99
SIGMA_N = 0.035
FUNDAMENTAL_VALUE = 1.0
TOTAL_SUPPLY = 1e9

# Fund Investor Parameters
BENCHMARK_RETURN = 0.003
PERF_EMA_WEIGHT = 0.1
FLOW_SENSITIVITY = 0.15

# Fund Lifecycle Parameters
INITIAL_WEALTH = 2e6
CRITICAL_WEALTH = 2e5
REINTRO_STEPS = 100

# Regulation Parameters
VOL_WINDOW = 10
VOL_SCALE = 4.5
BENCHMARK_VOL = 0.01175
SPREAD = 0.00015
BENCHMARK_RATE = 0.0
LAMBDA_MAX = 10.0

# Calibration: one step is five trading days, 250 trading days per year
STEPS_PER_YEAR = 50

# Clearing Solver
BRACKET_FACTOR = 50.0
MAX_BRACKET_EXPANSIONS = 10
PRICE_TOLERANCE = 1e-12
CLEARING_RESIDUAL = 1e-8
ROOT_METHODS = ("newton", "bisect", "brentq")
DEFAULT_ROOT_METHOD = "newton"

# Hedge Leverage Solver
HEDGE_LAMBDA_RTOL = 1e-13
HEDGE_RESIDUAL = 1e-10
OPTION_MATURITY = 1.0
RISK_FREE_RATE = 0.0

# Numerical Tolerances
LEVERAGE_TOLERANCE = 1e-9
SELF_FINANCING_TOLERANCE = 1e-6

# Manager Fees (indicator only, never booked)
MANAGEMENT_FEE = 0.02
PERFORMANCE_FEE = 0.20

# Return Histogram
HISTOGRAM_BINS = 201

# Adaptive Leverage Curve (volatility in units of sigma_b)
LAMBDA_CURVE_POINTS = 101
LAMBDA_CURVE_MAX_RATIO = 5.0

# Experiment Defaults
LAMBDA_GRID = tuple(float(x) for x in range(1, 21))
SCHEME_NAMES = ("unregulated", "basle", "perfect_hedge")
DEFAULT_RUNS = 20
DEFAULT_STEPS = 50_000
DEFAULT_SEED = 20100817
EMIT_KINDS = ("steps", "runs", "aggregate", "histogram")
DEFAULT_EMIT = ("runs", "aggregate", "histogram")

# Command Line Exit Codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Parallelism
WORKERS_ENV_VAR = "LEVSIM_WORKERS"

# Output Schema
SCHEMA_VERSION = 1
SEED_RULE = "SeedSequence(master_seed, spawn_key=(scheme_code, round(1000*lambda_max), run_index))"

# Logging
LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def setup_logging(level: int = logging.INFO) -> None:
    """Install the process-wide log handler."""
    logging.basicConfig(level=level, format=LOG_FORMAT)


# Ensure all directories exist
def ensure_directories(output_dir: Path = OUTPUT_DIR) -> None:
    """Create all output directories if they don't exist."""
    directories = [
        output_dir,
        output_dir / RUNS_SUBDIR,
        output_dir / HISTOGRAM_SUBDIR,
        output_dir / TRACE_SUBDIR,
        output_dir / PLOT_SUBDIR,
    ]
    for directory in directories:
        directory.mkdir(parents=True, exist_ok=True)
