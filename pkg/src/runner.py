"""
Experiment runner.

This module loads experiment configurations, derives per-run seeds, runs
seeded simulations, sweeps the (scheme, lambda_max) grid across worker
processes, and writes the per-run, aggregate, histogram, trace and plot
tables.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml

from config.config import (
    AGGREGATE_FILE, DEFAULT_EMIT, DEFAULT_ROOT_METHOD, DEFAULT_RUNS, DEFAULT_SEED,
    DEFAULT_STEPS, EMIT_KINDS, HISTOGRAM_BINS, HISTOGRAM_SUBDIR, LAMBDA_CURVE_MAX_RATIO,
    LAMBDA_CURVE_POINTS, LAMBDA_GRID, OUTPUT_DIR, PLOT_SUBDIR, ROOT_METHODS, RUNS_SUBDIR,
    SCHEMA_VERSION, SCHEME_NAMES, SEED_RULE, TRACE_SUBDIR, ensure_directories
)
from src import __version__
from src.clearing import ClearingFailure
from src.metrics import RunHistory, RunMetrics, rebin_histograms, run_metrics
from src.models import InvalidParameters, Scheme, SimParams
from src.options import HedgeParams, adaptive_lambda_hedge
from src.regulation import adaptive_lambda_basle
from src.simulation import Simulation
from src.utils import (
    apply_overrides, config_hash, load_yaml, read_manifest, read_table, write_table
)

logger = logging.getLogger(__name__)

CONFIG_KEYS = ("params", "lambda_max_grid", "schemes", "n_runs", "steps", "master_seed",
               "output_dir", "emit", "workers", "root_method")

# plot kind -> aggregate indicator
PLOT_KINDS = {
    "volatility": "volatility_index",
    "volume": "avg_volume",
    "leverage": "avg_leverage",
    "interest": "effective_interest_annual",
    "default": "default_prob_annual",
    "return": "r_adj",
    "profit": "manager_profit",
    "bank_loss": "bank_losses_annual",
}
RETURN_DIST = "returnDist"
RETURN_DIST_LAMBDA = 15.0
LAMBDA_CURVE = "lambdaCurve"
RETURN_COMPARE = "returnCompare"

STATUS_OK = "ok"
STATUS_FAILED = "failed"


@dataclass
class ExperimentConfig:
    """A sweep over lambda_max and regulation schemes."""

    params: SimParams = field(default_factory=SimParams)
    lambda_max_grid: Tuple[float, ...] = LAMBDA_GRID
    schemes: Tuple[Scheme, ...] = tuple(Scheme.parse(s) for s in SCHEME_NAMES)
    n_runs: int = DEFAULT_RUNS
    steps: int = DEFAULT_STEPS
    master_seed: int = DEFAULT_SEED
    output_dir: Path = OUTPUT_DIR
    emit: Tuple[str, ...] = DEFAULT_EMIT
    workers: int = 1
    root_method: str = DEFAULT_ROOT_METHOD

    def __post_init__(self):
        for name in ("lambda_max_grid", "schemes", "emit"):
            value = getattr(self, name)
            if isinstance(value, (str, int, float)):
                setattr(self, name, (value,))
        self.lambda_max_grid = tuple(float(x) for x in self.lambda_max_grid)
        self.schemes = tuple(Scheme.parse(s) for s in self.schemes)
        self.emit = tuple(str(e) for e in self.emit)
        self.output_dir = Path(self.output_dir)

    def validate(self) -> "ExperimentConfig":
        """
        Check the sweep invariants and every cell's parameter set.

        Raises:
            InvalidParameters: naming the first offending field
        """
        if not self.lambda_max_grid:
            raise InvalidParameters("lambda_max_grid must not be empty")
        if len(set(self.lambda_max_grid)) != len(self.lambda_max_grid):
            raise InvalidParameters("lambda_max_grid must not repeat values")
        if not self.schemes:
            raise InvalidParameters("schemes must not be empty")
        if len(set(self.schemes)) != len(self.schemes):
            raise InvalidParameters("schemes must not repeat values")
        if self.n_runs < 1:
            raise InvalidParameters("n_runs must be at least 1")
        if self.steps < self.params.tau + 2:
            raise InvalidParameters(f"steps must be at least tau+2={self.params.tau + 2}")
        unknown = [e for e in self.emit if e not in EMIT_KINDS]
        if unknown:
            raise InvalidParameters(
                f"emit has unknown kinds {unknown}; valid kinds: {', '.join(EMIT_KINDS)}"
            )
        if self.root_method not in ROOT_METHODS:
            raise InvalidParameters(
                f"root_method must be one of {', '.join(ROOT_METHODS)}, got '{self.root_method}'"
            )
        if self.workers < 1:
            raise InvalidParameters("workers must be at least 1")
        for cell in self.cells():
            cell_params(self.params, cell).validate()
        return self

    def cells(self) -> List["Cell"]:
        """Cells in deterministic order: scheme-major, then lambda_max."""
        return [Cell(scheme, lam) for scheme in self.schemes for lam in self.lambda_max_grid]

    def provenance(self) -> Dict[str, Any]:
        """Settings that determine results; excludes output location and workers."""
        return {
            "params": params_payload(self.params),
            "lambda_max_grid": list(self.lambda_max_grid),
            "schemes": [s.value for s in self.schemes],
            "n_runs": self.n_runs,
            "steps": self.steps,
            "master_seed": self.master_seed,
            "root_method": self.root_method,
        }


class Cell(NamedTuple):
    """One (scheme, lambda_max) grid point."""

    scheme: Scheme
    lambda_max: float

    @property
    def name(self) -> str:
        return f"{self.scheme.value}_lambda{self.lambda_max:g}"


class CellTask(NamedTuple):
    params: SimParams
    cell: Cell
    n_runs: int
    steps: int
    master_seed: int
    root_method: str
    trace: bool


@dataclass
class RunResult:
    """Outcome of one seeded simulation."""

    status: str
    metrics: Optional[RunMetrics] = None
    error: str = ""
    trace: Optional[pd.DataFrame] = None

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


@dataclass
class CellResult:
    cell: Cell
    runs: pd.DataFrame
    histogram: Tuple[np.ndarray, np.ndarray]
    trace: Optional[pd.DataFrame] = None


@dataclass
class SweepResult:
    aggregate: pd.DataFrame
    n_failed: int
    path: Path


def params_payload(params: SimParams) -> Dict[str, Any]:
    payload = asdict(params)
    payload["betas"] = list(params.betas)
    payload["scheme"] = params.scheme.value
    return payload


def cell_params(params: SimParams, cell: Cell) -> SimParams:
    return replace(params, scheme=cell.scheme, lambda_max=cell.lambda_max)


def cell_hash(task: CellTask) -> str:
    return config_hash({
        "params": params_payload(task.params),
        "n_runs": task.n_runs,
        "steps": task.steps,
        "master_seed": task.master_seed,
        "root_method": task.root_method,
    })


def manifest(digest: str, **extra) -> Dict[str, Any]:
    """Provenance header of every output table."""
    header = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": digest,
        "seed_rule": SEED_RULE,
        "code_version": __version__,
    }
    header.update(extra)
    return header


def config_from_mapping(raw: Dict[str, Any]) -> ExperimentConfig:
    """
    Build an ExperimentConfig from a parsed YAML mapping.

    Raises:
        InvalidParameters: For unknown keys or malformed values
    """
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise InvalidParameters(
            f"Unknown config keys {unknown}; valid keys: {', '.join(CONFIG_KEYS)}"
        )
    params_raw = dict(raw.get("params") or {})
    names = {f.name for f in fields(SimParams)}
    bad = sorted(set(params_raw) - names)
    if bad:
        raise InvalidParameters(f"Unknown parameters {['params.' + k for k in bad]}")
    if "betas" in params_raw and "num_funds" not in params_raw:
        params_raw["num_funds"] = len(params_raw["betas"] or ())

    try:
        params = SimParams(**params_raw)
        settings = {k: raw[k] for k in CONFIG_KEYS if k != "params" and raw.get(k) is not None}
        for key in ("n_runs", "steps", "master_seed", "workers"):
            if key in settings:
                settings[key] = int(settings[key])
        return ExperimentConfig(params=params, **settings)
    except InvalidParameters:
        raise
    except (TypeError, ValueError) as e:
        raise InvalidParameters(f"Malformed config: {e}") from e


def load_config(path: Optional[Path] = None, overrides: Sequence[str] = ()) -> ExperimentConfig:
    """
    Load a YAML experiment file and apply dotted overrides.

    Args:
        path: YAML file; defaults only when None
        overrides: Items like 'params.sigma_n=0.03' or 'n_runs=5'

    Returns:
        The unvalidated configuration
    """
    raw = load_yaml(path) if path is not None else {}
    try:
        apply_overrides(raw, overrides)
    except ValueError as e:
        raise InvalidParameters(str(e)) from e
    return config_from_mapping(raw)


def validate_config(path: Optional[Path], overrides: Sequence[str] = ()) -> Tuple[bool, str]:
    """
    Check that an experiment file loads and passes validation.

    Returns:
        Tuple of (success, message)
    """
    try:
        config = load_config(path, overrides).validate()
    except (ValueError, OSError, yaml.YAMLError) as e:
        return False, str(e)
    cells = len(config.cells())
    return True, (f"Config is valid: {cells} cells x {config.n_runs} runs "
                  f"x {config.steps} steps")


def derive_seed(master_seed: int, scheme: Scheme, lambda_max: float,
                run_index: int) -> np.random.SeedSequence:
    """Child seed of one run, independent of grid order and scheduling."""
    scheme = Scheme.parse(scheme)
    return np.random.SeedSequence(
        master_seed,
        spawn_key=(scheme.code, int(round(1000 * lambda_max)), int(run_index)),
    )


def run_simulation(params: SimParams, seed, steps: int,
                   root_method: str = DEFAULT_ROOT_METHOD,
                   trace: bool = False) -> RunResult:
    """
    Run one seeded simulation and compute its indicators.

    A clearing failure marks the run failed and keeps its message; the
    trace, when requested, covers the steps completed before the failure.

    Args:
        params: Parameter set of the run
        seed: Integer or SeedSequence
        steps: Number of timesteps
        root_method: Clearing root finder
        trace: Whether to keep the per-step timeseries

    Returns:
        RunResult with status 'ok' or 'failed'
    """
    sim = Simulation(params, seed=seed, root_method=root_method)
    history = RunHistory(steps, params.num_funds)
    try:
        sim.run(steps, recorder=history)
    except ClearingFailure as e:
        logger.warning("Run failed at step %d: %s", history.n + 1, e)
        frame = history.to_frame(params.betas) if trace else None
        return RunResult(status=STATUS_FAILED, error=str(e), trace=frame)
    frame = history.to_frame(params.betas) if trace else None
    return RunResult(status=STATUS_OK, metrics=run_metrics(history, params), trace=frame)


def run_row(run_index: int, result: RunResult, betas: Sequence[float]) -> Dict[str, Any]:
    """Flat per-run record; failed runs carry NaN indicators."""
    row: Dict[str, Any] = {"run_index": run_index, "status": result.status,
                           "error": result.error.replace("\n", " ")}
    if result.ok:
        row.update(result.metrics.scalars())
        by_fund = result.metrics.default_prob_annual_by_fund
    else:
        names = [f.name for f in fields(RunMetrics)]
        row.update({k: math.nan for k in names
                    if k not in ("default_prob_annual_by_fund", "histogram_edges",
                                 "histogram_probs")})
        by_fund = [math.nan] * len(betas)
    for beta, value in zip(betas, by_fund):
        row[f"default_prob_annual_beta{beta:g}"] = value
    return row


def run_cell(task: CellTask) -> CellResult:
    """Run every seed of one cell in sequence."""
    params = cell_params(task.params, task.cell)
    logger.info("Cell %s: %d runs x %d steps", task.cell.name, task.n_runs, task.steps)
    rows, histograms, trace = [], [], None
    for run_index in range(task.n_runs):
        seed = derive_seed(task.master_seed, task.cell.scheme, task.cell.lambda_max, run_index)
        keep_trace = task.trace and run_index == 0
        result = run_simulation(params, seed, task.steps, task.root_method, trace=keep_trace)
        if keep_trace:
            trace = result.trace
        if result.ok:
            histograms.append((result.metrics.histogram_edges, result.metrics.histogram_probs))
        rows.append(run_row(run_index, result, params.betas))
    histogram = rebin_histograms(histograms, HISTOGRAM_BINS)
    return CellResult(cell=task.cell, runs=pd.DataFrame(rows), histogram=histogram, trace=trace)


def cell_paths(output_dir: Path, cell: Cell) -> Dict[str, Path]:
    return {
        "runs": output_dir / RUNS_SUBDIR / f"{cell.name}.csv",
        "histogram": output_dir / HISTOGRAM_SUBDIR / f"{cell.name}.csv",
        "steps": output_dir / TRACE_SUBDIR / f"{cell.name}_run0.csv",
    }


def _is_complete(paths: Dict[str, Path], digest: str, emit: Sequence[str]) -> bool:
    required = ["runs"] + [kind for kind in ("histogram", "steps") if kind in emit]
    for kind in required:
        path = paths[kind]
        if not path.exists():
            return False
        try:
            if read_manifest(path).get("config_hash") != digest:
                return False
        except OSError:
            return False
    return True


def _write_cell(result: CellResult, paths: Dict[str, Path], digest: str,
                emit: Sequence[str]) -> None:
    if "histogram" in emit:
        edges, probs = result.histogram
        table = pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:],
                              "probability": probs})
        write_table(table, paths["histogram"], manifest(digest))
    if "steps" in emit and result.trace is not None:
        write_table(result.trace, paths["steps"], manifest(digest))
    # runs last: its presence marks the cell complete
    write_table(result.runs, paths["runs"], manifest(digest))


def aggregate_runs(runs: pd.DataFrame) -> Dict[str, Any]:
    """Mean and population std across successful runs of every indicator."""
    ok = runs[runs["status"] == STATUS_OK]
    row: Dict[str, Any] = {"n_runs": int(len(runs)), "n_failed": int(len(runs) - len(ok))}
    columns = [c for c in runs.columns if c not in ("run_index", "status", "error")]
    for column in columns:
        values = ok[column].to_numpy(dtype=float)
        row[f"{column}_mean"] = float(np.mean(values)) if values.size else math.nan
        row[f"{column}_std"] = float(np.std(values)) if values.size else math.nan
    return row


def sweep(config: ExperimentConfig) -> SweepResult:
    """
    Run the full grid and write the aggregate table.

    Cells whose run table already exists with a matching config hash are
    reused. Cells run in worker processes when config.workers > 1; the
    aggregate is always assembled in deterministic cell order from the run
    tables on disk.

    Returns:
        SweepResult with the aggregate table and number of failed runs

    Raises:
        InvalidParameters: If the configuration is invalid
        OSError: Naming the path of a failed read or write
    """
    config.validate()
    output_dir = config.output_dir
    try:
        ensure_directories(output_dir)
    except OSError as e:
        raise OSError(f"Cannot create output directory {output_dir}: {e}") from e

    trace = "steps" in config.emit
    tasks = [CellTask(cell_params(config.params, cell), cell, config.n_runs, config.steps,
                      config.master_seed, config.root_method, trace)
             for cell in config.cells()]
    digests = {task.cell: cell_hash(task) for task in tasks}

    pending = []
    for task in tasks:
        if _is_complete(cell_paths(output_dir, task.cell), digests[task.cell], config.emit):
            logger.info("Cell %s already complete, skipping", task.cell.name)
        else:
            pending.append(task)
    logger.info("Sweep: %d cells (%d pending), %d workers",
                len(tasks), len(pending), config.workers)

    if config.workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            for result in executor.map(run_cell, pending):
                _write_cell(result, cell_paths(output_dir, result.cell),
                            digests[result.cell], config.emit)
    else:
        for task in pending:
            result = run_cell(task)
            _write_cell(result, cell_paths(output_dir, result.cell),
                        digests[result.cell], config.emit)

    rows = []
    for task in tasks:
        runs, _ = read_table(cell_paths(output_dir, task.cell)["runs"])
        row = {"scheme": task.cell.scheme.value, "lambda_max": task.cell.lambda_max}
        row.update(aggregate_runs(runs))
        if row["n_failed"]:
            logger.warning("Cell %s: %d of %d runs failed",
                           task.cell.name, row["n_failed"], row["n_runs"])
        rows.append(row)
    aggregate = pd.DataFrame(rows)
    path = write_table(aggregate, output_dir / AGGREGATE_FILE,
                       manifest(config_hash(config.provenance())))
    n_failed = int(aggregate["n_failed"].sum())
    logger.info("Sweep complete: %d rows written to %s", len(aggregate), path)
    return SweepResult(aggregate=aggregate, n_failed=n_failed, path=path)


def _scheme_order(table: pd.DataFrame) -> List[str]:
    present = set(table["scheme"])
    return [s for s in SCHEME_NAMES if s in present]


def _series_table(table: pd.DataFrame, indicator: str) -> pd.DataFrame:
    grid = sorted(set(float(x) for x in table["lambda_max"]))
    series = pd.DataFrame({"lambda_max": grid})
    for scheme in _scheme_order(table):
        rows = table[table["scheme"] == scheme].set_index("lambda_max")
        for stat in ("mean", "std"):
            column = f"{indicator}_{stat}"
            series[f"{scheme}_{stat}"] = [
                float(rows.at[lam, column]) if lam in rows.index else math.nan for lam in grid
            ]
    return series


def _read_histogram(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    frame, _ = read_table(path)
    edges = np.append(frame["bin_left"].to_numpy(), frame["bin_right"].to_numpy()[-1])
    return edges, frame["probability"].to_numpy()


def _shared_grid(histograms: Dict[str, Tuple[np.ndarray, np.ndarray]]) -> pd.DataFrame:
    usable = [h for h in histograms.values() if h[1].sum() > 0.0]
    if not usable:
        raise ValueError("No non-empty return histograms to project")
    lo = min(float(e[0]) for e, _ in usable)
    hi = max(float(e[-1]) for e, _ in usable)
    edges, _ = rebin_histograms(usable, HISTOGRAM_BINS, (lo, hi))
    dist = pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:]})
    for label, histogram in histograms.items():
        dist[label] = rebin_histograms([histogram], HISTOGRAM_BINS, (lo, hi))[1]
    return dist


def _return_dist_table(table: pd.DataFrame, output_dir: Path,
                       lambda_max: float) -> pd.DataFrame:
    histograms = {}
    for scheme in _scheme_order(table):
        path = cell_paths(output_dir, Cell(Scheme.parse(scheme), lambda_max))["histogram"]
        if not path.exists():
            logger.warning("No histogram for %s at lambda_max=%g (%s)", scheme, lambda_max, path)
            continue
        histograms[scheme] = _read_histogram(path)
    if not any(h[1].sum() > 0.0 for h in histograms.values()):
        raise ValueError(f"No return histograms found for lambda_max={lambda_max:g}")
    return _shared_grid(histograms)


def lambda_curve_table(params: SimParams, lambda_max: float,
                       sigma_ratios: Optional[Sequence[float]] = None) -> pd.DataFrame:
    """
    Adaptive leverage caps of the regulated schemes over a volatility grid.

    Args:
        params: Base parameters (sigma_b, theta, short_selling)
        lambda_max: Nominal leverage cap
        sigma_ratios: Volatilities in units of sigma_b

    Returns:
        Table with sigma, sigma_ratio, basle and perfect_hedge columns
    """
    if sigma_ratios is None:
        sigma_ratios = np.linspace(0.0, LAMBDA_CURVE_MAX_RATIO, LAMBDA_CURVE_POINTS)
    ratios = np.asarray(sigma_ratios, dtype=float)
    hedge = HedgeParams.from_params(replace(params, lambda_max=lambda_max))
    sigma = ratios * params.sigma_b
    return pd.DataFrame({
        "sigma": sigma,
        "sigma_ratio": ratios,
        "basle": [adaptive_lambda_basle(s, params.sigma_b, lambda_max) for s in sigma],
        "perfect_hedge": [adaptive_lambda_hedge(1.0, s, hedge, params.short_selling)
                          for s in sigma],
    })


class ReturnSource(NamedTuple):
    """One cell histogram taking part in a return distribution comparison."""

    label: str
    output_dir: Path
    scheme: Scheme
    lambda_max: float

    @classmethod
    def parse(cls, text: str) -> "ReturnSource":
        """Parse 'LABEL=DIR:SCHEME:LAMBDA'."""
        label, sep, rest = text.partition("=")
        parts = rest.rsplit(":", 2)
        if not sep or not label or len(parts) != 3:
            raise ValueError(f"Expected LABEL=DIR:SCHEME:LAMBDA, got '{text}'")
        directory, scheme, lambda_max = parts
        try:
            return cls(label, Path(directory), Scheme.parse(scheme), float(lambda_max))
        except (KeyError, ValueError) as e:
            raise ValueError(f"Invalid return source '{text}': {e}") from e

    def histogram_path(self) -> Path:
        return cell_paths(self.output_dir, Cell(self.scheme, self.lambda_max))["histogram"]


def compare_return_distributions(sources: Sequence[ReturnSource], output_dir: Path) -> Path:
    """
    Put cell histograms from any number of sweeps on one shared grid.

    Covers comparisons that cannot come from a single sweep, such as a
    noise-only market against long-only and short-selling funds.

    Raises:
        ValueError: If no sources are given, labels repeat or a histogram is missing
    """
    if not sources:
        raise ValueError("At least one return source is required")
    labels = [s.label for s in sources]
    if len(set(labels)) != len(labels):
        raise ValueError(f"Duplicate return source labels: {labels}")
    histograms = {}
    for source in sources:
        path = source.histogram_path()
        if not path.exists():
            raise ValueError(f"No histogram for '{source.label}' at {path}")
        histograms[source.label] = _read_histogram(path)

    described = [f"{s.label}={s.scheme.value}:{s.lambda_max:g}" for s in sources]
    digest = config_hash({"sources": described})
    path = write_table(_shared_grid(histograms),
                       Path(output_dir) / PLOT_SUBDIR / f"{RETURN_COMPARE}.csv",
                       manifest(digest, sources=";".join(described)))
    logger.info("Wrote return comparison of %d sources to %s", len(sources), path)
    return path


def emit_plot_data(table: Optional[pd.DataFrame], kind: str, output_dir: Path,
                   lambda_max: float = RETURN_DIST_LAMBDA,
                   source: Optional[Dict[str, str]] = None,
                   params: Optional[SimParams] = None) -> Path:
    """
    Project the aggregate table onto the series of one figure.

    Series kinds give one row per lambda_max with '<scheme>_mean' and
    '<scheme>_std' columns. 'returnDist' re-bins each scheme's return
    histogram at lambda_max onto a shared grid. 'lambdaCurve' needs no sweep:
    it tabulates the adaptive caps at lambda_max against volatility.

    Args:
        table: Aggregate table as written by sweep; unused by 'lambdaCurve'
        kind: One of PLOT_KINDS, 'returnDist' or 'lambdaCurve'
        output_dir: Sweep output directory
        lambda_max: Cell used by 'returnDist', nominal cap of 'lambdaCurve'
        source: Manifest of the aggregate table, carried into the header
        params: Base parameters of 'lambdaCurve'; defaults when None

    Returns:
        Path of the written file

    Raises:
        ValueError: For an unknown kind, listing the valid ones
    """
    valid = list(PLOT_KINDS) + [RETURN_DIST, LAMBDA_CURVE]
    if kind not in valid:
        raise ValueError(f"Unknown plot kind '{kind}'; valid kinds: {', '.join(valid)}")
    output_dir = Path(output_dir)
    lambda_max = float(lambda_max)
    if kind == LAMBDA_CURVE:
        params = params if params is not None else SimParams()
        data = lambda_curve_table(params, lambda_max)
        digest = config_hash({"params": params_payload(params), "lambda_max": lambda_max})
        header = manifest(digest, lambda_max=f"{lambda_max:g}")
    elif table is None:
        raise ValueError(f"Plot kind '{kind}' needs an aggregate table")
    else:
        digest = (source or {}).get("config_hash",
                                    config_hash({"table": table.to_csv(index=False)}))
        if kind == RETURN_DIST:
            data = _return_dist_table(table, output_dir, lambda_max)
            header = manifest(digest, lambda_max=f"{lambda_max:g}")
        else:
            data = _series_table(table, PLOT_KINDS[kind])
            header = manifest(digest, indicator=PLOT_KINDS[kind])
    path = write_table(data, output_dir / PLOT_SUBDIR / f"{kind}.csv", header)
    logger.info("Wrote %s plot data to %s", kind, path)
    return path


def load_aggregate(output_dir: Path) -> Tuple[pd.DataFrame, Dict[str, str]]:
    """Read the aggregate table written by sweep."""
    return read_table(Path(output_dir) / AGGREGATE_FILE)
