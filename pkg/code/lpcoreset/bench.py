import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Dict, List, Optional, Sequence

import dask
import numpy as np
import pandas as pd
from dask import delayed
from sklearn.linear_model import LinearRegression

from lpcoreset.calibrate import calibrate_alpha, plan_builder
from lpcoreset.exceptions import BudgetExhausted
from lpcoreset.sampling import SamplingPlan, draw, half_plan
from lpcoreset.verify import measure_distortion

logger = logging.getLogger(__name__)

PLOT_COLUMNS = ["eps", "median_rows", "p25_rows", "p75_rows", "median_lambda"]
STATUS_OK = "ok"
STATUS_EXHAUSTED = "budget_exhausted"


# ------------------------------------------
# Single trials
# ------------------------------------------
def run_trial(
    A: np.ndarray,
    p: float,
    eps: float,
    seed: int,
    builder: Optional[Callable[[float], SamplingPlan]],
    mass: float,
    budget: int = 20,
    probes: int = 128,
    restarts: int = 4,
) -> Dict[str, object]:
    """
    Calibrates alpha for one (eps, seed) pair and records the accepted draw.

    With builder None the trial keeps each row with probability 1/2 instead.

    Returns:
    - dict: eps, seed, status, rows_kept, lambda_est, total_sens, alpha, wall_ms.
    """
    start = time.perf_counter()
    status = STATUS_OK
    if builder is None:
        dr = draw(half_plan(A.shape[0], p), seed)
        alpha, report = None, measure_distortion(A, dr, probes, restarts, seed)
    else:
        try:
            alpha, dr, report = calibrate_alpha(
                A, p, eps, seed=seed, budget=budget, probes=probes, restarts=restarts, builder=builder, mass=mass
            )
        except BudgetExhausted as e:
            logger.warning("Trial eps=%g seed=%d exhausted its calibration budget.", eps, seed)
            status = STATUS_EXHAUSTED
            alpha, dr, report = e.best_alpha, e.draw, e.report
    return {
        "eps": float(eps),
        "seed": int(seed),
        "status": status,
        "rows_kept": int(dr.rows_kept),
        "lambda_est": float(report.lambda_est),
        "total_sens": float(mass) if math.isfinite(mass) else None,
        "alpha": None if alpha is None else float(alpha),
        "wall_ms": 1000.0 * (time.perf_counter() - start),
    }


# ------------------------------------------
# Experiment results
# ------------------------------------------
def aggregate(records: Sequence[Dict[str, object]]) -> pd.DataFrame:
    """
    Per-eps medians and quartiles of accepted trials, in the PLOT_COLUMNS order.

    Trials whose calibration exhausted its budget are excluded.
    """
    frame = pd.DataFrame(list(records), columns=["eps", "status", "rows_kept", "lambda_est"])
    frame = frame[frame["status"] == STATUS_OK]
    order = list(dict.fromkeys(r["eps"] for r in records))
    grouped = frame.groupby("eps", sort=False)
    table = pd.DataFrame(
        {
            "median_rows": grouped["rows_kept"].median(),
            "p25_rows": grouped["rows_kept"].quantile(0.25),
            "p75_rows": grouped["rows_kept"].quantile(0.75),
            "median_lambda": grouped["lambda_est"].median(),
        }
    )
    table = table.reindex([e for e in order if e in table.index])
    table.index.name = "eps"
    return table.reset_index()[PLOT_COLUMNS].astype(float)


def fit_slope(table: pd.DataFrame) -> float:
    """
    Least-squares slope of log(median_rows) against log(1/eps); nan below two points.
    """
    usable = table[table["median_rows"] > 0]
    if len(usable) < 2:
        return math.nan
    X = np.log(1.0 / usable["eps"].to_numpy())[:, np.newaxis]
    y = np.log(usable["median_rows"].to_numpy())
    return float(LinearRegression().fit(X, y).coef_[0])


@dataclass
class ExperimentResult:
    """
    Per-trial records of a scaling study with their aggregates.

    Attributes:
    - config (dict): Echo of the run parameters.
    - records (list of dict): One record per (eps, trial), in grid then trial order.
    - aggregates (pd.DataFrame): Output of `aggregate(records)`.
    - slope (float): Output of `fit_slope(aggregates)`.
    - comparison (dict, optional): Output of `compare_lewis_budget`.
    """

    config: Dict[str, object]
    records: List[Dict[str, object]]
    aggregates: pd.DataFrame
    slope: float
    comparison: Optional[Dict[str, object]] = None
    created: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def consistent(self) -> bool:
        """Whether the stored aggregates equal a recomputation from the records."""
        return aggregate(self.records).equals(self.aggregates)

    def to_dict(self) -> Dict[str, object]:
        return {
            "config": self.config,
            "records": [{k: v for k, v in r.items() if k != "wall_ms"} for r in self.records],
            "aggregates": self.aggregates.to_dict(orient="records"),
            "slope": None if math.isnan(self.slope) else self.slope,
            "comparison": self.comparison,
            "metadata": {
                "created": self.created,
                "wall_ms": [float(r["wall_ms"]) for r in self.records],
            },
        }

    def save(self, out_dir: str) -> None:
        """
        Writes bench.json and the plot data bench.csv into out_dir.
        """
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "bench.json"), "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
        self.aggregates.to_csv(
            os.path.join(out_dir, "bench.csv"), index=False, float_format="%.17g", lineterminator="\n"
        )
        logger.info("Saved benchmark results to %s.", out_dir)


# ------------------------------------------
# Studies
# ------------------------------------------
def run_scaling(
    A: np.ndarray,
    p: float,
    eps_grid: Sequence[float],
    method: str = "sensitivity",
    trials: int = 5,
    seed: int = 0,
    budget: int = 20,
    probes: int = 128,
    restarts: int = 4,
    config: Optional[Dict[str, object]] = None,
) -> ExperimentResult:
    """
    Sample-size scaling study: calibrated draws for every eps in the grid.

    Trial i of every eps uses seed + i. Scores are computed once; trials run
    on dask's threaded scheduler and are reported in grid then trial order.

    Parameters:
    - A (np.ndarray): Matrix to sample.
    - p (float): Exponent.
    - eps_grid (sequence of float): Target distortions.
    - method (str): 'sensitivity', 'rootlev', 'lewis' or 'half'.
    - trials (int): Trials per eps.
    - seed (int): Top-level seed.
    - budget (int): Calibration halvings per trial.
    - probes (int): Distortion probes.
    - restarts (int): Distortion ascent restarts.
    - config (dict, optional): Configuration echoed in the result.

    Returns:
    - ExperimentResult: Records, aggregates and the fitted log-log slope.
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}.")
    if method == "half":
        builder, mass = None, float("nan")
    else:
        builder, mass = plan_builder(A, p, method)
    tasks = [
        delayed(run_trial)(A, p, eps, seed + i, builder, mass, budget, probes, restarts)
        for eps in eps_grid
        for i in range(trials)
    ]
    records = list(dask.compute(*tasks, scheduler="threads"))
    table = aggregate(records)
    slope = fit_slope(table)
    logger.info("Scaling study over %d eps values: slope %.3f.", len(eps_grid), slope)
    echo = dict(config or {})
    echo.update({"p": float(p), "method": method, "trials": trials, "seed": seed, "eps_grid": list(eps_grid)})
    return ExperimentResult(config=echo, records=records, aggregates=table, slope=slope)


def lewis_budget(d: int, p: float) -> float:
    """Lewis weight sample size d^(p/2) (log2 d)^2."""
    return d ** (p / 2.0) * math.log2(d) ** 2


def compare_lewis_budget(
    A: np.ndarray,
    p: float,
    eps: float,
    trials: int = 20,
    seed: int = 0,
    budget: int = 20,
    probes: int = 128,
    restarts: int = 4,
) -> Dict[str, object]:
    """
    Paired comparison of calibrated sensitivity sampling against the Lewis weight sample size.

    Parameters:
    - A (np.ndarray): Matrix to sample.
    - p (float): Exponent.
    - eps (float): Target distortion.
    - trials (int): Paired trials; trial i uses seed + i.

    Returns:
    - dict: lewis_rows, per-trial sensitivity rows and the fraction of trials with fewer rows.
    """
    builder, mass = plan_builder(A, p, "sensitivity")
    tasks = [delayed(run_trial)(A, p, eps, seed + i, builder, mass, budget, probes, restarts) for i in range(trials)]
    records = list(dask.compute(*tasks, scheduler="threads"))
    m_lewis = lewis_budget(A.shape[1], p)
    rows = [r["rows_kept"] for r in records if r["status"] == STATUS_OK]
    fewer = sum(1 for r in rows if r < m_lewis)
    return {
        "eps": float(eps),
        "lewis_rows": float(m_lewis),
        "sensitivity_rows": rows,
        "fraction_fewer": fewer / len(rows) if rows else None,
    }
