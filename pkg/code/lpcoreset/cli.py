import argparse
import json
import logging
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from lpcoreset.bench import compare_lewis_budget, run_scaling
from lpcoreset.calibrate import calibrate_alpha
from lpcoreset.config import (
    CHECKS,
    COMMANDS,
    FLATTEN_KINDS,
    RECURSIVE_KINDS,
    SAMPLE_METHODS,
    SCORE_KINDS,
    RunConfig,
    build_config,
    load_config,
)
from lpcoreset.exceptions import ConfigError, LpCoresetError, NoConvergence, NumericalFailure
from lpcoreset.flatten import build_flattener
from lpcoreset.generators import FAMILIES, generate
from lpcoreset.matrix import as_matrix, read_matrix_csv, write_matrix_csv
from lpcoreset.recursive import build_recursive_sampler
from lpcoreset.regression import coreset_regression
from lpcoreset.sampling import (
    SampleDraw,
    SamplingPlan,
    apply,
    draw,
    half_plan,
    lewis_plan,
    root_leverage_plan,
    sensitivity_plan,
)
from lpcoreset.scores import build_scorer, leverage_scores, lewis_weights, lp_sensitivities
from lpcoreset.verify import (
    check_embedding,
    check_gaussian_small_sens,
    check_perturbation_bound,
    check_total_sens_bounds,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


# ------------------------------------------
# Shared helpers
# ------------------------------------------
def write_json(record: Dict[str, object], out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(record, f, indent=2, sort_keys=True)
    logger.info("Wrote %s.", path)
    return path


def load_matrix(config: RunConfig) -> np.ndarray:
    """
    Reads the input CSV or generates the configured matrix.
    """
    if config.input is not None:
        return read_matrix_csv(config.input)
    return generate(config.generator_spec())


def _numeric_alpha(config: RunConfig) -> float:
    if config.alpha == "auto":
        raise ConfigError(f"{config.command} with this method needs a numeric alpha.")
    return float(config.alpha)


def _plan(A: np.ndarray, config: RunConfig, alpha: float) -> SamplingPlan:
    if config.method == "sensitivity":
        return sensitivity_plan(lp_sensitivities(A, config.p), alpha)
    elif config.method == "rootlev":
        return root_leverage_plan(leverage_scores(A), config.p, alpha)
    elif config.method == "lewis":
        w = lewis_weights(A, config.p)
        return lewis_plan(w, w.total / alpha)
    return half_plan(A.shape[0], config.p)


# ------------------------------------------
# Commands
# ------------------------------------------
def cmd_scores(config: RunConfig) -> int:
    """Writes scores.json for the configured score kind."""
    A = load_matrix(config)
    scores = build_scorer(config.kind, config.p).score(A)
    write_json(scores.to_dict(), config.out, "scores.json")
    return EXIT_OK


def cmd_flatten(config: RunConfig) -> int:
    """Writes flattened.csv and rowmap.json."""
    A = load_matrix(config)
    kind = config.flatten or "sensitivity"
    alpha = _numeric_alpha(config) if kind == "uniform" else 0.5
    flattened, rowmap = build_flattener(kind, config.p, config.C, alpha).apply(A)
    os.makedirs(config.out, exist_ok=True)
    write_matrix_csv(flattened, os.path.join(config.out, "flattened.csv"))
    write_json({"p": float(config.p), "kind": kind, "rows": rowmap.to_records()}, config.out, "rowmap.json")
    return EXIT_OK


def cmd_sample(config: RunConfig) -> int:
    """Writes draw.json and sampled.csv; alpha=auto calibrates alpha for eps."""
    A = load_matrix(config)
    record: Dict[str, object] = {"method": config.method}
    if config.alpha == "auto" and config.method != "half":
        alpha, dr, report = calibrate_alpha(
            A, config.p, config.eps, config.method, config.seed, config.budget, config.probes, config.restarts
        )
        record.update({"alpha": alpha, "lambda_est": report.lambda_est})
    else:
        alpha = None if config.method == "half" else _numeric_alpha(config)
        dr = draw(_plan(A, config, alpha), config.seed)
        record["alpha"] = alpha
    record.update(dr.to_dict())
    record["expected_rows"] = dr.plan.expected_rows
    write_json(record, config.out, "draw.json")
    write_matrix_csv(apply(dr, A), os.path.join(config.out, "sampled.csv"))
    return EXIT_OK


def cmd_recursive(config: RunConfig) -> int:
    """Writes recursive.json (trace and provenance) and sampled.csv for the recursive scheme."""
    A = load_matrix(config)
    sampler = build_recursive_sampler(
        config.recursive,
        config.p,
        config.eps,
        delta=config.delta,
        seed=config.seed,
        probes=config.probes,
        restarts=config.restarts,
    )
    result = sampler.run(A)
    record = result.to_dict()
    record["scheme"] = config.recursive
    write_json(record, config.out, "recursive.json")
    write_matrix_csv(result.matrix, os.path.join(config.out, "sampled.csv"))
    return EXIT_OK


def _read_draw(path: str) -> SampleDraw:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return SampleDraw.from_dict(json.load(f))
    except (KeyError, TypeError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read draw {path}: {e}") from e


def cmd_verify(config: RunConfig) -> int:
    """Runs the configured check; writes check.json (and distortion.json for embeddings)."""
    if config.check == "gaussian":
        result = check_gaussian_small_sens(config.n, config.d, config.p, config.seed)
    else:
        A = load_matrix(config)
        if config.check == "embedding":
            result, report = check_embedding(
                A, _read_draw(config.draw), config.p, config.eps, config.probes, config.restarts, config.seed
            )
            write_json(report.to_dict(), config.out, "distortion.json")
        elif config.check == "total_sens":
            result = check_total_sens_bounds(A, config.p)
        else:
            result = check_perturbation_bound(A, config.p, config.seed)
    write_json(result.to_dict(), config.out, "check.json")
    if not result:
        logger.warning("Check %s failed: %.6g vs %.6g.", result.name, result.lhs, result.rhs)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_bench(config: RunConfig) -> int:
    """Writes bench.json and bench.csv for the eps grid (default: the single eps)."""
    A = load_matrix(config)
    if config.flatten is not None:
        alpha = _numeric_alpha(config) if config.flatten == "uniform" else 0.5
        A, _ = build_flattener(config.flatten, config.p, config.C, alpha).apply(A)
    grid = config.eps_grid or [config.eps]
    result = run_scaling(
        A,
        config.p,
        grid,
        config.method,
        config.trials,
        config.seed,
        config.budget,
        config.probes,
        config.restarts,
        config=config.to_dict(),
    )
    if config.compare_lewis:
        result.comparison = compare_lewis_budget(
            A, config.p, config.eps, config.trials, config.seed, config.budget, config.probes, config.restarts
        )
    result.save(config.out)
    return EXIT_OK


def cmd_regress(config: RunConfig) -> int:
    """Writes regression.json comparing full and coreset l_p regression."""
    M = as_matrix(load_matrix(config))
    if M.shape[1] < 2:
        raise ConfigError("regress needs at least two columns (design and target).")
    if not -M.shape[1] <= config.target_col < M.shape[1]:
        raise ConfigError(f"target_col {config.target_col} out of range for {M.shape[1]} columns.")
    if config.method == "half":
        raise ConfigError("regress calibrates alpha; choose sensitivity, rootlev or lewis.")
    col = config.target_col % M.shape[1]
    A, b = np.delete(M, col, axis=1), M[:, col]
    report = coreset_regression(
        A, b, config.p, config.eps, config.method, config.seed, config.budget, config.probes, config.restarts
    )
    write_json(report.to_dict(), config.out, "regression.json")
    return EXIT_OK


COMMAND_HANDLERS = {
    "scores": cmd_scores,
    "flatten": cmd_flatten,
    "sample": cmd_sample,
    "recursive": cmd_recursive,
    "verify": cmd_verify,
    "bench": cmd_bench,
    "regress": cmd_regress,
}


# ------------------------------------------
# Argument parsing
# ------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    """
    Builds the `lpcoreset` parser; every flag defaults to None so config files are not overridden.
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file (flags win)")
    source = common.add_mutually_exclusive_group()
    source.add_argument("--input", help="headerless matrix CSV")
    source.add_argument("--gen", choices=FAMILIES, help="generator family")
    common.add_argument("--n", type=int)
    common.add_argument("--d", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--q", type=int)
    common.add_argument("--s", type=int)
    common.add_argument("--p", type=float, help="exponent p >= 1")
    common.add_argument("--eps", type=float, help="target distortion in (0, 1)")
    common.add_argument("--delta", type=float)
    common.add_argument("--method", choices=SAMPLE_METHODS)
    common.add_argument("--kind", choices=SCORE_KINDS, help="score kind for the scores command")
    common.add_argument("--recursive", choices=RECURSIVE_KINDS, help="scheme for the recursive command")
    common.add_argument("--alpha", help="oversampling parameter or 'auto'")
    common.add_argument("--C", type=float, dest="C", help="flattening threshold factor")
    common.add_argument("--flatten", choices=FLATTEN_KINDS)
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--probes", type=int)
    common.add_argument("--restarts", type=int)
    common.add_argument("--budget", type=int, help="alpha halvings allowed to calibration")
    common.add_argument("--eps-grid", dest="eps_grid", help="comma-separated eps values for bench")
    common.add_argument("--draw", help="draw JSON for verify")
    common.add_argument("--check", choices=CHECKS)
    common.add_argument("--target-col", dest="target_col", type=int, help="target column for regress")
    common.add_argument("--compare-lewis", dest="compare_lewis", action="store_true", default=None)
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", default=False)

    parser = argparse.ArgumentParser(prog="lpcoreset", description="l_p subspace embeddings by row sampling")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        subparsers.add_parser(command, parents=[common], help=COMMAND_HANDLERS[command].__doc__)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    flags = {k: v for k, v in vars(args).items() if k not in ("config", "verbose")}
    try:
        file_values = load_config(args.config) if args.config else {}
        config = build_config(file_values, flags)
        return COMMAND_HANDLERS[config.command](config)
    except NoConvergence as e:
        row = "" if e.row is None else f" (row {e.row})"
        logger.error("Numerical failure%s: %s", row, e)
        return EXIT_NUMERICAL
    except NumericalFailure as e:
        logger.error("Numerical failure: %s", e)
        return EXIT_NUMERICAL
    except (LpCoresetError, ValueError, OSError) as e:
        logger.error("%s", e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
