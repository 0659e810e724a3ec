import math
import os

import numpy as np
import pandas as pd
import pytest

from lpcoreset.bench import (
    PLOT_COLUMNS,
    STATUS_EXHAUSTED,
    STATUS_OK,
    ExperimentResult,
    aggregate,
    compare_lewis_budget,
    fit_slope,
    lewis_budget,
    run_scaling,
)
from lpcoreset.flatten import build_flattener
from lpcoreset.generators import GeneratorSpec, gaussian_matrix, generate


def record(eps, rows, lam, status=STATUS_OK, seed=0):
    return {
        "eps": eps,
        "seed": seed,
        "status": status,
        "rows_kept": rows,
        "lambda_est": lam,
        "total_sens": 4.0,
        "alpha": 0.1,
        "wall_ms": 1.0,
    }


@pytest.fixture
def records():
    return [
        record(0.5, 10, 0.1),
        record(0.5, 20, 0.2, seed=1),
        record(0.5, 30, 0.3, seed=2),
        record(0.25, 40, 0.1),
        record(0.25, 999, 0.9, status=STATUS_EXHAUSTED, seed=1),
        record(0.25, 50, 0.2, seed=2),
    ]


class TestAggregate:
    def test_quartiles(self, records):
        table = aggregate(records)
        assert list(table.columns) == PLOT_COLUMNS
        assert table["eps"].tolist() == [0.5, 0.25]
        assert table.iloc[0][["median_rows", "p25_rows", "p75_rows"]].tolist() == [20.0, 15.0, 25.0]
        assert table.iloc[1][["median_rows", "p25_rows", "p75_rows"]].tolist() == [45.0, 42.5, 47.5]
        assert table.iloc[1]["median_lambda"] == pytest.approx(0.15)

    def test_all_exhausted_eps_dropped(self):
        table = aggregate([record(0.5, 10, 0.1), record(0.1, 99, 0.5, status=STATUS_EXHAUSTED)])
        assert table["eps"].tolist() == [0.5]


class TestFitSlope:
    def test_quadratic_growth(self):
        eps = np.array([0.5, 0.25, 0.125, 0.0625])
        table = pd.DataFrame({"eps": eps, "median_rows": 10.0 / eps**2})
        assert fit_slope(table) == pytest.approx(2.0)

    def test_single_point(self):
        assert math.isnan(fit_slope(pd.DataFrame({"eps": [0.5], "median_rows": [10.0]})))


class TestExperimentResult:
    def test_consistent(self, records):
        result = ExperimentResult(config={}, records=records, aggregates=aggregate(records), slope=1.0)
        assert result.consistent()
        tampered = aggregate(records)
        tampered.loc[0, "median_rows"] = 21.0
        assert not ExperimentResult(config={}, records=records, aggregates=tampered, slope=1.0).consistent()

    def test_record_layout(self, records):
        result = ExperimentResult(config={"p": 3.0}, records=records, aggregates=aggregate(records), slope=math.nan)
        out = result.to_dict()
        assert out["slope"] is None
        assert all("wall_ms" not in r for r in out["records"])
        assert len(out["metadata"]["wall_ms"]) == len(records)


def test_lewis_budget():
    assert lewis_budget(8, 4.0) == pytest.approx(576.0)


class TestRunScaling:
    @pytest.fixture(scope="class")
    def study(self):
        A = gaussian_matrix(200, 4, 0)
        return run_scaling(A, 3.0, [0.5, 0.3], trials=2, seed=5, probes=16, restarts=1)

    def test_record_order(self, study):
        assert [(r["eps"], r["seed"]) for r in study.records] == [(0.5, 5), (0.5, 6), (0.3, 5), (0.3, 6)]

    def test_consistent(self, study):
        assert study.consistent()

    def test_accepted_trials_meet_eps(self, study):
        for r in study.records:
            if r["status"] == STATUS_OK:
                assert r["lambda_est"] <= r["eps"]

    def test_save(self, study, tmp_path):
        study.save(str(tmp_path))
        assert os.path.exists(tmp_path / "bench.json")
        header = (tmp_path / "bench.csv").read_text(encoding="utf-8").splitlines()[0]
        assert header == ",".join(PLOT_COLUMNS)

    def test_half_sampling(self):
        study = run_scaling(gaussian_matrix(100, 2, 1), 3.0, [0.5], method="half", trials=2, probes=8, restarts=0)
        assert all(r["alpha"] is None and r["total_sens"] is None for r in study.records)

    def test_rejects_trials(self):
        with pytest.raises(ValueError):
            run_scaling(gaussian_matrix(20, 2, 0), 3.0, [0.5], trials=0)


def test_compare_lewis_budget():
    result = compare_lewis_budget(gaussian_matrix(200, 4, 0), 3.0, 0.5, trials=2, probes=16, restarts=1)
    assert result["lewis_rows"] == pytest.approx(32.0)
    assert len(result["sensitivity_rows"]) <= 2
    assert result["fraction_fewer"] is None or 0.0 <= result["fraction_fewer"] <= 1.0


@pytest.mark.slow
def test_sample_size_scales_inverse_square():
    A, _ = build_flattener("sensitivity", 3.0).apply(gaussian_matrix(2000, 5, 0))
    study = run_scaling(A, 3.0, [0.4, 0.3, 0.2, 0.15, 0.1], trials=5, probes=64, restarts=2)
    assert 1.5 <= study.slope <= 2.5
    assert study.aggregates["median_rows"].is_monotonic_increasing


@pytest.mark.slow
def test_structured_input_beats_lewis_budget():
    V = generate(GeneratorSpec(family="vandermonde_features", n=2000, k=2, q=3, seed=0))
    result = compare_lewis_budget(V, 4.0, 0.5, trials=10, probes=64, restarts=2)
    assert result["lewis_rows"] == pytest.approx(576.0)
    assert result["fraction_fewer"] >= 0.7
