"""Tests for correlation, error, aggregation, and report series."""

import csv
import json
import math

import numpy as np
import pytest

from ewer3.corpus import Manifest, Utterance
from ewer3.errors import DataError, UndefinedMetricError
from ewer3.metrics import (
    cumulative_curve,
    density_histogram,
    evaluate,
    ewer3_aggregate,
    pcc,
    rmse,
    write_report,
)


def pcc_reference(x, y):
    """Two-pass Pearson correlation with fsum accumulation."""
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def rmse_reference(x, y):
    return math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(x, y)) / len(x))


class TestPcc:
    def test_perfect_positive(self):
        x = [0.1, 0.2, 0.5, 0.9]
        assert pcc(x, x) == pytest.approx(1.0, abs=1e-15)

    def test_perfect_negative(self):
        x = np.array([0.1, 0.2, 0.5, 0.9])
        assert pcc(x, -x) == pytest.approx(-1.0, abs=1e-15)

    def test_matches_high_precision_reference(self):
        rng = np.random.default_rng(42)
        x = rng.uniform(0, 1, size=5000)
        y = 0.5 * x + rng.normal(0, 0.2, size=5000)
        assert abs(pcc(x, y) - pcc_reference(x, y)) < 1e-12

    def test_zero_variance_is_explicit_error(self):
        with pytest.raises(UndefinedMetricError, match="zero variance"):
            pcc([0.5, 0.5, 0.5], [0.1, 0.2, 0.3])
        with pytest.raises(UndefinedMetricError):
            pcc([0.1, 0.2, 0.3], [0.5, 0.5, 0.5])

    def test_affine_invariance(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(0, 1, size=500)
        y = rng.uniform(0, 1, size=500)
        base = pcc(x, y)
        assert abs(pcc(3.7 * x + 0.9, y) - base) < 1e-12
        assert abs(pcc(x, 0.004 * y - 2.0) - base) < 1e-12

    def test_needs_two_pairs(self):
        with pytest.raises(DataError):
            pcc([0.5], [0.5])

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            pcc([0.1, 0.2], [0.1])

    def test_returns_plain_float(self):
        assert type(pcc([0.1, 0.9], [0.2, 0.5])) is float


class TestRmse:
    def test_zero_when_equal(self):
        assert rmse([0.1, 0.4], [0.1, 0.4]) == 0.0

    def test_unit_when_fully_opposed(self):
        assert rmse([0.0, 1.0], [1.0, 0.0]) == 1.0

    def test_matches_high_precision_reference(self):
        rng = np.random.default_rng(42)
        x = rng.uniform(0, 1, size=5000)
        y = rng.uniform(0, 1, size=5000)
        assert abs(rmse(x, y) - rmse_reference(x, y)) < 1e-12

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 1, size=100)
        y = rng.uniform(0, 1, size=100)
        assert rmse(x, y) == rmse(y, x)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            rmse([], [])


class TestAggregate:
    def test_single_row(self):
        assert ewer3_aggregate([(0.37, 4.2)]) == 0.37

    def test_duration_weighting(self):
        assert ewer3_aggregate([(0.1, 2.0), (0.3, 6.0)]) == pytest.approx(0.25, abs=1e-15)

    def test_equal_durations_give_mean(self):
        preds = [0.1, 0.2, 0.6, 0.7]
        got = ewer3_aggregate([(p, 3.0) for p in preds])
        assert got == pytest.approx(np.mean(preds), abs=1e-15)

    def test_bounded_by_prediction_range(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            rows = [(rng.uniform(0, 1), rng.uniform(0.1, 10)) for _ in range(20)]
            agg = ewer3_aggregate(rows)
            preds = [p for p, _ in rows]
            assert min(preds) <= agg <= max(preds)

    def test_order_invariance(self):
        rng = np.random.default_rng(3)
        rows = [(rng.uniform(0, 1), rng.uniform(0.1, 10)) for _ in range(50)]
        base = ewer3_aggregate(rows)
        perm = [rows[i] for i in rng.permutation(50)]
        assert abs(ewer3_aggregate(perm) - base) < 1e-12

    def test_empty_and_bad_duration(self):
        with pytest.raises(DataError):
            ewer3_aggregate([])
        with pytest.raises(DataError, match="duration"):
            ewer3_aggregate([(0.5, 0.0)])


class TestCumulativeCurve:
    def test_two_point_example(self):
        points = cumulative_curve([(0.0, 1.0), (1.0, 1.0)])
        assert points == [(1, 0.0), (2, 0.5)]

    def test_final_point_equals_aggregate_bitwise(self):
        rng = np.random.default_rng(42)
        rows = [(rng.uniform(0, 1), rng.uniform(0.1, 10)) for _ in range(137)]
        points = cumulative_curve(rows)
        assert points[-1][1] == ewer3_aggregate(rows)

    def test_indices_run_from_one(self):
        rows = [(0.5, 1.0)] * 7
        points = cumulative_curve(rows)
        assert [k for k, _ in points] == list(range(1, 8))


class TestDensityHistogram:
    def test_identical_values_one_bin(self):
        hist = density_histogram([0.3] * 40)
        masses = [m for _, _, m in hist]
        assert sum(1 for m in masses if m > 0) == 1
        assert max(masses) == 1.0

    def test_masses_sum_to_one(self):
        rng = np.random.default_rng(42)
        hist = density_histogram(rng.uniform(0, 1, size=999))
        assert abs(sum(m for _, _, m in hist) - 1.0) < 1e-12

    def test_uniform_grid_exact(self):
        values = [(b + 0.5) / 50 for b in range(50)] * 3
        hist = density_histogram(values)
        for _, _, mass in hist:
            assert mass == pytest.approx(1 / 50, abs=1e-15)

    def test_top_edge_in_last_bin(self):
        hist = density_histogram([1.0])
        assert hist[-1][2] == 1.0

    def test_bin_edges(self):
        hist = density_histogram([0.0])
        assert hist[0][:2] == (0.0, 0.02)
        assert hist[-1][:2] == (0.98, 1.0)

    def test_out_of_range_rejected(self):
        with pytest.raises(DataError, match="outside"):
            density_histogram([0.5, 1.01])

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            density_histogram([])


def labeled_manifest(rows):
    return Manifest(tuple(
        Utterance(id=rid, lang="xx", wav=f"{rid}.wav", dur=dur, hyp="a", wer=wer)
        for rid, dur, wer in rows
    ))


class TestEvaluate:
    def test_perfect_predictions(self):
        man = labeled_manifest([("a", 1.0, 0.1), ("b", 2.0, 0.5), ("c", 1.0, 0.9)])
        report = evaluate([("a", 0.1), ("b", 0.5), ("c", 0.9)], man)
        assert report.pcc == pytest.approx(1.0, abs=1e-12)
        assert report.rmse == 0.0
        assert report.ewer3_percent == report.oracle_wer_percent

    def test_constant_shift(self):
        man = labeled_manifest([("a", 1.0, 0.1), ("b", 1.0, 0.3), ("c", 1.0, 0.5)])
        report = evaluate([("a", 0.2), ("b", 0.4), ("c", 0.6)], man)
        assert report.pcc == pytest.approx(1.0, abs=1e-12)
        assert report.rmse == pytest.approx(0.1, abs=1e-12)

    def test_id_mismatch(self):
        man = labeled_manifest([("a", 1.0, 0.1), ("b", 1.0, 0.3)])
        with pytest.raises(DataError, match="mismatch"):
            evaluate([("a", 0.1), ("x", 0.3)], man)

    def test_count_mismatch(self):
        man = labeled_manifest([("a", 1.0, 0.1)])
        with pytest.raises(DataError, match="count"):
            evaluate([("a", 0.1), ("b", 0.2)], man)

    def test_unlabeled_rejected(self):
        man = Manifest((Utterance(id="a", lang="xx", wav="a.wav", dur=1.0, hyp="h"),))
        with pytest.raises(DataError, match="label"):
            evaluate([("a", 0.1)], man)

    def test_constant_predictions_yield_undefined_pcc(self):
        man = labeled_manifest([("a", 1.0, 0.1), ("b", 1.0, 0.3)])
        report = evaluate([("a", 0.5), ("b", 0.5)], man)
        assert report.pcc is None
        assert report.rmse > 0

    def test_density_over_predictions(self):
        man = labeled_manifest([("a", 1.0, 0.0), ("b", 1.0, 1.0)])
        report = evaluate([("a", 0.41), ("b", 0.41)], man)
        masses = [m for _, _, m in report.density]
        assert masses[int(0.41 * 50)] == 1.0

    def test_accepts_prediction_triples(self):
        man = labeled_manifest([("a", 1.0, 0.1), ("b", 1.0, 0.3)])
        report = evaluate([("a", 0.1, 1.0), ("b", 0.3, 1.0)], man)
        assert report.rmse == 0.0


class TestWriteReport:
    def test_files_and_contents(self, tmp_path):
        man = labeled_manifest([("a", 1.0, 0.1), ("b", 3.0, 0.5), ("c", 2.0, 0.9)])
        report = evaluate([("a", 0.2), ("b", 0.4), ("c", 0.8)], man)
        write_report(report, tmp_path)

        summary = json.loads((tmp_path / "report.json").read_text())
        assert summary["n_utterances"] == 3
        assert summary["total_duration"] == 6.0
        assert summary["pcc"] == pytest.approx(report.pcc)
        assert summary["rmse"] == pytest.approx(report.rmse)

        with open(tmp_path / "scatter.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["id", "oracle", "predicted"]
        assert len(rows) == 4
        assert rows[1][0] == "a"
        assert float(rows[1][2]) == 0.2

        with open(tmp_path / "cumulative.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["k", "aggregate_percent"]
        assert len(rows) == 4
        assert float(rows[-1][1]) == pytest.approx(report.ewer3_percent)

        with open(tmp_path / "density.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["bin_low", "bin_high", "mass"]
        assert len(rows) == 51
        assert abs(sum(float(r[2]) for r in rows[1:]) - 1.0) < 1e-12

    def test_undefined_pcc_serialized_as_null(self, tmp_path):
        man = labeled_manifest([("a", 1.0, 0.1), ("b", 1.0, 0.3)])
        report = evaluate([("a", 0.5), ("b", 0.5)], man)
        write_report(report, tmp_path)
        summary = json.loads((tmp_path / "report.json").read_text())
        assert summary["pcc"] is None
