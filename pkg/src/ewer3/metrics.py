"""Evaluation measures and report series.

All reductions run left to right in manifest order so reruns are
bit-reproducible. The report carries PCC/RMSE as fractions and the
duration-weighted aggregates in percent.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .corpus import Manifest
from .errors import DataError, UndefinedMetricError


def pcc(x, y) -> float:
    """Sample Pearson correlation, two-pass (means first)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("pcc needs two equal-length 1-d value lists")
    if len(x) < 2:
        raise DataError("pcc needs at least 2 pairs")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.sum(dx * dx))
    syy = float(np.sum(dy * dy))
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedMetricError("pcc undefined: zero variance input")
    return float(np.sum(dx * dy) / np.sqrt(sxx * syy))


def rmse(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("rmse needs two equal-length 1-d value lists")
    if len(x) == 0:
        raise DataError("rmse needs at least 1 pair")
    d = x - y
    return float(np.sqrt(np.mean(d * d)))


def ewer3_aggregate(rows) -> float:
    """Duration-weighted mean prediction: sum(pred*dur)/sum(dur), left to right."""
    if not rows:
        raise DataError("empty row list")
    num = 0.0
    den = 0.0
    for pred, dur in rows:
        if dur <= 0:
            raise DataError(f"non-positive duration {dur!r}")
        num += pred * dur
        den += dur
    return num / den


def cumulative_curve(rows) -> List[Tuple[int, float]]:
    """Running duration-weighted aggregate after each row, in the given order.

    Shares the accumulation order with ewer3_aggregate, so the final point
    equals the full-set aggregate bitwise.
    """
    if not rows:
        raise DataError("empty row list")
    points = []
    num = 0.0
    den = 0.0
    for k, (pred, dur) in enumerate(rows, start=1):
        if dur <= 0:
            raise DataError(f"non-positive duration {dur!r}")
        num += pred * dur
        den += dur
        points.append((k, num / den))
    return points


def density_histogram(values, n_bins: int = 50) -> List[Tuple[float, float, float]]:
    """Normalized masses over equal-width bins of [0,1]; last bin closed.

    Returns (bin_low, bin_high, mass) rows; masses sum to 1.
    """
    values = list(values)
    if not values:
        raise DataError("empty value list")
    counts = [0] * n_bins
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise DataError(f"value {v!r} outside [0, 1]")
        counts[min(int(np.floor(v * n_bins)), n_bins - 1)] += 1
    total = len(values)
    width = 1.0 / n_bins
    return [(b * width, (b + 1) * width, counts[b] / total) for b in range(n_bins)]


@dataclass(frozen=True)
class EvalReport:
    rows: tuple        # (id, duration, oracle wer, predicted wer)
    pcc: Optional[float]  # None when variance collapses (reported, never silent)
    rmse: float
    ewer3_percent: float
    oracle_wer_percent: float
    cumulative: tuple  # (k, aggregate fraction)
    scatter: tuple     # (id, oracle, predicted)
    density: tuple     # (bin_low, bin_high, mass) over predictions


def evaluate(predictions, manifest: Manifest) -> EvalReport:
    """Score (id, predicted) pairs against a labeled manifest (ids must align 1:1)."""
    preds = [(row[0], row[1]) for row in predictions]
    if len(preds) != len(manifest):
        raise DataError(f"prediction count {len(preds)} != manifest size {len(manifest)}")
    rows = []
    for (pid, pred), utt in zip(preds, manifest):
        if pid != utt.id:
            raise DataError(f"id mismatch: prediction {pid!r} vs manifest {utt.id!r}")
        if utt.wer is None:
            raise DataError(f"utterance {utt.id!r} has no wer label")
        rows.append((utt.id, utt.dur, utt.wer, pred))
    pred_dur = [(pred, dur) for _, dur, _, pred in rows]
    oracle_dur = [(oracle, dur) for _, dur, oracle, _ in rows]
    pred_values = [pred for _, _, _, pred in rows]
    oracle_values = [oracle for _, _, oracle, _ in rows]
    try:
        correlation = pcc(pred_values, oracle_values)
    except (UndefinedMetricError, DataError):
        correlation = None
    return EvalReport(
        rows=tuple(rows),
        pcc=correlation,
        rmse=rmse(pred_values, oracle_values),
        ewer3_percent=100.0 * ewer3_aggregate(pred_dur),
        oracle_wer_percent=100.0 * ewer3_aggregate(oracle_dur),
        cumulative=tuple(cumulative_curve(pred_dur)),
        scatter=tuple((rid, oracle, pred) for rid, _, oracle, pred in rows),
        density=tuple(density_histogram(pred_values)),
    )


def write_report(report: EvalReport, out_dir) -> None:
    """Write report.json plus scatter.csv, cumulative.csv, density.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "n_utterances": len(report.rows),
        "total_duration": sum(dur for _, dur, _, _ in report.rows),
        "pcc": report.pcc,
        "rmse": report.rmse,
        "ewer3_percent": report.ewer3_percent,
        "oracle_wer_percent": report.oracle_wer_percent,
    }
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(out / "scatter.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "oracle", "predicted"])
        for rid, oracle, pred in report.scatter:
            writer.writerow([rid, repr(float(oracle)), repr(float(pred))])
    with open(out / "cumulative.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "aggregate_percent"])
        for k, aggregate in report.cumulative:
            writer.writerow([k, repr(100.0 * aggregate)])
    with open(out / "density.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_low", "bin_high", "mass"])
        for low, high, mass in report.density:
            writer.writerow([repr(low), repr(high), repr(mass)])
