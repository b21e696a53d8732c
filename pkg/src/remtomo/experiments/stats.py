"""Curve aggregation, power-law fits and threshold histograms."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .runner import RunRecord


@dataclass
class Curve:
    N: np.ndarray
    mean: np.ndarray
    q25: np.ndarray
    q50: np.ndarray
    q75: np.ndarray
    count: int


@dataclass
class PowerLawFit:
    exponent: float
    prefactor: float
    stderr: float
    n_points: int


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    overflow: int
    values: np.ndarray


def aggregate_curve(records: Sequence[RunRecord]) -> Curve:
    """Mean and quartiles per checkpoint over the valid records.

    Raises:
        ValueError: if there are no valid records or their schedules differ.
    """
    valid = [r for r in records if r.valid]
    if not valid:
        raise ValueError("no valid records to aggregate")
    schedule = list(valid[0].N)
    if any(list(r.N) != schedule for r in valid):
        raise ValueError("records do not share a checkpoint schedule")
    y = np.array([r.infidelity for r in valid], dtype=float)
    q25, q50, q75 = np.percentile(y, [25, 50, 75], axis=0)
    return Curve(np.array(schedule), y.mean(axis=0), q25, q50, q75, len(valid))


def _xy(curve) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(curve, Curve):
        return np.asarray(curve.N, dtype=float), np.asarray(curve.mean, dtype=float)
    x, y = curve
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def power_law_fit(curve, fit_range: tuple[float, float]) -> PowerLawFit:
    """Least-squares line through ``(log N, log y)`` for checkpoints inside ``fit_range``.

    Args:
        curve: a :class:`Curve` (its mean is fitted) or an ``(N, y)`` pair.
        fit_range: inclusive ``(N_lo, N_hi)``.

    Returns:
        ``y ~ prefactor * N^exponent`` with the slope's standard error.

    Raises:
        ValueError: with fewer than 3 points in range or nonpositive values.
    """
    x, y = _xy(curve)
    lo, hi = fit_range
    sel = (x >= lo) & (x <= hi)
    if sel.sum() < 3:
        raise ValueError(f"fewer than 3 checkpoints inside range [{lo:g}, {hi:g}]")
    if np.any(y[sel] <= 0):
        raise ValueError("nonpositive values inside the fit range")
    res = stats.linregress(np.log(x[sel]), np.log(y[sel]))
    return PowerLawFit(float(res.slope), float(np.exp(res.intercept)), float(res.stderr), int(sel.sum()))


def rolling_power_law(curve, window_factor: float = 5.0) -> list[tuple[float, float]]:
    """Exponent of the fit over ``[x, window_factor * x]`` for every checkpoint ``x`` whose window is covered."""
    if window_factor <= 1:
        raise ValueError("window_factor must exceed 1")
    x, y = _xy(curve)
    out = []
    for xi in x:
        if xi * window_factor > x[-1]:
            break
        sel = (x >= xi) & (x <= xi * window_factor)
        if sel.sum() < 3 or np.any(y[sel] <= 0):
            continue
        out.append((float(xi), float(stats.linregress(np.log(x[sel]), np.log(y[sel])).slope)))
    return out


def _loglog_interp(x0, x1, y0, y1, at, solve_for_x: bool) -> float:
    lx0, lx1, ly0, ly1 = np.log([x0, x1, y0, y1])
    if solve_for_x:
        if ly1 == ly0:
            return float(x1)
        return float(np.exp(lx0 + (np.log(at) - ly0) * (lx1 - lx0) / (ly1 - ly0)))
    return float(np.exp(ly0 + (np.log(at) - lx0) * (ly1 - ly0) / (lx1 - lx0)))


def infidelity_at(record: RunRecord, n: float) -> float | None:
    """Infidelity at ``n`` shots by log-log interpolation; None outside the recorded span."""
    x = np.asarray(record.N, dtype=float)
    y = np.asarray(record.infidelity, dtype=float)
    if len(x) == 0 or n < x[0] or n > x[-1]:
        return None
    i = int(np.searchsorted(x, n))
    if x[i] == n:
        return float(y[i])
    if y[i - 1] <= 0 or y[i] <= 0:
        return float(np.interp(n, x, y))
    return _loglog_interp(x[i - 1], x[i], y[i - 1], y[i], n, solve_for_x=False)


def shots_to_infidelity(record: RunRecord, threshold: float) -> float | None:
    """Shots at which the infidelity first reaches ``threshold``; None if it never does."""
    x = np.asarray(record.N, dtype=float)
    y = np.asarray(record.infidelity, dtype=float)
    hit = np.nonzero(y <= threshold)[0]
    if len(hit) == 0:
        return None
    i = int(hit[0])
    if i == 0 or y[i] <= 0:
        return float(x[i])
    return _loglog_interp(x[i - 1], x[i], y[i - 1], y[i], threshold, solve_for_x=True)


def threshold_statistics(records: Sequence[RunRecord], mode: str, threshold: float,
                         n_bins: int = 20, edges: np.ndarray | None = None) -> Histogram:
    """Histogram of per-record infidelity at ``N = threshold`` or of shots to reach ``threshold``.

    Bins are log-spaced between the smallest and largest value unless
    ``edges`` are given. Records that never reach the threshold, or do not
    cover ``N``, are counted in ``overflow``.
    """
    if mode == "infidelity_at_N":
        raw = [infidelity_at(r, threshold) for r in records if r.valid]
    elif mode == "shots_to_infidelity":
        raw = [shots_to_infidelity(r, threshold) for r in records if r.valid]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    values = np.array([v for v in raw if v is not None and v > 0], dtype=float)
    overflow = len(raw) - len(values)
    if edges is None:
        if len(values) == 0:
            edges = np.array([1.0, 10.0])
        else:
            lo, hi = values.min(), values.max()
            if hi <= lo:
                lo, hi = lo / 1.01, hi * 1.01
            edges = np.geomspace(lo, hi, n_bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    outside = len(values) - counts.sum()
    return Histogram(np.asarray(edges), counts, overflow + int(outside), values)


def reduction_factor(curve_adaptive: Curve, curve_static: Curve) -> list[tuple[float, float]]:
    """Pointwise ratio of adaptive to static mean infidelity."""
    if not np.array_equal(curve_adaptive.N, curve_static.N):
        raise ValueError("curves have different checkpoints")
    if np.any(curve_static.mean == 0):
        raise ValueError("static curve has a zero mean infidelity")
    return [(float(n), float(a / s)) for n, a, s in zip(curve_adaptive.N, curve_adaptive.mean, curve_static.mean)]
