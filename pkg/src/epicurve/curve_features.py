"""Smoothing and shape-feature extraction for daily infection-rate curves.

A rate series is smoothed with a centered 13-day triangular kernel
(weights (7-|d|)/49, identical to two passes of a centered 7-day simple
moving average). From the smoothed curve we locate the peak, the
threshold-crossing days on the growth and decline sides, and derive the
18 shape feature-variables plus peakdate, robust peak, and
curvature-at-peak.

Decline-side crossings use a tail condition: the crossing day is the
first day after the peak from which the curve stays strictly below the
threshold for the entire remaining window. A curve that never does so
within the window is right-censored and the feature is NA.
"""

from __future__ import annotations

import datetime as dt
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ComputationError
from .ingest import RateSeries

#: Triangular kernel, offsets -6..6, sums to exactly 1.
KERNEL = np.array([(7 - abs(d)) / 49.0 for d in range(-6, 7)])

#: Alpha levels whose left/right spans form shape features (0.1 is used
#: only for the robust peak and curvature).
FEATURE_ALPHAS = (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

ALL_ALPHAS = (0.1,) + FEATURE_ALPHAS

#: Column order of the feature CSV.
FEATURE_COLUMNS = (
    ["peakdate", "peakvalue", "peak", "curvature"]
    + [f"left{int(a * 100)}" for a in reversed(FEATURE_ALPHAS)]
    + [f"right{int(a * 100)}" for a in reversed(FEATURE_ALPHAS)]
)

#: The 18 shape feature-variables (peakdate is the lone calendar feature).
SHAPE_FEATURES = tuple(c for c in FEATURE_COLUMNS if c not in ("peakdate", "curvature"))


class BoundaryPeakWarning(UserWarning):
    """Peak too close to the window edge for curvature-based features."""


@dataclass(frozen=True)
class SmoothedSeries:
    """Rate series after the 13-day weighted average; 6 days trimmed per side."""

    unit_id: str
    start_date: dt.date
    values: tuple[float, ...]


@dataclass(frozen=True)
class CurveFeatures:
    """Shape features of one smoothed curve; day spans are integer days.

    ``peak`` is the offset t_max - t0 between the raw argmax and the
    robust peak. Censored crossings propagate as None.
    """

    unit_id: str
    peakdate: dt.date
    peakvalue: float
    robust_peak: Optional[int]
    peak: Optional[int]
    curvature: Optional[int]
    left: dict[float, Optional[int]]
    right: dict[float, Optional[int]]

    def as_row(self) -> dict[str, object]:
        """Flatten to the feature-CSV column layout (NA as None)."""
        row: dict[str, object] = {
            "unit_id": self.unit_id,
            "peakdate": self.peakdate.isoformat(),
            "peakvalue": self.peakvalue,
            "peak": self.peak,
            "curvature": self.curvature,
        }
        for a in FEATURE_ALPHAS:
            row[f"left{int(a * 100)}"] = self.left.get(a)
            row[f"right{int(a * 100)}"] = self.right.get(a)
        return row


def smooth(series: RateSeries) -> SmoothedSeries:
    """Apply the 13-day triangular moving average.

    Output is 12 days shorter than the input and starts 6 days later.
    """
    x = np.asarray(series.rates, dtype=float)
    if x.size < 13:
        raise ComputationError(
            f"{series.unit_id}: series of length {x.size} too short to smooth (need 13)"
        )
    values = np.convolve(x, KERNEL, mode="valid")
    return SmoothedSeries(
        unit_id=series.unit_id,
        start_date=series.start_date + dt.timedelta(days=6),
        values=tuple(values),
    )


def find_peak(s: SmoothedSeries) -> tuple[int, float]:
    """Earliest argmax of the smoothed curve and its value.

    All-zero curves carry no infection signal and are an error; a peak
    sitting on the first or last smoothed day only warns.
    """
    v = np.asarray(s.values)
    if v.size == 0:
        raise ComputationError(f"{s.unit_id}: empty smoothed series")
    t_max = int(np.argmax(v))
    peak = float(v[t_max])
    if peak <= 0.0:
        raise ComputationError(f"{s.unit_id}: no infection signal (all-zero curve)")
    if t_max == 0 or t_max == v.size - 1:
        warnings.warn(
            f"{s.unit_id}: boundary peak at day {t_max}", BoundaryPeakWarning
        )
    return t_max, peak


def left_crossing(s: SmoothedSeries, alpha: float) -> Optional[int]:
    """First day at or before the peak with value >= (1-alpha)*peakvalue.

    Returns None when the series already meets the threshold on its very
    first smoothed day (left-censored).
    """
    t_max, peak = find_peak(s)
    threshold = (1.0 - alpha) * peak
    v = np.asarray(s.values)
    if v[0] >= threshold:
        return None
    for t in range(t_max + 1):
        if v[t] >= threshold:
            return t
    return t_max  # unreachable: v[t_max] == peak >= threshold


def right_crossing(s: SmoothedSeries, alpha: float) -> Optional[int]:
    """First day after the peak from which the curve stays strictly below
    (1-alpha)*peakvalue through the end of the window; None if censored."""
    t_max, peak = find_peak(s)
    threshold = (1.0 - alpha) * peak
    v = np.asarray(s.values)
    if t_max == v.size - 1:
        return None
    # suffix running maximum over (t_max, end]
    tail = v[t_max + 1:]
    suffix_max = np.maximum.accumulate(tail[::-1])[::-1]
    below = suffix_max < threshold
    idx = np.nonzero(below)[0]
    if idx.size == 0:
        return None
    return t_max + 1 + int(idx[0])


def extract_features(s: SmoothedSeries) -> CurveFeatures:
    """Derive the full feature set of one smoothed curve.

    The robust peak t0 is the floored midpoint of the two 90%-of-peak
    crossings; all left/right spans are measured from t0. When the peak
    lies within 6 days of either window edge the curvature-dependent
    fields are NA (with a warning) instead of failing the unit.
    """
    t_max, peak = find_peak(s)
    peakdate = s.start_date + dt.timedelta(days=t_max)
    n = len(s.values)

    if t_max < 6 or t_max > n - 7:
        warnings.warn(
            f"{s.unit_id}: peak within 6 days of the window edge; "
            "curvature-dependent features set to NA",
            BoundaryPeakWarning,
        )
        return CurveFeatures(
            unit_id=s.unit_id,
            peakdate=peakdate,
            peakvalue=peak,
            robust_peak=None,
            peak=None,
            curvature=None,
            left={a: None for a in FEATURE_ALPHAS},
            right={a: None for a in FEATURE_ALPHAS},
        )

    l01 = left_crossing(s, 0.1)
    r01 = right_crossing(s, 0.1)
    if l01 is None or r01 is None:
        raise ComputationError(
            f"{s.unit_id}: cannot center curve (a 90%-of-peak crossing is censored)"
        )
    t0 = (l01 + r01) // 2
    curvature = r01 - l01

    left: dict[float, Optional[int]] = {}
    right: dict[float, Optional[int]] = {}
    for a in FEATURE_ALPHAS:
        la = left_crossing(s, a)
        ra = right_crossing(s, a)
        left[a] = None if la is None else t0 - la
        right[a] = None if ra is None else ra - t0

    return CurveFeatures(
        unit_id=s.unit_id,
        peakdate=peakdate,
        peakvalue=peak,
        robust_peak=t0,
        peak=t_max - t0,
        curvature=curvature,
        left=left,
        right=right,
    )
