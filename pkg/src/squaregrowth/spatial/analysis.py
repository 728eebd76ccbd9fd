"""Per-location profiles over window radius: autocorrelation and a growth baseline."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .levels import CellIndex, LevelWindow, within
from .microdata import UnitTable

_TREND_EPS = 1e-12


@dataclass(frozen=True)
class AcfPoint:
    s: float
    corr: float | None  # None when a share has zero variance across locations

    @property
    def undefined(self) -> bool:
        return self.corr is None


def _radii(levels: Sequence[LevelWindow | float]) -> list[float]:
    return [float(w.s) if isinstance(w, LevelWindow) else float(w) for w in levels]


def _shares(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1), np.nan)


def _pearson(a: np.ndarray, b: np.ndarray) -> float | None:
    ok = np.isfinite(a) & np.isfinite(b)
    a, b = a[ok], b[ok]
    if len(a) < 2:
        return None
    da, db = a - a.mean(), b - b.mean()
    va, vb = float(da @ da), float(db @ db)
    if va == 0.0 or vb == 0.0:
        return None
    return float(da @ db) / float(np.sqrt(va * vb))


def acf_profile(
    units: UnitTable, factor: str, levels: Sequence[LevelWindow | float], resolution: float | None = None
) -> list[AcfPoint]:
    """Correlation across locations of the factor's local share with its share at radius s.

    Every occupied base cell serves as a window center. The local share is
    the share inside the first (smallest) radius.
    """
    radii = _radii(levels)
    if len(radii) < 2:
        raise ValueError("need at least two levels")
    if resolution is None:
        first = levels[0]
        resolution = first.index.resolution if isinstance(first, LevelWindow) else radii[1] - radii[0]
    index = CellIndex.build(units, resolution)
    if len(index) < 2:
        raise ValueError("need at least two base locations")
    f = units.factors.index(factor)
    dist = index.pairwise()
    own = index.counts[:, f].astype(np.float64)
    total = index.counts.sum(axis=1).astype(np.float64)

    profile = []
    local = None
    for s in radii:
        a = within(dist, s, resolution).astype(np.float64)
        share = _shares(a @ own, a @ total)
        if local is None:
            local = share
        profile.append(AcfPoint(s, _pearson(local, share)))
    return profile


def acf_csv(profiles: dict[str, list[AcfPoint]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["factor", "s", "corr"])
    for label, points in profiles.items():
        for p in points:
            w.writerow([label, repr(p.s), "nan" if p.corr is None else repr(p.corr)])
    return buf.getvalue()


@dataclass(frozen=True)
class AccuracyPoint:
    s: float
    accuracy: float
    n: int


def baseline_accuracy_vs_level(
    year0: UnitTable,
    year1: UnitTable | None,
    levels: Sequence[LevelWindow | float],
    resolution: float | None = None,
) -> list[AccuracyPoint]:
    """Score a neighbourhood-trend predictor of local share growth at each radius.

    For each location and factor the predictor says "grows" when the factor's
    share rose between the years in the surrounding window, the location
    itself left out. An empty neighbourhood predicts no growth.
    """
    if year1 is None:
        raise ValueError("a second year is required")
    if year0.factors != year1.factors:
        raise ValueError("both years must share one factor set")
    radii = _radii(levels)
    if resolution is None:
        first = levels[0]
        resolution = first.index.resolution if isinstance(first, LevelWindow) else radii[1] - radii[0]

    both = UnitTable(
        np.concatenate([year0.unit_id, year1.unit_id]),
        np.concatenate([year0.lat, year1.lat]),
        np.concatenate([year0.lon, year1.lon]),
        np.concatenate([year0.factor, year1.factor]),
        year0.factors,
        np.concatenate([np.zeros(len(year0), np.int64), np.ones(len(year1), np.int64)]),
    )
    index = CellIndex.build(both, resolution)
    m = year0.factors.m
    c0 = np.zeros((len(index), m))
    c1 = np.zeros((len(index), m))
    split = len(year0)
    np.add.at(c0, (index.unit_cell[:split], year0.factor), 1)
    np.add.at(c1, (index.unit_cell[split:], year1.factor), 1)

    t0, t1 = c0.sum(axis=1, keepdims=True), c1.sum(axis=1, keepdims=True)
    valid = ((t0 > 0) & (t1 > 0)).ravel()
    grew = (_shares(c1, t1) - _shares(c0, t0)) > _TREND_EPS

    dist = index.pairwise()
    others = ~np.eye(len(index), dtype=bool)
    out = []
    for s in radii:
        a = (within(dist, s, resolution) & others).astype(np.float64)
        w0, w1 = a @ c0, a @ c1
        trend = _shares(w1, w1.sum(axis=1, keepdims=True)) - _shares(w0, w0.sum(axis=1, keepdims=True))
        pred = np.nan_to_num(trend, nan=0.0) > _TREND_EPS
        hits = (pred == grew)[valid]
        out.append(AccuracyPoint(s, float(hits.mean()) if hits.size else float("nan"), int(hits.size)))
    return out
