"""Nested windows around a reference point, per-cell rank tables and square detection.

Units are binned into base grid cells of side ``resolution``. A window of
radius s around x0 holds every cell whose center lies within Chebyshev
lat-lon distance s of x0, so windows are unions of whole cells and grow
monotonically with s.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import _kernels
from ..combinatorics import FactorSet
from .microdata import UnitTable

DEFAULT_TAU = 0.25
_EDGE = 1e-9  # relative slack so centers exactly on a window edge are inside


@dataclass(frozen=True)
class CellIndex:
    """Base grid cells occupied by a table, in sorted (row, col) order."""

    resolution: float
    keys: np.ndarray  # (n_cells, 2) int64
    centers: np.ndarray  # (n_cells, 2) lat, lon
    unit_cell: np.ndarray  # cell index of every unit
    counts: np.ndarray  # (n_cells, m_all) unit counts per factor

    @classmethod
    def build(cls, units: UnitTable, resolution: float) -> "CellIndex":
        if resolution <= 0:
            raise ValueError("resolution must be > 0")
        rc = np.stack(
            [np.floor(units.lat / resolution), np.floor(units.lon / resolution)], axis=1
        ).astype(np.int64)
        keys, unit_cell = np.unique(rc, axis=0, return_inverse=True)
        unit_cell = unit_cell.reshape(-1)
        centers = (keys + 0.5) * resolution
        counts = np.zeros((len(keys), units.factors.m), dtype=np.int64)
        np.add.at(counts, (unit_cell, units.factor), 1)
        return cls(resolution, keys, centers, unit_cell, counts)

    def __len__(self) -> int:
        return len(self.keys)

    def distance_to(self, x0) -> np.ndarray:
        lat0, lon0 = x0
        return np.maximum(np.abs(self.centers[:, 0] - lat0), np.abs(self.centers[:, 1] - lon0))

    def pairwise(self) -> np.ndarray:
        c = self.centers
        return np.maximum(
            np.abs(c[:, None, 0] - c[None, :, 0]), np.abs(c[:, None, 1] - c[None, :, 1])
        )


def within(dist: np.ndarray, s: float, resolution: float) -> np.ndarray:
    return dist <= s + _EDGE * max(resolution, s)


@dataclass(frozen=True)
class LevelWindow:
    x0: tuple[float, float]
    s: float
    level_index: int
    cells: np.ndarray  # indices into index.keys
    units: UnitTable
    index: CellIndex

    def __post_init__(self):
        if self.s < 0 or self.level_index < 0:
            raise ValueError("window radius and level must be non-negative")


def build_levels(
    units: UnitTable,
    x0,
    s0: float,
    delta_s: float,
    count: int,
    resolution: float | None = None,
    index: CellIndex | None = None,
) -> list[LevelWindow]:
    """Windows of radius s0 + k * delta_s for k < count.

    ``resolution`` is the base cell size; it defaults to ``delta_s``.
    """
    if delta_s <= 0:
        raise ValueError("delta_s must be > 0")
    if count < 1:
        raise ValueError("count must be >= 1")
    if s0 < 0:
        raise ValueError("s0 must be >= 0")
    if index is None:
        index = CellIndex.build(units, delta_s if resolution is None else resolution)
    x0 = (float(x0[0]), float(x0[1]))
    dist = index.distance_to(x0)
    windows = []
    for k in range(count):
        s = s0 + k * delta_s
        inside = within(dist, s, index.resolution)
        cells = np.flatnonzero(inside)
        windows.append(LevelWindow(x0, s, k, cells, units.select(inside[index.unit_cell]), index))
    return windows


def tracked_factors(window: LevelWindow, m: int = 20) -> FactorSet:
    """The m most frequent factors in the window, ties by label."""
    totals = window.index.counts[window.cells].sum(axis=0)
    labels = window.units.factors.labels
    order = sorted(range(len(labels)), key=lambda f: (-totals[f], labels[f]))
    return FactorSet(tuple(labels[f] for f in order[:m]))


@dataclass(frozen=True)
class RankTable:
    level_index: int
    s: float
    factors: FactorSet
    cell_ids: np.ndarray
    counts: np.ndarray  # (n_cells, m)
    ranks: np.ndarray  # (n_cells, m), 1 = most frequent
    tied: np.ndarray  # (n_cells,)

    @property
    def empty(self) -> bool:
        return len(self.cell_ids) == 0

    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def rows(self):
        labels = self.factors.labels
        for c, cid in enumerate(self.cell_ids):
            for f, label in enumerate(labels):
                yield self.level_index, int(cid), label, int(self.counts[c, f]), int(self.ranks[c, f])


def rank_cells(counts: np.ndarray, labels: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Ranks per row, larger counts first, ties broken by label."""
    order = np.argsort(np.array(labels, dtype=object), kind="stable")
    ranks, tied = _kernels.cell_ranks(np.ascontiguousarray(counts[:, order]))
    out = np.empty_like(ranks)
    out[:, order] = ranks
    return out, tied.astype(bool)


def rank_table(window: LevelWindow, factors: FactorSet) -> RankTable:
    """Counts and ranks of the given factors in every cell of the window."""
    all_labels = window.units.factors.labels
    cols = [all_labels.index(label) for label in factors.labels]
    counts = window.index.counts[window.cells][:, cols]
    if len(window.cells) == 0:
        empty = np.empty((0, factors.m), dtype=np.int32)
        return RankTable(window.level_index, window.s, factors, window.cells, counts, empty, np.empty(0, bool))
    ranks, tied = rank_cells(counts, factors.labels)
    return RankTable(window.level_index, window.s, factors, window.cells, counts, ranks, tied)


def rank_tables_csv(tables: Sequence[RankTable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "cell_id", "factor", "count", "rank"])
    for table in tables:
        w.writerows(table.rows())
    return buf.getvalue()


@dataclass(frozen=True)
class SquareDetection:
    factors: FactorSet
    radii: tuple[float, ...]
    s_sq: float | None
    level: int  # level the summary fields refer to
    coverage: np.ndarray  # (m, m) factor x rank at ``level``
    r0: np.ndarray  # (L, m) min rank per level
    r_omega: np.ndarray  # (L, m) max rank per level
    balance_ok: tuple[bool, ...]
    omega_hat: int
    theta1: float

    @property
    def found(self) -> bool:
        return self.s_sq is not None

    def to_json(self) -> dict:
        return {
            "s_sq": self.s_sq,
            "omega_hat": self.omega_hat,
            "coverage": self.coverage.astype(int).tolist(),
            "theta1": self.theta1,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _band_mode(widths: list[int]) -> int:
    if not widths:
        return 0
    tally = Counter(widths)
    best = max(tally.values())
    return max(w for w, n in tally.items() if n == best)


def detect_square(levels: Sequence[RankTable], tau: float = DEFAULT_TAU) -> SquareDetection:
    """Scan nested levels for the first with full factor x rank coverage and balance.

    The band width per factor counts ranks inclusively, r_omega - r0 + 1, so a
    factor stuck at one rank has width 1. ``omega_hat`` is the modal width at
    the detected level, or at the last level when no square is found.
    """
    if not levels:
        raise ValueError("need at least one level")
    factors = levels[0].factors
    m = factors.m
    n_levels = len(levels)

    # each cell enters at the first level that contains it; whole cells keep their ranks
    first: dict[int, tuple[int, np.ndarray]] = {}
    for li, table in enumerate(levels):
        if table.factors != factors:
            raise ValueError("all levels must track the same factors")
        for c, cid in enumerate(table.cell_ids):
            if table.counts[c].any():  # cells without tracked units carry no ranking
                first.setdefault(int(cid), (li, table.ranks[c]))
    if first:
        cell_level = np.array([lv for lv, _ in first.values()], dtype=np.int64)
        ranks = np.array([r for _, r in first.values()], dtype=np.int32).reshape(-1, m)
    else:
        cell_level = np.empty(0, dtype=np.int64)
        ranks = np.empty((0, m), dtype=np.int32)
    cov, rmin, rmax = _kernels.coverage_scan(ranks, cell_level, n_levels)
    cov = cov.astype(bool)

    balance = []
    for table in levels:
        totals = table.totals()
        balance.append(bool(totals.size and totals.max() > 0 and totals.min() >= (1.0 - tau) * totals.max()))

    hit = next((li for li in range(n_levels) if cov[li].all() and balance[li]), None)
    level = n_levels - 1 if hit is None else hit
    present = rmax[level] > 0
    widths = (rmax[level] - rmin[level] + 1)[present].tolist()
    angles = [math.atan2(hi, lo) for lo, hi in zip(rmin[level][present], rmax[level][present])]
    return SquareDetection(
        factors=factors,
        radii=tuple(float(t.s) for t in levels),
        s_sq=None if hit is None else float(levels[hit].s),
        level=level,
        coverage=cov[level].copy(),
        r0=np.where(rmax > 0, rmin, 0),
        r_omega=rmax,
        balance_ok=tuple(balance),
        omega_hat=_band_mode(widths),
        theta1=float(np.mean(angles)) if angles else 0.0,
    )


def detect_nested(
    windows: Sequence[LevelWindow], groups: Sequence[FactorSet], tau: float = DEFAULT_TAU
) -> list[SquareDetection]:
    """One detection per factor group over the same windows."""
    return [detect_square([rank_table(w, g) for w in windows], tau) for g in groups]
