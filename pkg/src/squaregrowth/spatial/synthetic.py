"""Synthetic microdata with planted rank bands.

Cells sit on a grid around x0 and are visited ring by ring (Chebyshev
rings of the grid). Each cell gets a rotation index per factor group; a
cell with rotation r puts factor r of each block at the top of that block.
Rotations 0..omega-2 fill the rings inside the planted radius and the last
rotation first appears on the ring at that radius, so full coverage is
reached there and not before.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..combinatorics import FactorSet
from .microdata import UnitTable

RANK_DECAY = 0.8


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticConfig:
    m: int = 6
    omega_star: int = 6
    n_locations: int = 169
    units_per_location: int = 1000
    s_sq_star: float = 0.6
    noise: float = 0.0
    seed: int = 0
    resolution: float = 0.1
    x0: tuple[float, float] = (40.75, -73.95)
    profile: str = "geometric"  # or "zipf": counts proportional to rank**-zipf_exponent
    zipf_exponent: float = 1.0

    def __post_init__(self):
        if self.profile not in ("geometric", "zipf"):
            raise ConfigError(f"unknown profile {self.profile!r}")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if not 1 <= self.omega_star <= self.m:
            raise ConfigError("need 1 <= omega_star <= m")
        if self.s_sq_star <= 0:
            raise ConfigError("s_sq_star must be > 0")
        if not 0.0 <= self.noise < 1.0:
            raise ConfigError("noise must lie in [0, 1)")
        if self.n_locations < 1 or self.units_per_location < 1:
            raise ConfigError("need at least one location and one unit per location")
        if self.resolution <= 0:
            raise ConfigError("resolution must be > 0")


@dataclass(frozen=True)
class PlantedGroup:
    factors: FactorSet
    omega_star: int
    ring: int  # ring where coverage completes
    s_sq_star: float


@dataclass(frozen=True)
class SyntheticData:
    units: UnitTable
    x0: tuple[float, float]
    resolution: float
    groups: tuple[PlantedGroup, ...]
    cell_rc: np.ndarray = field(repr=False)  # grid offsets from x0 per cell
    rotations: np.ndarray = field(repr=False)  # (n_cells, n_groups)

    @property
    def s_sq_star(self) -> float:
        return self.groups[0].s_sq_star

    @property
    def omega_star(self) -> int:
        return self.groups[0].omega_star


def ring_layout(n: int) -> np.ndarray:
    """First n grid offsets (di, dj) in ring order, then row-major within a ring."""
    radius = math.ceil((math.sqrt(n) - 1) / 2)
    offs = [(di, dj) for di in range(-radius, radius + 1) for dj in range(-radius, radius + 1)]
    offs.sort(key=lambda o: (max(abs(o[0]), abs(o[1])), o))
    return np.array(offs[:n], dtype=np.int64).reshape(-1, 2)


def _rings(rc: np.ndarray) -> np.ndarray:
    return np.max(np.abs(rc), axis=1)


def assign_rotations(
    rings: np.ndarray, omega: int, ring_star: int, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Rotation per cell (cells given in ring order).

    With ``rng`` the rotations are shuffled among cells of the same class
    (inside, on, or outside the planted ring).
    """
    rot = np.zeros(len(rings), dtype=np.int64)
    if omega == 1:
        return rot
    inner = np.flatnonzero(rings < ring_star)
    if len(inner) < omega - 1 or not np.any(rings == ring_star):
        raise ConfigError(
            f"band width {omega} needs {omega - 1} cells inside ring {ring_star} and cells on it"
        )
    rot[inner] = np.arange(len(inner)) % (omega - 1)
    on = np.flatnonzero(rings == ring_star)
    rot[on] = (omega - 1 + np.arange(len(on))) % omega
    outer = np.flatnonzero(rings > ring_star)
    rot[outer] = np.arange(len(outer)) % omega
    if rng is not None:
        for cls in (inner, on, outer):
            rot[cls] = rng.permutation(rot[cls])
    return rot


def rank_profile(m: int, units: int, profile: str = "geometric", exponent: float = 1.0) -> np.ndarray:
    """Strictly decreasing counts for rank positions 0..m-1 summing to about ``units``."""
    if profile == "zipf":
        w = np.arange(1, m + 1, dtype=np.float64) ** -exponent
    else:
        w = RANK_DECAY ** np.arange(m)
    counts = np.rint(units * w / w.sum()).astype(np.int64)
    for p in range(m - 2, -1, -1):
        counts[p] = max(counts[p], counts[p + 1] + 1)
    return counts


def planted_counts(m: int, omega: int, rotations: np.ndarray, units, profile=None) -> np.ndarray:
    """Count matrix (n_cells, m): blocks of omega rank positions, rotated per cell.

    ``units`` is the per-cell total, or a ready count profile when ``profile`` is given.
    """
    profile = rank_profile(m, units) if profile is None else profile
    out = np.zeros((len(rotations), m), dtype=np.int64)
    for p in range(m):
        b, j = divmod(p, omega)
        width = min(omega, m - b * omega)
        factor = b * omega + (j + rotations) % width
        out[np.arange(len(rotations)), factor] = profile[p]
    return out


def relabel(counts: np.ndarray, noise: float, rng: np.random.Generator) -> np.ndarray:
    """Each unit independently gets a uniform random label with probability ``noise``."""
    if noise == 0.0:
        return counts
    removed = rng.binomial(counts, noise)
    m = counts.shape[1]
    added = np.array([rng.multinomial(k, np.full(m, 1.0 / m)) for k in removed.sum(axis=1)])
    return counts - removed + added.reshape(counts.shape)


def _snap(x0, resolution: float) -> tuple[np.ndarray, tuple[float, float]]:
    base = np.floor(np.asarray(x0, dtype=np.float64) / resolution).astype(np.int64)
    center = (base + 0.5) * resolution
    return base, (float(center[0]), float(center[1]))


def units_from_counts(
    counts: np.ndarray, base: np.ndarray, rc: np.ndarray, resolution: float, factors: FactorSet, year: int = 0
) -> UnitTable:
    cell_lat = (base[0] + rc[:, 0] + 0.5) * resolution
    cell_lon = (base[1] + rc[:, 1] + 0.5) * resolution
    n_cells, m = counts.shape
    flat = counts.reshape(-1)
    cell_of = np.repeat(np.repeat(np.arange(n_cells), m), flat)
    factor_of = np.repeat(np.tile(np.arange(m), n_cells), flat)
    n = len(cell_of)
    return UnitTable(
        np.arange(n, dtype=np.int64),
        cell_lat[cell_of],
        cell_lon[cell_of],
        factor_of.astype(np.int64),
        factors,
        np.full(n, year, dtype=np.int64),
    )


def _ring_for(s: float, resolution: float) -> int:
    return max(0, math.ceil(s / resolution - 1e-9))


def _plant(config: SyntheticConfig):
    rng = np.random.default_rng(config.seed)
    rc = ring_layout(config.n_locations)
    rings = _rings(rc)
    ring_star = _ring_for(config.s_sq_star, config.resolution)
    if config.omega_star > 1 and ring_star == 0:
        raise ConfigError("s_sq_star is below one cell; no room for a band wider than 1")
    rot = assign_rotations(rings, config.omega_star, ring_star, rng)
    profile = rank_profile(config.m, config.units_per_location, config.profile, config.zipf_exponent)
    counts = planted_counts(config.m, config.omega_star, rot, config.units_per_location, profile)
    counts = counts[:, rng.permutation(config.m)]  # which label lands in which block
    return relabel(counts, config.noise, rng), rc, rot, ring_star


def generate_synthetic(config: SyntheticConfig) -> SyntheticData:
    """Planted square of band width omega_star completing at radius s_sq_star."""
    counts, rc, rot, ring_star = _plant(config)
    base, x0 = _snap(config.x0, config.resolution)
    factors = FactorSet.of_size(config.m)
    group = PlantedGroup(factors, config.omega_star, ring_star, ring_star * config.resolution)
    units = units_from_counts(counts, base, rc, config.resolution, factors)
    return SyntheticData(units, x0, config.resolution, (group,), rc, rot[:, None])


@dataclass(frozen=True)
class NestedConfig:
    """Two factor groups, each with its own planted square radius."""

    m_inner: int = 4
    m_outer: int = 4
    s_inner: float = 0.018
    s_outer: float = 0.65
    resolution: float = 0.006
    dense_rings: int = 4
    stride: int = 8
    units_per_location: int = 400
    noise: float = 0.0
    seed: int = 0
    x0: tuple[float, float] = (40.75, -73.95)


def nested_layout(dense_rings: int, outer_ring: int, stride: int) -> np.ndarray:
    """Dense block of rings, then sparse cells on the axes and diagonals."""
    offs = {tuple(o) for o in ring_layout((2 * dense_rings + 1) ** 2)}
    sparse = list(range(dense_rings + stride, outer_ring, stride)) + [outer_ring, outer_ring + 1]
    for r in sparse:
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)):
            offs.add((di * r, dj * r))
    ordered = sorted(offs, key=lambda o: (max(abs(o[0]), abs(o[1])), o))
    return np.array(ordered, dtype=np.int64)


def generate_nested(config: NestedConfig) -> SyntheticData:
    """Inner group completes a square at s_inner and the outer group at s_outer."""
    rng = np.random.default_rng(config.seed)
    ring_in = _ring_for(config.s_inner, config.resolution)
    ring_out = _ring_for(config.s_outer, config.resolution)
    if not 0 < ring_in < config.dense_rings < ring_out:
        raise ConfigError("need 0 < inner ring < dense rings < outer ring")
    rc = nested_layout(config.dense_rings, ring_out, config.stride)
    rings = _rings(rc)
    labels = FactorSet.of_size(config.m_inner + config.m_outer).labels
    inner = FactorSet(labels[: config.m_inner])
    outer = FactorSet(labels[config.m_inner :])
    rot_in = assign_rotations(rings, config.m_inner, ring_in, rng)
    rot_out = assign_rotations(rings, config.m_outer, ring_out, rng)
    counts = np.concatenate(
        [
            planted_counts(config.m_inner, config.m_inner, rot_in, config.units_per_location),
            planted_counts(config.m_outer, config.m_outer, rot_out, config.units_per_location),
        ],
        axis=1,
    )
    counts = relabel(counts, config.noise, rng)
    base, x0 = _snap(config.x0, config.resolution)
    groups = (
        PlantedGroup(inner, config.m_inner, ring_in, ring_in * config.resolution),
        PlantedGroup(outer, config.m_outer, ring_out, ring_out * config.resolution),
    )
    units = units_from_counts(counts, base, rc, config.resolution, FactorSet(labels))
    return SyntheticData(units, x0, config.resolution, groups, rc, np.stack([rot_in, rot_out], axis=1))


def generate_growth_pair(
    config: SyntheticConfig, effect: float = 0.1, local_sd: float = 0.1
) -> tuple[UnitTable, UnitTable, np.ndarray]:
    """Two years of the same locations.

    Each factor gets one map-wide growth direction; every cell adds its own
    Gaussian deviation to the log growth rate. Returns (year 0, year 1,
    directions as +1/-1 per factor).
    """
    counts, rc, _, _ = _plant(config)
    rng = np.random.default_rng([config.seed, 1])
    direction = rng.choice(np.array([-1, 1]), size=config.m)
    rate = direction * effect + local_sd * rng.standard_normal(counts.shape)
    later = np.rint(counts * np.exp(rate)).astype(np.int64)
    base, _ = _snap(config.x0, config.resolution)
    factors = FactorSet.of_size(config.m)
    y0 = units_from_counts(counts, base, rc, config.resolution, factors, year=0)
    y1 = units_from_counts(later, base, rc, config.resolution, factors, year=1)
    return y0, y1, direction
