"""Growth/balance simulators for the CF, EV and EV-CF regimes.

The clock is rational: a cycle of an m-factor population lasts m + 1/m time
units, split into a growth phase of 2/m and a balance phase of m - 1/m, so
phase boundaries land exactly.

Rates are ratios of successive finite differences taken at cycle ends,
``(x[k+1] - x[k]) / (x[k] - x[k-1])``. A doubling track gives 2, a Fibonacci
track gives the golden ratio and a constant track gives 0.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

from .combinatorics import CombinatorialState, DomainError, InsufficientDataError

__all__ = [
    "PHI",
    "Regime",
    "GrowthConfig",
    "GrowthRecord",
    "GrowthTrajectory",
    "RateEstimate",
    "HyperbolicPoint",
    "cycle_lengths",
    "balance_sequence",
    "balance_growth_factor",
    "simulate",
    "simulate_cf_growth",
    "simulate_ev_growth",
    "simulate_evcf_growth",
    "ev_size",
    "estimate_rates",
    "hyperbolic_embed",
    "trajectory_states",
    "de_moivre",
]

PHI = (1 + math.sqrt(5)) / 2
ARTANH_EPS = 1e-12
# exact rationals until numerator/denominator grow past this many bits
EXACT_BITS = 4096


class Regime(str, Enum):
    CF = "cf"
    EV = "ev"
    EVCF = "evcf"


@dataclass(frozen=True)
class GrowthConfig:
    m: int
    steps: int
    regime: Regime = Regime.EVCF
    seed: int = 0
    n_a0: float = 1.0
    n_abar0: float = 1.0
    # overrides m - 1/m in the EV-CF balance recurrence; 1 gives plain Fibonacci
    balance_multiplier: Fraction | int | float | None = None

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        if self.m < 1:
            raise DomainError(f"m must be >= 1, got {self.m}")
        if self.steps < 1:
            raise DomainError(f"steps must be >= 1, got {self.steps}")
        if not (self.n_a0 > 0 and self.n_abar0 > 0):
            raise DomainError("initial sizes must be positive")


@dataclass(frozen=True)
class GrowthRecord:
    t: Fraction | float
    n_a: float
    n_abar: float
    n: float
    phase: str  # "growth" or "balance"
    cycle: int


@dataclass(frozen=True)
class GrowthTrajectory:
    regime: Regime
    m: int
    records: tuple[GrowthRecord, ...]
    overflowed: bool = False
    params: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.records)

    def cycle_ends(self) -> list[GrowthRecord]:
        """Last record of every cycle, in order."""
        ends: dict[int, GrowthRecord] = {}
        for rec in self.records:
            ends[rec.cycle] = rec
        return [ends[c] for c in sorted(ends)]

    def column(self, name: str, cycle_ends: bool = False) -> list[float]:
        recs = self.cycle_ends() if cycle_ends else self.records
        return [float(getattr(r, name)) for r in recs]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "n_a", "n_abar", "n", "phase", "cycle"])
        for r in self.records:
            w.writerow([repr(float(r.t)), repr(r.n_a), repr(r.n_abar), repr(r.n), r.phase, r.cycle])
        return buf.getvalue()


def cycle_lengths(m: int) -> tuple[Fraction, Fraction, Fraction]:
    """(balance, full, growth) cycle lengths: (m - 1/m, m + 1/m, 2/m)."""
    if isinstance(m, bool) or not isinstance(m, int) or m < 1:
        raise DomainError(f"m must be an integer >= 1, got {m!r}")
    inv = Fraction(1, m)
    return m - inv, m + inv, 2 * inv


def balance_sequence(multiplier, count: int) -> list:
    """F_0..F_{count-1} of F_{t+1} = F_{t-1} + F_t * multiplier, F_0 = 0, F_1 = 1."""
    if count < 0:
        raise DomainError("count must be >= 0")
    mu = Fraction(multiplier) if not isinstance(multiplier, float) else multiplier
    seq = [0, 1][:count]
    while len(seq) < count:
        seq.append(seq[-2] + seq[-1] * mu)
    return seq


def balance_growth_factor(multiplier: float) -> float:
    """Limit of F_{t+1} / F_t for the balance recurrence: (mu + sqrt(mu^2 + 4)) / 2."""
    mu = float(multiplier)
    return (mu + math.sqrt(mu * mu + 4.0)) / 2.0


def _too_big(x: Fraction) -> bool:
    return x.numerator.bit_length() > EXACT_BITS or x.denominator.bit_length() > EXACT_BITS


def _finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise OverflowError(f"{what} overflowed double precision")
    return value


def simulate_evcf_growth(config: GrowthConfig) -> GrowthTrajectory:
    """EV-CF growth: n_a doubles each growth phase, n_abar follows the balance
    recurrence each balance phase, n stays at m + 1/m."""
    if config.regime is not Regime.EVCF:
        raise ValueError("config.regime must be EVCF")
    if config.m < 2:
        raise DomainError("EV-CF growth needs m >= 2")
    m = config.m
    balance, full, growth = cycle_lengths(m)
    mu = balance if config.balance_multiplier is None else config.balance_multiplier
    mu = Fraction(mu) if not isinstance(mu, float) else mu
    n_fixed = float(full)

    f_prev, f_cur = Fraction(0), Fraction(1)  # F_0, F_1
    exact = not isinstance(mu, float)
    overflowed = False
    n_a = float(config.n_a0)
    records = [GrowthRecord(Fraction(0), n_a, config.n_abar0 * float(f_cur), n_fixed, "balance", 0)]
    for c in range(1, config.steps + 1):
        t0 = full * (c - 1)
        n_a = _finite(n_a * 2.0, "n_a")
        records.append(
            GrowthRecord(t0 + growth, n_a, records[-1].n_abar, n_fixed, "growth", c)
        )
        f_prev, f_cur = f_cur, f_prev + f_cur * mu
        if exact and _too_big(f_cur):
            warnings.warn("balance sequence left exact range; continuing in floating point")
            exact = False
            overflowed = True
            f_prev, f_cur, mu = float(f_prev), float(f_cur), float(mu)
        n_abar = _finite(config.n_abar0 * float(f_cur), "n_abar")
        records.append(GrowthRecord(t0 + full, n_a, n_abar, n_fixed, "balance", c))
    return GrowthTrajectory(
        Regime.EVCF, m, tuple(records), overflowed, {"balance_multiplier": float(mu)}
    )


def simulate_cf_growth(config: GrowthConfig) -> GrowthTrajectory:
    """Single-factor doubling: n_a doubles, then n_abar is rebalanced to n_a."""
    if config.regime is not Regime.CF:
        raise ValueError("config.regime must be CF")
    if config.m != 1:
        raise DomainError("CF growth is the single-factor (m = 1) process")
    _, full, growth = cycle_lengths(1)
    n_fixed = float(full)
    n_a, n_abar = float(config.n_a0), float(config.n_abar0)
    records = [GrowthRecord(Fraction(0), n_a, n_abar, n_fixed, "balance", 0)]
    for c in range(1, config.steps + 1):
        t = full * c
        n_a = _finite(n_a * 2.0, "n_a")
        records.append(GrowthRecord(full * (c - 1) + growth, n_a, n_abar, n_fixed, "growth", c))
        n_abar = n_a
        records.append(GrowthRecord(t, n_a, n_abar, n_fixed, "balance", c))
    return GrowthTrajectory(Regime.CF, 1, tuple(records))


def ev_size(t: float, n0: float = 1.0) -> float:
    """EV population size: one derangement (e-fold) per e time units."""
    return n0 * math.exp(t / math.e)


def simulate_ev_growth(config: GrowthConfig) -> GrowthTrajectory:
    """Unitary-bandwidth exponential growth sampled at unit times; no balance."""
    if config.regime is not Regime.EV:
        raise ValueError("config.regime must be EV")
    records = []
    for t in range(config.steps + 1):
        n = _finite(ev_size(t, config.n_a0), "n")
        records.append(GrowthRecord(Fraction(t), n, float(config.n_abar0), n, "growth", t))
    return GrowthTrajectory(Regime.EV, config.m, tuple(records))


def simulate(config: GrowthConfig) -> GrowthTrajectory:
    return {
        Regime.CF: simulate_cf_growth,
        Regime.EV: simulate_ev_growth,
        Regime.EVCF: simulate_evcf_growth,
    }[config.regime](config)


# -- rates -----------------------------------------------------------------


@dataclass(frozen=True)
class RateEstimate:
    rate_n_abar: float
    rate_n_a: float
    ratio: float
    cosh_per_growth: float
    window: int

    def to_json(self) -> dict:
        return {
            "rate_n_abar": self.rate_n_abar,
            "rate_n_a": self.rate_n_a,
            "ratio": self.ratio,
            "cosh_per_growth": self.cosh_per_growth,
            "window": self.window,
        }


def _difference_ratio(values: Sequence[float], window: int) -> float:
    diffs = [values[k] - values[k - 1] for k in range(1, len(values))]
    ratios = []
    for k in range(len(diffs) - window, len(diffs)):
        num, den = diffs[k], diffs[k - 1]
        if den == 0:
            if num != 0:
                raise InsufficientDataError("rate undefined: growth restarts after a flat step")
            ratios.append(0.0)
        else:
            ratios.append(num / den)
    return math.fsum(ratios) / window


def estimate_rates(trajectory: GrowthTrajectory, window: int) -> RateEstimate:
    """Average difference ratios over the trailing ``window`` cycles.

    ``cosh_per_growth`` reads the balance rate as cosh of a hyperbolic angle
    (cosh(acosh(r)) = r for r >= 1) per unit of growth rate, so it coincides
    with ``ratio`` whenever the balance rate is at least 1.
    """
    if window < 2:
        raise DomainError("window must be >= 2")
    ends = trajectory.cycle_ends()
    if len(ends) < 2 * window:
        raise InsufficientDataError(
            f"need {2 * window} cycle ends for window {window}, have {len(ends)}"
        )
    r_abar = _difference_ratio([r.n_abar for r in ends], window)
    r_a = _difference_ratio([r.n_a for r in ends], window)
    ratio = r_abar / r_a if r_a != 0 else 0.0
    # a balance rate below 1 has no real hyperbolic angle; report 1/rate_n_a
    if r_a == 0:
        cosh_per_growth = 0.0
    else:
        cosh_per_growth = (r_abar if r_abar >= 1.0 else 1.0) / r_a
    return RateEstimate(r_abar, r_a, ratio, cosh_per_growth, window)


# -- hyperbolic embedding ------------------------------------------------------


@dataclass(frozen=True)
class HyperbolicPoint:
    radial: float
    angular: float
    saturated: bool = False

    def cartesian(self) -> tuple[float, float]:
        """(radial cosh(angular), radial sinh(angular)) on the radial hyperbola."""
        return self.radial * math.cosh(self.angular), self.radial * math.sinh(self.angular)


def hyperbolic_embed(trajectory: GrowthTrajectory) -> list[HyperbolicPoint]:
    """Map records to (radial, angular) coordinates.

    Growth records advance ``radial`` by the e-folds gained by n_a (accumulated
    derangements). Balance records advance ``angular`` by artanh(1 / omega),
    where omega is the factor by which that balance step grew n_abar; omega <= 1
    is clamped at artanh(1 - 1e-12) and flagged ``saturated``.
    """
    points = []
    radial = 0.0
    angular = 0.0
    prev = None
    for rec in trajectory.records:
        saturated = False
        if prev is not None:
            if rec.phase == "growth" and rec.n_a > prev.n_a:
                radial += math.log(rec.n_a / prev.n_a)
            elif rec.phase == "balance" and rec.n_abar != prev.n_abar:
                omega = rec.n_abar / prev.n_abar
                inv = 1.0 / omega if omega > 0 else math.inf
                if inv >= 1.0 - ARTANH_EPS:
                    inv = 1.0 - ARTANH_EPS
                    saturated = True
                angular += math.atanh(inv)
        points.append(HyperbolicPoint(radial, angular, saturated))
        prev = rec
    return points


def trajectory_states(trajectory: GrowthTrajectory) -> list[CombinatorialState]:
    """Cycle-end states with C = n_a, F = n_abar and D = accumulated derangements."""
    points = hyperbolic_embed(trajectory)
    last_index = {}
    for i, rec in enumerate(trajectory.records):
        last_index[rec.cycle] = i
    states = []
    for cycle in sorted(last_index):
        i = last_index[cycle]
        rec = trajectory.records[i]
        states.append(CombinatorialState(trajectory.m, cycle, rec.n_a, points[i].radial, rec.n_abar))
    return states


def de_moivre(k: int) -> tuple[float, float]:
    """([cosh 1 + sinh 1]^k, cosh k + sinh k); equal since both are e^k."""
    return (math.cosh(1.0) + math.sinh(1.0)) ** k, math.cosh(k) + math.sinh(k)
