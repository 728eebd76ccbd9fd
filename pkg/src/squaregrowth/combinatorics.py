"""Exact counting kernels: derangements, partial permutations, diagonal sums.

Counts are Python integers and ratios are :class:`fractions.Fraction` until a
real-valued operation (hyperbolic functions, square roots) forces a float.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

__all__ = [
    "DomainError",
    "UndefinedBandwidthError",
    "SizeLimitError",
    "InsufficientDataError",
    "FactorSet",
    "CombinatorialState",
    "SquareStructure",
    "IdentityVariant",
    "IdentityReport",
    "PythagoreanReport",
    "derangement_count",
    "derangement_ratio",
    "partial_permutation_count",
    "verify_factorial_identity",
    "fibonacci_diagonal",
    "bandwidth",
    "lorentz_gamma",
    "combinatorial_state",
    "enumerate_square",
    "is_latin",
    "check_pythagorean",
]

MAX_SQUARE_FACTORS = 12
MAX_IDENTITY_M = 20


class DomainError(ValueError):
    """Argument outside the mathematical domain of the operation."""


class UndefinedBandwidthError(ZeroDivisionError):
    """Bandwidth requested with zero derangements."""


class SizeLimitError(ValueError):
    """Enumeration would exceed the supported size."""


class InsufficientDataError(ValueError):
    """Not enough points for a finite-difference or fitting operation."""


def _check_index(name: str, value: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    if value < 0:
        raise DomainError(f"{name} must be >= 0, got {value}")
    return value


@dataclass(frozen=True)
class FactorSet:
    """Ordered, duplicate-free factor labels."""

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(label) for label in self.labels)
        if len(set(labels)) != len(labels):
            raise ValueError(f"factor labels must be unique: {labels}")
        object.__setattr__(self, "labels", labels)

    @property
    def m(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    @classmethod
    def of_size(cls, m: int) -> "FactorSet":
        """Labels a, b, c, ... (then f26, f27, ... past z)."""
        _check_index("m", m)
        letters = "abcdefghijklmnopqrstuvwxyz"
        return cls(tuple(letters[i] if i < 26 else f"f{i}" for i in range(m)))


def derangement_count(n: int) -> int:
    """Number of permutations of ``n`` items with no fixed point."""
    _check_index("n", n)
    prev, cur = 1, 0  # D_0, D_1
    if n == 0:
        return 1
    for k in range(2, n + 1):
        prev, cur = cur, (k - 1) * (cur + prev)
    return cur


def derangement_ratio(n: int) -> float:
    """D_n / n!, which tends to 1/e."""
    _check_index("n", n)
    return float(Fraction(derangement_count(n), math.factorial(n)))


def partial_permutation_count(m: int, t: int) -> int:
    """Permutations of m items with exactly t fixed points: C(m, t) * D_{m-t}."""
    _check_index("m", m)
    _check_index("t", t)
    if t > m:
        raise DomainError(f"t={t} exceeds m={m}")
    return math.comb(m, t) * derangement_count(m - t)


def fibonacci_diagonal(m: int) -> int:
    """Shallow diagonal sum of Pascal's triangle, sum_t C(m - t, t) = Fib(m + 1)."""
    _check_index("m", m)
    return sum(math.comb(m - t, t) for t in range(m // 2 + 1))


def bandwidth(F: int, D: int) -> Fraction:
    """Growth bandwidth F / D as an exact rational."""
    if D == 0:
        raise UndefinedBandwidthError("bandwidth undefined for D = 0")
    if D < 0:
        raise DomainError(f"D must be >= 1, got {D}")
    return Fraction(F) / Fraction(D)


def lorentz_gamma(omega: float) -> float:
    """1 / sqrt(1 - omega**-2), the dilation at bandwidth ``omega``.

    Equal to cosh(artanh(1 / omega)). Computed as omega / sqrt((omega-1)(omega+1))
    to keep precision near the omega = 1 asymptote.
    """
    omega = float(omega)
    if math.isnan(omega) or omega <= 1.0:
        raise DomainError(f"omega must be > 1, got {omega}")
    if math.isinf(omega):
        return 1.0
    return omega / math.sqrt((omega - 1.0) * (omega + 1.0))


@dataclass(frozen=True)
class CombinatorialState:
    """The quartet (C_m, D_n, F_mn, omega) at one point of a growth process.

    Integer-valued when built by :func:`combinatorial_state`; trajectory-derived
    states may carry floats.
    """

    m: int
    n: int
    C_m: int | float
    D_n: int | float
    F_mn: int | float

    @property
    def omega(self) -> Fraction | float | None:
        if self.D_n == 0:
            return None
        if all(isinstance(v, int) for v in (self.F_mn, self.D_n)):
            return bandwidth(self.F_mn, self.D_n)
        return self.F_mn / self.D_n


def combinatorial_state(m: int, n: int) -> CombinatorialState:
    _check_index("m", m)
    _check_index("n", n)
    return CombinatorialState(m, n, 2**m, derangement_count(n), fibonacci_diagonal(m))


# -- identity diagnostics ---------------------------------------------------


@dataclass(frozen=True)
class IdentityVariant:
    name: str
    value: int | Fraction | float | None
    abs_dev: float | None
    rel_dev: float | None

    @property
    def exact(self) -> bool:
        return self.abs_dev == 0

    def to_json(self) -> dict:
        value = self.value
        if isinstance(value, Fraction):
            value = value.numerator if value.denominator == 1 else float(value)
        return {
            "name": self.name,
            "value": value,
            "abs_dev": self.abs_dev,
            "rel_dev": self.rel_dev,
            "exact": self.exact,
        }


@dataclass(frozen=True)
class IdentityReport:
    m: int
    lhs: int
    variants: tuple[IdentityVariant, ...]

    def variant(self, name: str) -> IdentityVariant:
        for v in self.variants:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"m": self.m, "lhs": self.lhs, "variants": [v.to_json() for v in self.variants]}


def _deviation(lhs: int, value) -> tuple[float | None, float | None]:
    if value is None:
        return None, None
    if isinstance(value, (int, Fraction)):
        diff = abs(Fraction(value) - lhs)
        return float(diff), float(diff / lhs)
    diff = abs(value - lhs)
    return diff, diff / lhs


def verify_factorial_identity(m: int) -> IdentityReport:
    """Evaluate the printed forms of m! as a sum of partial permutations.

    Variants: ``partial_permutations`` (sum_t C(m,t) D_{m-t}, exact),
    ``alternating_series`` ([sum_t (-1)^t m^t / t!] * [(m+1)! - 1], exact
    rational) and ``hyperbolic`` ([cosh(m-1) + sinh(m-1)] * (m-1)! + 1, float;
    undefined for m = 0). Only the first must match m!.
    """
    _check_index("m", m)
    if m > MAX_IDENTITY_M:
        raise DomainError(f"m must be <= {MAX_IDENTITY_M}, got {m}")
    lhs = math.factorial(m)

    partial = sum(partial_permutation_count(m, t) for t in range(m + 1))
    if partial != lhs:
        raise AssertionError(f"partial permutation sum {partial} != {m}! = {lhs}")

    series = sum(Fraction((-1) ** t * m**t, math.factorial(t)) for t in range(m + 1))
    alternating = series * (math.factorial(m + 1) - 1)

    if m == 0:
        hyperbolic = None
    else:
        hyperbolic = (math.cosh(m - 1) + math.sinh(m - 1)) * math.factorial(m - 1) + 1

    variants = []
    for name, value in (
        ("partial_permutations", partial),
        ("alternating_series", alternating),
        ("hyperbolic", hyperbolic),
    ):
        abs_dev, rel_dev = _deviation(lhs, value)
        variants.append(IdentityVariant(name, value, abs_dev, rel_dev))
    return IdentityReport(m, lhs, tuple(variants))


# -- squares ---------------------------------------------------------------


@dataclass(frozen=True)
class SquareStructure:
    """All subsets of a factor set plus a cyclic m x m Latin arrangement.

    ``rows[i][j]`` is the cell ``(factor, j)``; ``columns[j][i]`` is
    ``(factor, i)`` for the same cell. ``difference_columns[k - 1]`` lists the
    size-k subsets, i.e. the size-k differences from the reference population.
    """

    factors: FactorSet
    subsets: tuple[tuple[str, ...], ...]
    rows: tuple[tuple[tuple[str, int], ...], ...]
    columns: tuple[tuple[tuple[str, int], ...], ...]
    difference_columns: tuple[tuple[tuple[str, ...], ...], ...] = field(repr=False)

    @property
    def m(self) -> int:
        return self.factors.m

    def row_orders(self) -> list[str]:
        return ["".join(f for f, _ in row) for row in self.rows]


def enumerate_square(factors: FactorSet | Sequence[str]) -> SquareStructure:
    if not isinstance(factors, FactorSet):
        factors = FactorSet(tuple(factors))
    m = factors.m
    if m < 1:
        raise DomainError("a square needs at least one factor")
    if m > MAX_SQUARE_FACTORS:
        raise SizeLimitError(f"m={m} exceeds the 2^{MAX_SQUARE_FACTORS} enumeration bound")
    labels = factors.labels
    subsets = tuple(
        tuple(labels[i] for i in combo)
        for k in range(m + 1)
        for combo in itertools.combinations(range(m), k)
    )
    grid = [[labels[(i + j) % m] for j in range(m)] for i in range(m)]
    rows = tuple(tuple((grid[i][j], j) for j in range(m)) for i in range(m))
    columns = tuple(tuple((grid[i][j], i) for i in range(m)) for j in range(m))
    diff_cols = tuple(tuple(s for s in subsets if len(s) == k) for k in range(1, m + 1))
    return SquareStructure(factors, subsets, rows, columns, diff_cols)


def is_latin(square: SquareStructure) -> bool:
    """Every factor exactly once per row and once per column."""
    expected = sorted(square.factors.labels)
    for line in itertools.chain(square.rows, square.columns):
        if sorted(f for f, _ in line) != expected:
            return False
    return True


# -- Pythagorean diagnostic ------------------------------------------------


@dataclass(frozen=True)
class PythagoreanReport:
    """Finite-difference residuals between consecutive states.

    ``reciprocal`` holds (dC/dD)^-2 + 1 - (dF/dD)^-2 per step (None where a
    rate is zero or undefined) and ``quadratic`` holds dC^2 - dF^2 - dD^2.
    """

    steps: tuple[int, ...]
    reciprocal: tuple[float | None, ...]
    quadratic: tuple[float, ...]
    flags: tuple[tuple[str, ...], ...]

    @property
    def all_undefined(self) -> bool:
        return all(r is None for r in self.reciprocal)

    def to_json(self) -> dict:
        return {
            "steps": [
                {"step": s, "reciprocal": r, "quadratic": q, "flags": list(f)}
                for s, r, q, f in zip(self.steps, self.reciprocal, self.quadratic, self.flags)
            ]
        }


def check_pythagorean(states: Sequence[CombinatorialState]) -> PythagoreanReport:
    if len(states) < 3:
        raise InsufficientDataError("need at least 3 states")
    steps, recip, quad, flags = [], [], [], []
    for k in range(1, len(states)):
        a, b = states[k - 1], states[k]
        dC = float(b.C_m - a.C_m)
        dD = float(b.D_n - a.D_n)
        dF = float(b.F_mn - a.F_mn)
        f = []
        r = None
        if dD == 0:
            f.append("constant_ev_asymptote")
        elif dC == 0 or dF == 0:
            f.append("zero_rate")
        else:
            r = (dD / dC) ** 2 + 1.0 - (dD / dF) ** 2
        if dC == 0 and dD == 0 and dF == 0:
            f.append("constant")
        steps.append(k)
        recip.append(r)
        quad.append(dC * dC - dF * dF - dD * dD)
        flags.append(tuple(f))
    return PythagoreanReport(tuple(steps), tuple(recip), tuple(quad), tuple(flags))
