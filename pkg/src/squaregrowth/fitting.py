"""Curve fits and model selection for rank bands, autocorrelation profiles and power laws."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .combinatorics import DomainError

N_STARTS = 8
REL_TOL = 1e-9
ALPHA_CAP = 1e6
_SHAPE_LIMIT = 1e8


class FitFailure(RuntimeError):
    """The model cannot be fitted; ``linear_fallback`` holds (slope, intercept) when set."""

    def __init__(self, message: str, linear_fallback: tuple[float, float] | None = None):
        super().__init__(message)
        self.linear_fallback = linear_fallback


class BranchViolation(ValueError):
    pass


class InfiniteMeanError(DomainError):
    pass


class ContractViolation(ValueError):
    pass


def plot_csv(x, y, y_fit) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "y_fit"])
    for row in zip(x, y, y_fit):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def gaussian_loglik(rss: float, n: int) -> float:
    """Maximized Gaussian log-likelihood of n residuals with sum of squares rss."""
    var = max(rss / n, np.finfo(float).tiny)
    return -0.5 * n * (math.log(2 * math.pi * var) + 1.0)


def _points(points) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("points must be a sequence of (x, y) pairs")
    return arr[:, 0].copy(), arr[:, 1].copy()


# catenary


@dataclass(frozen=True)
class CatenaryFit:
    h: float
    x_c: float
    y_offset: float
    rss: float
    n_points: int
    converged: bool = True
    iterations: int = 0

    def predict(self, x) -> np.ndarray:
        return catenary(np.asarray(x, dtype=np.float64), self.h, self.x_c, self.y_offset)

    def to_json(self) -> dict:
        return asdict(self)


def catenary(x: np.ndarray, h: float, x_c: float, y_offset: float) -> np.ndarray:
    with np.errstate(over="ignore"):
        return h * np.cosh((x - x_c) / h) + y_offset


def _offset_rss(x, y, h, x_c) -> tuple[float, float]:
    shape = catenary(x, h, x_c, 0.0)
    # shapes far above the data cancel against the offset and fake a perfect fit
    if not np.all(np.isfinite(shape)) or np.max(shape) > _SHAPE_LIMIT * (np.max(np.abs(y)) + 1.0):
        return 0.0, math.inf
    y0 = float(np.mean(y - shape))
    r = y - shape - y0
    with np.errstate(over="ignore", invalid="ignore"):
        rss = float(r @ r)
    return y0, rss if math.isfinite(rss) else math.inf


def _best_center(x, y, h) -> tuple[float, float]:
    span = x.max() - x.min()
    grid = np.linspace(x.min() - span, x.max() + span, 41)
    scores = [_offset_rss(x, y, h, c)[1] for c in grid]
    if not np.isfinite(min(scores)):
        return float(grid[len(grid) // 2]), math.inf
    i = int(np.argmin(scores))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(
        lambda c: _offset_rss(x, y, h, c)[1], bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * max(span, 1)}
    )
    return float(res.x), float(res.fun)


def fit_catenary(points) -> CatenaryFit:
    """Least-squares catenary y = h cosh((x - x_c) / h) + y_offset.

    A bounded scalar search over log h wraps a grid-and-refine search for
    x_c; the offset is solved in closed form. The result is polished with a
    joint least-squares step.
    """
    x, y = _points(points)
    if len(x) < 4:
        raise ValueError("need at least 4 points")
    if len(np.unique(x)) != len(x):
        raise ValueError("x values must be distinct")

    slope, intercept = np.polyfit(x, y, 1)
    lin_resid = y - (slope * x + intercept)
    scale = float(np.sum((y - y.mean()) ** 2)) + float(np.sum(y**2)) * 1e-30
    if float(lin_resid @ lin_resid) <= 1e-20 * max(scale, 1e-300) or np.ptp(y) == 0:
        raise FitFailure("points are collinear", linear_fallback=(float(slope), float(intercept)))

    y_range = float(np.ptp(y))
    profile = lambda lh: _best_center(x, y, math.exp(lh))[1]
    grid = np.linspace(math.log(1e-6), math.log(10.0 * y_range), 61)
    i = int(np.argmin([profile(lh) for lh in grid]))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    outer = optimize.minimize_scalar(profile, bounds=(lo, hi), method="bounded", options={"xatol": REL_TOL})
    h0 = math.exp(outer.x)
    c0, _ = _best_center(x, y, h0)
    y00, _ = _offset_rss(x, y, h0, c0)

    def resid(p):
        r = catenary(x, math.exp(p[0]), p[1], p[2]) - y
        return np.where(np.isfinite(r), r, 1e150)

    polish = optimize.least_squares(resid, [math.log(h0), c0, y00], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    h, x_c, y_off = math.exp(polish.x[0]), float(polish.x[1]), float(polish.x[2])
    rss = float(polish.fun @ polish.fun)
    return CatenaryFit(h, x_c, y_off, rss, len(x), bool(polish.success), int(outer.nfev + polish.nfev))


@dataclass(frozen=True)
class StandardizedCatenary:
    x: np.ndarray  # (x - x_c) / h
    y: np.ndarray  # (y - y_offset) / h - 1, vertex at the origin
    m: float  # half-span in units of h
    slack: float  # cosh(m) - cosh(0)


def standardize_catenary(fit: CatenaryFit, points) -> StandardizedCatenary:
    """Move the vertex to the origin and measure x in units of h."""
    x, y = _points(points)
    xs = (x - fit.x_c) / fit.h
    ys = (y - fit.y_offset) / fit.h - 1.0
    m = float(np.max(np.abs(xs)))
    return StandardizedCatenary(xs, ys, m, math.cosh(m) - 1.0)


# coth branches


@dataclass(frozen=True)
class CothFit:
    a: float
    b: float
    s_c: float
    c: float
    branch: str
    rss: float
    n_points: int
    starts: int = N_STARTS
    converged: bool = True
    s_lo: float = -math.inf  # data span of the branch
    s_hi: float = math.inf
    k: int = 4

    def predict(self, s) -> np.ndarray:
        return coth_model(np.asarray(s, dtype=np.float64), self.a, self.b, self.s_c, self.c)

    @property
    def log_likelihood(self) -> float:
        return gaussian_loglik(self.rss, self.n_points)

    def to_json(self) -> dict:
        out = asdict(self)
        out["log_likelihood"] = self.log_likelihood
        return out


def coth_model(s, a, b, s_c, c):
    return a / np.tanh(b * (s - s_c)) + c


def _branch_sign(branch: str) -> int:
    if branch in ("positive", "+", 1):
        return 1
    if branch in ("negative", "-", -1):
        return -1
    raise ValueError(f"branch must be positive or negative, got {branch!r}")


def fit_coth(branch_points, branch: str = "positive", s_c: float | None = None, starts: int = N_STARTS) -> CothFit:
    """Least-squares r = a coth(b (s - s_c)) + c on one branch of coth.

    The branch is the side of the asymptote c the curve lies on: above for
    the positive branch, below for the negative one. All s lie on one side
    of the pole; a free pole is placed left of the data. a and c enter
    linearly and are solved exactly (with the sign of a fixed by the branch)
    for each (b, s_c); the remaining two parameters are refined from a fixed
    grid of starts. Passing ``s_c`` pins the pole.
    """
    s, r = _points(branch_points)
    if len(s) < 5:
        raise ValueError("need at least 5 points")
    sign = _branch_sign(branch)
    name = "positive" if sign > 0 else "negative"
    side = 1
    if s_c is not None:
        if np.all(s > s_c):
            side = 1
        elif np.all(s < s_c):
            side = -1
        else:
            raise BranchViolation(f"points straddle the pole at s_c={s_c}")
    span = float(np.ptp(s)) or 1.0
    edge = float(s.min())
    a_sign = sign * side  # coth has the sign of side, r - c must have the sign of the branch

    def unpack(p):
        b = math.exp(p[0])
        pole = s_c if s_c is not None else edge - math.exp(p[1])
        return b, pole

    def linear(p):
        b, pole = unpack(p)
        basis = 1.0 / np.tanh(b * (s - pole))
        design = np.column_stack([basis, np.ones_like(s)])
        coef, *_ = np.linalg.lstsq(design, r, rcond=None)
        if coef[0] * a_sign < 0:  # optimum on the wrong branch: the constrained one has a = 0
            coef = np.array([0.0, float(r.mean())])
        return coef, design @ coef - r

    def resid(p):
        return linear(p)[1]

    grid_b = np.log(np.array([0.3, 1.0, 3.0, 10.0]) / span)
    grid_gap = np.log(np.array([0.01, 0.3]) * span)
    best = None
    for lb in grid_b[: max(1, starts // 2)]:
        for lg in grid_gap:
            p0 = np.array([lb, lg])
            sol = optimize.least_squares(resid, p0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
            rss = float(sol.fun @ sol.fun)
            if best is None or rss < best[0]:
                best = (rss, sol)
    rss, sol = best
    (a, c), _ = linear(sol.x)
    b, pole = unpack(sol.x)
    return CothFit(
        float(a), b, float(pole), float(c), name, rss, len(s), starts, bool(sol.success), float(s.min()), float(s.max())
    )


# power laws


@dataclass(frozen=True)
class ZipfFit:
    alpha: float
    x_min: float
    log_likelihood: float
    n: int
    std_err: float
    degenerate: bool = False
    k: int = 1

    def to_json(self) -> dict:
        return asdict(self)


def fit_zipf(values, x_min: float) -> ZipfFit:
    """Continuous power-law MLE for density proportional to x**-alpha above x_min."""
    x = np.asarray(values, dtype=np.float64)
    if x_min <= 0:
        raise DomainError("x_min must be > 0")
    if len(x) < 10:
        raise ValueError("need at least 10 values")
    if np.any(x < x_min):
        raise DomainError("all values must be >= x_min")
    n = len(x)
    logs = np.log(x / x_min)
    total = float(logs.sum())
    degenerate = total <= 0.0
    alpha = ALPHA_CAP if degenerate else 1.0 + n / total
    ll = n * math.log(alpha - 1.0) - n * math.log(x_min) - alpha * total
    return ZipfFit(alpha, float(x_min), ll, n, (alpha - 1.0) / math.sqrt(n), degenerate)


def sample_power_law(alpha: float, x_min: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws from density proportional to x**-alpha, x >= x_min."""
    if alpha <= 1:
        raise DomainError("alpha must be > 1")
    u = rng.random(size)
    return x_min * (1.0 - u) ** (-1.0 / (alpha - 1.0))


@dataclass(frozen=True)
class RankZipfFit:
    """Shares explained by one global rank order: y = C * rank**-alpha."""

    C: float
    alpha: float
    rss: float
    n: int
    k: int = 2

    @property
    def log_likelihood(self) -> float:
        return gaussian_loglik(self.rss, self.n)

    def predict(self, rank) -> np.ndarray:
        return self.C * np.asarray(rank, dtype=np.float64) ** -self.alpha

    def to_json(self) -> dict:
        out = asdict(self)
        out["log_likelihood"] = self.log_likelihood
        return out


def fit_rank_zipf(ranks, shares) -> RankZipfFit:
    g = np.asarray(ranks, dtype=np.float64)
    y = np.asarray(shares, dtype=np.float64)
    if np.any(g < 1):
        raise DomainError("ranks start at 1")

    def solve(alpha):
        basis = g**-alpha
        C = float(basis @ y) / float(basis @ basis)
        r = C * basis - y
        return C, float(r @ r)

    res = optimize.minimize_scalar(lambda a: solve(a)[1], bounds=(0.0, 20.0), method="bounded", options={"xatol": 1e-10})
    C, rss = solve(float(res.x))
    return RankZipfFit(C, float(res.x), rss, len(y))


@dataclass(frozen=True)
class ModelComparison:
    bic_coth: float
    bic_zipf: float
    likelihood_ratio: float
    preferred: str
    n: int
    convention: str = "gaussian residuals for regression fits, fitted density for distributional fits"

    def to_json(self) -> dict:
        return asdict(self)


def bic(log_likelihood: float, k: int, n: int) -> float:
    return k * math.log(n) - 2.0 * log_likelihood


def compare_bic(coth: CothFit, zipf, n: int) -> ModelComparison:
    """Lower BIC wins; ties go to the Zipf side, which has fewer parameters."""
    zipf_n = getattr(zipf, "n", None)
    if coth.n_points != n or zipf_n != n:
        raise ContractViolation(f"fits use {coth.n_points} and {zipf_n} observations, expected {n}")
    b_coth = bic(coth.log_likelihood, coth.k, n)
    b_zipf = bic(zipf.log_likelihood, zipf.k, n)
    delta = (b_zipf - b_coth) / 2.0
    ratio = math.exp(delta) if delta < 700 else math.inf
    return ModelComparison(b_coth, b_zipf, ratio, "coth" if b_coth < b_zipf else "zipf", n)


@dataclass(frozen=True)
class RankObservations:
    """Per (cell, factor) shares with the cell's own rank and the pooled rank."""

    share: np.ndarray
    local_rank: np.ndarray
    global_rank: np.ndarray

    def __len__(self) -> int:
        return len(self.share)


def rank_observations(counts: np.ndarray, labels: Sequence[str]) -> RankObservations:
    from .spatial.levels import rank_cells

    counts = np.asarray(counts, dtype=np.int64)
    counts = counts[counts.sum(axis=1) > 0]
    local, _ = rank_cells(counts, labels)
    pooled, _ = rank_cells(counts.sum(axis=0, keepdims=True), labels)
    shares = counts / counts.sum(axis=1, keepdims=True)
    glob = np.broadcast_to(pooled, counts.shape)
    return RankObservations(shares.ravel(), local.ravel().astype(np.float64), glob.ravel().astype(np.float64))


@dataclass(frozen=True)
class BandSelection:
    coth: CothFit
    zipf: RankZipfFit
    comparison: ModelComparison


def select_band_model(obs: RankObservations) -> BandSelection:
    """Coth in each cell's own rank against a power law in the pooled rank."""
    n = len(obs)
    coth = fit_coth(np.column_stack([obs.local_rank, obs.share]), "positive")
    zipf = fit_rank_zipf(obs.global_rank, obs.share)
    return BandSelection(coth, zipf, compare_bic(coth, zipf, n))


# spectra and shares


@dataclass(frozen=True)
class Periodogram:
    frequency: np.ndarray
    power: np.ndarray

    def dominant(self) -> float:
        return float(self.frequency[int(np.argmax(self.power))])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frequency", "power"])
        for f, p in zip(self.frequency, self.power):
            w.writerow([repr(float(f)), repr(float(p))])
        return buf.getvalue()


def periodogram(series) -> Periodogram:
    """One-sided power spectrum of the demeaned series, scaled so power sums to the variance."""
    x = np.asarray(series, dtype=np.float64)
    n = len(x)
    if n < 8:
        raise ValueError("need at least 8 samples")
    spec = np.fft.rfft(x - x.mean())
    power = np.abs(spec) ** 2 / n**2
    power[1 : (n + 1) // 2] *= 2.0  # fold negative frequencies; DC and Nyquist appear once
    return Periodogram(np.fft.rfftfreq(n), power)


def pareto_shares(alpha: float, p: float) -> float:
    """Share of the total held by the top p fraction under a Pareto tail of index alpha."""
    if not alpha > 1:
        raise InfiniteMeanError("alpha must be > 1 for a finite mean")
    if not 0 < p <= 1:
        raise DomainError("p must lie in (0, 1]")
    if math.isinf(alpha):
        return float(p)
    return p ** (1.0 - 1.0 / alpha)


# branch angles


def _secant_angle(fit: CothFit, s_lo: float, s_hi: float) -> float:
    y_lo, y_hi = fit.predict([s_lo, s_hi])
    return abs(math.atan2(float(y_hi - y_lo), s_hi - s_lo))


def branch_angle_split(coth_pos: CothFit, coth_neg: CothFit, s_range: tuple[float, float] | None = None):
    """Normalized secant angles of the positive and negative branch fits.

    Both angles are measured over one level range, by default the overlap of
    the two branches' data spans.
    """
    if coth_pos.branch != "positive" or coth_neg.branch != "negative":
        raise ValueError("need one positive and one negative branch fit")
    if s_range is None:
        s_range = (max(coth_pos.s_lo, coth_neg.s_lo), min(coth_pos.s_hi, coth_neg.s_hi))
    lo, hi = map(float, s_range)
    if not hi > lo or not math.isfinite(hi - lo):
        raise ValueError("branches share no level range")
    for fit in (coth_pos, coth_neg):
        if lo <= fit.s_c <= hi:
            raise BranchViolation("level range crosses a branch pole")
    pos = _secant_angle(coth_pos, lo, hi)
    neg = _secant_angle(coth_neg, lo, hi)
    total = pos + neg
    if total == 0.0:
        raise FitFailure("both branches are flat over the range")
    return pos / total, neg / total
