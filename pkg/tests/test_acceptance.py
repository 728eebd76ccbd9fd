"""Acceptance criteria 1-10, each at its stated tolerance.

Every criterion records one PASS/FAIL line; pytest prints them in the
terminal summary. Run directly (``python3 tests/test_acceptance.py``) to
evaluate all criteria and print only those lines.
"""

from __future__ import annotations

import math
import time
import warnings
from pathlib import Path

import mpmath
import numba
import numpy as np

from squaregrowth import combinatorics as cb
from squaregrowth import fitting, games, growth
from squaregrowth import spatial as sp
from squaregrowth.cli import MANIFEST, main

PHI = (1 + math.sqrt(5)) / 2
ALPHA_80_20 = math.log(5) / math.log(4)

RESULTS: dict[str, tuple[bool, str]] = {}


def record(key: str, passed: bool, detail: str) -> bool:
    RESULTS[key] = (bool(passed), detail)
    print(summary_line(key))
    return bool(passed)


def criterion_order(key: str) -> tuple[int, str]:
    return int(key.rstrip("ab")), key


def summary_line(key: str) -> str:
    passed, detail = RESULTS[key]
    return f"criterion {key:<3} {'PASS' if passed else 'FAIL'}  {detail}"


# 1. exact identity suite


@numba.njit(cache=True)
def fixed_point_histogram(m):
    """Walk all m! permutations (Heap's algorithm), counting them by fixed points."""
    hist = np.zeros(m + 1, np.int64)
    perm = np.arange(m)
    c = np.zeros(m, np.int64)
    fixed = m
    hist[fixed] += 1
    i = 1
    while i < m:
        if c[i] < i:
            j = 0 if i % 2 == 0 else c[i]
            a, b = perm[j], perm[i]
            fixed -= (a == j) + (b == i)
            perm[j], perm[i] = b, a
            fixed += (b == j) + (a == i)
            hist[fixed] += 1
            c[i] += 1
            i = 1
        else:
            c[i] = 0
            i += 1
    return hist


def test_c1_identity_suite_against_brute_force():
    start = time.perf_counter()
    bad = []
    for m in range(13):
        hist = fixed_point_histogram(m)
        report = cb.verify_factorial_identity(m)
        terms = [cb.partial_permutation_count(m, t) for t in range(m + 1)]
        if terms != [int(h) for h in hist] or sum(terms) != math.factorial(m) or report.lhs != sum(terms):
            bad.append(m)
        if not report.variant("partial_permutations").exact:
            bad.append(m)
    elapsed = time.perf_counter() - start
    ok = record("1", not bad and elapsed < 10.0, f"m=0..12 exact vs all m! permutations, mismatches={bad}, {elapsed:.2f} s")
    assert ok


# 2. Fibonacci diagonal and golden ratio


def test_c2_fibonacci_and_golden_ratio():
    seq = [cb.fibonacci_diagonal(m) for m in range(42)]
    fib = [1, 1]
    while len(fib) < 42:
        fib.append(fib[-1] + fib[-2])
    recurrence = seq[:41] == fib[:41]
    ratio = cb.fibonacci_diagonal(41) / cb.fibonacci_diagonal(40)
    ok = record("2", recurrence and abs(ratio - 1.6180339887) < 1e-8, f"recurrence m<=40 {recurrence}, ratio at 41 = {ratio:.12f}")
    assert ok


# 3. Euler ratio


def test_c3_derangement_ratio_approaches_inverse_e():
    worst = 0.0
    with mpmath.workdps(60):
        for n in range(1, 19):
            gap = abs(mpmath.mpf(cb.derangement_count(n)) / math.factorial(n) - mpmath.exp(-1))
            bound = mpmath.mpf(1) / math.factorial(n + 1)
            worst = max(worst, float(gap / bound))
    ok = record("3", worst < 1.0, f"max |D_n/n! - 1/e| * (n+1)! over n=1..18 = {worst:.4f} (< 1)")
    assert ok


# 4. growth rates


def test_c4_growth_rates():
    start = time.perf_counter()
    cf = growth.simulate(growth.GrowthConfig(m=1, steps=30, regime="cf"))
    ends = [r.n_a for r in cf.cycle_ends()]
    cf_exact = all(b / a == 2.0 for a, b in zip(ends, ends[1:]))
    cf_rate = growth.estimate_rates(cf, 10).rate_n_a
    evcf = growth.simulate(growth.GrowthConfig(m=2, steps=40, regime="evcf", balance_multiplier=1))
    ratio = growth.estimate_rates(evcf, 10).ratio
    elapsed = time.perf_counter() - start
    ok = cf_exact and cf_rate == 2.0 and abs(ratio - PHI / 2) < 0.005 and elapsed < 5.0
    record("4", ok, f"cf rate {cf_rate} exact per cycle {cf_exact}; evcf ratio {ratio:.6f} vs {PHI / 2:.6f} at step 40; {elapsed:.3f} s")
    assert ok


# 5. two-phase games


def test_c5_two_phase_games():
    spec = games.GameSpec(noise_sd=0.1)
    summary = games.compare_modes(spec, range(10), steps=5000, k_min=100)
    closer = summary["median_two_phase"] < summary["median_baseline"]

    def coverage(seeds):
        hits = []
        for s in seeds:
            lx, ly, _ = games.fill_ledgers(games.GameSpec(noise_sd=0.1, seed=s), 100)
            for ledger in (lx, ly):
                se = 0.1 / np.sqrt(ledger.counts)
                hits.extend((np.abs(ledger.means - games.RPS_PAYOFF) <= 2 * se).ravel())
        return float(np.mean(hits)), len(hits)

    matched, n_matched = coverage(range(10))
    pooled, n_pooled = coverage(range(3000))
    ok = closer and pooled >= 0.95
    record(
        "5",
        ok,
        f"median Nash distance two-phase {summary['median_two_phase']:.4f} < baseline {summary['median_baseline']:.4f}: {closer}; "
        f"ledger cells within 2 SE: {pooled:.4f} of {n_pooled} over 3000 seeds (matched 10 seeds alone: {matched:.4f} of {n_matched})",
    )
    assert ok


# 6. spatial round trip


def _detect(seed, noise):
    data = sp.generate_synthetic(sp.SyntheticConfig(m=6, omega_star=6, s_sq_star=0.6, seed=seed, noise=noise))
    windows = sp.build_levels(data.units, data.x0, 0.0, 0.1, 11)
    factors = sp.tracked_factors(windows[-1])
    return sp.detect_square([sp.rank_table(w, factors) for w in windows])


def test_c6_spatial_round_trip():
    exact = 0
    for seed in range(50):
        det = _detect(seed, 0.0)
        exact += det.s_sq is not None and abs(det.s_sq - 0.6) <= 0.1 + 1e-9 and det.omega_hat == 6
    near = sum(abs(_detect(seed, 0.05).omega_hat - 6) <= 1 for seed in range(50))
    ok = exact == 50 and near >= 45
    record("6", ok, f"noiseless s_sq within one step and omega 6: {exact}/50; 5% noise omega within 1: {near}/50 (need 45)")
    assert ok


# 7. fit recovery


def test_c7_fit_recovery():
    x = np.linspace(-3.0, 3.0, 25)
    cat_ok = 0
    for seed in range(20):
        y = 2.0 * np.cosh(x / 2.0) + np.random.default_rng(seed).normal(0.0, 0.01, len(x))
        cat_ok += abs(fitting.fit_catenary(np.column_stack([x, y])).h - 2.0) / 2.0 < 0.05

    s = np.linspace(1.0, 6.0, 20)
    coth = fitting.fit_coth(np.column_stack([s, fitting.coth_model(s, 2.0, 0.7, 0.4, 3.0)]), "positive")

    zipf_ok = 0
    for seed in range(20):
        draws = fitting.sample_power_law(ALPHA_80_20, 1.0, 5000, np.random.default_rng(seed))
        fit = fitting.fit_zipf(draws, 1.0)
        zipf_ok += abs(fit.alpha - ALPHA_80_20) < 3 * fit.std_err
    ok = cat_ok == 20 and coth.rss < 1e-8 and zipf_ok == 20
    record("7", ok, f"catenary h within 5%: {cat_ok}/20; coth rss {coth.rss:.1e}; zipf alpha within 3 SE at log4(5): {zipf_ok}/20")
    assert ok


# 8. model selection and branch split


def _band_preference(omega, seed):
    data = sp.generate_synthetic(sp.SyntheticConfig(m=8, omega_star=omega, seed=seed, profile="zipf"))
    counts = sp.CellIndex.build(data.units, data.resolution).counts
    obs = fitting.rank_observations(counts, data.units.factors.labels)
    return fitting.select_band_model(obs).comparison.preferred


def test_c8a_bic_model_selection():
    coth = sum(_band_preference(4, seed) == "coth" for seed in range(20))
    zipf = sum(_band_preference(1, seed) == "zipf" for seed in range(20))
    ok = coth >= 18 and zipf >= 18
    record("8a", ok, f"coth preferred on bands (omega 4): {coth}/20; zipf preferred on homogeneous data (omega 1): {zipf}/20")
    assert ok


def evcf_branch_split(cycles: int = 30) -> tuple[float, float]:
    """Angle split of coth fits to the EV-CF balance factors above and below their limit.

    Each balance step grows the balancing population by omega_k; omega_k is
    the coth of the step's hyperbolic angle and alternates around phi.
    """
    traj = growth.simulate(growth.GrowthConfig(m=2, steps=cycles, regime="evcf", balance_multiplier=1))
    n_abar = np.array(traj.column("n_abar", cycle_ends=True))
    omega = n_abar[2:] / n_abar[1:-1]
    k = np.arange(2, len(n_abar), dtype=float)
    above, below = omega > PHI + 1e-13, omega < PHI - 1e-13
    pos = fitting.fit_coth(np.column_stack([k[above], omega[above]]), "positive")
    neg = fitting.fit_coth(np.column_stack([k[below], omega[below]]), "negative")
    return fitting.branch_angle_split(pos, neg)


def test_c8b_branch_split_on_evcf_data():
    share_pos, share_neg = evcf_branch_split()
    ok = abs(share_pos - 0.81) <= 0.03
    record("8b", ok, f"EV-CF branch angle split ({share_pos:.3f}, {share_neg:.3f}) vs (0.81, 0.19) +- 0.03")
    assert ok


# 9. Pareto principle


def test_c9_pareto_share():
    share = fitting.pareto_shares(ALPHA_80_20, 0.2)
    closed = 0.2 ** (1 - 1 / ALPHA_80_20)
    ok = abs(share - 0.8) <= 1e-3 and share == closed
    record("9", ok, f"top 20% share at alpha log4(5) = {share:.6f}")
    assert ok


# 10. CLI determinism


CLI_RUNS = {
    "kernels": ["kernels"],
    "simulate": ["simulate", "--regime", "evcf"],
    "rps": ["rps", "--seed", "11", "--runs", "2", "--steps", "2000"],
    "generate": ["generate", "--seed", "11"],
    "spatial": ["spatial", "--seed", "11", "--jobs", "2"],
    "spectrum": ["spectrum"],
}


def _payloads(out: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != MANIFEST}


def test_c10_cli_determinism(tmp_path):
    pts = tmp_path / "points.csv"
    pts.write_text("x,y\n" + "".join(f"{x / 2},{2 * math.cosh(x / 4)!r}\n" for x in range(-8, 9)))
    runs = {**CLI_RUNS, "fit": ["fit", "--input", str(pts)]}
    differing = []
    for name, args in runs.items():
        first, second = tmp_path / name / "a", tmp_path / name / "b"
        main([*args, "--out", str(first)])
        main([*args, "--out", str(second)])
        if not _payloads(first) or _payloads(first) != _payloads(second):
            differing.append(name)
    ok = not differing
    record("10", ok, f"{len(runs)} commands rerun byte-identical; differing: {differing}")
    assert ok


if __name__ == "__main__":
    import tempfile

    tests = [(k, v) for k, v in sorted(globals().items()) if k.startswith("test_c")]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name, fn in tests:
            try:
                fn(Path(tempfile.mkdtemp())) if "tmp_path" in fn.__code__.co_varnames else fn()
            except AssertionError:
                pass
    print()
    for key in sorted(RESULTS, key=criterion_order):
        print(summary_line(key))
