"""Rock-paper-scissors replicator dynamics under a shared unobserved noise.

Two modes are compared. Baseline players react to every noisy payoff as it
arrives. Two-phase players first sweep all nine action pairs in a balanced
round-robin, building a ledger of mean realized utilities, then run the
replicator on the ledger means with the noise averaged out.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

ACTIONS = ("rock", "paper", "scissors")
RPS_PAYOFF = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])
CENTER = np.full(3, 1.0 / 3.0)
SIMPLEX_TOL = 1e-9


class ContractViolation(ValueError):
    """A state handed to the dynamics is not on the probability simplex."""


@dataclass(frozen=True)
class GameSpec:
    payoff: np.ndarray = field(default_factory=lambda: RPS_PAYOFF.copy())
    noise_sd: float = 0.1
    dt: float = 0.01
    seed: int = 0

    def __post_init__(self):
        payoff = np.asarray(self.payoff, dtype=np.float64)
        if payoff.shape != (3, 3):
            raise ValueError("payoff must be 3x3")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        object.__setattr__(self, "payoff", payoff)

    @property
    def antisymmetric(self) -> bool:
        return bool(np.allclose(self.payoff, -self.payoff.T))


@dataclass(frozen=True)
class StrategyState:
    p: tuple[float, float, float]

    def __post_init__(self):
        p = tuple(float(v) for v in self.p)
        if len(p) != 3:
            raise ContractViolation("state needs three probabilities")
        check_simplex(p)
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls) -> "StrategyState":
        return cls(tuple(CENTER))

    def as_array(self) -> np.ndarray:
        return np.array(self.p)


def check_simplex(p, tol: float = SIMPLEX_TOL) -> None:
    arr = np.asarray(p, dtype=np.float64)
    if np.any(arr < -tol) or abs(arr.sum() - 1.0) > tol:
        raise ContractViolation(f"state {arr.tolist()} is off the simplex")


@dataclass
class CounterfactualLedger:
    """Per (own action, opponent action) counts and running mean utility."""

    counts: np.ndarray = field(default_factory=lambda: np.zeros((3, 3), dtype=np.int64))
    means: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def record(self, own: int, opp: int, utility: float) -> None:
        self.counts[own, opp] += 1
        n = self.counts[own, opp]
        self.means[own, opp] += (utility - self.means[own, opp]) / n

    def imbalance(self) -> float:
        lo = self.counts.min()
        return float("inf") if lo == 0 else float(self.counts.max() / lo)

    def complete(self, k_min: int, tolerance: float = 0.0) -> bool:
        return bool(self.counts.min() >= k_min and self.imbalance() <= 1.0 + tolerance)

    def deviations(self, payoff) -> np.ndarray:
        """Mean utility minus the true payoff, per cell."""
        return self.means - np.asarray(payoff, dtype=np.float64)

    def to_json(self) -> dict:
        cells = [
            {
                "own": ACTIONS[i],
                "opponent": ACTIONS[j],
                "count": int(self.counts[i, j]),
                "mean": float(self.means[i, j]),
            }
            for i in range(3)
            for j in range(3)
        ]
        return {"cells": cells}


@dataclass(frozen=True)
class Trajectory:
    """Simplex paths of the two co-evolving players, shape (steps + 1, 3)."""

    x: np.ndarray
    y: np.ndarray
    mode: str
    seed: int

    def nash_distance(self) -> float:
        return 0.5 * (nash_distance(self.x) + nash_distance(self.y))

    def to_csv(self, player: str = "x") -> str:
        path = self.x if player == "x" else self.y
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "p_rock", "p_paper", "p_scissors"])
        for t, row in enumerate(path):
            w.writerow([t, *(repr(float(v)) for v in row)])
        return buf.getvalue()


@dataclass(frozen=True)
class TwoPhaseResult:
    trajectory: Trajectory
    ledger_x: CounterfactualLedger
    ledger_y: CounterfactualLedger
    phase1_steps: int

    def ledger_json(self) -> str:
        payload = {
            "phase1_steps": self.phase1_steps,
            "x": self.ledger_x.to_json(),
            "y": self.ledger_y.to_json(),
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _noise_vector(shared_noise) -> np.ndarray:
    arr = np.asarray(shared_noise, dtype=np.float64)
    return np.broadcast_to(arr, (3,)).reshape(1, 3)


def replicator_step(
    state: StrategyState,
    spec: GameSpec,
    shared_noise=0.0,
    opponent: StrategyState | None = None,
) -> StrategyState:
    """One Euler step of the replicator for the row player.

    ``shared_noise`` is added to the realized utility of each action (a
    scalar is broadcast). The opponent defaults to the player's own state.
    """
    x = state.as_array()
    y = x if opponent is None else opponent.as_array()
    check_simplex(x)
    check_simplex(y)
    tx, _ = _kernels.replicator_run(spec.payoff, spec.payoff, x, y, _noise_vector(shared_noise), spec.dt)
    return StrategyState(tuple(tx[1]))


def nash_distance(trajectory) -> float:
    """Mean Euclidean distance from the uniform mix over trajectory points."""
    arr = np.atleast_2d(np.asarray(trajectory, dtype=np.float64))
    if arr.shape[0] == 0:
        raise ValueError("empty trajectory")
    return float(np.linalg.norm(arr - CENTER, axis=1).mean())


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def _start(start) -> np.ndarray:
    x0 = CENTER if start is None else np.asarray(start, dtype=np.float64)
    check_simplex(x0)
    return x0


def run_baseline(spec: GameSpec, steps: int, runs: int = 1, start=None) -> list[Trajectory]:
    """Independent seeded runs of two players reacting to noisy payoffs."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    x0 = _start(start)
    out = []
    for r in range(runs):
        noise = _rng(spec.seed, r).normal(0.0, spec.noise_sd, size=(steps, 3))
        tx, ty = _kernels.replicator_run(spec.payoff, spec.payoff, x0, x0, noise, spec.dt)
        out.append(Trajectory(tx, ty, "baseline", spec.seed))
    return out


def fill_ledgers(spec: GameSpec, k_min: int) -> tuple[CounterfactualLedger, CounterfactualLedger, int]:
    """Balanced round-robin over all nine action pairs, k_min sweeps.

    Each play draws one common noise value that both players see on top of
    their own payoff entry.
    """
    if k_min < 1:
        raise ValueError("k_min must be >= 1")
    rng = _rng(spec.seed, 1_000_003)
    draws = rng.normal(0.0, spec.noise_sd, size=(k_min, 9))
    lx, ly = CounterfactualLedger(), CounterfactualLedger()
    for sweep in range(k_min):
        for cell in range(9):
            i, j = divmod(cell, 3)
            eps = draws[sweep, cell]
            lx.record(i, j, spec.payoff[i, j] + eps)
            ly.record(j, i, spec.payoff[j, i] + eps)
    assert lx.complete(k_min) and ly.complete(k_min)
    return lx, ly, 9 * k_min


def run_two_phase(spec: GameSpec, k_min: int, steps: int) -> TwoPhaseResult:
    """Ledger sweep, then noise-free replicator play on the ledger means.

    The round-robin leaves empirical action frequencies exactly uniform, so
    phase 2 starts at the center. Ledger estimates are frozen from then on.
    """
    lx, ly, n1 = fill_ledgers(spec, k_min)
    tx, ty = _kernels.replicator_run(lx.means, ly.means, CENTER, CENTER, np.zeros((steps, 3)), spec.dt)
    return TwoPhaseResult(Trajectory(tx, ty, "two_phase", spec.seed), lx, ly, n1)


def compare_modes(spec: GameSpec, seeds, steps: int = 5000, k_min: int = 100) -> dict:
    """Matched-seed Nash distances for baseline and two-phase play."""
    base, two = [], []
    for s in seeds:
        seeded = GameSpec(spec.payoff, spec.noise_sd, spec.dt, int(s))
        base.append(run_baseline(seeded, steps, 1)[0].nash_distance())
        two.append(run_two_phase(seeded, k_min, steps).trajectory.nash_distance())
    return {
        "seeds": [int(s) for s in seeds],
        "baseline": base,
        "two_phase": two,
        "median_baseline": float(np.median(base)),
        "median_two_phase": float(np.median(two)),
    }
