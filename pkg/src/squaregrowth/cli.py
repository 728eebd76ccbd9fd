"""Command-line pipeline: ``squaregrowth <command> --seed N --out DIR``.

Every payload file carries the format version and a hash of the resolved
configuration (a ``#`` comment line in CSVs, two keys in JSON). Wall-clock
data lives only in the sidecar ``manifest.json``. Reruns with the same
configuration and seed reproduce every payload byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import combinatorics, fitting, games, growth
from . import spatial as sp

FORMAT_VERSION = 1
MAX_KERNEL_INDEX = 20
MANIFEST = "manifest.json"
ERRORS = "errors.json"

# parameters that change where or how fast a run goes but not what it writes
_UNHASHED = ("out", "jobs", "config")

DEFAULTS = {
    "kernels": {"m_max": 12, "n_max": 20},
    "simulate": {"regime": "evcf", "m": 2, "steps": 60, "window": 10, "balance_multiplier": "1"},
    "rps": {
        "mode": "both",
        "runs": 3,
        "steps": 5000,
        "noise_sd": 0.1,
        "dt": 0.01,
        "k_min": 100,
        "seed": None,
    },
    "generate": {
        "m": 6,
        "omega": 6,
        "n_locations": 169,
        "units_per_location": 1000,
        "s_sq": 0.6,
        "noise": 0.0,
        "resolution": 0.1,
        "profile": "geometric",
        "zipf_exponent": 1.0,
        "lat": 40.75,
        "lon": -73.95,
        "seed": None,
    },
    "spatial": {
        "input": None,
        "x0": None,
        "s0": 0.0,
        "delta_s": 0.1,
        "levels": 11,
        "resolution": None,
        "tau": sp.DEFAULT_TAU,
        "track": 20,
    },
    "fit": {"input": None, "model": "catenary", "branch": "positive", "x_min": None},
    "spectrum": {"input": None, "t0": 0.0, "t1": 100.0, "samples": 1001},
}
# the spatial command can also generate its own data
DEFAULTS["spatial"].update({k: v for k, v in DEFAULTS["generate"].items() if k not in DEFAULTS["spatial"]})

RANDOMIZED = {"rps", "generate"}


class UsageError(Exception):
    pass


# -- output -----------------------------------------------------------------


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(command: str, params: dict) -> str:
    hashed = {k: v for k, v in params.items() if k not in _UNHASHED}
    text = canonical_json({"command": command, "format_version": FORMAT_VERSION, "params": hashed})
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _jsonable(obj):
    """Plain JSON types; non-finite floats become strings so output stays strict JSON."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


class Output:
    """Writes stamped payload files atomically into one directory."""

    def __init__(self, root: Path, command: str, params: dict):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.params = params
        self.hash = config_hash(command, params)
        self.files: list[str] = []
        self.errors: list[dict] = []

    def _write(self, name: str, text: str) -> None:
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, self.root / name)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        if name != MANIFEST:
            self.files.append(name)

    def json(self, name: str, payload: dict) -> None:
        body = {"format_version": FORMAT_VERSION, "config_hash": self.hash, **_jsonable(payload)}
        self._write(name, json.dumps(body, indent=2, sort_keys=True, allow_nan=False) + "\n")

    def csv(self, name: str, text: str) -> None:
        self._write(name, f"# format_version={FORMAT_VERSION} config_hash={self.hash}\n{text}")

    def error(self, stage: str, exc: BaseException | str, **where) -> None:
        message = exc if isinstance(exc, str) else f"{type(exc).__name__}: {exc}"
        self.errors.append({"stage": stage, "error": message, **where})

    def finish(self) -> int:
        self.json(ERRORS, {"errors": self.errors})
        digests = {
            name: hashlib.sha256((self.root / name).read_bytes()).hexdigest() for name in sorted(set(self.files))
        }
        manifest = {
            "command": self.command,
            "config": _jsonable({k: v for k, v in self.params.items() if k != "out"}),
            "config_hash": self.hash,
            "format_version": FORMAT_VERSION,
            "created_utc": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
            "files": digests,
        }
        self._write(MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return 1 if self.errors else 0


def read_stamped(path) -> str:
    """File text without leading ``#`` comment lines."""
    lines = Path(path).read_text(encoding="utf-8").splitlines(keepends=True)
    skip = 0
    while skip < len(lines) and lines[skip].startswith("#"):
        skip += 1
    return "".join(lines[skip:])


def _rows(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


# -- commands -----------------------------------------------------------------


def cmd_kernels(p: dict, out: Output) -> None:
    m_max, n_max = p["m_max"], p["n_max"]
    for name, value in (("m_max", m_max), ("n_max", n_max)):
        if not 0 <= value <= MAX_KERNEL_INDEX:
            raise UsageError(f"--{name.replace('_', '-')} must lie in 0..{MAX_KERNEL_INDEX}, got {value}")
    reports = [combinatorics.verify_factorial_identity(m).to_json() for m in range(m_max + 1)]
    out.json("identities.json", {"reports": reports})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "derangements", "fibonacci_diagonal", "derangement_ratio"])
    for n in range(n_max + 1):
        w.writerow(
            [n, combinatorics.derangement_count(n), combinatorics.fibonacci_diagonal(n), repr(combinatorics.derangement_ratio(n))]
        )
    out.csv("tables.csv", buf.getvalue())


def _multiplier(value):
    if value in (None, "auto"):
        return None
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad balance multiplier {value!r}") from exc


def cmd_simulate(p: dict, out: Output) -> None:
    regimes = [r.value for r in growth.Regime]
    if p["regime"] not in regimes:
        raise UsageError(f"regime must be one of {{{', '.join(regimes)}}}, got {p['regime']!r}")
    mu = _multiplier(p["balance_multiplier"]) if p["regime"] == "evcf" else None
    m = 1 if p["regime"] == "cf" else p["m"]
    config = growth.GrowthConfig(m=m, steps=p["steps"], regime=p["regime"], balance_multiplier=mu)
    traj = growth.simulate(config)
    out.csv("trajectory.csv", traj.to_csv())
    window = min(p["window"], len(traj.cycle_ends()) // 2)
    try:
        rates = growth.estimate_rates(traj, window).to_json()
    except (combinatorics.InsufficientDataError, combinatorics.DomainError) as exc:
        out.error("rates", exc)
        rates = None
    out.json("rates.json", {"regime": p["regime"], "m": m, "steps": p["steps"], "rates": rates, "overflowed": traj.overflowed})


def cmd_rps(p: dict, out: Output) -> None:
    modes = {"baseline": ("baseline",), "two-phase": ("two_phase",), "both": ("baseline", "two_phase")}
    if p["mode"] not in modes:
        raise UsageError(f"mode must be baseline, two-phase or both, got {p['mode']!r}")
    if p["runs"] < 1:
        raise UsageError("runs must be >= 1")
    distances = {m: [] for m in modes[p["mode"]]}
    for r in range(p["runs"]):
        spec = games.GameSpec(games.RPS_PAYOFF, p["noise_sd"], p["dt"], p["seed"] + r)
        for mode in distances:
            if mode == "baseline":
                traj = games.run_baseline(spec, p["steps"], 1)[0]
            else:
                result = games.run_two_phase(spec, p["k_min"], p["steps"])
                traj = result.trajectory
                out.json(f"ledger_run{r}.json", json.loads(result.ledger_json()))
            for player in ("x", "y"):
                out.csv(f"{mode}_run{r}_{player}.csv", traj.to_csv(player))
            distances[mode].append(traj.nash_distance())
    summary = {
        "seeds": [p["seed"] + r for r in range(p["runs"])],
        "nash_distance": distances,
        "median": {m: float(np.median(v)) for m, v in distances.items()},
    }
    out.json("summary.json", summary)


def _synthetic_config(p: dict) -> sp.SyntheticConfig:
    try:
        return sp.SyntheticConfig(
            m=p["m"],
            omega_star=p["omega"],
            n_locations=p["n_locations"],
            units_per_location=p["units_per_location"],
            s_sq_star=p["s_sq"],
            noise=p["noise"],
            seed=p["seed"],
            resolution=p["resolution"] or p.get("delta_s", 0.1),
            x0=(p["lat"], p["lon"]),
            profile=p["profile"],
            zipf_exponent=p["zipf_exponent"],
        )
    except sp.ConfigError as exc:
        raise UsageError(str(exc)) from exc


def _planted_json(data: sp.SyntheticData) -> dict:
    return {
        "x0": list(data.x0),
        "resolution": data.resolution,
        "groups": [
            {"factors": list(g.factors.labels), "omega_star": g.omega_star, "ring": g.ring, "s_sq_star": g.s_sq_star}
            for g in data.groups
        ],
    }


def cmd_generate(p: dict, out: Output) -> None:
    try:
        data = sp.generate_synthetic(_synthetic_config(p))
    except sp.ConfigError as exc:
        raise UsageError(str(exc)) from exc
    out.csv("units.csv", data.units.to_csv())
    out.json("planted.json", _planted_json(data))


def _parse_x0(value) -> list[tuple[float, float]]:
    if isinstance(value, (list, tuple)) and value and isinstance(value[0], (list, tuple)):
        return [(float(a), float(b)) for a, b in value]
    try:
        pairs = [part.split(",") for part in str(value).split(";") if part.strip()]
        return [(float(a), float(b)) for a, b in pairs]
    except ValueError as exc:
        raise UsageError(f"x0 must look like 'lat,lon;lat,lon', got {value!r}") from exc


def _band_fits(det: sp.SquareDetection) -> dict:
    """Coth branches over levels: best rank falls from above, worst rank climbs from below."""
    s = np.array(det.radii)
    seen = det.r_omega.max(axis=1) > 0
    if seen.sum() < 5:
        return {"skipped": "fewer than 5 levels with ranked cells"}
    m = det.factors.m
    best = np.column_stack([s[seen], det.r0[seen].sum(axis=1) / m])
    worst = np.column_stack([s[seen], det.r_omega[seen].sum(axis=1) / m])
    pos = fitting.fit_coth(best, "positive")
    neg = fitting.fit_coth(worst, "negative")
    out = {"r0": pos.to_json(), "r_omega": neg.to_json()}
    try:
        share_pos, share_neg = fitting.branch_angle_split(pos, neg)
        out["angle_split"] = {"positive": share_pos, "negative": share_neg}
    except (fitting.FitFailure, fitting.BranchViolation) as exc:
        out["angle_split"] = {"error": str(exc)}
    return out


def spatial_one(units: sp.UnitTable, index: sp.CellIndex, x0, p: dict) -> dict:
    """Levels, ranks, detection and model comparison around one reference point."""
    windows = sp.build_levels(units, x0, p["s0"], p["delta_s"], p["levels"], index=index)
    errors = []
    summary = {"x0": list(x0), "empty_levels": [w.level_index for w in windows if len(w.cells) == 0]}
    if len(windows[-1].cells) == 0:
        return {"summary": summary, "rank_tables": "", "errors": [{"stage": "levels", "error": "all windows empty"}]}
    factors = sp.tracked_factors(windows[-1], p["track"])
    tables = [sp.rank_table(w, factors) for w in windows]
    det = sp.detect_square(tables, p["tau"])
    summary["detection"] = {**det.to_json(), "level": det.level, "balance_ok": list(det.balance_ok), "radii": list(det.radii)}
    summary["factors"] = list(factors.labels)
    try:
        summary["bands"] = _band_fits(det)
    except (ValueError, fitting.FitFailure) as exc:
        errors.append({"stage": "bands", "error": f"{type(exc).__name__}: {exc}"})
    try:
        obs = fitting.rank_observations(tables[-1].counts, factors.labels)
        sel = fitting.select_band_model(obs)
        summary["model_comparison"] = {
            **sel.comparison.to_json(),
            "coth": sel.coth.to_json(),
            "zipf": sel.zipf.to_json(),
        }
    except (ValueError, fitting.FitFailure) as exc:
        errors.append({"stage": "model_comparison", "error": f"{type(exc).__name__}: {exc}"})
    return {"summary": summary, "rank_tables": sp.rank_tables_csv(tables), "errors": errors}


def _spatial_job(args):
    return spatial_one(*args)


def _acf_fits(profiles: dict) -> dict:
    """Catenary per factor on the correlation profile, with both slack readings."""
    fits, per_factor, per_level = {}, [], []
    for label, points in profiles.items():
        pts = [(p.s, p.corr) for p in points if p.corr is not None]
        if len(pts) < 4:
            fits[label] = {"skipped": "fewer than 4 defined correlations"}
            continue
        arr = np.array(pts)
        try:
            fit = fitting.fit_catenary(arr)
        except fitting.FitFailure as exc:
            fits[label] = {"error": str(exc), "linear_fallback": exc.linear_fallback}
            continue
        std = fitting.standardize_catenary(fit, arr)
        steps = np.diff(arr[:, 1])
        fits[label] = {**fit.to_json(), "standardized_slack": std.slack, "mean_step": float(-steps.mean())}
        per_factor.append(fit.h)
        per_level.append(float(-steps.mean()))
    return {
        "fits": fits,
        "slack": {
            "per_factor": float(np.mean(per_factor)) if per_factor else None,
            "per_level": float(np.mean(per_level)) if per_level else None,
        },
    }


def cmd_spatial(p: dict, out: Output) -> None:
    if p["input"] is not None:
        text = read_stamped(p["input"])
        skipped = len(Path(p["input"]).read_text(encoding="utf-8").splitlines()) - len(text.splitlines())
        try:
            units, report = sp.ingest_microdata(text)
        except sp.IngestError as exc:
            raise UsageError(f"{p['input']}: line {exc.line + skipped}: {exc}") from exc
        for line, reason in report.rows:
            out.error("ingest", reason, line=line + skipped)
        if p["x0"] is None:
            raise UsageError("--x0 is required with --input")
        centers = _parse_x0(p["x0"])
    else:
        if p["seed"] is None:
            raise UsageError("spatial needs --seed or --input")
        data = sp.generate_synthetic(_synthetic_config(p))
        units = data.units
        centers = [data.x0] if p["x0"] is None else _parse_x0(p["x0"])
        out.json("planted.json", _planted_json(data))
    if len(units) == 0:
        raise UsageError("no units to analyse")
    resolution = p["resolution"] or p["delta_s"]
    index = sp.CellIndex.build(units, resolution)

    jobs = [(units, index, x0, p) for x0 in centers]
    if p.get("jobs", 1) > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=p["jobs"]) as pool:
            results = list(pool.map(_spatial_job, jobs))
    else:
        results = [_spatial_job(j) for j in jobs]

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x0_index", "lat", "lon", "s_sq", "omega_hat", "theta1"])
    for i, (x0, res) in enumerate(zip(centers, results)):
        out.json(f"summary_{i}.json", res["summary"])
        out.csv(f"rank_tables_{i}.csv", res["rank_tables"])
        for err in res["errors"]:
            out.error(err["stage"], err["error"], x0_index=i)
        det = res["summary"].get("detection", {})
        s_sq = det.get("s_sq")
        w.writerow([i, repr(x0[0]), repr(x0[1]), "" if s_sq is None else repr(s_sq), det.get("omega_hat", ""), repr(det.get("theta1", math.nan))])
    out.csv("detections.csv", buf.getvalue())

    radii = [p["s0"] + k * p["delta_s"] for k in range(p["levels"])]
    totals = index.counts.sum(axis=0)
    labels = units.factors.labels
    order = sorted(range(len(labels)), key=lambda f: (-totals[f], labels[f]))[: p["track"]]
    if len(index) < 2:
        out.error("acf", "need at least two base locations")
        return
    profiles = {labels[f]: sp.acf_profile(units, labels[f], radii, resolution) for f in order}
    out.csv("acf.csv", sp.acf_csv(profiles))
    out.json("acf_fits.json", _acf_fits(profiles))


def _read_points(path) -> list[dict]:
    rows = _rows(read_stamped(path))
    if not rows:
        raise UsageError(f"{path}: no rows")
    return rows


def cmd_fit(p: dict, out: Output) -> None:
    if p["input"] is None:
        raise UsageError("fit needs --input")
    rows = _read_points(p["input"])
    try:
        if p["model"] == "zipf":
            col = "value" if "value" in rows[0] else next(iter(rows[0]))
            values = np.array([float(r[col]) for r in rows])
            x_min = float(values.min()) if p["x_min"] is None else float(p["x_min"])
            fit = fitting.fit_zipf(values, x_min)
            x = np.sort(values)
            ccdf = 1.0 - np.arange(len(x)) / len(x)
            out.json("fit.json", {"model": "zipf", **fit.to_json()})
            out.csv("plot.csv", fitting.plot_csv(x, ccdf, (x / x_min) ** (1.0 - fit.alpha)))
            return
        pts = np.array([(float(r["x"]), float(r["y"])) for r in rows])
    except KeyError as exc:
        raise UsageError(f"{p['input']}: missing column {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"{p['input']}: {exc}") from exc
    if p["model"] == "catenary":
        try:
            fit = fitting.fit_catenary(pts)
        except fitting.FitFailure as exc:
            out.error("fit", exc)
            out.json("fit.json", {"model": "catenary", "error": str(exc), "linear_fallback": exc.linear_fallback})
            return
        payload = {"model": "catenary", **fit.to_json(), "standardized_slack": fitting.standardize_catenary(fit, pts).slack}
    elif p["model"] == "coth":
        fit = fitting.fit_coth(pts, p["branch"])
        payload = {"model": "coth", **fit.to_json()}
    else:
        raise UsageError(f"model must be catenary, coth or zipf, got {p['model']!r}")
    out.json("fit.json", payload)
    out.csv("plot.csv", fitting.plot_csv(pts[:, 0], pts[:, 1], fit.predict(pts[:, 0])))


def cmd_spectrum(p: dict, out: Output) -> None:
    if p["input"] is not None:
        rows = _read_points(p["input"])
        col = "y" if "y" in rows[0] else next(iter(rows[0]))
        series = np.array([float(r[col]) for r in rows])
        source = {"input_column": col}
    else:
        t = np.linspace(p["t0"], p["t1"], p["samples"])
        series = np.cosh(t) + np.sinh(t)
        source = {"series": "cosh(t)+sinh(t)", "t0": p["t0"], "t1": p["t1"], "samples": p["samples"]}
    try:
        pg = fitting.periodogram(series)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out.csv("periodogram.csv", pg.to_csv())
    out.json(
        "spectrum.json",
        {**source, "dominant_frequency": pg.dominant(), "total_power": float(pg.power.sum()), "variance": float(np.var(series))},
    )


COMMANDS = {
    "kernels": cmd_kernels,
    "simulate": cmd_simulate,
    "rps": cmd_rps,
    "generate": cmd_generate,
    "spatial": cmd_spatial,
    "fit": cmd_fit,
    "spectrum": cmd_spectrum,
}


# -- argument handling -----------------------------------------------------------


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="squaregrowth", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, defaults in DEFAULTS.items():
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="TOML file; top-level keys and a [%s] table" % name)
        cmd.add_argument("--out", required=True, help="output directory, created if absent")
        cmd.add_argument("--jobs", type=int, default=None)
        if "seed" not in defaults:
            cmd.add_argument("--seed", type=int, default=None)
        for key, value in defaults.items():
            kind = type(value) if value is not None and not isinstance(value, str) else str
            if key in ("seed",):
                kind = int
            elif key in ("resolution", "x_min"):
                kind = float
            cmd.add_argument(_flag(key), dest=key, type=kind, default=None)
    return parser


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then flags."""
    params = {"seed": None, **DEFAULTS[command], "jobs": 1}
    raw = load_config(args.config)
    section = raw.get(command, {})
    for source in ({k: v for k, v in raw.items() if not isinstance(v, dict)}, section):
        for key, value in source.items():
            if key not in params:
                raise UsageError(f"unknown config key {key!r} for {command}")
            params[key] = value
    for key in params:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    if command in RANDOMIZED and params["seed"] is None:
        raise UsageError(f"{command} is randomized and needs an explicit --seed")
    if params["jobs"] < 1:
        raise UsageError("--jobs must be >= 1")
    params["out"] = args.out
    return params


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params = resolve(args.command, args)
        out = Output(Path(args.out), args.command, params)
        COMMANDS[args.command](params, out)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    return out.finish()


if __name__ == "__main__":
    sys.exit(main())
