import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from squaregrowth import combinatorics
from squaregrowth.cli import MANIFEST, config_hash, main, read_stamped

SMALL_SPATIAL = ["--seed", "0", "--n-locations", "49", "--units-per-location", "200", "--m", "4", "--omega", "4", "--s-sq", "0.2"]

COMMANDS = {
    "kernels": ["kernels", "--m-max", "6", "--n-max", "20"],
    "simulate": ["simulate", "--regime", "evcf", "--steps", "60"],
    "rps": ["rps", "--seed", "5", "--runs", "2", "--steps", "300", "--k-min", "10"],
    "generate": ["generate", "--seed", "1", "--n-locations", "25", "--units-per-location", "40", "--m", "3", "--omega", "2", "--s-sq", "0.1"],
    "spatial": ["spatial", *SMALL_SPATIAL, "--levels", "6"],
    "spectrum": ["spectrum"],
}


def run(tmp_path: Path, name: str, args: list[str]) -> tuple[int, Path]:
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def payloads(out: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != MANIFEST}


def load(out: Path, name: str) -> dict:
    return json.loads((out / name).read_text(encoding="utf-8"))


def table(out: Path, name: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(read_stamped(out / name))))


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_rerun_is_byte_identical(tmp_path, command):
    code_a, a = run(tmp_path, "a", COMMANDS[command])
    code_b, b = run(tmp_path, "b", COMMANDS[command])
    assert code_a == code_b == 0
    first, second = payloads(a), payloads(b)
    assert first and first == second


def test_fit_rerun_is_byte_identical(tmp_path):
    pts = tmp_path / "pts.csv"
    pts.write_text("x,y\n" + "".join(f"{x},{2 * math.cosh(x / 2)!r}\n" for x in range(-4, 5)))
    _, a = run(tmp_path, "a", ["fit", "--input", str(pts)])
    _, b = run(tmp_path, "b", ["fit", "--input", str(pts)])
    assert payloads(a) == payloads(b)
    assert load(a, "fit.json")["h"] == pytest.approx(2.0, abs=1e-6)
    assert table(a, "plot.csv")[0].keys() == {"x", "y", "y_fit"}


def test_every_payload_carries_hash_and_version(tmp_path):
    _, out = run(tmp_path, "k", COMMANDS["kernels"])
    manifest = load(out, MANIFEST)
    assert "created_utc" in manifest
    for name, body in payloads(out).items():
        text = body.decode()
        if name.endswith(".json"):
            data = json.loads(text)
            assert data["format_version"] == 1 and data["config_hash"] == manifest["config_hash"]
        else:
            assert text.startswith(f"# format_version=1 config_hash={manifest['config_hash']}\n")
    assert set(manifest["files"]) == set(payloads(out))


def test_config_hash_ignores_output_location():
    assert config_hash("rps", {"seed": 1, "out": "a", "jobs": 1}) == config_hash("rps", {"seed": 1, "out": "b", "jobs": 4})
    assert config_hash("rps", {"seed": 1}) != config_hash("rps", {"seed": 2})


def test_kernels_identity_rows_and_d20(tmp_path):
    _, out = run(tmp_path, "k", ["kernels", "--m-max", "4", "--n-max", "20"])
    reports = load(out, "identities.json")["reports"]
    assert [r["m"] for r in reports] == [0, 1, 2, 3, 4]
    for r in reports:
        assert r["lhs"] == math.factorial(r["m"])
        assert r["variants"][0]["name"] == "partial_permutations" and r["variants"][0]["exact"]
    rows = table(out, "tables.csv")
    assert int(rows[20]["derangements"]) == 895014631192902121 == combinatorics.derangement_count(20)


@pytest.mark.parametrize("flag", ["--m-max", "--n-max"])
def test_kernels_bounds_are_usage_errors(tmp_path, flag):
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, "k", ["kernels", flag, "21"])
    assert exc.value.code == 2


def test_simulate_rates(tmp_path):
    _, evcf = run(tmp_path, "evcf", ["simulate", "--regime", "evcf", "--steps", "60"])
    assert abs(load(evcf, "rates.json")["rates"]["ratio"] - 0.80902) < 0.005
    _, cf = run(tmp_path, "cf", ["simulate", "--regime", "cf", "--steps", "30"])
    assert load(cf, "rates.json")["rates"]["rate_n_a"] == 2.0
    _, ev = run(tmp_path, "ev", ["simulate", "--regime", "ev", "--steps", "30"])
    n = [float(r["n"]) for r in table(ev, "trajectory.csv")]
    logs = [math.log(v) for v in n]
    steps = [b - a for a, b in zip(logs, logs[1:])]
    assert max(steps) - min(steps) < 1e-9  # log-linear


def test_simulate_bad_regime_lists_choices(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, "bad", ["simulate", "--regime", "nope"])
    assert exc.value.code == 2
    assert "{cf, ev, evcf}" in capsys.readouterr().err


@pytest.mark.parametrize("command", ["rps", "generate"])
def test_randomized_commands_need_a_seed(tmp_path, command):
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, "x", [command])
    assert exc.value.code == 2


def test_rps_outputs_and_summary(tmp_path):
    _, out = run(tmp_path, "rps", COMMANDS["rps"])
    summary = load(out, "summary.json")
    assert set(summary["median"]) == {"baseline", "two_phase"}
    assert summary["seeds"] == [5, 6]
    for mode in ("baseline", "two_phase"):
        rows = table(out, f"{mode}_run1_x.csv")
        assert len(rows) == 301 and list(rows[0]) == ["step", "p_rock", "p_paper", "p_scissors"]
    assert len(load(out, "ledger_run0.json")["x"]["cells"]) == 9


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("seed = 9\n[rps]\nruns = 1\nsteps = 100\nmode = \"baseline\"\n")
    _, out = run(tmp_path, "c", ["rps", "--config", str(cfg), "--steps", "40"])
    assert load(out, "summary.json")["seeds"] == [9]
    assert len(table(out, "baseline_run0_x.csv")) == 41
    assert not (out / "two_phase_run0_x.csv").exists()


def test_unknown_config_key_is_usage_error(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("sead = 9\n")
    with pytest.raises(SystemExit):
        run(tmp_path, "c", ["rps", "--config", str(cfg)])


def test_spatial_recovers_planted_square(tmp_path):
    code, out = run(tmp_path, "s", ["spatial", "--seed", "0"])
    assert code == 0
    det = load(out, "summary_0.json")["detection"]
    assert det["omega_hat"] == 6 and abs(det["s_sq"] - 0.6) < 0.1 + 1e-9
    acf = table(out, "acf.csv")
    assert all(float(r["corr"]) == 1.0 for r in acf if float(r["s"]) == 0.0)
    assert load(out, "acf_fits.json")["slack"].keys() == {"per_factor", "per_level"}


def test_spatial_homogeneous_zipf_data_prefers_zipf(tmp_path):
    _, out = run(tmp_path, "z", ["spatial", "--seed", "2", "--omega", "1", "--m", "8", "--profile", "zipf"])
    assert load(out, "summary_0.json")["model_comparison"]["preferred"] == "zipf"


def test_spatial_input_round_trip_with_jobs(tmp_path):
    gen = ["generate", "--seed", "3", "--n-locations", "49", "--units-per-location", "200", "--m", "4", "--omega", "4", "--s-sq", "0.2"]
    _, g = run(tmp_path, "g", gen)
    args = ["spatial", "--input", str(g / "units.csv"), "--x0", "40.75,-73.95;40.85,-73.95", "--levels", "6"]
    _, serial = run(tmp_path, "one", args)
    _, pooled = run(tmp_path, "two", [*args, "--jobs", "2"])
    assert payloads(serial) == payloads(pooled)
    rows = table(serial, "detections.csv")
    assert rows[0]["omega_hat"] == "4" and float(rows[0]["s_sq"]) == pytest.approx(0.2)


def test_spatial_rejected_rows_are_logged_not_fatal(tmp_path):
    units = tmp_path / "units.csv"
    lines = ["unit_id,lat,lon,factor"]
    lines += [f"{i},{40.75 + (i % 5) * 0.1},{-73.95 + (i // 5 % 5) * 0.1},{'ab'[i % 2]}" for i in range(100)]
    lines.append("100,95.0,0.0,a")
    units.write_text("\n".join(lines) + "\n")
    code, out = run(tmp_path, "s", ["spatial", "--input", str(units), "--x0", "40.75,-73.95", "--levels", "3"])
    errors = load(out, "errors.json")["errors"]
    assert code == 1
    assert errors[0]["stage"] == "ingest" and errors[0]["line"] == 102
    assert (out / "summary_0.json").exists()


def test_spatial_empty_windows_are_reported(tmp_path):
    args = ["spatial", *SMALL_SPATIAL, "--x0", "10.0,10.0", "--levels", "3"]
    code, out = run(tmp_path, "e", args)
    assert code == 1
    summary = load(out, "summary_0.json")
    assert summary["empty_levels"] == [0, 1, 2]
    assert load(out, "errors.json")["errors"][0]["x0_index"] == 0


def test_fit_collinear_points_log_failure(tmp_path):
    pts = tmp_path / "line.csv"
    pts.write_text("x,y\n" + "".join(f"{x},{2 * x + 1}\n" for x in range(6)))
    code, out = run(tmp_path, "f", ["fit", "--input", str(pts)])
    assert code == 1
    assert load(out, "fit.json")["linear_fallback"] == [pytest.approx(2.0), pytest.approx(1.0)]


def test_spectrum_default_series(tmp_path):
    _, out = run(tmp_path, "p", ["spectrum"])
    spec = load(out, "spectrum.json")
    assert spec["total_power"] == pytest.approx(spec["variance"], rel=1e-9)
    assert spec["dominant_frequency"] == pytest.approx(1 / 1001)


def test_console_script_runs(tmp_path):
    out = tmp_path / "cli"
    cmd = [sys.executable, "-m", "squaregrowth.cli", "kernels", "--m-max", "3", "--out", str(out)]
    subprocess.run(cmd, check=True)
    assert (out / "identities.json").exists()
