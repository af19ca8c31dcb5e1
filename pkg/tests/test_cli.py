import io
import json
import math
import os
import pathlib
import subprocess
import sys

import pytest

from contour_dyson.cli import EXIT_COMPUTE, EXIT_CONFIG, EXIT_OK, EXIT_VALIDATION, main
from contour_dyson.config import load_config_text, parse_config

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _run(tmp_path, cmd, cfg, *extra):
    out = tmp_path / "out"
    code = main([cmd, "--config", _write(tmp_path, cfg), "--out", str(out), *extra])
    return code, out


CIRCLE = {"contour": {"type": "circle", "radius": 1.0}, "N": 3, "beta": 2.0}


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.name)
def test_shipped_configs_parse(path):
    cfg = parse_config(str(path))
    assert cfg.effective["N"] >= 1
    cfg.contour_spec()
    cfg.gas_params()


def test_defaults_are_filled():
    cfg = load_config_text(json.dumps(CIRCLE))
    assert cfg.block("conformal")["modes"] == 512
    assert cfg.block("freeenergy")["convention"] == "verbatim"
    assert not cfg.has_seed


@pytest.mark.parametrize("bad,needle", [
    ({**CIRCLE, "betta": 2.0}, "did you mean 'beta'"),
    ({**CIRCLE, "beta": 0}, "beta"),
    ({**CIRCLE, "N": 0}, "N"),
    ({**CIRCLE, "contour": {"type": "circl", "radius": 1}}, "did you mean 'circle'"),
    ({**CIRCLE, "contour": {"type": "ellipse", "a": 2.0}}, "'b' is a required property"),
    ({**CIRCLE, "sde": {"dtt": 0.1}}, "did you mean 'dt'"),
    ({"contour": {"type": "circle", "radius": 1.0}, "N": 2}, "beta"),
    ({**CIRCLE, "initial": [0.0, 1.0]}, "expected 3 positions"),
])
def test_config_errors_exit_2(tmp_path, capsys, bad, needle):
    code, _ = _run(tmp_path, "maps", bad)
    assert code == EXIT_CONFIG
    assert needle in capsys.readouterr().err


def test_malformed_json_and_missing_file(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["maps", "--config", str(p)]) == EXIT_CONFIG
    assert main(["maps", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    assert "cannot read config" in capsys.readouterr().err


def test_seed_required_for_stochastic_commands(tmp_path, capsys):
    for cmd in ("simulate", "sample"):
        code, _ = _run(tmp_path, cmd, CIRCLE)
        assert code == EXIT_CONFIG
    assert "seed" in capsys.readouterr().err


def test_self_intersecting_contour_exits_1(tmp_path, capsys):
    cfg = {**CIRCLE, "contour": {"type": "fourier", "coeffs": [[1, 1.0, 0.0], [3, 0.6, 0.0]]}}
    code, _ = _run(tmp_path, "maps", cfg)
    assert code == EXIT_COMPUTE
    assert "self-intersecting" in capsys.readouterr().err


def test_simulate_is_deterministic(tmp_path):
    cfg = {**CIRCLE, "seed": 5, "sde": {"t_end": 0.01, "thinning": 10}}
    code, out = _run(tmp_path, "simulate", cfg)
    assert code == EXIT_OK
    first = (out / "trajectory.csv").read_text()
    code, out = _run(tmp_path, "simulate", cfg)
    assert (out / "trajectory.csv").read_text() == first
    lines = first.splitlines()
    assert lines[0] == "t,s_1,s_2,s_3"
    assert len(lines) == 12
    effective = json.loads((out / "simulate.config.json").read_text())
    assert effective["seed"] == 5 and effective["sde"]["t_end"] == 0.01


def test_simulate_json_format(tmp_path):
    cfg = {**CIRCLE, "seed": 5, "sde": {"t_end": 0.001}}
    code, out = _run(tmp_path, "simulate", cfg, "--format", "json")
    assert code == EXIT_OK
    d = json.loads((out / "trajectory.json").read_text())
    assert len(d["t"]) == len(d["s"]) == 11
    assert d["perimeter"] == pytest.approx(2 * math.pi)


def test_sample_is_deterministic(tmp_path):
    cfg = {**CIRCLE, "seed": 9, "mcmc": {"sweeps": 20, "burn_in": 5}}
    _, out = _run(tmp_path, "sample", cfg)
    a = (out / "samples.csv").read_text()
    _, out = _run(tmp_path, "sample", cfg)
    assert (out / "samples.csv").read_text() == a
    assert a.splitlines()[0] == "sweep,s_1,s_2,s_3"


def test_maps_writes_cache_and_csv(tmp_path, monkeypatch):
    cache = tmp_path / "cache"
    monkeypatch.setenv("CONTOUR_DYSON_CACHE", str(cache))
    cfg = {**CIRCLE, "contour": {"type": "ellipse", "a": 2.0, "b": 1.0}}
    code, out = _run(tmp_path, "maps", cfg)
    assert code == EXIT_OK
    d = json.loads((out / "maps.json").read_text())
    assert d["r"] == pytest.approx(1.5, rel=1e-12)
    cached = list(cache.glob("maps-*-512.json"))
    assert len(cached) == 1
    code, out = _run(tmp_path, "maps", cfg, "--format", "csv")
    assert (out / "maps.csv").read_text().splitlines()[0] == "phi,u_int,u_ext"


def test_corrupt_cache_is_recomputed(tmp_path, monkeypatch):
    cache = tmp_path / "cache"
    monkeypatch.setenv("CONTOUR_DYSON_CACHE", str(cache))
    code, out = _run(tmp_path, "maps", CIRCLE)
    entry = next(cache.glob("maps-*.json"))
    entry.write_text("{}")
    code, out = _run(tmp_path, "freeenergy", CIRCLE)
    assert code == EXIT_OK


def test_freeenergy_unit_circle(tmp_path):
    code, out = _run(tmp_path, "freeenergy", CIRCLE)
    assert code == EXIT_OK
    d = json.loads((out / "freeenergy.json").read_text())
    assert list(d) == ["beta", "F0", "F1", "F1_convention", "F2_cl", "F2_q",
                       "loewner_contour", "loewner_area", "tolerances"]
    assert d["F0"] == 0.0
    assert d["F2_cl"] == pytest.approx(0, abs=1e-12)
    assert d["F2_q"] == pytest.approx(0.5 * math.log(2), abs=1e-12)
    assert abs(d["loewner_contour"]) <= 1e-12


def test_default_cache_under_output_dir(tmp_path, monkeypatch):
    monkeypatch.delenv("CONTOUR_DYSON_CACHE", raising=False)
    code, out = _run(tmp_path, "maps", CIRCLE)
    assert code == EXIT_OK
    assert len(list((out / "cache").glob("maps-*.json"))) == 1


def test_freeenergy_csv(tmp_path):
    code, out = _run(tmp_path, "freeenergy", CIRCLE, "--format", "csv")
    lines = (out / "freeenergy.csv").read_text().splitlines()
    assert lines[0] == "field,value"
    assert lines[4] == "F1_convention,verbatim"


def test_partition_outputs(tmp_path):
    cfg = {**CIRCLE, "partition": {"ns_quad": [1, 2], "nodes": 64}}
    code, out = _run(tmp_path, "partition", cfg)
    assert code == EXIT_OK
    lines = (out / "partition.csv").read_text().splitlines()
    assert lines[0] == "N,beta,logZ,F_N,source"
    assert len(lines) == 1 + 4 + 2
    fit = json.loads((out / "partition_fit.json").read_text())
    assert abs(fit["F0"]) <= 1e-6
    assert fit["f1_comparison"]["convention_discrepancy"] == pytest.approx(math.log(2 * math.pi))


def test_partition_too_many_particles_is_a_config_error(tmp_path, capsys):
    cfg = {**CIRCLE, "partition": {"ns_quad": [5], "nodes": 32}}
    code, _ = _run(tmp_path, "partition", cfg)
    assert code == EXIT_CONFIG
    assert "partition/ns_quad/0" in capsys.readouterr().err


def test_validate_passes_on_circle(tmp_path, capsys):
    cfg = {**CIRCLE, "N": 4, "seed": 2, "validate": {"include_ks": False, "operator_configs": 20}}
    code, out = _run(tmp_path, "validate", cfg)
    assert code == EXIT_OK
    d = json.loads((out / "validate.json").read_text())
    assert d["passed"] is True
    assert len(d["checks"]) == 4
    err = capsys.readouterr().err
    assert err.count("[PASS]") == 4


def test_validate_failure_exits_3(tmp_path, capsys):
    cfg = {**CIRCLE, "N": 4, "seed": 2,
           "validate": {"include_ks": True, "replicas": 20, "min_effective": 1e9, "operator_configs": 5}}
    code, out = _run(tmp_path, "validate", cfg)
    assert code == EXIT_VALIDATION
    assert "[FAIL]" in capsys.readouterr().err


def test_stdin_config(tmp_path, monkeypatch):
    monkeypatch.setattr(sys, "stdin", io.StringIO(json.dumps(CIRCLE)))
    assert main(["freeenergy", "--config", "-", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "freeenergy.json").exists()


def test_console_script(tmp_path):
    env = {**os.environ, "CONTOUR_DYSON_CACHE": str(tmp_path / "c")}
    cfg = _write(tmp_path, CIRCLE)
    r = subprocess.run([sys.executable, "-m", "contour_dyson.cli", "freeenergy", "--config", cfg,
                        "--out", str(tmp_path / "o")], capture_output=True, text=True, env=env)
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, "-m", "contour_dyson.cli", "bogus", "--config", cfg],
                       capture_output=True, text=True, env=env)
    assert r.returncode == 2
