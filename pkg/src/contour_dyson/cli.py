"""Command-line entry point ``contour-dyson``.

Exit codes: 0 success, 1 computation failure, 2 configuration error,
3 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from .conformal import ConformalPair, _atomic_write_text, cache_path, solve_maps
from .config import RunConfig, parse_config
from .energy import GasParams
from .errors import (CollisionError, ConfigError, ContourError, ConvergenceError, SamplerError,
                     StepSizeError)
from .free_energy import free_energy_report
from .geometry import build_contour
from .mcmc import McSettings, mh_chain
from .partition import (QuadratureSettings, UnsupportedSizeError, bench_csv, compare_f1,
                        fit_expansion, free_energy_sequence, morris_exact, z_quadrature)
from .sde import SdeSettings, simulate
from . import validation

COMMANDS = ("simulate", "sample", "maps", "freeenergy", "partition", "validate")
EXIT_OK, EXIT_COMPUTE, EXIT_CONFIG, EXIT_VALIDATION = 0, 1, 2, 3
CACHE_ENV = "CONTOUR_DYSON_CACHE"


def _initial_positions(cfg: RunConfig, contour):
    init = cfg.effective.get("initial")
    if init is not None:
        return np.asarray(init, dtype=float)
    n = cfg.effective["N"]
    return (np.arange(n) + 0.5) * contour.perimeter / n


def _rows_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _positions_json(label, keys, positions, meta):
    return json.dumps({label: [float(k) for k in keys], "s": positions.tolist(), **meta}, indent=2)


def _require_seed(cfg, cmd):
    if not cfg.has_seed:
        raise ConfigError(f"seed: a seed is required for the {cmd} command")


def _load_or_solve_maps(cfg, contour, cache_dir, write):
    c = cfg.block("conformal")
    path = cache_path(cache_dir, contour, c["modes"]) if cache_dir else None
    if path and os.path.exists(path):
        try:
            return ConformalPair.load(path, contour), path
        except (ValueError, KeyError, json.JSONDecodeError):
            pass  # stale or foreign cache entry; recompute
    pair = solve_maps(contour, c["modes"], c["tol"], c["max_iter"], c["relax"])
    if write and path:
        pair.save(path)
    return pair, path


def cmd_simulate(cfg, contour, fmt):
    _require_seed(cfg, "simulate")
    s = cfg.block("sde")
    settings = SdeSettings(dt=s["dt"], t_end=s["t_end"], seed=cfg.seed, taming_cap=s["taming_cap"],
                           burn_in=s["burn_in"], thinning=s["thinning"], exact_geometry=s["exact_geometry"])
    traj = simulate(contour, _initial_positions(cfg, contour), cfg.gas_params(), settings)
    if fmt == "json":
        meta = {"perimeter": traj.perimeter, "rejections": traj.rejections,
                "taming_events": traj.taming_events, "dt": traj.extra["dt"]}
        return {"trajectory.json": _positions_json("t", traj.times, traj.positions, meta)}, EXIT_OK
    return {"trajectory.csv": traj.to_csv()}, EXIT_OK


def cmd_sample(cfg, contour, fmt):
    _require_seed(cfg, "sample")
    m = cfg.block("mcmc")
    settings = McSettings(proposal_sigma=m["proposal_sigma"], sweeps=m["sweeps"], burn_in=m["burn_in"],
                          thinning=m["thinning"], seed=cfg.seed, adapt=m["adapt"])
    samples = mh_chain(contour, _initial_positions(cfg, contour), cfg.gas_params(), settings)
    if fmt == "json":
        meta = {"perimeter": samples.perimeter, "acceptance_rate": samples.acceptance_rate,
                "proposal_sigma": samples.proposal_sigma}
        return {"samples.json": _positions_json("sweep", samples.sweeps, samples.positions, meta)}, EXIT_OK
    return {"samples.csv": samples.to_csv()}, EXIT_OK


def cmd_maps(cfg, contour, fmt, cache_dir):
    pair, path = _load_or_solve_maps(cfg, contour, cache_dir, write=True)
    if fmt == "csv":
        rows = [[repr(float(a)), repr(float(b)), repr(float(c))]
                for a, b, c in zip(pair.phi, pair.u_int, pair.u_ext)]
        return {"maps.csv": _rows_csv(["phi", "u_int", "u_ext"], rows)}, EXIT_OK
    return {"maps.json": json.dumps(pair.to_dict())}, EXIT_OK


def cmd_freeenergy(cfg, contour, fmt, cache_dir):
    pair, _ = _load_or_solve_maps(cfg, contour, cache_dir, write=False)
    fe = cfg.block("freeenergy")
    p = cfg.gas_params()
    report = free_energy_report(pair, p.potential, p.beta, fe["convention"], fe["rel_tol"])
    if fmt == "csv":
        d = report.to_dict()
        rows = [[k, repr(v) if isinstance(v, float) else v] for k, v in d.items() if k != "tolerances"]
        return {"freeenergy.csv": _rows_csv(["field", "value"], rows)}, EXIT_OK
    return {"freeenergy.json": report.to_json()}, EXIT_OK


def cmd_partition(cfg, contour, fmt):
    pb = cfg.block("partition")
    p = cfg.gas_params()
    beta = p.beta
    rows = []
    for n in pb["ns_exact"]:
        lz = morris_exact(n, beta)
        rows.append((n, beta, lz, float(free_energy_sequence([n], [lz], beta)[0]), "morris_exact"))
    for n in pb["ns_quad"]:
        q = QuadratureSettings(nodes=pb["nodes"], symmetry=pb["symmetry"])
        lz = z_quadrature(contour, GasParams(n, beta, p.potential), q)
        rows.append((n, beta, lz, float(free_energy_sequence([n], [lz], beta)[0]), "z_quadrature"))
    outputs = {}
    if fmt == "json":
        outputs["partition.json"] = json.dumps(
            [dict(zip(["N", "beta", "logZ", "F_N", "source"], r)) for r in rows], indent=2)
    else:
        outputs["partition.csv"] = bench_csv(rows)
    ns = sorted(set(pb["ns_exact"]))
    if len(ns) >= 4:
        fit = fit_expansion(ns, [morris_exact(n, beta) for n in ns], beta)
        fit_info = {"F0": fit.F0, "F1": fit.F1, "F2": fit.F2, "max_residual": fit.max_residual,
                    "condition": fit.condition, "f1_comparison": compare_f1(fit)}
        outputs["partition_fit.json"] = json.dumps(fit_info, indent=2)
    return outputs, EXIT_OK


def cmd_validate(cfg, contour, fmt):
    v = cfg.block("validate")
    p = cfg.gas_params()
    seed = cfg.seed
    checks = []
    if p.n_particles >= 2:
        checks.append(validation.zero_mode_check(contour, p, v["operator_configs"], seed))
    checks.append(validation.fp1d_check(contour, p))
    ch, _ = validation.loewner_check(contour, p, cfg.block("conformal")["modes"])
    checks.append(ch)
    checks.append(validation.circle_partition_check())
    if v["include_ks"] and p.n_particles >= 2:
        checks.append(validation.gap_ks_check(contour, p, replicas=v["replicas"], seed=seed,
                                              threshold=v["ks_threshold"], min_eff=v["min_effective"]))
    passed = all(c.passed for c in checks)
    if fmt == "csv":
        rows = [[c.name, int(c.passed), repr(float(c.value)), repr(float(c.threshold))] for c in checks]
        out = {"validate.csv": _rows_csv(["check", "passed", "value", "threshold"], rows)}
    else:
        out = {"validate.json": json.dumps({"passed": passed, "checks": [c.to_dict() for c in checks]},
                                           indent=2, default=float)}
    for c in checks:
        print(c.line(), file=sys.stderr)
    return out, EXIT_OK if passed else EXIT_VALIDATION


def run_command(cmd, cfg: RunConfig, out_dir=None, fmt=None):
    """Run ``cmd`` and write its artifacts; returns the exit code."""
    out_dir = out_dir or cfg.effective["output"]["dir"]
    fmt = fmt or cfg.effective["output"]["format"]
    contour = build_contour(cfg.contour_spec(), cfg.effective["grid_size"])
    cache_dir = os.environ.get(CACHE_ENV) or os.path.join(out_dir, "cache")
    if cmd == "simulate":
        outputs, code = cmd_simulate(cfg, contour, fmt or "csv")
    elif cmd == "sample":
        outputs, code = cmd_sample(cfg, contour, fmt or "csv")
    elif cmd == "maps":
        outputs, code = cmd_maps(cfg, contour, fmt or "json", cache_dir)
    elif cmd == "freeenergy":
        outputs, code = cmd_freeenergy(cfg, contour, fmt or "json", cache_dir)
    elif cmd == "partition":
        outputs, code = cmd_partition(cfg, contour, fmt or "csv")
    elif cmd == "validate":
        outputs, code = cmd_validate(cfg, contour, fmt or "json")
    else:
        raise ConfigError(f"unknown command {cmd!r}")
    for name, text in outputs.items():
        _atomic_write_text(os.path.join(out_dir, name), text)
    _atomic_write_text(os.path.join(out_dir, f"{cmd}.config.json"), cfg.to_json())
    return code


def build_parser():
    ap = argparse.ArgumentParser(prog="contour-dyson",
                                 description="Log-gas dynamics and free energies on closed plane contours.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON config path, or - for stdin")
    ap.add_argument("--out", default=None, help="output directory (default: config output.dir or .)")
    ap.add_argument("--format", choices=("csv", "json"), default=None)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        return run_command(args.command, cfg, args.out, args.format)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContourError, CollisionError, StepSizeError, SamplerError, ConvergenceError,
            UnsupportedSizeError, ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
