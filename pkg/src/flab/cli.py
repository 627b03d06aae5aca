"""Batch front door: `flab <subcommand> --config <path> [--out DIR] [--seed N] [--quiet]`.

Subcommands: certify, gap, evolve, simulate, sweep, validate-b.  Each run
echoes its fully-resolved configuration to resolved.ini next to the outputs.
Exit codes: 0 success, 2 for a valid run with a negative scientific result
(invalid certificates), 1 for errors.
"""
from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .bfun import make_b_function, validate_b
from .certificates import best_certificate, curvature_poincare, lyapunov_poincare
from .config import ConfigError, ExperimentConfig, auto_radius, parse_config, resolved_ini_text
from .dynamics import default_dt, evolve_forward, write_timeseries_csv
from .lattice import Lattice, build_rates, make_potential, stationary_measure
from .serialize import atomic_write_text, csv_text, json_dumps
from .spectral import spectral_gap, symmetrize
from .stochastic import ensemble_summary, simulate

_SUBCOMMANDS = ("certify", "gap", "evolve", "simulate", "sweep", "validate-b")


def _setup(cfg: ExperimentConfig, h: float):
    u = make_potential(cfg.potential_kind, cfg.potential_params)
    bfn = make_b_function(cfg.b_kind)
    radius = auto_radius(u, h) if cfg.radius == "auto" else float(cfg.radius)
    k = radius / h
    k_int = int(round(k))
    if abs(k - k_int) > 1e-9 * max(1.0, k) or k_int < 1:
        raise ConfigError(f"grid.radius: {radius} is not a positive multiple of grid.h = {h}")
    lat = Lattice(h, k_int)
    r = build_rates(u, bfn, lat)
    m = stationary_measure(u, lat)
    return u, bfn, lat, r, m


def _out_path(cfg: ExperimentConfig, name: str) -> str:
    import os

    return os.path.join(cfg.out_dir, name)


def _echo_resolved(cfg: ExperimentConfig) -> None:
    atomic_write_text(_out_path(cfg, "resolved.ini"), resolved_ini_text(cfg))


def _certify_payload(cfg: ExperimentConfig, h: float) -> dict:
    u, bfn, lat, r, m = _setup(cfg, h)
    curv = curvature_poincare(u, bfn, lat, r=r)
    lyap = lyapunov_poincare(u, bfn, lat, r=r)
    best = best_certificate(u, bfn, lat)
    gap = spectral_gap(symmetrize(r, m)).gap
    return {
        "lattice": {"h": lat.h, "N": lat.n_half},
        "potential_tag": u.tag,
        "b_function_tag": bfn.tag,
        "spectral_gap": gap,
        "curvature": curv.as_dict(),
        "lyapunov": lyap.as_dict(),
        "best": best.as_dict(),
    }


def _cmd_certify(cfg: ExperimentConfig, quiet: bool) -> int:
    payload = _certify_payload(cfg, cfg.h)
    if "json" in cfg.formats:
        atomic_write_text(_out_path(cfg, "certify.json"), json_dumps(payload))
    best = payload["best"]
    if not quiet:
        print(
            f"certify: method={best['method']} kappa={best['kappa']:.6g} "
            f"valid={best['valid']} gap={payload['spectral_gap']:.6g}"
        )
    return 0 if best["valid"] else 2


def _cmd_gap(cfg: ExperimentConfig, quiet: bool) -> int:
    u, bfn, lat, r, m = _setup(cfg, cfg.h)
    res = spectral_gap(symmetrize(r, m))
    if "json" in cfg.formats:
        atomic_write_text(
            _out_path(cfg, "gap.json"),
            json_dumps(
                {
                    "gap": res.gap,
                    "bracket": list(res.bracket),
                    "lattice": {"h": lat.h, "N": lat.n_half},
                    "potential_tag": u.tag,
                    "b_function_tag": bfn.tag,
                }
            ),
        )
    if "csv" in cfg.formats:
        rows = zip(range(-lat.n_half, lat.n_half + 1), lat.nodes, res.eigenfunction)
        atomic_write_text(_out_path(cfg, "eigenfunction.csv"), csv_text(["i", "x", "value"], rows))
    if not quiet:
        print(f"gap: {res.gap:.12g}")
    return 0


def _cmd_evolve(cfg: ExperimentConfig, quiet: bool) -> int:
    u, bfn, lat, r, m = _setup(cfg, cfg.h)
    # documented default start: point mass at the node nearest x = min(2, R/2)
    x_start = min(2.0, lat.radius / 2.0)
    idx = int(round(x_start / lat.h)) + lat.n_half
    rho0 = np.zeros(lat.n_nodes)
    rho0[idx] = 1.0
    dt = cfg.dt
    if dt == "auto":
        curv = curvature_poincare(u, bfn, lat, r=r)
        dt = default_dt(r, cfg.method, kappa_estimate=curv.kappa if curv.valid else None)
    res = evolve_forward(r, rho0, cfg.time_horizon, dt=float(dt), method=cfg.method, measure=m)
    if "csv" in cfg.formats:
        write_timeseries_csv(_out_path(cfg, "evolve.csv"), res)
    if "json" in cfg.formats:
        atomic_write_text(
            _out_path(cfg, "evolve.json"),
            json_dumps(
                {
                    "fitted_rate": res.fitted_rate,
                    "half_width": res.rate_half_width,
                    "horizon": cfg.time_horizon,
                    "dt": float(dt),
                    "method": cfg.method,
                    "start_node": idx - lat.n_half,
                }
            ),
        )
    if not quiet:
        rate = "n/a" if res.fitted_rate is None else f"{res.fitted_rate:.6g}"
        print(f"evolve: fitted variance decay rate = {rate}")
    return 0


def _cmd_simulate(cfg: ExperimentConfig, quiet: bool) -> int:
    u, bfn, lat, r, m = _setup(cfg, cfg.h)
    ens = simulate(r, lat, start=0, horizon=cfg.sim_horizon, n_paths=cfg.n_paths, seed=cfg.seed, n_workers=4)
    summary = ensemble_summary(ens, lat, r, m)
    if "json" in cfg.formats:
        atomic_write_text(_out_path(cfg, "ensemble.json"), json_dumps(summary))
    if not quiet:
        print(f"simulate: {cfg.n_paths} paths, TV to stationary = {summary['tv_to_stationary']:.4f}")
    return 0


def _cmd_sweep(cfg: ExperimentConfig, quiet: bool) -> int:
    def one(h: float):
        payload = _certify_payload(cfg, h)
        curv = payload["curvature"]["components"].get("lambda_tilde")
        lyap = payload["lyapunov"]["components"]
        return {
            "h": h,
            "lambda_tilde": curv if curv is not None else math.nan,
            "theta": lyap.get("theta", math.nan),
            "b": lyap.get("b", math.nan),
            "R": lyap.get("R", math.nan),
            "kappa_R": lyap.get("kappa_R", math.nan),
            "kappa": payload["best"]["kappa"] if payload["best"]["kappa"] is not None else math.nan,
            "gap": payload["spectral_gap"],
            "valid": payload["best"]["valid"],
        }

    hs = list(cfg.h_values)
    if len(hs) > 1:
        with ThreadPoolExecutor(max_workers=min(4, len(hs))) as pool:
            rows = list(pool.map(one, hs))
    else:
        rows = [one(hs[0])]
    header = ["h", "lambda_tilde", "theta", "b", "R", "kappa_R", "kappa", "gap"]
    table = [[row[k] for k in header] for row in rows]
    if "csv" in cfg.formats:
        atomic_write_text(_out_path(cfg, "sweep.csv"), csv_text(header, table))
    if not quiet:
        for row in rows:
            print(
                f"sweep: h={row['h']:g} lambda_tilde={row['lambda_tilde']:.6g} "
                f"kappa={row['kappa']:.6g} gap={row['gap']:.6g}"
            )
    return 0 if all(row["valid"] for row in rows) else 2


def _cmd_validate_b(cfg: ExperimentConfig, quiet: bool) -> int:
    bfn = make_b_function(cfg.b_kind)
    report = validate_b(bfn, np.linspace(-20.0, 20.0, 401))
    if "json" in cfg.formats:
        atomic_write_text(_out_path(cfg, "bcheck.json"), json_dumps(report))
    if not quiet:
        print(f"validate-b: {bfn.tag} all_pass={report['all_pass']}")
    return 0 if report["all_pass"] else 2


_HANDLERS = {
    "certify": _cmd_certify,
    "gap": _cmd_gap,
    "evolve": _cmd_evolve,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "validate-b": _cmd_validate_b,
}


def run_subcommand(cmd: str, cfg: ExperimentConfig, quiet: bool = False) -> int:
    """Run one pipeline against a resolved config; returns the process exit code."""
    if cmd not in _HANDLERS:
        raise ValueError(f"unknown subcommand {cmd!r}")
    if cmd != "sweep" and len(cfg.h_values) != 1:
        raise ConfigError(f"grid.h: {cmd} needs a single value, got {len(cfg.h_values)}")
    _echo_resolved(cfg)
    return _HANDLERS[cmd](cfg, quiet)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="flab",
        description="Finite-volume Fokker-Planck lab: certificates, gaps, evolution, simulation.",
    )
    parser.add_argument("subcommand", choices=_SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="experiment config file (INI-like)")
    parser.add_argument("--out", default=None, help="override outputs.dir")
    parser.add_argument("--seed", type=int, default=None, help="override sim.seed")
    parser.add_argument("--quiet", action="store_true", help="suppress summary lines")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config).with_overrides(out_dir=args.out, seed=args.seed)
        return run_subcommand(args.subcommand, cfg, quiet=args.quiet)
    except (ConfigError, ValueError, RuntimeError) as exc:
        print(f"flab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
