"""Command-line runner.

Exit codes: 0 success, 1 validation failure, 2 numerical-check failure,
3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import combi
from .experiments import ExperimentConfig, preset, run_experiment, validate_config

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_RUNTIME = 0, 1, 2, 3

SUBCOMMANDS = (
    "combinatorics-check",
    "exact-cumulants",
    "quadrature-cumulants",
    "sample",
    "crossover-scan",
    "meso-scan",
    "limits-table",
    "decay-report",
    "validate",
)

log = logging.getLogger("thinned_dpp")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config (INI sections of key = value)")
    common.add_argument("--seed", type=int, help="master seed, overrides the config")
    common.add_argument("--workers", type=int, default=1, help="worker threads for Monte Carlo chunks")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")
    ap = argparse.ArgumentParser(prog="thinned-dpp", description="Cumulant laboratory for thinned determinantal point processes.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "combinatorics-check":
            sp.add_argument("--nmax", type=int, default=10)
        if name == "sample":
            sp.add_argument("--dump", action="store_true", help="also write raw points (seed, replica, index, x[, y])")
        if name == "limits-table":
            sp.add_argument("--rho", type=float, nargs="*", default=[1.0, 10.0], help="densities for the loop-integral table")
    return ap


def _config(args, name: str) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config) if args.config else preset(name)
    if name == "exact-cumulants":
        config = replace(config, engines=("exact",))
    elif name == "quadrature-cumulants":
        config = replace(config, engines=("quadrature",))
    elif name == "sample":
        config = replace(config, engines=("monte-carlo",))
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def _write_rows(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def _combinatorics(args) -> int:
    rows = combi.identity_report(args.nmax, min(8, args.nmax))
    _write_rows(args.out / "combinatorics.csv", ["identity", "passed"], rows)
    failed = [name for name, ok in rows if not ok]
    for name in failed:
        print(f"FAIL {name}")
    print(f"{len(rows) - len(failed)}/{len(rows)} identities hold")
    return EXIT_OK if not failed else EXIT_NUMERICAL


def _experiment(args, name: str) -> int:
    config = _config(args, name)
    problems = validate_config(config)
    if problems:
        for p in problems:
            print(f"invalid: {p}", file=sys.stderr)
        return EXIT_INVALID
    result = run_experiment(config, workers=args.workers)
    stem = name.replace("-", "_")
    paths = result.write(args.out, stem)
    if name == "sample":
        _dump_samples(args, config)
    for s in result.summary:
        state = "converges" if s.converges else "open"
        print(f"{s.function} n={s.n} {s.engine}: N={s.N} value={s.value:.6g} target={s.target:.6g} gap={s.gap:.3g} {state} limits={s.limits}")
    for f in result.failures:
        print(f"cell failed: {f.function} N={f.N} n={f.n} {f.engine}: {f.error}", file=sys.stderr)
    print("wrote " + ", ".join(str(p) for p in paths))
    return result.exit_code


def _dump_samples(args, config: ExperimentConfig):
    from .experiments import _kernel
    from .sampler import dump_points, linear_statistics, sample_replicas, sampling_basis

    for N in config.ladder:
        _, K = _kernel(config, N, 2, [])
        configs = sample_replicas(sampling_basis(K), config.seed + N, config.replicas, config.thinning().p(N), workers=args.workers)
        rows = []
        for spec, f in zip(config.functions, config.test_functions()):
            for cfg, v in zip(configs, linear_statistics(configs, f)):
                rows.append((cfg.seed, cfg.replica, spec, float(v)))
        _write_rows(args.out / f"statistics_N{N}.csv", ["seed", "replica", "function", "value"], rows)
        if getattr(args, "dump", False):
            dump_points(configs, args.out / f"points_N{N}.csv")


def _limits_table(args) -> int:
    from .limits import (
        LoopPolynomial,
        chebyshev_variance,
        ginibre_loop_integral,
        h1_variance,
        h_half_variance,
        loop_integral_quadrature,
        poisson_cumulant,
        sine_variance,
    )
    from .orthopoly import equilibrium_1d

    config = _config(args, "limits-table")
    problems = validate_config(config)
    if problems:
        for p in problems:
            print(f"invalid: {p}", file=sys.stderr)
        return EXIT_INVALID
    rows = []
    V = config.potential_object()
    for spec, f in zip(config.functions, config.test_functions()):
        if config.dimension == 1:
            if config.scale == "macro":
                rows.append((spec, "chebyshev_variance", chebyshev_variance(f)))
                eta = equilibrium_1d(V)
                for n in config.orders:
                    rows.append((spec, f"poisson_cumulant_{n}", poisson_cumulant(f, eta, n)))
            else:
                rows.append((spec, "h_half_variance", h_half_variance(f)))
                rows.append((spec, "sine_variance", sine_variance(f)))
                for n in config.orders:
                    rows.append((spec, f"poisson_cumulant_{n}", poisson_cumulant(f, 1.0, n)))
        else:
            rows.append((spec, "h1_variance", h1_variance(f)))
            for n in config.orders:
                rows.append((spec, f"poisson_cumulant_{n}", poisson_cumulant(f, 1.0, n)))
    bad = 0
    for text in ("w1*wb2", "wb1*w2", "w1*wb1", "w1*w1"):
        H = LoopPolynomial.parse(text, 2)
        closed = ginibre_loop_integral(H, 2)
        for rho in args.rho:
            quad = loop_integral_quadrature(H, 2, rho)
            rows.append((text, f"loop_integral(rho={rho:g})", complex(quad).real))
            if abs(quad - closed) > 1e-3:
                bad += 1
        rows.append((text, "loop_integral_closed_form", float(np.real(closed))))
    _write_rows(args.out / "limits.csv", ["function", "quantity", "value"], rows)
    for r in rows:
        print(f"{r[0]:>14} {r[1]:<28} {r[2]:.10g}")
    return EXIT_OK if not bad else EXIT_NUMERICAL


def _decay_report(args) -> int:
    from .kernels import bergman_gap, decay_diagnostics, gauge_ratio_error, ginibre_finite, mesoscopic_radius
    from .orthopoly import right_limit_trend

    config = _config(args, "decay-report")
    if args.config is None:
        config = replace(config, dimension=2, potential="radial", coefficients=(1.0, 0.5), ladder=(40, 80, 160), functions=("gauss:2",), engines=("quadrature",))
    problems = validate_config(config)
    if problems:
        for p in problems:
            print(f"invalid: {p}", file=sys.stderr)
        return EXIT_INVALID
    V = config.potential_object()
    rows = []
    if config.dimension == 2:
        x0 = config.x0
        for N in config.ladder:
            K = ginibre_finite(V, N)
            rep = decay_diagnostics(K, x0, 0.05, N)
            rows.append((N, "bergman_gap", bergman_gap(V, N, x0 + 0.1)))
            rows.append((N, "gauge_ratio_error", gauge_ratio_error(V, N, x0 + 0.05, kappa=0.25)))
            rows.append((N, "decay_rate", rep.rate))
            rows.append((N, "tail_ratio", rep.tail_ratio))
            rows.append((N, "localization_mass", rep.localization_mass if rep.localization_mass is not None else float("nan")))
            rows.append((N, "mesoscopic_radius", mesoscopic_radius(N)))
    else:
        for N, val in zip(config.ladder, right_limit_trend(V, config.ladder)):
            rows.append((N, "right_limit_deviation", val))
    _write_rows(args.out / "decay.csv", ["N", "quantity", "value"], rows)
    for r in rows:
        print(f"N={r[0]:<5} {r[1]:<22} {r[2]:.6g}")
    return EXIT_OK


def _validate(args) -> int:
    config = _config(args, "validate")
    problems = validate_config(config)
    for p in problems:
        print(f"invalid: {p}")
    if not problems:
        print("config valid")
    return EXIT_INVALID if problems else EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "combinatorics-check":
            return _combinatorics(args)
        if args.command == "limits-table":
            return _limits_table(args)
        if args.command == "decay-report":
            return _decay_report(args)
        if args.command == "validate":
            return _validate(args)
        return _experiment(args, args.command)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID if isinstance(exc, ValueError) else EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        log.exception("runtime error")
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
