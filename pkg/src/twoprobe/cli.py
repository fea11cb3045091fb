"""Command-line front end.

    twoprobe {bogoliubov,exact,protocol,sweep} --config run.json [--seed N]
             [--out DIR] [--threads N]

Exit status is 0 on success, 2 for configuration errors and 3 when a
numerical solver fails to converge.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__, bogoliubov
from .config import RunConfig, parse_config
from .exact import ExactBackend
from .krylov import ConvergenceError
from .model import ConfigError, EquilibriumSpec, ProbeLayout, validate
from .output import (CORRELATION_COLUMNS, SCHEMA_VERSION, SERIES_COLUMNS, correlation_rows,
                     series_rows, write_json, write_table)
from .protocol import CorrelationEstimate, clean_series, run_protocol

THREADS_ENV = "TWOPROBE_THREADS"
DENSITY_COLUMNS = ("rho", "rho_err", "method", "seed")


def _natural(cfg: RunConfig, model=None, equilibrium=None):
    model = model or cfg.model
    equilibrium = equilibrium or cfg.equilibrium
    nat = validate(model, ProbeLayout.from_separation(0, cfg.coupling, cfg.site_left), equilibrium, cfg.grid)
    return nat.model, nat.probes.coupling, nat.equilibrium, nat.grid


def _protocol(cfg: RunConfig, threads: int, backend: str, model=None, equilibrium=None, n_max=None):
    return run_protocol(
        model or cfg.model, cfg.separations, cfg.coupling, equilibrium or cfg.equilibrium, cfg.grid,
        noise=cfg.noise, backend=backend, n_max=n_max or cfg.n_max, threads=threads,
        site_left=cfg.site_left, **cfg.fit)


def _write_protocol(result, cfg, out: Path, seed: int) -> list:
    files = [
        write_table(out / "g2_protocol.csv", CORRELATION_COLUMNS, correlation_rows(result.estimates, seed)),
        write_table(out / "zeta_noisy.csv", SERIES_COLUMNS, series_rows(result.series.values())),
        write_table(out / "density.csv", DENSITY_COLUMNS,
                    [(float(result.density.value), float(result.density.error), "protocol", seed)]),
    ]
    return files


def cmd_bogoliubov(cfg: RunConfig, out: Path, threads: int, seed: int) -> list:
    spec, coupling, eq, grid = _natural(cfg)
    series, refs = clean_series(spec, cfg.separations, coupling, eq, grid, "bogoliubov")
    files = [
        write_table(out / "g2_analytic.csv", CORRELATION_COLUMNS,
                    correlation_rows([refs[s] for s in cfg.separations], seed)),
        write_table(out / "zeta_series.csv", SERIES_COLUMNS,
                    series_rows(series[s] for s in cfg.separations)),
    ]
    if cfg.noise is not None:
        files += _write_protocol(_protocol(cfg, threads, "bogoliubov"), cfg, out, seed)
    return files


def cmd_exact(cfg: RunConfig, out: Path, threads: int, seed: int) -> list:
    spec, coupling, eq, grid = _natural(cfg)
    backend = ExactBackend(spec, cfg.n_max)
    state = backend.equilibrium_state(eq.beta if eq.is_thermal else None)
    series, refs = clean_series(spec, cfg.separations, coupling, eq, grid, "exact",
                                exact=backend, state=state, site_left=cfg.site_left)
    files = [
        write_table(out / "g2_exact.csv", CORRELATION_COLUMNS,
                    correlation_rows([refs[s] for s in cfg.separations], seed)),
        write_table(out / "zeta_series.csv", SERIES_COLUMNS,
                    series_rows(series[s] for s in cfg.separations)),
    ]
    if cfg.sweep is not None:
        files += cmd_sweep(cfg, out, threads, seed, backend_name="exact")
    return files


def cmd_protocol(cfg: RunConfig, out: Path, threads: int, seed: int) -> list:
    result = _protocol(cfg, threads, cfg.backend)
    files = _write_protocol(result, cfg, out, seed)
    files.append(write_table(out / f"g2_{'analytic' if cfg.backend == 'bogoliubov' else 'exact'}.csv",
                             CORRELATION_COLUMNS, correlation_rows(result.references, seed)))
    return files


_SWEEP_TAGS = {"interaction": "UJ", "n_max": "nmax", "beta": "beta"}


def cmd_sweep(cfg: RunConfig, out: Path, threads: int, seed: int, backend_name: str | None = None) -> list:
    if cfg.sweep is None:
        raise ConfigError("the sweep command needs a 'sweep' section")
    param = cfg.sweep["parameter"]
    backend_name = backend_name or cfg.backend
    if param == "n_max" and backend_name != "exact":
        raise ConfigError("an n_max sweep needs the exact backend")
    rows, by_value = [], {}
    for value in cfg.sweep["values"]:
        model, eq, n_max = cfg.model, cfg.equilibrium, cfg.n_max
        if param == "interaction":
            model = type(model)(**{**asdict(model), "interaction": float(value)})
        elif param == "beta":
            eq = EquilibriumSpec.thermal(float(value))
        else:
            n_max = int(value)
        spec, coupling, nat_eq, grid = _natural(cfg, model, eq)
        if backend_name == "exact":
            ed = ExactBackend(spec, n_max)
            state = ed.equilibrium_state(nat_eq.beta if nat_eq.is_thermal else None)
            refs = [CorrelationEstimate(s, ed.correlation(state, s), 0.0, ed.g2(state, s), 0.0, "exact")
                    for s in cfg.separations]
        else:
            cor = bogoliubov.analytic_correlation(list(cfg.separations), spec, nat_eq)
            g2 = bogoliubov.analytic_g2(list(cfg.separations), spec, nat_eq)
            refs = [CorrelationEstimate(s, float(c), 0.0, float(g), 0.0, "analytic")
                    for s, c, g in zip(cfg.separations, cor, g2)]
        by_value[value] = refs
        rows += list(correlation_rows(refs, seed, prefix=(param, value)))
        if cfg.noise is not None:
            result = _protocol(cfg, threads, backend_name, model=model, equilibrium=eq, n_max=n_max)
            rows += list(correlation_rows(result.estimates, seed, prefix=(param, value)))
    files = [write_table(out / f"g2_vs_{_SWEEP_TAGS[param]}.csv", ("parameter", "value") + CORRELATION_COLUMNS, rows)]
    if param == "n_max":
        values = list(cfg.sweep["values"])
        conv = []
        for a, b in zip(values, values[1:]):
            delta = max(abs(x.g2 - y.g2) for x, y in zip(by_value[a], by_value[b]))
            conv.append((a, b, float(delta)))
        files.append(write_table(out / "nmax_convergence.csv", ("n_max", "next_n_max", "max_abs_delta_g2"), conv))
    return files


COMMANDS = {
    "bogoliubov": cmd_bogoliubov,
    "exact": cmd_exact,
    "protocol": cmd_protocol,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twoprobe", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="JSON config or run manifest")
        p.add_argument("--seed", type=int, default=None, help="override noise.seed")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (default: ${THREADS_ENV} or 1)")
    return parser


def _threads(flag):
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(THREADS_ENV)
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        try:
            doc = json.loads(args.config.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if isinstance(doc, dict) and "manifest_version" in doc:
            doc = doc["config"]
        if args.seed is not None:
            if not isinstance(doc.get("noise"), dict):
                doc.setdefault("noise", {})
            doc["noise"]["seed"] = args.seed
        cfg = parse_config(doc)
        threads = _threads(args.threads)
        files = COMMANDS[args.command](cfg, args.out, threads, cfg.seed)
    except ConfigError as exc:
        print(f"twoprobe: configuration error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"twoprobe: did not converge: {exc}", file=sys.stderr)
        return 3
    manifest = {
        "manifest_version": 1,
        "csv_schema": SCHEMA_VERSION,
        "tool": "twoprobe",
        "version": __version__,
        "command": args.command,
        "config": cfg.raw,
        "seed": cfg.seed,
        "backend": "exact" if args.command == "exact" else ("bogoliubov" if args.command == "bogoliubov" else cfg.backend),
        "threads": threads,
        "duration_s": time.perf_counter() - start,
        "outputs": [p.name for p in files],
    }
    write_json(args.out / "run_manifest.json", manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
