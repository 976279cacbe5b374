"""Command-line entry point.

Every subcommand writes under ``<output-dir>/<subcommand>/<config-hash>/``.
Settings come from built-in defaults, then an optional JSON ``--config``
file with flat keys named like the long flags (``n_spins``, ``p_max``, ...),
then explicit flags. Exit codes: 0 success, 2 usage, 3 config or input
file, 4 runtime. Failures print one JSON line on stderr.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CdqaoaError
from .harness import (
    EnsembleConfig,
    assign_zones,
    disorder_stats,
    format_steps,
    gap_histogram,
    landscape_scan,
    read_records,
    run_ensemble,
    steps_to_threshold,
    write_csv,
    write_records,
)
from .optimizer import OptimizerConfig
from .spin_model import SpinInstance, generate_instance, spectrum

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3, 4

DEFAULTS = {
    "n_spins": 5,
    "count": 600,
    "seed": 0,
    "p_max": 10,
    "variants": "QAOA,QAOA_CD,QAOA_2CD",
    "variant_p_max": "",
    "restarts": 20,
    "workers": os.cpu_count() or 1,
    "tolerance": 1e-2,
    "zones": 3,
    "bin_width": 0.25,
    "grid_size": 101,
    "gamma_range": [-math.pi, math.pi],
    "beta_range": [-math.pi, math.pi],
    "embedding": False,
    "layerwise": False,
    "optimizer": {},
    "output_dir": "results",
}


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind, self.message = code, kind, message


def _fail_line(code: int, kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "exit_code": code, "message": message}), file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _fail_line(EXIT_USAGE, "usage", message)
        sys.exit(EXIT_USAGE)


# --------------------------------------------------------------- parsing


def _add(parser, *flags, **kw):
    # defaults stay None so explicit flags can be told apart from config values
    kw.setdefault("default", None)
    parser.add_argument(*flags, **kw)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _add(common, "--config", metavar="FILE", help="JSON file of settings (flat keys named like the flags)")
    _add(common, "--output-dir", metavar="DIR", help="root directory for outputs (default: results)")
    _add(common, "-v", "--verbose", action="store_true", help="log progress to stderr")

    ensemble = argparse.ArgumentParser(add_help=False)
    _add(ensemble, "--n-spins", type=int, metavar="N", help="number of spins (default: 5)")
    _add(ensemble, "--count", type=int, metavar="K", help="number of instances (default: 600)")
    _add(ensemble, "--seed", type=int, help="base seed; instance i uses seed+i (default: 0)")
    _add(ensemble, "--p-max", type=int, metavar="P", help="largest circuit depth (default: 10)")
    _add(ensemble, "--variants", metavar="LIST",
         help="comma-separated subset of QAOA,QAOA_CD,QAOA_2CD (aliases CD, 2CD)")
    _add(ensemble, "--variant-p-max", metavar="LIST",
         help="per-variant depth caps below --p-max, e.g. CD=1,2CD=6")
    _add(ensemble, "--restarts", type=int, metavar="S", help="random starts per optimization (default: 20)")
    _add(ensemble, "--embedding", action="store_true",
         help="also start each CD/2CD run from the lower variant's optimum padded with zeros")
    _add(ensemble, "--layerwise", action="store_true",
         help="also start depth p from the depth p-1 optimum extended by zeros")
    _add(ensemble, "--workers", type=int, metavar="W", help="worker processes (default: all cores)")
    _add(ensemble, "--records", metavar="CSV",
         help="record log to use instead of <output-dir>/run/<hash>/records.csv")
    _add(ensemble, "--zones", type=int, metavar="Z", help="number of gap zones (default: 3)")

    parser = _Parser(prog="cdqaoa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen", parents=[common], help="write random instances as JSON",
                       description="Write COUNT instances with seeds SEED..SEED+COUNT-1.")
    _add(p, "--n-spins", type=int, metavar="N", help="number of spins (default: 5)")
    _add(p, "--count", type=int, metavar="K", help="number of instances (default: 600)")
    _add(p, "--seed", type=int, help="first seed (default: 0)")

    p = sub.add_parser("spectrum", parents=[common], help="write the spectrum of each instance",
                       description="Spectra of instance files, or of generated instances when none are given.")
    _add(p, "--instance", nargs="+", metavar="FILE", help="instance JSON files written by gen")
    _add(p, "--n-spins", type=int, metavar="N", help="number of spins when generating (default: 5)")
    _add(p, "--count", type=int, metavar="K", help="instances to generate (default: 600)")
    _add(p, "--seed", type=int, help="first seed when generating (default: 0)")

    sub.add_parser("run", parents=[common, ensemble], help="optimize an ensemble, appending to its record log",
                   description="Run (or resume) an ensemble; completed (instance, variant, p) keys are skipped.")
    sub.add_parser("stats", parents=[common, ensemble], help="disorder means and standard deviations",
                   description="Overall and per-zone statistics from a record log.")
    sub.add_parser("zones", parents=[common, ensemble], help="gap-zone boundaries and assignments",
                   description="Split instances into equal-size gap zones.")
    p = sub.add_parser("steps", parents=[common, ensemble], help="steps-to-threshold table",
                       description="Smallest p whose zone-mean fidelity reaches 1 - TOLERANCE.")
    _add(p, "--tolerance", type=float, help="fidelity tolerance (default: 0.01)")
    p = sub.add_parser("hist", parents=[common, ensemble], help="histogram of spectral gaps",
                       description="Instance counts per gap bin starting at zero.")
    _add(p, "--bin-width", type=float, metavar="W", help="gap bin width (default: 0.25)")

    p = sub.add_parser("landscape", parents=[common], help="p=1 QAOA cost grid and optimizer path",
                       description="Evaluate the p=1 QAOA cost on a uniform grid and record one "
                                   "multistart optimization path.")
    _add(p, "--instance", metavar="FILE", help="instance JSON file (default: generate from --n-spins/--seed)")
    _add(p, "--n-spins", type=int, metavar="N", help="number of spins when generating (default: 5)")
    _add(p, "--seed", type=int, help="instance seed when generating (default: 0)")
    _add(p, "--grid-size", type=int, metavar="G", help="grid points per axis (default: 101)")
    _add(p, "--gamma-range", type=float, nargs=2, metavar=("LO", "HI"), help="gamma interval (default: -pi pi)")
    _add(p, "--beta-range", type=float, nargs=2, metavar=("LO", "HI"), help="beta interval (default: -pi pi)")
    _add(p, "--restarts", type=int, metavar="S", help="random starts for the optimization (default: 20)")
    return parser


def _settings(args) -> dict:
    settings = dict(DEFAULTS)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(EXIT_CONFIG, "config", f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise CliError(EXIT_CONFIG, "config", "config must be a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise CliError(EXIT_CONFIG, "config", f"unknown config keys: {sorted(unknown)}")
        settings.update(loaded)
    for key, value in vars(args).items():
        if key in DEFAULTS and value is not None and value is not False:
            settings[key] = value
    return settings


def _parse_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return list(text)
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _parse_caps(text) -> dict:
    if isinstance(text, dict):
        return text
    caps = {}
    for item in _parse_list(text):
        name, _, value = item.partition("=")
        if not value:
            raise CliError(EXIT_CONFIG, "config", f"bad variant cap {item!r}, expected NAME=P")
        caps[name] = int(value)
    return caps


def ensemble_config(s: dict) -> EnsembleConfig:
    try:
        opt = OptimizerConfig.from_dict({
            **s["optimizer"],
            "restarts": int(s["restarts"]),
            "warm_start_embedding": bool(s["embedding"]),
            "layerwise_warm_start": bool(s["layerwise"]),
        })
        return EnsembleConfig(
            n_spins=int(s["n_spins"]),
            n_instances=int(s["count"]),
            p_max=int(s["p_max"]),
            variants=_parse_list(s["variants"]),
            base_seed=int(s["seed"]),
            optimizer=opt,
            zone_count=int(s["zones"]),
            variant_p_max=_parse_caps(s["variant_p_max"]),
        )
    except (ValueError, TypeError, KeyError) as exc:
        raise CliError(EXIT_CONFIG, "config", f"invalid ensemble settings: {exc}") from exc


def _hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:12]


def _outdir(s: dict, subcommand: str, digest: str) -> Path:
    out = Path(s["output_dir"]) / subcommand / digest
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_metadata(out: Path, subcommand: str, config: dict) -> None:
    _write_json(out / "config.json", config)
    _write_json(out / "metadata.json", {
        "subcommand": subcommand,
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "python": platform.python_version(),
        "numpy": np.__version__,
    })


def _load_instance(path) -> SpinInstance:
    try:
        return SpinInstance.load(path)
    except OSError as exc:
        raise CliError(EXIT_CONFIG, "input", f"cannot read instance {path}: {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(EXIT_CONFIG, "input", f"malformed instance file {path}: {exc}") from exc


def _generated(s: dict) -> list[SpinInstance]:
    try:
        return [generate_instance(int(s["n_spins"]), int(s["seed"]) + i) for i in range(int(s["count"]))]
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, "config", str(exc)) from exc


# -------------------------------------------------------------- commands


def cmd_gen(s, args) -> Path:
    instances = _generated(s)
    cfg = {"n_spins": s["n_spins"], "count": s["count"], "seed": s["seed"]}
    out = _outdir(s, "gen", _hash(cfg))
    (out / "instances").mkdir(exist_ok=True)
    for inst in instances:
        inst.save(out / "instances" / f"{inst.instance_id}.json")
    _write_metadata(out, "gen", cfg)
    return out


def cmd_spectrum(s, args) -> Path:
    if args.instance:
        instances = [_load_instance(p) for p in args.instance]
        cfg = {"instances": [inst.to_dict() for inst in instances]}
    else:
        instances = _generated(s)
        cfg = {"n_spins": s["n_spins"], "count": s["count"], "seed": s["seed"]}
    out = _outdir(s, "spectrum", _hash(cfg))
    (out / "spectra").mkdir(exist_ok=True)
    rows = []
    for inst in instances:
        spec = spectrum(inst)
        _write_json(out / "spectra" / f"{inst.instance_id}.json", {"instance_id": inst.instance_id, **spec.to_dict()})
        rows.append({"instance_id": inst.instance_id, "e_min": spec.e_min, "e_max": spec.e_max,
                     "gap": spec.gap, "n_levels": spec.n_levels,
                     "ground_degeneracy": len(spec.ground_states)})
    write_csv(out / "spectra.csv", rows)
    _write_metadata(out, "spectrum", cfg)
    return out


def _run_key(cfg: EnsembleConfig) -> str:
    # zone_count only affects analysis, so it does not select the run directory
    d = cfg.to_dict()
    d.pop("zone_count")
    return _hash(d)


def _run_dir(s, cfg: EnsembleConfig) -> Path:
    return Path(s["output_dir"]) / "run" / _run_key(cfg)


def cmd_run(s, args) -> Path:
    cfg = ensemble_config(s)
    out = _outdir(s, "run", _run_key(cfg))
    log_path = Path(args.records) if args.records else out / "records.csv"
    before = len(read_records(log_path))

    def progress(done, total):
        logging.getLogger("cdqaoa").info("instance %d/%d done", done, total)

    records = run_ensemble(cfg, log_path, workers=max(1, int(s["workers"])), progress=progress)
    _write_metadata(out, "run", cfg.to_dict())
    failed = sum(r.failed for r in records)
    print(json.dumps({"records": len(records), "new": len(records) - before, "failed": failed,
                      "log": str(log_path)}))
    return out


def _records_for(s, args, cfg: EnsembleConfig):
    path = Path(args.records) if args.records else _run_dir(s, cfg) / "records.csv"
    if not path.exists():
        raise CliError(EXIT_CONFIG, "input", f"record log {path} not found; run the ensemble first")
    try:
        return read_records(path)
    except (KeyError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, "input", f"malformed record log {path}: {exc}") from exc


def _analysis(s, args, name: str, extra: dict | None = None):
    cfg = ensemble_config(s)
    records = _records_for(s, args, cfg)
    payload = {"ensemble": cfg.to_dict(), **(extra or {})}
    if args.records:
        payload["records"] = hashlib.sha256(Path(args.records).read_bytes()).hexdigest()[:12]
    out = _outdir(s, name, _hash(payload))
    _write_metadata(out, name, payload)
    return cfg, records, out


def cmd_stats(s, args) -> Path:
    cfg, records, out = _analysis(s, args, "stats")
    stats = disorder_stats(records, cfg.zone_count)
    write_csv(out / "stats.csv", stats.rows())
    _write_json(out / "summary.json", stats.summary())
    return out


def cmd_zones(s, args) -> Path:
    cfg, records, out = _analysis(s, args, "zones")
    stats = disorder_stats(records, cfg.zone_count)
    z = stats.zones
    write_csv(out / "zones.csv", [
        {"zone": i + 1, "gap_min": lo, "gap_max": hi, "size": n}
        for i, ((lo, hi), n) in enumerate(zip(z.boundaries, z.sizes))
    ])
    gaps = {r.instance_id: r.gap for r in records}
    write_csv(out / "assignment.csv", [
        {"instance_id": iid, "gap": gaps[iid], "zone": zone}
        for iid, zone in sorted(z.assignment.items(), key=lambda kv: (gaps[kv[0]], kv[0]))
    ])
    zoned = assign_zones([r for r in records if not r.failed], z)
    write_records(out / "records_zoned.csv", zoned)
    _write_json(out / "summary.json", {"boundaries": [list(b) for b in z.boundaries], "sizes": z.sizes})
    return out


def cmd_steps(s, args) -> Path:
    tol = float(s["tolerance"])
    if not 0 < tol <= 1:
        raise CliError(EXIT_CONFIG, "config", "tolerance must be in (0, 1]")
    cfg, records, out = _analysis(s, args, "steps", {"tolerance": tol})
    stats = disorder_stats(records, cfg.zone_count)
    rows = format_steps(steps_to_threshold(stats, tol), stats)
    write_csv(out / "steps.csv", rows)
    table = {}
    for row in rows:
        table.setdefault(row["variant"], {})[str(row["zone"])] = row["steps"]
    _write_json(out / "summary.json", {"tolerance": tol, "steps": table})
    return out


def cmd_hist(s, args) -> Path:
    width = float(s["bin_width"])
    if not width > 0:
        raise CliError(EXIT_CONFIG, "config", "bin width must be positive")
    cfg, records, out = _analysis(s, args, "hist", {"bin_width": width})
    hist = gap_histogram(records, width)
    write_csv(out / "histogram.csv", hist.rows())
    gaps = sorted({r.instance_id: r.gap for r in records}.values())
    _write_json(out / "summary.json", {"bin_width": width, "n_instances": len(gaps),
                                       "gap_min": gaps[0], "gap_max": gaps[-1],
                                       "counts": hist.counts.tolist()})
    return out


def cmd_landscape(s, args) -> Path:
    if args.instance:
        inst = _load_instance(args.instance)
    else:
        inst = generate_instance(int(s["n_spins"]), int(s["seed"]))
    grid = int(s["grid_size"])
    if grid < 2:
        raise CliError(EXIT_CONFIG, "config", "grid size must be >= 2")
    opt = OptimizerConfig.from_dict({**s["optimizer"], "restarts": int(s["restarts"])})
    cfg = {"instance": inst.to_dict(), "grid_size": grid, "gamma_range": list(s["gamma_range"]),
           "beta_range": list(s["beta_range"]), "optimizer": opt.to_dict()}
    out = _outdir(s, "landscape", _hash(cfg))
    scan = landscape_scan(inst, grid, tuple(s["gamma_range"]), tuple(s["beta_range"]), optimizer=opt)
    write_csv(out / "grid.csv", scan.rows())
    scan.result.write_trajectory_csv(out / "trajectory.csv")
    g_cost, g_gamma, g_beta = scan.grid_min
    best = scan.result.best_params
    spec = spectrum(inst)
    _write_json(out / "summary.json", {
        "instance_id": inst.instance_id,
        "grid_min": {"cost": g_cost, "gamma": g_gamma, "beta": g_beta},
        "optimum": {"cost": scan.result.best_cost, "gamma": float(best.gamma[0]), "beta": float(best.beta[0])},
        "e_min": spec.e_min, "e_max": spec.e_max,
    })
    _write_metadata(out, "landscape", cfg)
    return out


COMMANDS = {
    "gen": cmd_gen, "spectrum": cmd_spectrum, "run": cmd_run, "stats": cmd_stats,
    "zones": cmd_zones, "steps": cmd_steps, "hist": cmd_hist, "landscape": cmd_landscape,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        s = _settings(args)
        out = COMMANDS[args.subcommand](s, args)
    except CliError as exc:
        _fail_line(exc.code, exc.kind, exc.message)
        return exc.code
    except CdqaoaError as exc:
        _fail_line(EXIT_RUNTIME, type(exc).__name__, str(exc))
        return EXIT_RUNTIME
    except (OSError, ValueError) as exc:
        _fail_line(EXIT_RUNTIME, type(exc).__name__, str(exc))
        return EXIT_RUNTIME
    print(str(out))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
