"""Disorder ensembles over variants and depths, their statistics, gap zones,
steps-to-threshold tables, gap histograms and p=1 landscape scans."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ansatz import Circuit, Variant, VariationalParams
from .errors import CdqaoaError, MissingDataError
from .metrics import MetricRecord, evaluate
from .optimizer import (
    OptimizationResult,
    OptimizerConfig,
    layerwise_start,
    minimize_variational,
    minimize_with_embedding,
)
from .spin_model import DEFAULT_CLUSTER_TOL, SpinInstance, generate_instance, spectrum

log = logging.getLogger(__name__)

VARIANT_ORDER = (Variant.QAOA, Variant.QAOA_CD, Variant.QAOA_2CD)

LOG_FIELDS = (
    "instance_id", "variant", "p", "gap", "residual_energy", "fidelity",
    "excited_probability", "best_cost", "seed", "zone", "status", "message", "params",
)


@dataclass
class EnsembleConfig:
    n_spins: int = 5
    n_instances: int = 600
    p_max: int = 10
    variants: list = field(default_factory=lambda: list(VARIANT_ORDER))
    base_seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    zone_count: int = 3
    # optional per-variant depth cap below p_max, e.g. {"QAOA_CD": 1}
    variant_p_max: dict = field(default_factory=dict)
    cluster_tol: float = DEFAULT_CLUSTER_TOL

    def __post_init__(self):
        self.variants = sorted({Variant.parse(v) for v in self.variants}, key=VARIANT_ORDER.index)
        if isinstance(self.optimizer, dict):
            self.optimizer = OptimizerConfig.from_dict(self.optimizer)
        self.variant_p_max = {Variant.parse(k).value: int(v) for k, v in self.variant_p_max.items()}
        if self.n_spins < 2:
            raise ValueError("n_spins must be >= 2")
        if self.p_max < 1:
            raise ValueError("p_max must be >= 1")
        if not self.variants:
            raise ValueError("at least one variant is required")
        if self.zone_count < 1 or self.n_instances < self.zone_count:
            raise ValueError("n_instances must be >= zone_count >= 1")

    def depths(self, variant: Variant) -> range:
        return range(1, min(self.p_max, self.variant_p_max.get(variant.value, self.p_max)) + 1)

    def instances(self) -> list[SpinInstance]:
        return [generate_instance(self.n_spins, self.base_seed + i) for i in range(self.n_instances)]

    def to_dict(self) -> dict:
        return {
            "n_spins": self.n_spins,
            "n_instances": self.n_instances,
            "p_max": self.p_max,
            "variants": [v.value for v in self.variants],
            "base_seed": self.base_seed,
            "optimizer": self.optimizer.to_dict(),
            "zone_count": self.zone_count,
            "variant_p_max": dict(sorted(self.variant_p_max.items())),
            "cluster_tol": self.cluster_tol,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleConfig":
        known = {"n_spins", "n_instances", "p_max", "variants", "base_seed", "optimizer",
                 "zone_count", "variant_p_max", "cluster_tol"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown ensemble config keys: {sorted(unknown)}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EnsembleConfig":
        return cls.from_dict(json.loads(text))

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:12]


# ------------------------------------------------------------- record log


def _params_json(result: OptimizationResult | None) -> str:
    return "" if result is None else json.dumps(result.best_params.to_dict())


def _record_to_row(rec: MetricRecord, params: str = "") -> dict:
    row = rec.to_row()
    row["params"] = params
    return {k: row.get(k, "") for k in LOG_FIELDS}


def read_records(path) -> list[MetricRecord]:
    """Load a record log; rows are returned in file order."""
    path = Path(path)
    if not path.exists():
        return []
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(_row_to_record(row))
    return out


def _row_to_record(row: dict) -> MetricRecord:
    def num(key):
        v = row.get(key, "")
        return math.nan if v in ("", None) else float(v)

    rec = MetricRecord(
        instance_id=row["instance_id"],
        variant=row["variant"],
        p=int(row["p"]),
        gap=num("gap"),
        residual_energy=num("residual_energy"),
        fidelity=num("fidelity"),
        excited_probability=num("excited_probability"),
        best_cost=num("best_cost"),
        seed=int(row.get("seed") or 0),
        zone=int(row["zone"]) if row.get("zone") not in ("", None) else None,
        status=row.get("status") or "ok",
        message=row.get("message") or "",
    )
    rec.params = row.get("params") or ""
    return rec


def write_records(path, records, append: bool = False) -> None:
    path = Path(path)
    new = not (append and path.exists() and path.stat().st_size > 0)
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LOG_FIELDS)
        if new:
            writer.writeheader()
        for rec in records:
            writer.writerow(_record_to_row(rec, getattr(rec, "params", "")))
        fh.flush()
        os.fsync(fh.fileno())


# ---------------------------------------------------------------- running


def _result_from_params(params_json: str) -> OptimizationResult | None:
    if not params_json:
        return None
    params = VariationalParams.from_dict(json.loads(params_json))
    return OptimizationResult(best_params=params, best_cost=math.nan, restart_records=[], best_index=0)


def _instance_job(instance: SpinInstance, config: EnsembleConfig, done: dict) -> list[MetricRecord]:
    """All pending (variant, p) runs of one instance.

    ``done`` maps (variant, p) to the stored params of completed runs, which
    seed the embedding and layer-wise warm starts when enabled.
    """
    spec = spectrum(instance, config.cluster_tol)
    opt = config.optimizer
    results: dict[tuple[str, int], OptimizationResult | None] = {
        key: _result_from_params(params) for key, params in done.items()
    }
    records = []
    p_top = max(max(config.depths(v)) for v in config.variants)
    for p in range(1, p_top + 1):
        for variant in config.variants:
            if p not in config.depths(variant):
                continue
            key = (variant.value, p)
            if key in done:
                continue
            extra = []
            if opt.layerwise_warm_start and p > 1:
                prev = results.get((variant.value, p - 1))
                if prev is not None:
                    extra.append((layerwise_start(prev), "layerwise"))
            parent = results.get((variant.parent.value, p)) if variant.parent else None
            try:
                if opt.warm_start_embedding and parent is not None:
                    res = minimize_with_embedding(instance, variant, p, opt, parent)
                    if extra:
                        alt = minimize_variational(instance, variant, p, opt, extra_starts=extra)
                        res = res if res.best_cost <= alt.best_cost else alt
                else:
                    res = minimize_variational(instance, variant, p, opt, extra_starts=extra)
                state = Circuit(instance, variant, p).state(res.best_params)
                rec = evaluate(state, res.best_cost, spec, instance_id=instance.instance_id,
                               variant=variant.value, p=p, seed=instance.seed)
                rec.params = _params_json(res)
                results[key] = res
            except CdqaoaError as exc:
                log.error("run failed for %s %s p=%d: %s", instance.instance_id, variant, p, exc)
                rec = MetricRecord(instance.instance_id, variant.value, p, spec.gap, math.nan,
                                   math.nan, math.nan, math.nan, seed=instance.seed,
                                   status="failed", message=str(exc))
                rec.params = ""
                results[key] = None
            records.append(rec)
    return records


def _sort_key(config: EnsembleConfig):
    index = {inst.instance_id: i for i, inst in enumerate(config.instances())}

    def key(rec: MetricRecord):
        return (index.get(rec.instance_id, len(index)), VARIANT_ORDER.index(Variant.parse(rec.variant)), rec.p)

    return key


def run_ensemble(config: EnsembleConfig, log_path=None, workers: int = 1,
                 progress=None) -> list[MetricRecord]:
    """Optimize every (instance, variant, p) of the ensemble and return the records.

    With ``log_path`` the run is resumable: completed (instance, variant, p)
    keys found in the log are skipped and new records are appended as each
    instance finishes. ``progress`` is called with (finished, total).
    """
    existing = read_records(log_path) if log_path else []
    done_by_instance: dict[str, dict] = defaultdict(dict)
    for rec in existing:
        if not rec.failed:
            done_by_instance[rec.instance_id][(rec.variant, rec.p)] = getattr(rec, "params", "")
    instances = config.instances()
    expected = {(v.value, p) for v in config.variants for p in config.depths(v)}
    pending = [inst for inst in instances if not expected <= set(done_by_instance[inst.instance_id])]
    # keep only successful rows from earlier attempts; failed keys are retried
    kept = [r for r in existing if not r.failed]
    if log_path and len(kept) != len(existing):
        write_records(log_path, kept)

    new_records: list[MetricRecord] = []
    finished = 0

    def collect(recs):
        nonlocal finished
        new_records.extend(recs)
        if log_path:
            write_records(log_path, recs, append=True)
        finished += 1
        if progress:
            progress(finished, len(pending))

    if workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_instance_job, inst, config, done_by_instance[inst.instance_id])
                       for inst in pending]
            for fut in as_completed(futures):
                collect(fut.result())
    else:
        for inst in pending:
            collect(_instance_job(inst, config, done_by_instance[inst.instance_id]))

    wanted_ids = {inst.instance_id for inst in instances}
    records = [r for r in kept + new_records
               if r.instance_id in wanted_ids and (r.variant, r.p) in expected]
    return sorted(records, key=_sort_key(config))


# ------------------------------------------------------------- statistics


@dataclass(frozen=True)
class GroupStats:
    n: int
    fidelity_mean: float
    fidelity_std: float
    residual_mean: float
    residual_std: float


@dataclass
class ZoneBinning:
    assignment: dict  # instance_id -> zone number (1 = smallest gaps)
    boundaries: list  # [(min gap, max gap)] per zone
    sizes: list


@dataclass
class EnsembleStats:
    overall: dict  # (variant, p) -> GroupStats
    by_zone: dict  # (zone, variant, p) -> GroupStats
    zones: ZoneBinning

    def get(self, variant, p: int, zone: int | None = None) -> GroupStats:
        v = Variant.parse(variant).value
        key = (v, p) if zone is None else (zone, v, p)
        table = self.overall if zone is None else self.by_zone
        if key not in table:
            raise MissingDataError(f"no statistics for {key}")
        return table[key]

    def rows(self) -> list[dict]:
        out = []
        for (v, p), g in sorted(self.overall.items(), key=lambda kv: (_vidx(kv[0][0]), kv[0][1])):
            out.append({"zone": "all", "variant": v, "p": p, **g.__dict__})
        for (z, v, p), g in sorted(self.by_zone.items(), key=lambda kv: (kv[0][0], _vidx(kv[0][1]), kv[0][2])):
            out.append({"zone": z, "variant": v, "p": p, **g.__dict__})
        return out

    def summary(self) -> dict:
        """Nested dict mirroring the method-comparison and zone tables."""
        def table(items):
            d = defaultdict(dict)
            for (v, p), g in items:
                d[v][str(p)] = {
                    "fidelity": [g.fidelity_mean, g.fidelity_std],
                    "residual_energy": [g.residual_mean, g.residual_std],
                    "n": g.n,
                }
            return dict(d)

        zones = {}
        for z in range(1, len(self.zones.sizes) + 1):
            zones[str(z)] = {
                "gap_range": list(self.zones.boundaries[z - 1]),
                "size": self.zones.sizes[z - 1],
                "stats": table(((v, p), g) for (zz, v, p), g in self.by_zone.items() if zz == z),
            }
        return {"overall": table(self.overall.items()), "zones": zones}


def _vidx(v: str) -> int:
    return VARIANT_ORDER.index(Variant.parse(v))


def _group(values_f, values_e) -> GroupStats:
    f = np.asarray(values_f, dtype=float)
    e = np.asarray(values_e, dtype=float)
    # population standard deviation (divisor n)
    return GroupStats(len(f), float(f.mean()), float(f.std()), float(e.mean()), float(e.std()))


def zone_binning(records, zone_count: int = 3) -> ZoneBinning:
    """Split instances, sorted by gap (ties by instance_id), into equal-size zones.

    When the count does not divide evenly the lowest-gap zones get one extra
    instance each.
    """
    gaps = {}
    for r in records:
        iid, g = (r.instance_id, r.gap) if isinstance(r, MetricRecord) else r
        if iid in gaps and gaps[iid] != g:
            raise ValueError(f"instance {iid} has inconsistent gaps {gaps[iid]} and {g}")
        gaps[iid] = g
    if len(gaps) < zone_count:
        raise MissingDataError(f"{len(gaps)} instances cannot fill {zone_count} zones")
    ordered = sorted(gaps, key=lambda iid: (gaps[iid], iid))
    chunks = np.array_split(np.arange(len(ordered)), zone_count)
    assignment, boundaries, sizes = {}, [], []
    for z, chunk in enumerate(chunks, start=1):
        ids = [ordered[i] for i in chunk]
        for iid in ids:
            assignment[iid] = z
        boundaries.append((gaps[ids[0]], gaps[ids[-1]]))
        sizes.append(len(ids))
    return ZoneBinning(assignment, boundaries, sizes)


def disorder_stats(records, zone_count: int = 3) -> EnsembleStats:
    """Disorder means and population standard deviations, overall and per gap zone."""
    ok = [r for r in records if not r.failed]
    if not ok:
        raise MissingDataError("no successful records to aggregate")
    zones = zone_binning(ok, zone_count)
    overall = defaultdict(lambda: ([], []))
    by_zone = defaultdict(lambda: ([], []))
    for r in ok:
        v = Variant.parse(r.variant).value
        for table, key in ((overall, (v, r.p)), (by_zone, (zones.assignment[r.instance_id], v, r.p))):
            table[key][0].append(r.fidelity)
            table[key][1].append(r.residual_energy)
    return EnsembleStats(
        overall={k: _group(*vals) for k, vals in overall.items()},
        by_zone={k: _group(*vals) for k, vals in by_zone.items()},
        zones=zones,
    )


def assign_zones(records, zones: ZoneBinning) -> list[MetricRecord]:
    for r in records:
        r.zone = zones.assignment.get(r.instance_id)
    return records


def steps_to_threshold(stats: EnsembleStats, tolerance: float = 1e-2) -> dict:
    """(variant, zone) -> smallest p whose zone-mean fidelity >= 1 - tolerance, or None."""
    out = {}
    variants = sorted({v for v, _ in stats.overall}, key=_vidx)
    for v in variants:
        ps = sorted(p for vv, p in stats.overall if vv == v)
        for z in range(1, len(stats.zones.sizes) + 1):
            out[(v, z)] = next(
                (p for p in ps if stats.by_zone[(z, v, p)].fidelity_mean >= 1.0 - tolerance), None
            )
    return out


def format_steps(steps: dict, stats: EnsembleStats) -> list[dict]:
    rows = []
    for (v, z), p in steps.items():
        p_max = max(pp for vv, pp in stats.overall if vv == v)
        rows.append({"variant": v, "zone": z, "steps": str(p) if p is not None else f">{p_max}"})
    return rows


@dataclass
class GapHistogram:
    edges: np.ndarray
    counts: np.ndarray

    def rows(self) -> list[dict]:
        return [{"bin_low": float(lo), "bin_high": float(hi), "count": int(c)}
                for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts)]


def gap_histogram(records, bin_width: float) -> GapHistogram:
    """Instance counts per gap bin [k w, (k+1) w), starting at zero."""
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    gaps = {}
    for r in records:
        iid, g = (r.instance_id, r.gap) if isinstance(r, MetricRecord) else r
        gaps[iid] = g
    values = np.array(list(gaps.values()), dtype=float)
    if values.size == 0:
        return GapHistogram(np.array([0.0, bin_width]), np.zeros(1, dtype=int))
    bins = np.floor(values / bin_width).astype(int)
    counts = np.bincount(bins, minlength=bins.max() + 1)
    edges = bin_width * np.arange(counts.size + 1)
    return GapHistogram(edges, counts)


# ------------------------------------------------------------- landscapes


@dataclass
class LandscapeScan:
    gammas: np.ndarray
    betas: np.ndarray
    costs: np.ndarray  # costs[i, j] = E(gamma_i, beta_j)
    result: OptimizationResult | None = None

    @property
    def grid_min(self) -> tuple[float, float, float]:
        i, j = np.unravel_index(np.argmin(self.costs), self.costs.shape)
        return float(self.costs[i, j]), float(self.gammas[i]), float(self.betas[j])

    def rows(self) -> list[dict]:
        return [{"gamma": float(g), "beta": float(b), "cost": float(self.costs[i, j])}
                for i, g in enumerate(self.gammas) for j, b in enumerate(self.betas)]


def landscape_scan(instance: SpinInstance, grid_size: int = 101, gamma_range=(-math.pi, math.pi),
                   beta_range=(-math.pi, math.pi), optimizer: OptimizerConfig | None = None
                   ) -> LandscapeScan:
    """QAOA p=1 energy on a uniform (gamma, beta) grid.

    When ``optimizer`` is given, a trajectory-recording multistart run is
    attached as ``result`` (its ``trajectory`` is the winning restart's path).
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    from .ansatz import initial_state
    from .spin_model import diagonal_energies

    gammas = np.linspace(*gamma_range, grid_size)
    betas = np.linspace(*beta_range, grid_size)
    energies = diagonal_energies(instance)
    n = instance.n_spins
    phased = np.exp(-1j * np.outer(gammas, energies)) * initial_state(n)[None, :]
    costs = np.empty((grid_size, grid_size))
    for j, beta in enumerate(betas):
        c, s = np.cos(beta), -1j * np.sin(beta)
        psi = phased
        for k in range(n):
            v = psi.reshape(grid_size, -1, 2, 1 << k)
            psi = (c * v + s * v[:, :, ::-1, :]).reshape(grid_size, -1)
        costs[:, j] = (np.abs(psi) ** 2) @ energies
    result = None
    if optimizer is not None:
        cfg = OptimizerConfig.from_dict({**optimizer.to_dict(), "record_trajectory": True})
        result = minimize_variational(instance, Variant.QAOA, 1, cfg)
    return LandscapeScan(gammas, betas, costs, result)


def write_csv(path, rows: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
