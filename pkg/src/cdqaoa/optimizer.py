"""Multistart bounded L-BFGS-B minimization of the variational energy."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .ansatz import ALL_FAMILIES, Circuit, Variant, VariationalParams
from .errors import OptimizationError, ParameterError
from .spin_model import SpinInstance

log = logging.getLogger(__name__)

DEFAULT_BOXES = {
    "beta": (-math.pi, math.pi),
    "gamma": (-math.pi, math.pi),
    "alpha": (-1.0, 1.0),
    "delta": (-1.0, 1.0),
    "zeta": (-1.0, 1.0),
}

_VARIANT_CODE = {Variant.QAOA: 0, Variant.QAOA_CD: 1, Variant.QAOA_2CD: 2}


@dataclass
class OptimizerConfig:
    """Settings for :func:`minimize_variational`.

    Random starts are drawn uniformly from ``boxes``; the local method is
    bounded to the same boxes widened by ``bound_scale`` about their centre.
    """

    restarts: int = 20
    boxes: dict = field(default_factory=lambda: dict(DEFAULT_BOXES))
    bound_scale: float = 2.0
    grad_tol: float = 1e-9
    # scipy's relative-reduction stop at its own default value
    ftol: float = 2.220446049250313e-09
    max_iters: int = 1000
    seed: int = 0
    warm_start_embedding: bool = False
    layerwise_warm_start: bool = False
    record_trajectory: bool = False

    def __post_init__(self):
        boxes = dict(DEFAULT_BOXES)
        boxes.update({k: tuple(float(b) for b in v) for k, v in (self.boxes or {}).items()})
        self.boxes = boxes
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        for fam, (lo, hi) in self.boxes.items():
            if fam not in ALL_FAMILIES:
                raise ValueError(f"unknown angle family {fam!r}")
            if not lo < hi:
                raise ValueError(f"empty box for {fam}: [{lo}, {hi}]")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.bound_scale >= 1:
            raise ValueError("bound_scale must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["boxes"] = {k: list(v) for k, v in self.boxes.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown optimizer config keys: {sorted(unknown)}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "OptimizerConfig":
        return cls.from_dict(json.loads(text))

    def init_box(self, variant: Variant, depth: int) -> tuple[np.ndarray, np.ndarray]:
        variant = Variant.parse(variant)
        lo = np.concatenate([np.full(depth, self.boxes[f][0]) for f in variant.families])
        hi = np.concatenate([np.full(depth, self.boxes[f][1]) for f in variant.families])
        return lo, hi

    def bounds(self, variant: Variant, depth: int) -> list[tuple[float, float]]:
        lo, hi = self.init_box(variant, depth)
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo) * self.bound_scale
        return list(zip(mid - half, mid + half))


@dataclass
class RestartRecord:
    initial: VariationalParams
    final: VariationalParams | None
    final_cost: float
    iterations: int
    converged: bool
    failed: bool = False
    message: str = ""
    source: str = "random"
    initial_cost: float = math.nan


@dataclass
class OptimizationResult:
    best_params: VariationalParams
    best_cost: float
    restart_records: list[RestartRecord]
    best_index: int
    trajectory: np.ndarray | None = None

    @property
    def variant(self) -> Variant:
        return self.best_params.variant

    @property
    def depth(self) -> int:
        return self.best_params.depth

    @property
    def n_failed(self) -> int:
        return sum(r.failed for r in self.restart_records)

    def trajectory_rows(self) -> list[dict]:
        """Rows of (iteration, parameters..., cost) for the winning restart."""
        if self.trajectory is None:
            return []
        names = [f"{fam}_{k + 1}" for fam in self.variant.families for k in range(self.depth)]
        rows = []
        for it, point in enumerate(self.trajectory):
            row = {"iteration": it}
            row.update(dict(zip(names, point[:-1].tolist())))
            row["cost"] = float(point[-1])
            rows.append(row)
        return rows

    def write_trajectory_csv(self, path) -> None:
        import csv

        rows = self.trajectory_rows()
        if not rows:
            raise ValueError("no trajectory was recorded")
        with open(Path(path), "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)


class _NonFinite(Exception):
    pass


def start_points(instance: SpinInstance, variant, depth: int, config: OptimizerConfig) -> np.ndarray:
    """The ``config.restarts`` random initial points, shape (restarts, n_params).

    Points are drawn sequentially from one stream keyed by (config.seed,
    instance seed, variant, depth), so the first S points do not depend on
    how many restarts are requested.
    """
    variant = Variant.parse(variant)
    ss = np.random.SeedSequence([int(config.seed) & 0xFFFFFFFFFFFFFFFF,
                                 int(instance.seed) & 0xFFFFFFFFFFFFFFFF,
                                 _VARIANT_CODE[variant], int(depth)])
    rng = np.random.Generator(np.random.PCG64(ss))
    lo, hi = config.init_box(variant, depth)
    return np.array([rng.uniform(lo, hi) for _ in range(config.restarts)])


def _local_minimize(circuit: Circuit, x0: np.ndarray, bounds, config: OptimizerConfig, track: bool):
    path = [] if track else None

    def fun(x):
        value, grad = circuit.value_and_grad(x)
        if not (math.isfinite(value) and np.all(np.isfinite(grad))):
            raise _NonFinite(f"non-finite cost or gradient at {x.tolist()}")
        return value, grad

    if track:
        path.append(np.append(x0, circuit.energy(x0)))

    def callback(xk):
        path.append(np.append(xk, circuit.energy(xk)))

    res = minimize(
        fun,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        callback=callback if track else None,
        options={"maxiter": config.max_iters, "gtol": config.grad_tol, "ftol": config.ftol,
                 "maxcor": 20},
    )
    return res, (np.array(path) if track else None)


def _run_starts(instance, variant, depth, config, starts, sources) -> OptimizationResult:
    circuit = Circuit(instance, variant, depth)
    bounds = config.bounds(variant, depth)
    records = []
    paths = []
    for x0, source in zip(starts, sources):
        init = VariationalParams.from_vector(variant, x0)
        try:
            init_cost = circuit.energy(x0)
            res, path = _local_minimize(circuit, x0, bounds, config, config.record_trajectory)
            if not math.isfinite(res.fun):
                raise _NonFinite("non-finite final cost")
            records.append(RestartRecord(
                initial=init,
                final=VariationalParams.from_vector(variant, res.x),
                final_cost=float(res.fun),
                iterations=int(res.nit),
                converged=bool(res.success),
                message=str(res.message),
                source=source,
                initial_cost=init_cost,
            ))
            paths.append(path)
        except (_NonFinite, FloatingPointError, np.linalg.LinAlgError) as exc:
            log.warning("restart failed for %s %s p=%d: %s", instance.instance_id, variant, depth, exc)
            records.append(RestartRecord(init, None, math.nan, 0, False, failed=True,
                                         message=str(exc), source=source))
            paths.append(None)
    ok = [i for i, r in enumerate(records) if not r.failed]
    if not ok:
        raise OptimizationError(
            f"all {len(records)} restarts failed for {instance.instance_id} {variant} p={depth}"
        )
    # ties go to the lowest restart index, so the reduction is order-independent
    best = min(ok, key=lambda i: (records[i].final_cost, i))
    return OptimizationResult(
        best_params=records[best].final,
        best_cost=records[best].final_cost,
        restart_records=records,
        best_index=best,
        trajectory=paths[best],
    )


def minimize_variational(instance: SpinInstance, variant, depth: int, config: OptimizerConfig,
                         extra_starts=()) -> OptimizationResult:
    """Best of ``config.restarts`` bounded L-BFGS-B runs from random starts.

    ``extra_starts`` are (VariationalParams, label) pairs tried after the
    random ones.
    """
    variant = Variant.parse(variant)
    if depth < 1:
        raise ParameterError("depth must be >= 1")
    starts = list(start_points(instance, variant, depth, config))
    sources = ["random"] * len(starts)
    for params, label in extra_starts:
        if params.variant is not variant or params.depth != depth:
            raise ParameterError(f"extra start {params!r} does not match {variant} p={depth}")
        starts.append(params.to_vector())
        sources.append(label)
    return _run_starts(instance, variant, depth, config, starts, sources)


def minimize_with_embedding(instance: SpinInstance, variant, depth: int, config: OptimizerConfig,
                            parent_result: OptimizationResult) -> OptimizationResult:
    """:func:`minimize_variational` plus one start at the parent optimum padded with zeros.

    The parent must be the next-lower variant at the same depth
    (QAOA -> QAOA_CD, QAOA_CD -> QAOA_2CD).
    """
    variant = Variant.parse(variant)
    parent = parent_result.best_params
    if variant.parent is None or parent.variant is not variant.parent:
        raise ParameterError(f"cannot embed a {parent.variant} result into {variant}")
    if parent.depth != depth:
        raise ParameterError(f"parent depth {parent.depth} != {depth}")
    return minimize_variational(instance, variant, depth, config,
                                extra_starts=[(parent.embed(variant), "embedded")])


def layerwise_start(previous: OptimizationResult) -> VariationalParams:
    """Depth p-1 optimum extended by one all-zero step."""
    prev = previous.best_params
    return VariationalParams(
        prev.variant,
        **{fam: np.append(getattr(prev, fam), 0.0) for fam in prev.variant.families},
    )
