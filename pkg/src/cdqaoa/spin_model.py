"""Random fully-connected Ising instances and their exact classical spectra.

Basis convention: bit ``k`` of a basis index ``b`` is the state of spin ``k``;
bit value 0 is spin up (z = +1), bit value 1 is spin down (z = -1).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import DegenerateSpectrumError, InvalidSizeError

DEFAULT_CLUSTER_TOL = 1e-9


@dataclass(frozen=True)
class SpinInstance:
    """Couplings J_ij (i < j, row-major order) of H_T = sum J_ij Z_i Z_j."""

    n_spins: int
    couplings: tuple[float, ...]
    seed: int = 0
    instance_id: str = ""

    def __post_init__(self):
        if self.n_spins < 2:
            raise InvalidSizeError(f"n_spins must be >= 2, got {self.n_spins}")
        n_pairs = self.n_spins * (self.n_spins - 1) // 2
        if len(self.couplings) != n_pairs:
            raise InvalidSizeError(
                f"expected {n_pairs} couplings for N={self.n_spins}, got {len(self.couplings)}"
            )
        object.__setattr__(self, "couplings", tuple(float(c) for c in self.couplings))
        if not self.instance_id:
            object.__setattr__(self, "instance_id", f"N{self.n_spins}-s{self.seed}")

    @property
    def dim(self) -> int:
        return 1 << self.n_spins

    def pairs(self):
        return combinations(range(self.n_spins), 2)

    def coupling_matrix(self) -> np.ndarray:
        """Symmetric N x N matrix with zero diagonal."""
        J = np.zeros((self.n_spins, self.n_spins))
        for (i, j), c in zip(self.pairs(), self.couplings):
            J[i, j] = J[j, i] = c
        return J

    def to_dict(self) -> dict:
        return {
            "n_spins": self.n_spins,
            "seed": self.seed,
            "couplings": list(self.couplings),
            "instance_id": self.instance_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpinInstance":
        return cls(
            n_spins=int(d["n_spins"]),
            couplings=tuple(float(c) for c in d["couplings"]),
            seed=int(d.get("seed", 0)),
            instance_id=str(d.get("instance_id", "")),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "SpinInstance":
        return cls.from_dict(json.loads(Path(path).read_text()))


def generate_instance(n_spins: int, seed: int, instance_id: str | None = None) -> SpinInstance:
    """Draw every J_ij uniformly from [-1, 1) with a PCG64 stream seeded by ``seed``.

    Couplings are drawn in row-major (i < j) order, so the same (n_spins, seed)
    always reproduces the same instance.
    """
    if n_spins < 2:
        raise InvalidSizeError(f"n_spins must be >= 2, got {n_spins}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    n_pairs = n_spins * (n_spins - 1) // 2
    couplings = rng.uniform(-1.0, 1.0, size=n_pairs)
    return SpinInstance(
        n_spins=n_spins,
        couplings=tuple(couplings.tolist()),
        seed=int(seed),
        instance_id=instance_id or f"N{n_spins}-s{seed}",
    )


@lru_cache(maxsize=16)
def spin_table(n_spins: int) -> np.ndarray:
    """Array of shape (N, 2^N) holding z_k(b) in {+1, -1}."""
    idx = np.arange(1 << n_spins)
    bits = (idx[None, :] >> np.arange(n_spins)[:, None]) & 1
    table = 1 - 2 * bits
    table.setflags(write=False)
    return table


@lru_cache(maxsize=256)
def diagonal_energies(instance: SpinInstance) -> np.ndarray:
    """Energies of all 2^N computational basis states under H_T."""
    z = spin_table(instance.n_spins)
    energies = np.zeros(instance.dim)
    for (i, j), c in zip(instance.pairs(), instance.couplings):
        energies += c * (z[i] * z[j])
    energies.setflags(write=False)
    return energies


@dataclass(frozen=True)
class Spectrum:
    levels: tuple[tuple[float, int], ...]
    e_min: float
    e_max: float
    gap: float
    ground_states: tuple[int, ...]
    # basis indices belonging to each clustered level, aligned with ``levels``
    level_states: tuple[tuple[int, ...], ...] = field(repr=False, default=())

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def to_dict(self) -> dict:
        return {
            "levels": [{"energy": e, "multiplicity": m} for e, m in self.levels],
            "e_min": self.e_min,
            "e_max": self.e_max,
            "gap": self.gap,
            "ground_states": list(self.ground_states),
        }


def spectrum(instance: SpinInstance, cluster_tol: float = DEFAULT_CLUSTER_TOL) -> Spectrum:
    """Group the sorted diagonal energies into levels separated by more than ``cluster_tol``."""
    if not cluster_tol > 0:
        raise ValueError("cluster_tol must be positive")
    energies = diagonal_energies(instance)
    order = np.argsort(energies, kind="stable")
    sorted_e = energies[order]
    # a new level starts wherever consecutive sorted energies differ by more than tol
    breaks = np.flatnonzero(np.diff(sorted_e) > cluster_tol) + 1
    groups = np.split(np.arange(len(sorted_e)), breaks)
    if len(groups) < 2:
        raise DegenerateSpectrumError(
            f"instance {instance.instance_id} has a single energy level; gap undefined"
        )
    levels = tuple((float(sorted_e[g[0]]), len(g)) for g in groups)
    level_states = tuple(tuple(sorted(order[g].tolist())) for g in groups)
    return Spectrum(
        levels=levels,
        e_min=float(sorted_e[0]),
        e_max=float(sorted_e[-1]),
        gap=levels[1][0] - levels[0][0],
        ground_states=level_states[0],
        level_states=level_states,
    )
