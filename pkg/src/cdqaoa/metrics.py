"""Residual energy, ground-manifold fidelity and level-resolved overlaps."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateSpectrumError
from .spin_model import Spectrum

ROUNDOFF = 1e-12

RECORD_FIELDS = (
    "instance_id", "variant", "p", "gap", "residual_energy", "fidelity",
    "excited_probability", "best_cost",
)


@dataclass
class MetricRecord:
    instance_id: str
    variant: str
    p: int
    gap: float
    residual_energy: float
    fidelity: float
    excited_probability: float
    best_cost: float
    seed: int = 0
    zone: int | None = None
    status: str = "ok"
    message: str = ""

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.instance_id, self.variant, self.p)

    @property
    def failed(self) -> bool:
        return self.status != "ok"

    def to_row(self) -> dict:
        row = asdict(self)
        row["zone"] = "" if self.zone is None else self.zone
        return row


def residual_energy(energy: float, spectrum: Spectrum) -> float:
    """(E - E_min) / (E_max - E_min); tiny negative roundoff is clipped to 0."""
    width = spectrum.e_max - spectrum.e_min
    if not width > 0:
        raise DegenerateSpectrumError("residual energy undefined when E_max == E_min")
    eps = (energy - spectrum.e_min) / width
    if -ROUNDOFF <= eps < 0:
        eps = 0.0
    return float(eps)


def level_probability(state: np.ndarray, spectrum: Spectrum, level_index: int) -> float:
    if not 0 <= level_index < spectrum.n_levels:
        raise IndexError(f"level {level_index} out of range (spectrum has {spectrum.n_levels})")
    idx = np.fromiter(spectrum.level_states[level_index], dtype=int)
    return float(np.sum(np.abs(state[idx]) ** 2))


def fidelity_ground_manifold(state: np.ndarray, spectrum: Spectrum) -> float:
    """Probability of ``state`` on the (degenerate) ground manifold of H_T.

    H_T is diagonal, so its ground eigenstates are basis states and the
    projection is a sum of basis probabilities.
    """
    return level_probability(state, spectrum, 0)


def excited_overlap(state: np.ndarray, spectrum: Spectrum, level_index: int = 1) -> float:
    return level_probability(state, spectrum, level_index)


def evaluate(state: np.ndarray, energy: float, spectrum: Spectrum, *, instance_id: str,
             variant: str, p: int, seed: int = 0) -> MetricRecord:
    """Bundle the metrics of one optimized state into a record."""
    return MetricRecord(
        instance_id=instance_id,
        variant=str(variant),
        p=int(p),
        gap=spectrum.gap,
        residual_energy=residual_energy(energy, spectrum),
        fidelity=fidelity_ground_manifold(state, spectrum),
        excited_probability=excited_overlap(state, spectrum, 1),
        best_cost=float(energy),
        seed=seed,
    )
