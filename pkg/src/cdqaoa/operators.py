"""Dense operators: the Ising target, the transverse mixer, their nested
commutators, and unitaries obtained from Hermitian eigendecompositions."""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericalError, OperatorError
from .spin_model import SpinInstance, diagonal_energies

HERMITIAN = "hermitian"
ANTI_HERMITIAN = "anti_hermitian"
DIAGONAL_REAL = "diagonal_real"
UNITARY = "unitary"
_TAGS = (HERMITIAN, ANTI_HERMITIAN, DIAGONAL_REAL, UNITARY)

SYMMETRY_RTOL = 1e-12
UNITARITY_TOL = 1e-10


def _check_tag(matrix: np.ndarray, tag: str) -> None:
    if tag not in _TAGS:
        raise OperatorError(f"unknown symmetry tag {tag!r}")
    scale = max(np.abs(matrix).max(initial=0.0), 1.0)
    if tag == DIAGONAL_REAL:
        off = matrix - np.diag(np.diag(matrix))
        if np.any(off != 0) or np.any(np.diag(matrix).imag != 0):
            raise OperatorError("matrix is not real diagonal")
    elif tag == UNITARY:
        err = np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0])).max(initial=0.0)
        if err > UNITARITY_TOL:
            raise OperatorError(f"matrix is not unitary (max deviation {err:.3e})")
    elif tag == HERMITIAN:
        if np.abs(matrix - matrix.conj().T).max(initial=0.0) > SYMMETRY_RTOL * scale:
            raise OperatorError("matrix is not hermitian")
    elif tag == ANTI_HERMITIAN:
        if np.abs(matrix + matrix.conj().T).max(initial=0.0) > SYMMETRY_RTOL * scale:
            raise OperatorError("matrix is not anti-hermitian")


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """A 2^N x 2^N complex matrix with a verified symmetry tag."""

    matrix: np.ndarray
    tag: str

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise OperatorError(f"operator must be square, got shape {m.shape}")
        _check_tag(m, self.tag)
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_hermitian(self) -> bool:
        # real diagonal matrices are hermitian too
        return self.tag in (HERMITIAN, DIAGONAL_REAL)

    @property
    def is_anti_hermitian(self) -> bool:
        return self.tag == ANTI_HERMITIAN

    def __matmul__(self, other):
        if isinstance(other, DenseOperator):
            return self.matrix @ other.matrix
        return self.matrix @ other

    def to_json(self) -> str:
        """Debug dump as real/imag nested lists."""
        return json.dumps(
            {
                "tag": self.tag,
                "real": self.matrix.real.tolist(),
                "imag": self.matrix.imag.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DenseOperator":
        d = json.loads(text)
        return cls(np.array(d["real"]) + 1j * np.array(d["imag"]), d["tag"])


def build_mixer(n_spins: int) -> DenseOperator:
    """H_X = sum_i X_i, a real symmetric 0/1 matrix."""
    if n_spins < 1:
        raise OperatorError("n_spins must be >= 1")
    dim = 1 << n_spins
    idx = np.arange(dim)
    m = np.zeros((dim, dim))
    for k in range(n_spins):
        m[idx, idx ^ (1 << k)] = 1.0
    return DenseOperator(m, HERMITIAN)


def build_target(instance: SpinInstance) -> DenseOperator:
    return DenseOperator(np.diag(diagonal_energies(instance)).astype(complex), DIAGONAL_REAL)


def commutator(a: DenseOperator, b: DenseOperator) -> DenseOperator:
    """[a, b] = ab - ba, tagged from the operands' symmetries."""
    if a.dim != b.dim:
        raise OperatorError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if not all(op.is_hermitian or op.is_anti_hermitian for op in (a, b)):
        raise OperatorError("commutator operands must be hermitian or anti-hermitian")
    m = a.matrix @ b.matrix - b.matrix @ a.matrix
    # [H, H'] and [A, A'] are anti-hermitian; [H, A] is hermitian
    tag = ANTI_HERMITIAN if a.is_hermitian == b.is_hermitian else HERMITIAN
    # clean roundoff so the stored operator satisfies its tag exactly
    if tag == HERMITIAN:
        m = 0.5 * (m + m.conj().T)
    else:
        m = 0.5 * (m - m.conj().T)
    return DenseOperator(m, tag)


def cd_generator(instance: SpinInstance) -> tuple[DenseOperator, DenseOperator]:
    """Return A = [H_X, H_T] (anti-hermitian) and its hermitian form M with A = iM."""
    a = commutator(build_mixer(instance.n_spins), build_target(instance))
    return a, DenseOperator(-1j * a.matrix, HERMITIAN)


def second_order_generators(instance: SpinInstance) -> tuple[DenseOperator, DenseOperator]:
    """K1 = [H_X, [H_X, H_T]] and K2 = [H_T, [H_X, H_T]]."""
    hx = build_mixer(instance.n_spins)
    ht = build_target(instance)
    a = commutator(hx, ht)
    return commutator(hx, a), commutator(ht, a)


def eigh_checked(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        finite = bool(np.all(np.isfinite(m)))
        raise NumericalError(
            f"eigendecomposition failed (dim={m.shape[0]}, finite={finite}, "
            f"max|m|={np.abs(m).max() if finite else float('nan')}): {exc}"
        ) from exc
    return w, v


def unitary_from_hermitian(m: DenseOperator, angle: float) -> DenseOperator:
    """exp(-i * angle * m) as V exp(-i angle w) V^dagger."""
    if not m.is_hermitian:
        raise OperatorError(f"expected a hermitian operator, got tag {m.tag!r}")
    w, v = eigh_checked(m.matrix)
    u = (v * np.exp(-1j * angle * w)) @ v.conj().T
    return DenseOperator(u, UNITARY)


def restrict_to_sector(matrix: np.ndarray, sign: int) -> np.ndarray:
    """Restrict an operator commuting with the global spin flip to one parity sector.

    The sector basis is (|b> + sign |~b>) / sqrt(2) for b < 2^(N-1), where ~b
    is the bitwise complement of b.
    """
    half = matrix.shape[0] // 2
    return matrix[:half, :half] + sign * matrix[:half, half:][:, ::-1]


class InstanceOperators:
    """Per-instance operator cache shared read-only across evaluations.

    Each generator (and its eigendecomposition) is built on first use under
    a lock and never mutated afterwards.
    """

    def __init__(self, instance: SpinInstance):
        self.instance = instance
        self.n_spins = instance.n_spins
        self.dim = instance.dim
        self.energies = diagonal_energies(instance)
        self._lock = threading.RLock()
        self._cache = {}

    def _get(self, key, build):
        try:
            return self._cache[key]
        except KeyError:
            pass
        with self._lock:
            if key not in self._cache:
                value = build()
                for arr in value if isinstance(value, tuple) else (value,):
                    if isinstance(arr, np.ndarray):
                        arr.setflags(write=False)
                self._cache[key] = value
            return self._cache[key]

    @property
    def cd_matrix(self) -> np.ndarray:
        """Hermitian M with [H_X, H_T] = iM."""
        return self._get("cd", lambda: cd_generator(self.instance)[1].matrix)

    @property
    def cd_eigvals(self) -> np.ndarray:
        return self._cd_eigh[0]

    @property
    def cd_eigvecs(self) -> np.ndarray:
        return self._cd_eigh[1]

    @property
    def _cd_eigh(self):
        return self._get("cd_eigh", lambda: eigh_checked(self.cd_matrix))

    @property
    def k1(self) -> np.ndarray:
        return self._second_order[0]

    @property
    def k2(self) -> np.ndarray:
        return self._second_order[1]

    @property
    def _second_order(self):
        return self._get(
            "k12", lambda: tuple(op.matrix for op in second_order_generators(self.instance))
        )

    def sector(self, name: str) -> np.ndarray:
        """Generator ``name`` in {"mixer", "cd", "k1", "k2"} restricted to the
        parity sector that contains the initial state."""
        sign = -1 if self.n_spins % 2 else 1

        def build():
            if name == "mixer":
                return restrict_to_sector(build_mixer(self.n_spins).matrix.real, sign)
            if name == "cd":
                return restrict_to_sector(self.cd_matrix, sign)
            if name in ("k1", "k2"):
                # both are real symmetric: [H_X, .] and [H_T, .] of a real antisymmetric matrix
                return np.ascontiguousarray(restrict_to_sector(getattr(self, name).real, sign))
            raise KeyError(name)

        return self._get(("sector", name), build)

    def sector_eigh(self, name: str):
        return self._get(("sector_eigh", name), lambda: eigh_checked(self.sector(name)))


@lru_cache(maxsize=64)
def operators_for(instance: SpinInstance) -> InstanceOperators:
    return InstanceOperators(instance)
