"""Variational states of QAOA, QAOA-CD and QAOA-2CD, their energy, and its
exact gradient.

States are plain complex numpy vectors of length 2^N in the computational
basis (see :mod:`cdqaoa.spin_model` for the bit convention).

Within each step k the layers act in the order 2CD, CD, phase, mixer:

    |psi> <- U(beta_k, H_X) U(gamma_k, H_T) U_CD(alpha_k) U_2CD(delta_k, zeta_k) |psi>
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ParameterError
from .operators import eigh_checked, operators_for
from .spin_model import SpinInstance

NORM_TOL = 1e-10


class Variant(str, Enum):
    QAOA = "QAOA"
    QAOA_CD = "QAOA_CD"
    QAOA_2CD = "QAOA_2CD"

    @property
    def families(self) -> tuple[str, ...]:
        return _FAMILIES[self]

    @property
    def parent(self) -> "Variant | None":
        """The variant this one reduces to when its extra angles vanish."""
        return {Variant.QAOA: None, Variant.QAOA_CD: Variant.QAOA, Variant.QAOA_2CD: Variant.QAOA_CD}[self]

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("-", "_")
        aliases = {"CD": "QAOA_CD", "2CD": "QAOA_2CD"}
        return cls(aliases.get(key, key))

    def __str__(self) -> str:
        return self.value


_FAMILIES = {
    Variant.QAOA: ("beta", "gamma"),
    Variant.QAOA_CD: ("beta", "gamma", "alpha"),
    Variant.QAOA_2CD: ("beta", "gamma", "alpha", "delta", "zeta"),
}
ALL_FAMILIES = _FAMILIES[Variant.QAOA_2CD]


@dataclass(frozen=True, eq=False)
class VariationalParams:
    """Angle vectors for one variant at depth p.

    The flat vector layout used by the optimizer is family-major:
    ``[beta_1..beta_p, gamma_1..gamma_p, alpha_1..., delta_1..., zeta_1...]``.
    """

    variant: Variant
    beta: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray | None = None
    delta: np.ndarray | None = None
    zeta: np.ndarray | None = None

    def __post_init__(self):
        variant = Variant.parse(self.variant)
        object.__setattr__(self, "variant", variant)
        depth = len(np.atleast_1d(self.beta))
        if depth < 1:
            raise ParameterError("depth must be at least 1")
        for fam in ALL_FAMILIES:
            value = getattr(self, fam)
            if fam in variant.families:
                if value is None:
                    raise ParameterError(f"{variant} requires angles {fam!r}")
                arr = np.array(value, dtype=float).reshape(-1)
                if arr.size != depth:
                    raise ParameterError(
                        f"{fam} has length {arr.size}, expected depth {depth}"
                    )
                arr.setflags(write=False)
                object.__setattr__(self, fam, arr)
            elif value is not None:
                raise ParameterError(f"{variant} does not take angles {fam!r}")

    @property
    def depth(self) -> int:
        return len(self.beta)

    @property
    def n_params(self) -> int:
        return len(self.variant.families) * self.depth

    def to_vector(self) -> np.ndarray:
        return np.concatenate([getattr(self, fam) for fam in self.variant.families])

    @classmethod
    def from_vector(cls, variant, x) -> "VariationalParams":
        variant = Variant.parse(variant)
        x = np.asarray(x, dtype=float).reshape(-1)
        n_fam = len(variant.families)
        if x.size == 0 or x.size % n_fam:
            raise ParameterError(f"vector of length {x.size} does not fit {variant}")
        parts = np.split(x, n_fam)
        return cls(variant, **dict(zip(variant.families, parts)))

    @classmethod
    def zeros(cls, variant, depth: int) -> "VariationalParams":
        variant = Variant.parse(variant)
        return cls.from_vector(variant, np.zeros(len(variant.families) * depth))

    def embed(self, variant) -> "VariationalParams":
        """Same angles in a richer variant, with every new family set to zero."""
        variant = Variant.parse(variant)
        if not set(self.variant.families) <= set(variant.families):
            raise ParameterError(f"cannot embed {self.variant} into {variant}")
        kwargs = {
            fam: getattr(self, fam) if fam in self.variant.families else np.zeros(self.depth)
            for fam in variant.families
        }
        return VariationalParams(variant, **kwargs)

    def to_dict(self) -> dict:
        d = {"variant": self.variant.value}
        d.update({fam: getattr(self, fam).tolist() for fam in self.variant.families})
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VariationalParams":
        variant = Variant.parse(d["variant"])
        return cls(variant, **{fam: d[fam] for fam in variant.families})

    def __repr__(self) -> str:
        inner = ", ".join(f"{f}={np.round(getattr(self, f), 4).tolist()}" for f in self.variant.families)
        return f"VariationalParams({self.variant.value}, {inner})"


# ---------------------------------------------------------------- kernels


def _n_spins(state: np.ndarray) -> int:
    n = state.size.bit_length() - 1
    if state.ndim != 1 or 1 << n != state.size:
        raise ParameterError(f"state length {state.size} is not a power of two")
    return n


def initial_state(n_spins: int) -> np.ndarray:
    """Ground state of H_X: amplitude (-1)^popcount(b) / sqrt(2^N)."""
    if n_spins < 1:
        raise ParameterError("n_spins must be >= 1")
    idx = np.arange(1 << n_spins)
    parity = np.zeros(idx.size, dtype=int)
    for k in range(n_spins):
        parity ^= (idx >> k) & 1
    return (1 - 2 * parity) / np.sqrt(idx.size) + 0j


def apply_phase_layer(state: np.ndarray, gamma: float, instance: SpinInstance) -> np.ndarray:
    return np.exp(-1j * gamma * operators_for(instance).energies) * state


def apply_mixer_layer(state: np.ndarray, beta: float) -> np.ndarray:
    """exp(-i beta X) on every qubit, one paired-amplitude sweep per qubit."""
    n = _n_spins(state)
    c, s = np.cos(beta), -1j * np.sin(beta)
    psi = np.asarray(state, dtype=complex)
    for k in range(n):
        v = psi.reshape(-1, 2, 1 << k)
        psi = (c * v + s * v[:, ::-1, :]).reshape(-1)
    return psi


def mixer_action(state: np.ndarray) -> np.ndarray:
    """H_X |state> = sum_k X_k |state>."""
    n = _n_spins(state)
    out = np.zeros_like(state)
    for k in range(n):
        out += state.reshape(-1, 2, 1 << k)[:, ::-1, :].reshape(-1)
    return out


def apply_cd_layer(state: np.ndarray, alpha: float, instance: SpinInstance) -> np.ndarray:
    """exp(-alpha [H_X, H_T]) = exp(-i alpha M) via the cached eigenbasis of M."""
    if alpha == 0:
        return np.array(state, dtype=complex)
    ops = operators_for(instance)
    v = ops.cd_eigvecs
    return v @ (np.exp(-1j * alpha * ops.cd_eigvals) * (v.conj().T @ state))


def second_order_exponent(delta: float, zeta: float, instance: SpinInstance) -> np.ndarray:
    """Hermitian G with U_2CD(delta, zeta) = exp(-i G), i.e. G = zeta K2 - delta K1."""
    ops = operators_for(instance)
    return zeta * ops.k2 - delta * ops.k1


def apply_2cd_layer(state: np.ndarray, delta: float, zeta: float, instance: SpinInstance) -> np.ndarray:
    """exp(i delta K1 - i zeta K2) |state> as a single joint exponential."""
    if delta == 0 and zeta == 0:
        return np.array(state, dtype=complex)
    w, v = eigh_checked(second_order_exponent(delta, zeta, instance))
    return v @ (np.exp(-1j * w) * (v.conj().T @ state))


# ---------------------------------------------------------------- circuits


# up to this size the mixer is applied through a cached dense eigenbasis,
# which beats per-qubit sweeps once interpreter overhead is counted
DENSE_MIXER_MAX_SPINS = 7


class Circuit:
    """A (instance, variant, depth) ansatz compiled for repeated evaluation.

    Every layer commutes with the global spin flip and the initial state is
    flip-symmetric up to the sign (-1)^N, so evaluation runs in that parity
    sector of dimension 2^(N-1); :meth:`state` expands back to the full
    basis. ``value_and_grad`` makes one forward sweep storing every
    intermediate state and one backward sweep carrying H_T|psi> through the
    adjoint layers.
    """

    def __init__(self, instance: SpinInstance, variant, depth: int):
        if depth < 1:
            raise ParameterError("depth must be >= 1")
        self.instance = instance
        self.variant = Variant.parse(variant)
        self.depth = depth
        self.n_params = len(self.variant.families) * depth
        ops = operators_for(instance)
        n = instance.n_spins
        half = instance.dim // 2
        self._sign = -1 if n % 2 else 1
        self.energies = np.ascontiguousarray(ops.energies[:half])
        self._phi0 = np.sqrt(2.0) * initial_state(n)[:half]
        self._dense_mixer = n <= DENSE_MIXER_MAX_SPINS
        if self._dense_mixer:
            self._hx = ops.sector("mixer")
            self._hx_w, self._hx_v = ops.sector_eigh("mixer")
        if self.variant is not Variant.QAOA:
            self._m = ops.sector("cd")
            self._m_w, self._m_v = ops.sector_eigh("cd")
            self._m_vh = self._m_v.conj().T
        if self.variant is Variant.QAOA_2CD:
            self._k1 = ops.sector("k1")
            self._k2 = ops.sector("k2")

        offset = {fam: i * depth for i, fam in enumerate(self.variant.families)}
        layers = []
        for k in range(depth):
            if self.variant is Variant.QAOA_2CD:
                layers.append(("2cd", offset["delta"] + k, offset["zeta"] + k))
            if self.variant is not Variant.QAOA:
                layers.append(("cd", offset["alpha"] + k))
            layers.append(("phase", offset["gamma"] + k))
            layers.append(("mixer", offset["beta"] + k))
        self.layers = layers

    def _vector(self, x) -> np.ndarray:
        if isinstance(x, VariationalParams):
            if x.variant is not self.variant or x.depth != self.depth:
                raise ParameterError(
                    f"params for {x.variant} p={x.depth} do not match circuit "
                    f"{self.variant} p={self.depth}"
                )
            return x.to_vector()
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.n_params:
            raise ParameterError(f"expected {self.n_params} parameters, got {x.size}")
        return x

    # sector kernels

    def _mix(self, phi, beta):
        if self._dense_mixer:
            v = self._hx_v
            return v @ (np.exp(-1j * beta * self._hx_w) * (v.T @ phi))
        c, s = np.cos(beta), -1j * np.sin(beta)
        for k in range(self.instance.n_spins - 1):
            u = phi.reshape(-1, 2, 1 << k)
            phi = (c * u + s * u[:, ::-1, :]).reshape(-1)
        # the top spin's flip maps the sector onto itself reversed, times the sign
        return c * phi + (s * self._sign) * phi[::-1]

    def _mix_action(self, phi):
        if self._dense_mixer:
            return self._hx @ phi
        out = self._sign * phi[::-1]
        for k in range(self.instance.n_spins - 1):
            out = out + phi.reshape(-1, 2, 1 << k)[:, ::-1, :].reshape(-1)
        return out

    def _forward(self, x, keep: bool):
        phi = self._phi0
        trace = []
        for layer in self.layers:
            kind = layer[0]
            before = phi
            extra = None
            if kind == "mixer":
                phi = self._mix(phi, x[layer[1]])
            elif kind == "phase":
                phi = np.exp(-1j * x[layer[1]] * self.energies) * phi
            elif kind == "cd":
                # a zero angle is the exact identity, which keeps variant nesting bitwise
                if x[layer[1]] != 0:
                    phi = self._m_v @ (np.exp(-1j * x[layer[1]] * self._m_w) * (self._m_vh @ phi))
            elif x[layer[1]] != 0 or x[layer[2]] != 0:
                g = x[layer[2]] * self._k2 - x[layer[1]] * self._k1
                w, v = eigh_checked(g)
                phi = v @ (np.exp(-1j * w) * (v.T @ phi))
                extra = (w, v)
            if keep:
                trace.append((before, phi, extra))
        return phi, trace

    def _expand(self, phi: np.ndarray) -> np.ndarray:
        return np.concatenate([phi, self._sign * phi[::-1]]) / np.sqrt(2.0)

    def state(self, x) -> np.ndarray:
        """Full 2^N amplitude vector."""
        return self._expand(self._forward(self._vector(x), keep=False)[0])

    def energy(self, x) -> float:
        phi = self._forward(self._vector(x), keep=False)[0]
        return float(np.dot(self.energies, (phi.conj() * phi).real))

    def value_and_grad(self, x) -> tuple[float, np.ndarray]:
        x = self._vector(x)
        phi, trace = self._forward(x, keep=True)
        h_phi = self.energies * phi
        value = float(np.vdot(phi, h_phi).real)
        grad = np.zeros(self.n_params)
        # lam = (U_L ... U_{k+1})^dagger H_T |psi_L> when layer k is visited;
        # each single-angle layer exp(-i theta G) contributes 2 Im <lam|G|psi_k>
        lam = h_phi
        for layer, (before, after, extra) in zip(reversed(self.layers), reversed(trace)):
            kind = layer[0]
            if kind == "mixer":
                grad[layer[1]] = 2.0 * np.vdot(lam, self._mix_action(after)).imag
                lam = self._mix(lam, -x[layer[1]])
            elif kind == "phase":
                grad[layer[1]] = 2.0 * np.vdot(lam, self.energies * after).imag
                lam = np.exp(1j * x[layer[1]] * self.energies) * lam
            elif kind == "cd":
                grad[layer[1]] = 2.0 * np.vdot(lam, self._m @ after).imag
                if x[layer[1]] != 0:
                    lam = self._m_v @ (np.exp(1j * x[layer[1]] * self._m_w) * (self._m_vh @ lam))
            elif extra is None:
                # identity layer: dU = -i dG, so the weights reduce to -i lam^* before^T
                weights = -1j * np.outer(np.conj(lam), before)
                grad[layer[1]] = -2.0 * np.sum(weights.real * self._k1)
                grad[layer[2]] = 2.0 * np.sum(weights.real * self._k2)
            else:
                # K1 and K2 do not commute with G, so differentiate the exponential
                # through its eigenbasis: dU = V (Phi o V^T dG V) V^T
                w, v = extra
                a = v.T @ lam
                b = v.T @ before
                weights = v @ ((np.conj(a)[:, None] * _expm_divided_differences(w) * b[None, :]) @ v.T)
                # dG/d(delta) = -K1, dG/d(zeta) = K2
                grad[layer[1]] = -2.0 * np.sum(weights.real * self._k1)
                grad[layer[2]] = 2.0 * np.sum(weights.real * self._k2)
                lam = v @ (np.exp(1j * w) * (v.T @ lam))
        return value, grad


def _expm_divided_differences(w: np.ndarray) -> np.ndarray:
    """First divided differences of f(x) = exp(-i x) on the eigenvalues ``w``.

    Written as -i exp(-i m) sinc(d / 2) with m the midpoint and d the
    difference, which stays accurate for (near-)degenerate eigenvalues.
    """
    mid = 0.5 * (w[:, None] + w[None, :])
    diff = w[:, None] - w[None, :]
    return -1j * np.exp(-1j * mid) * np.sinc(diff / (2.0 * np.pi))


# ------------------------------------------------------------ public helpers


def _circuit_for(instance: SpinInstance, params: VariationalParams) -> Circuit:
    if not isinstance(params, VariationalParams):
        raise ParameterError("params must be a VariationalParams instance")
    return Circuit(instance, params.variant, params.depth)


def prepare_state(instance: SpinInstance, params: VariationalParams) -> np.ndarray:
    return _circuit_for(instance, params).state(params)


def expectation(instance: SpinInstance, state: np.ndarray) -> float:
    """<state| H_T |state>."""
    return float(np.dot(operators_for(instance).energies, np.abs(state) ** 2))


def cost(instance: SpinInstance, params: VariationalParams) -> float:
    return _circuit_for(instance, params).energy(params)


def cost_gradient(instance: SpinInstance, params: VariationalParams) -> np.ndarray:
    """Gradient of :func:`cost` in the flat parameter layout of ``params``."""
    return _circuit_for(instance, params).value_and_grad(params)[1]
