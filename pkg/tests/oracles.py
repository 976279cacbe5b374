"""Reference implementations that share no code with the package.

Operators are built from explicit Pauli Kronecker products, commutators from
symbolic Pauli-string algebra, evolutions from scipy's dense expm, and
optima from exhaustive grids.
"""
from __future__ import annotations

from functools import reduce
from itertools import combinations, product

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def pauli_matrix(word: str) -> np.ndarray:
    """Matrix of a Pauli word; character k acts on spin k (bit k of the index).

    np.kron puts its first factor on the most significant bit, so the word is
    reversed before the product.
    """
    return reduce(np.kron, [PAULI[c] for c in reversed(word)])


def _single(n, k, op):
    return "".join(op if i == k else "I" for i in range(n))


def _pair(n, i, j, a, b):
    return "".join(a if k == i else b if k == j else "I" for k in range(n))


# ---- symbolic Pauli algebra


_MUL = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("Y", "I"): (1, "Y"), ("Z", "I"): (1, "Z"),
    ("X", "X"): (1, "I"), ("Y", "Y"): (1, "I"), ("Z", "Z"): (1, "I"),
    ("X", "Y"): (1j, "Z"), ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"), ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"), ("X", "Z"): (-1j, "Y"),
}


class PauliSum(dict):
    """Linear combination {pauli word: coefficient}."""

    def __matmul__(self, other: "PauliSum") -> "PauliSum":
        out = PauliSum()
        for (wa, ca), (wb, cb) in product(self.items(), other.items()):
            phase, word = 1, []
            for a, b in zip(wa, wb):
                f, c = _MUL[(a, b)]
                phase *= f
                word.append(c)
            key = "".join(word)
            out[key] = out.get(key, 0) + phase * ca * cb
        return out.pruned()

    def __sub__(self, other):
        out = PauliSum(self)
        for w, c in other.items():
            out[w] = out.get(w, 0) - c
        return out.pruned()

    def pruned(self, tol=1e-14):
        return PauliSum({w: c for w, c in self.items() if abs(c) > tol})

    def matrix(self, n) -> np.ndarray:
        m = np.zeros((1 << n, 1 << n), dtype=complex)
        for w, c in self.items():
            m += c * pauli_matrix(w)
        return m


def pauli_commutator(a: PauliSum, b: PauliSum) -> PauliSum:
    return (a @ b) - (b @ a)


def mixer_paulis(n) -> PauliSum:
    return PauliSum({_single(n, k, "X"): 1.0 for k in range(n)})


def target_paulis(n, couplings) -> PauliSum:
    return PauliSum({_pair(n, i, j, "Z", "Z"): c for (i, j), c in zip(combinations(range(n), 2), couplings)})


def cd_expansion(n, couplings) -> PauliSum:
    """[H_X, H_T] = -2i sum J_ij (Y_i Z_j + Z_i Y_j), written out term by term."""
    out = PauliSum()
    for (i, j), c in zip(combinations(range(n), 2), couplings):
        out[_pair(n, i, j, "Y", "Z")] = -2j * c
        out[_pair(n, i, j, "Z", "Y")] = -2j * c
    return out


# ---- dense operators and evolutions


def mixer_dense(n) -> np.ndarray:
    return sum(pauli_matrix(_single(n, k, "X")) for k in range(n))


def target_dense(n, couplings) -> np.ndarray:
    return sum(c * pauli_matrix(_pair(n, i, j, "Z", "Z"))
               for (i, j), c in zip(combinations(range(n), 2), couplings))


def brute_force_energies(n, couplings) -> np.ndarray:
    """Enumerate spin configurations: z_k = +1 when bit k is 0."""
    out = np.empty(1 << n)
    for b in range(1 << n):
        z = [1 - 2 * ((b >> k) & 1) for k in range(n)]
        out[b] = sum(c * z[i] * z[j] for (i, j), c in zip(combinations(range(n), 2), couplings))
    return out


def plus_minus_state(n) -> np.ndarray:
    """Ground state of H_X as a tensor product of single-spin (|0> - |1>)/sqrt2."""
    return reduce(np.kron, [np.array([1, -1], dtype=complex) / np.sqrt(2)] * n)


def dense_state(n, couplings, variant: str, params: dict) -> np.ndarray:
    """Circuit state from full scipy matrix exponentials, step by step."""
    hx, ht = mixer_dense(n), target_dense(n, couplings)
    a = hx @ ht - ht @ hx
    k1, k2 = hx @ a - a @ hx, ht @ a - a @ ht
    psi = plus_minus_state(n)
    for k in range(len(params["beta"])):
        if variant == "QAOA_2CD":
            psi = expm(1j * params["delta"][k] * k1 - 1j * params["zeta"][k] * k2) @ psi
        if variant in ("QAOA_CD", "QAOA_2CD"):
            psi = expm(-params["alpha"][k] * a) @ psi
        psi = expm(-1j * params["gamma"][k] * ht) @ psi
        psi = expm(-1j * params["beta"][k] * hx) @ psi
    return psi


def dense_energy(n, couplings, variant, params) -> float:
    psi = dense_state(n, couplings, variant, params)
    return float(np.real(np.vdot(psi, target_dense(n, couplings) @ psi)))


def central_differences(f, x, h=1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


# ---- the single-edge N=2 problem


def two_spin_p1_state(j, gamma, beta) -> np.ndarray:
    """Hand-rolled amplitudes of U(beta,H_X) U(gamma,H_T) |+->|+-> for H_T = J Z Z."""
    c, s = np.cos(beta), np.sin(beta)
    rot = np.array([[c, -1j * s], [-1j * s, c]])
    phased = 0.5 * np.array([
        np.exp(-1j * gamma * j),    # |00>, z = (+1, +1)
        -np.exp(1j * gamma * j),    # |01>
        -np.exp(1j * gamma * j),    # |10>
        np.exp(-1j * gamma * j),    # |11>
    ])
    return np.kron(rot, rot) @ phased


def two_spin_p1_cost(j, gamma, beta) -> float:
    psi = two_spin_p1_state(j, gamma, beta)
    return float(np.sum(np.abs(psi) ** 2 * j * np.array([1, -1, -1, 1])))


def grid_minimum(f, size=400, lo=-np.pi, hi=np.pi):
    """Exhaustive size x size grid followed by Nelder-Mead polishing of the best cell."""
    axis = np.linspace(lo, hi, size)
    best = min(((f(g, b), g, b) for g in axis for b in axis))
    res = minimize(lambda v: f(*v), [best[1], best[2]], method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 10_000})
    return float(res.fun), res.x
