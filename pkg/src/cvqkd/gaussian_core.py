"""Gaussian-state linear algebra in shot-noise units.

Quadratures are ordered (q1, p1, ..., qN, pN) and the vacuum has covariance
matrix I.  Every function here is pure and returns fresh arrays.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

VALIDITY_TOL = 1e-9
SPECTRUM_TOL = 1e-6
SYMMETRY_TOL = 1e-12

Z2 = np.diag([1.0, -1.0])
I2 = np.eye(2)


class GaussianError(ValueError):
    """Base class for invalid Gaussian inputs."""


class InvalidStateError(GaussianError):
    """Covariance matrix violates the uncertainty relation."""


class DegenerateInputError(GaussianError):
    """Measured quadrature has non-positive variance."""


def omega(n: int) -> np.ndarray:
    """Symplectic form for ``n`` modes."""
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def num_modes(V: np.ndarray) -> int:
    V = np.asarray(V)
    if V.ndim != 2 or V.shape[0] != V.shape[1] or V.shape[0] % 2:
        raise GaussianError(f"expected a 2N x 2N matrix, got shape {V.shape}")
    return V.shape[0] // 2


# ---------------------------------------------------------------- entropy

def entropy_h(x: float) -> float:
    """Entropy in bits of a thermal mode with symplectic eigenvalue ``x``."""
    x = float(x)
    if x < 1.0 - VALIDITY_TOL:
        raise InvalidStateError(f"symplectic eigenvalue {x!r} below 1")
    if x <= 1.0:
        return 0.0
    a = 0.5 * (x + 1.0)
    b = 0.5 * (x - 1.0)
    return a * np.log2(a) - b * np.log2(b)


def symplectic_eigenvalues(V: np.ndarray, check: bool = True) -> np.ndarray:
    """Symplectic spectrum of ``V``, sorted descending.

    Computed as the moduli of the eigenvalues of iΩV; these come in ± pairs
    so every second sorted modulus is kept.
    """
    V = np.asarray(V, dtype=float)
    n = num_modes(V)
    try:
        ev = np.linalg.eigvals(1j * omega(n) @ V)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise GaussianError("eigen-solver did not converge") from exc
    mod = np.sort(np.abs(ev))[::-1]
    nu = 0.5 * (mod[0::2] + mod[1::2])
    if check and nu[-1] < 1.0 - SPECTRUM_TOL:
        raise InvalidStateError(f"symplectic eigenvalue {nu[-1]:.12g} < 1")
    return nu


def two_mode_spectrum(V: np.ndarray) -> np.ndarray:
    """Closed-form symplectic spectrum of a two-mode CM, descending."""
    V = np.asarray(V, dtype=float)
    if V.shape != (4, 4):
        raise GaussianError("two_mode_spectrum needs a 4x4 matrix")
    A, B, C = V[:2, :2], V[2:, 2:], V[:2, 2:]
    delta = np.linalg.det(A) + np.linalg.det(B) + 2.0 * np.linalg.det(C)
    det = np.linalg.det(V)
    disc = np.sqrt(max(delta * delta - 4.0 * det, 0.0))
    nu_p = np.sqrt(0.5 * (delta + disc))
    # nu_+ nu_- = sqrt(det V); avoids cancellation when nu_+ >> nu_-
    nu_m = np.sqrt(max(det, 0.0)) / nu_p if nu_p > 0 else 0.0
    return np.array([nu_p, nu_m])


def von_neumann_entropy(V: np.ndarray) -> float:
    """Entropy in bits: sum of h over the symplectic spectrum."""
    # values in [1 - SPECTRUM_TOL, 1) are round-off around a pure mode
    nu = np.maximum(symplectic_eigenvalues(V), 1.0)
    return float(sum(entropy_h(v) for v in nu))


def is_valid_cm(V: np.ndarray, tol: float = VALIDITY_TOL) -> bool:
    """Symmetry plus the uncertainty relation V + iΩ >= 0."""
    V = np.asarray(V, dtype=float)
    try:
        n = num_modes(V)
    except GaussianError:
        return False
    scale = max(1.0, float(np.max(np.abs(V))))
    if np.max(np.abs(V - V.T)) > SYMMETRY_TOL * scale:
        return False
    if not np.all(np.isfinite(V)):
        return False
    # Positive definiteness is implied by the spectrum test but is cheap to add.
    if np.min(np.linalg.eigvalsh(V)) <= 0:
        return False
    nu = symplectic_eigenvalues(V, check=False)
    return bool(nu[-1] >= 1.0 - tol * max(1.0, n))


def is_symplectic(S: np.ndarray, tol: float = 1e-10) -> bool:
    S = np.asarray(S, dtype=float)
    n = num_modes(S)
    Om = omega(n)
    return bool(np.max(np.abs(S @ Om @ S.T - Om)) <= tol)


# ---------------------------------------------------------------- builders

def tmsv_cm(nu: float) -> np.ndarray:
    """Two-mode squeezed vacuum with local variance ``nu``."""
    if nu < 1.0:
        raise GaussianError(f"TMSV needs nu >= 1, got {nu}")
    c = np.sqrt(nu * nu - 1.0)
    return np.block([[nu * I2, c * Z2], [c * Z2, nu * I2]])


def thermal_cm(nu: float) -> np.ndarray:
    if nu < 1.0:
        raise GaussianError(f"thermal state needs nu >= 1, got {nu}")
    return nu * np.eye(2)


def beamsplitter(tau: float) -> np.ndarray:
    """Two-mode beamsplitter of transmissivity ``tau``."""
    if not 0.0 <= tau <= 1.0:
        raise GaussianError(f"transmissivity {tau} outside [0, 1]")
    t, r = np.sqrt(tau), np.sqrt(1.0 - tau)
    return np.block([[t * I2, r * I2], [-r * I2, t * I2]])


def squeezer(r: float) -> np.ndarray:
    return np.diag([np.exp(-r), np.exp(r)])


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def direct_sum(*blocks: np.ndarray) -> np.ndarray:
    """Block-diagonal concatenation preserving mode order."""
    size = sum(np.asarray(b).shape[0] for b in blocks)
    out = np.zeros((size, size))
    i = 0
    for b in blocks:
        b = np.asarray(b, dtype=float)
        k = b.shape[0]
        out[i:i + k, i:i + k] = b
        i += k
    return out


def apply_symplectic(V: np.ndarray, S: np.ndarray) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    S = np.asarray(S, dtype=float)
    if S.shape != V.shape:
        raise GaussianError(f"dimension mismatch: S {S.shape} vs V {V.shape}")
    out = S @ V @ S.T
    return 0.5 * (out + out.T)


def embed(S_local: np.ndarray, modes: Sequence[int], n: int) -> np.ndarray:
    """Lift a symplectic acting on ``modes`` to the full ``n``-mode space."""
    idx = quad_indices(modes)
    S = np.eye(2 * n)
    S[np.ix_(idx, idx)] = S_local
    return S


def quad_indices(modes: Sequence[int]) -> list[int]:
    return [2 * m + k for m in modes for k in (0, 1)]


def select_modes(V: np.ndarray, modes: Sequence[int]) -> np.ndarray:
    """Reduced CM on ``modes`` (partial trace), in the given order."""
    idx = quad_indices(modes)
    return np.asarray(V, dtype=float)[np.ix_(idx, idx)]


def random_symplectic(n: int, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    """Random symplectic matrix: passive orthogonal x squeezers x orthogonal."""
    def passive():
        X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        U, _ = np.linalg.qr(X)
        # complex unitary -> real orthosymplectic in (q1,p1,...) ordering
        R = np.zeros((2 * n, 2 * n))
        R[0::2, 0::2] = U.real
        R[0::2, 1::2] = -U.imag
        R[1::2, 0::2] = U.imag
        R[1::2, 1::2] = U.real
        return R
    sq = direct_sum(*[squeezer(r) for r in rng.uniform(-scale, scale, size=n)])
    return passive() @ sq @ passive()


def random_cm(n: int, rng: np.random.Generator, max_nu: float = 5.0,
              scale: float = 0.5) -> np.ndarray:
    """Random valid CM via Williamson: S diag(nu) S^T."""
    nus = rng.uniform(1.0, max_nu, size=n)
    D = np.diag(np.repeat(nus, 2))
    return apply_symplectic(D, random_symplectic(n, rng, scale))


# ---------------------------------------------------------------- conditioning

def _split(V: np.ndarray, mode: int):
    V = np.asarray(V, dtype=float)
    n = num_modes(V)
    if not 0 <= mode < n:
        raise GaussianError(f"mode {mode} out of range for {n} modes")
    keep = quad_indices([m for m in range(n) if m != mode])
    meas = quad_indices([mode])
    return V[np.ix_(keep, keep)], V[np.ix_(meas, meas)], V[np.ix_(keep, meas)]


def condition_homodyne(V: np.ndarray, mode: int, quadrature: str = "q") -> np.ndarray:
    """Conditional CM after homodyning ``quadrature`` of ``mode``."""
    A, B, C = _split(V, mode)
    k = {"q": 0, "p": 1}.get(quadrature)
    if k is None:
        raise GaussianError(f"quadrature must be 'q' or 'p', got {quadrature!r}")
    var = B[k, k]
    if var <= 0:
        raise DegenerateInputError(f"measured variance {var} <= 0")
    c = C[:, k]
    out = A - np.outer(c, c) / var
    return 0.5 * (out + out.T)


def condition_heterodyne(V: np.ndarray, mode: int) -> np.ndarray:
    """Conditional CM after heterodyning ``mode``."""
    A, B, C = _split(V, mode)
    M = B + I2
    if abs(np.linalg.det(M)) < 1e-300:
        raise GaussianError("B + I is singular")
    out = A - C @ np.linalg.solve(M, C.T)
    return 0.5 * (out + out.T)


def condition_gaussian(cov: np.ndarray, keep: Sequence[int], given: Sequence[int]) -> np.ndarray:
    """Schur complement of a classical or mixed covariance on index sets."""
    cov = np.asarray(cov, dtype=float)
    A = cov[np.ix_(keep, keep)]
    B = cov[np.ix_(given, given)]
    C = cov[np.ix_(keep, given)]
    out = A - C @ np.linalg.solve(B, C.T)
    return 0.5 * (out + out.T)


# ---------------------------------------------------------------- Williamson form

def williamson(V: np.ndarray):
    """Return (nu, S) with V = S diag(nu_1, nu_1, ...) S^T and S symplectic."""
    from scipy.linalg import schur

    V = np.asarray(V, dtype=float)
    n = num_modes(V)
    w, U = np.linalg.eigh(V)
    if np.min(w) <= 0:
        raise InvalidStateError("CM is not positive definite")
    Vh = (U * np.sqrt(w)) @ U.T
    Vmh = (U / np.sqrt(w)) @ U.T
    M = Vmh @ omega(n) @ Vmh
    T, O = schur(M, output="real")
    nus = np.empty(n)
    for k in range(n):
        i = 2 * k
        t = T[i, i + 1]
        if t < 0:
            O[:, [i, i + 1]] = O[:, [i + 1, i]]
            t = -t
        nus[k] = 1.0 / t
    S = Vh @ O @ np.diag(np.repeat(1.0 / np.sqrt(nus), 2))
    return nus, S


def purify(V: np.ndarray) -> np.ndarray:
    """Pure 2N-mode CM whose first N modes reduce to ``V``.

    Ancilla k purifies the k-th Williamson mode.
    """
    nus, S = williamson(V)
    n = len(nus)
    P = np.zeros((4 * n, 4 * n))
    for k, nu in enumerate(nus):
        T = tmsv_cm(max(nu, 1.0))
        idx = quad_indices([k, n + k])
        P[np.ix_(idx, idx)] = T
    big = np.eye(4 * n)
    big[:2 * n, :2 * n] = S
    return apply_symplectic(P, big)


def place_block(V: np.ndarray, block: np.ndarray, modes: Sequence[int]) -> None:
    """Write ``block`` into ``V`` in place on the listed modes."""
    idx = quad_indices(modes)
    V[np.ix_(idx, idx)] = block
