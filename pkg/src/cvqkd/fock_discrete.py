"""Phase-encoded coherent-state constellations in a truncated Fock space.

Alice sends one of N coherent states ``a_k = z exp(2 pi i k / N)`` with equal
probability; Bob heterodynes.  Pure-loss rates only need the N x N overlap
(Gram) matrices of the attenuated constellations.  The thermal-loss channel is
an entangling cloner simulated on a pure three-mode state vector:

    B  = sqrt(tau) A + sqrt(1 - tau) E
    E' = sqrt(1 - tau) A - sqrt(tau) E

with (E, e) a two-mode squeezed vacuum of mean photon number ``nbar`` per
mode.  Eve keeps (E', e).  The mapping to input-referred excess noise is
``eps = (1 - tau)(omega - 1)/tau`` with ``omega = 2 nbar + 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln, xlogy

from ._optim import maximize_scalar

TRACE_TOL = 1e-6
N_MAX_DEFAULT = 15
N_MAX_CEILING = 40


class CutoffError(ArithmeticError):
    """Fock truncation loses more probability than allowed."""


class NumericalRankError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Constellation:
    N: int
    z: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError("need at least two states")
        if self.z < 0:
            raise ValueError("radius must be nonnegative")

    @property
    def amplitudes(self) -> np.ndarray:
        k = np.arange(self.N)
        return self.z * np.exp(2j * np.pi * k / self.N)

    @property
    def probs(self) -> np.ndarray:
        return np.full(self.N, 1.0 / self.N)


@dataclass
class FockDensity:
    matrix: np.ndarray
    dims: tuple[int, ...]
    trace_tol: float = 0.0

    def check(self, herm_tol: float = 1e-12, pos_tol: float = 1e-10) -> None:
        M = self.matrix
        if M.shape != (int(np.prod(self.dims)),) * 2:
            raise ValueError("matrix shape does not match dims")
        if np.max(np.abs(M - M.conj().T), initial=0.0) > herm_tol:
            raise ValueError("density matrix not Hermitian")
        ev = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
        if ev.min() < -pos_tol:
            raise ValueError(f"negative eigenvalue {ev.min():.3g}")
        tr = float(np.trace(M).real)
        if tr > 1.0 + 1e-10 or tr < 1.0 - self.trace_tol - 1e-10:
            raise ValueError(f"trace {tr} outside [1 - {self.trace_tol:.3g}, 1]")

    @property
    def modes(self) -> int:
        return len(self.dims)

    def entropy(self) -> float:
        return entropy_from_eigs(np.linalg.eigvalsh(self.matrix))


# ---------------------------------------------------------------- basics

def entropy_from_eigs(ev: np.ndarray) -> float:
    """Von Neumann entropy in bits; tiny negative round-off is dropped."""
    ev = np.clip(np.real(ev), 0.0, None)
    return float(-np.sum(xlogy(ev, ev)) / np.log(2.0))


def overlap_matrix(c: Constellation, scale: float = 1.0) -> np.ndarray:
    """V_ij = <s a_i | s a_j> for the constellation scaled by ``s``."""
    if not 0.0 <= scale <= 1.0:
        raise ValueError("scale must lie in [0, 1]")
    a = scale * c.amplitudes
    mod2 = np.abs(a) ** 2
    return np.exp(-0.5 * (mod2[:, None] + mod2[None, :]) + np.conj(a)[:, None] * a[None, :])


def gram_schmidt(V: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Lower-triangular M with |a_k> = sum_i M_ki |i>.

    Columns belonging to linearly dependent states are left at zero.
    """
    n = V.shape[0]
    M = np.zeros((n, n), dtype=complex)
    for k in range(n):
        for i in range(k):
            if M[i, i].real <= tol:
                continue
            M[k, i] = (V[i, k] - np.dot(np.conj(M[i, :i]), M[k, :i])) / M[i, i]
        rad = 1.0 - np.sum(np.abs(M[k, :k]) ** 2)
        if rad < -tol:
            raise NumericalRankError(f"negative radicand {rad:.3g} at row {k}")
        M[k, k] = np.sqrt(max(rad, 0.0))
    return M


def constellation_state(c: Constellation, scale: float = 1.0,
                        weights: np.ndarray | None = None) -> np.ndarray:
    """Mixture sum_k w_k |s a_k><s a_k| in the Gram-Schmidt basis."""
    M = gram_schmidt(overlap_matrix(c, scale))
    w = c.probs if weights is None else np.asarray(weights, dtype=float)
    # row k of M holds the coordinates of state k
    return (M.T * w) @ M.conj()


def constellation_entropy(c: Constellation, scale: float = 1.0) -> float:
    return entropy_from_eigs(np.linalg.eigvalsh(constellation_state(c, scale)))


def poisson_weights(z: float, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    if z == 0.0:
        return (n == 0).astype(float)
    return np.exp(-z * z + 2 * n * np.log(z) - gammaln(n + 1))


def continuous_alphabet_entropy(z: float, n_max: int | None = None) -> float:
    """Entropy of the phase-averaged coherent state (Poisson photon statistics)."""
    if n_max is None:
        n_max = int(np.ceil(2 * z * z + 12 * z + 20))
    p = poisson_weights(z, n_max)
    if 1.0 - p.sum() > TRACE_TOL:
        raise CutoffError(f"n_max={n_max} loses {1 - p.sum():.3g} of the weight")
    return entropy_from_eigs(p)


# ---------------------------------------------------------------- Bob's statistics

def displaced_thermal_heterodyne(d: complex, nbar: float) -> Callable[[np.ndarray], np.ndarray]:
    """Heterodyne density p(b|d) = exp(-|b-d|^2/(nbar+1)) / (pi (nbar+1))."""
    if nbar < 0:
        raise ValueError("nbar must be nonnegative")
    s = nbar + 1.0

    def pdf(b):
        return np.exp(-np.abs(np.asarray(b) - d) ** 2 / s) / (np.pi * s)
    return pdf


@dataclass
class PolarGrid:
    """Quadrature over one 2 pi / N wedge of the heterodyne plane."""
    b: np.ndarray       # complex nodes
    w: np.ndarray       # weights, already multiplied by N

    @classmethod
    def make(cls, N: int, radius: float, n_r: int = 48, n_phi: int = 16) -> "PolarGrid":
        x, wx = np.polynomial.legendre.leggauss(n_r)
        r = 0.5 * radius * (x + 1.0)
        wr = 0.5 * radius * wx * r
        dphi = 2.0 * np.pi / N / n_phi
        phi = (np.arange(n_phi) + 0.5) * dphi
        b = (r[:, None] * np.exp(1j * phi[None, :])).ravel()
        w = (wr[:, None] * np.full(n_phi, dphi)[None, :]).ravel() * N
        return cls(b, w)


def _likelihoods(c: Constellation, tau: float, nbar_out: float, grid: PolarGrid) -> np.ndarray:
    """p(b|a_k) on the grid, shape (nodes, N)."""
    s = 1.0 + nbar_out
    d = np.sqrt(tau) * c.amplitudes
    return np.exp(-np.abs(grid.b[:, None] - d[None, :]) ** 2 / s) / (np.pi * s)


def _grid_for(c: Constellation, tau: float, nbar_out: float, n_r: int, n_phi: int) -> PolarGrid:
    radius = np.sqrt(tau) * c.z + 7.0 * np.sqrt(1.0 + nbar_out)
    return PolarGrid.make(c.N, radius, n_r, n_phi)


def _posteriors(lik: np.ndarray, probs: np.ndarray):
    joint = lik * probs[None, :]
    pb = joint.sum(axis=1)
    return pb, joint / pb[:, None]


def mutual_info_heterodyne(c: Constellation, tau: float, nbar_out: float = 0.0,
                           n_r: int = 48, n_phi: int = 16) -> float:
    """I(X_A:X_B) = H(X_A) - int p(b) H(X_A|b) for heterodyne outcomes."""
    grid = _grid_for(c, tau, nbar_out, n_r, n_phi)
    pb, post = _posteriors(_likelihoods(c, tau, nbar_out, grid), c.probs)
    h_cond = -np.sum(xlogy(post, post), axis=1) / np.log(2.0)
    h_a = -np.sum(xlogy(c.probs, c.probs)) / np.log(2.0)
    return float(h_a - np.dot(grid.w, pb * h_cond))


# ---------------------------------------------------------------- pure loss

@dataclass
class DiscreteRates:
    R_dr: float
    R_rr: float
    i_ab: float
    chi_dr: float
    chi_rr: float
    R_opt: float = float("nan")
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"R_dr": self.R_dr, "R_rr": self.R_rr, "R_opt": self.R_opt, "i_ab": self.i_ab,
                "chi_dr": self.chi_dr, "chi_rr": self.chi_rr, **self.extra}


def pureloss_rates(c: Constellation, tau: float, n_r: int = 48, n_phi: int = 16) -> DiscreteRates:
    """Upper bound, direct and reverse reconciliation rates on a pure-loss channel."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    s_b = constellation_entropy(c, np.sqrt(tau))
    M_e = gram_schmidt(overlap_matrix(c, np.sqrt(1.0 - tau)))
    s_e = entropy_from_eigs(np.linalg.eigvalsh((M_e.T * c.probs) @ M_e.conj()))
    grid = _grid_for(c, tau, 0.0, n_r, n_phi)
    pb, post = _posteriors(_likelihoods(c, tau, 0.0, grid), c.probs)
    h_cond = -np.sum(xlogy(post, post), axis=1) / np.log(2.0)
    i_ab = float(np.log2(c.N) - np.dot(grid.w, pb * h_cond))
    s_e_b = np.array([entropy_from_eigs(np.linalg.eigvalsh((M_e.T * p) @ M_e.conj()))
                      for p in post])
    cond = float(np.dot(grid.w, pb * s_e_b))
    return DiscreteRates(i_ab - s_e, i_ab - s_e + cond, i_ab, s_e, s_e - cond, s_b - s_e)


# ---------------------------------------------------------------- thermal loss

def nbar_from_excess(tau: float, eps: float) -> float:
    """Eve's mean photon number giving input-referred excess noise ``eps``."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    return tau * eps / (2.0 * (1.0 - tau))


def tmsv_lambda(nbar: float) -> float:
    return float(np.tanh(0.5 * np.arccosh(2.0 * nbar + 1.0)))


@lru_cache(maxsize=64)
def _bs_map(tau: float, n_max: int) -> np.ndarray:
    """Beamsplitter on (A, E) inputs with n <= n_max, exact in each photon-number block.

    Returns T of shape (D_out, D_out, n_max+1, n_max+1) with D_out = 2 n_max + 1,
    indexed (E', B, A, E).
    """
    theta = np.arcsin(np.sqrt(tau))
    D = 2 * n_max + 1
    T = np.zeros((D, D, n_max + 1, n_max + 1))
    for tot in range(2 * n_max + 1):
        # basis |j, tot - j>, j photons in the first port
        j = np.arange(tot + 1)
        G = np.zeros((tot + 1, tot + 1))
        # a^dag e - a e^dag moves a photon from the second to the first port
        up = np.sqrt((j[:-1] + 1.0) * (tot - j[:-1]))
        G[j[1:], j[:-1]] = up
        G[j[:-1], j[1:]] = -up
        U = expm(-theta * G)
        for jin in range(max(0, tot - n_max), min(tot, n_max) + 1):
            # first output port is E', second is B
            T[j, tot - j, jin, tot - jin] = U[:, jin]
    return T


def coherent_vector(alpha: complex, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    if alpha == 0:
        return (n == 0).astype(complex)
    logmag = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(logmag + 1j * n * np.angle(alpha))


def tmsv_vector(nbar: float, n_max: int) -> np.ndarray:
    lam = tmsv_lambda(nbar)
    n = np.arange(n_max + 1)
    return np.sqrt(1.0 - lam * lam) * (-lam) ** n


def _truncation_loss(c: Constellation, nbar: float, n_max: int) -> float:
    pa = np.sum(np.abs(coherent_vector(c.z, n_max)) ** 2)
    pe = np.sum(tmsv_vector(nbar, n_max) ** 2)
    return float(1.0 - pa * pe)


def choose_cutoff(c: Constellation, nbar: float, n_max: int | None = None,
                  tol: float = TRACE_TOL) -> int:
    """Smallest cutoff >= ``n_max`` whose truncation loss is below ``tol``."""
    n = N_MAX_DEFAULT if n_max is None else int(n_max)
    while _truncation_loss(c, nbar, n) > tol:
        n += 1
        if n > N_MAX_CEILING:
            raise CutoffError(f"no cutoff up to {N_MAX_CEILING} reaches trace loss {tol:g}")
    return n


def _eve_blocks(c: Constellation, tau: float, nbar: float, n_max: int) -> np.ndarray:
    """Psi[k, b, (E', e)]: pure output state for input a_k with Bob's index first."""
    T = _bs_map(float(tau), int(n_max))
    v = tmsv_vector(nbar, n_max)
    D = 2 * n_max + 1
    out = np.empty((c.N, D, D * (n_max + 1)), dtype=complex)
    for k, a in enumerate(c.amplitudes):
        psi_a = coherent_vector(a, n_max)
        # |a>_A (x) sum_n v_n |n>_E |n>_e  ->  indices (A, E, e)
        psi_in = psi_a[:, None, None] * np.diag(v)[None, :, :]
        psi = np.einsum("pbae,aef->pbf", T, psi_in)      # (E', B, e)
        out[k] = psi.transpose(1, 0, 2).reshape(D, -1)
    return out


def _mixture_entropy(G: np.ndarray, w: np.ndarray, D: int) -> float:
    """Entropy of sum_k w_k Tr_B|psi_k><psi_k| from the Gram matrix of Bob-rows."""
    s = np.sqrt(np.repeat(w, D))
    return entropy_from_eigs(np.linalg.eigvalsh(s[:, None] * G * s[None, :]))


@dataclass
class EveStates:
    """Pure outputs of the entangling cloner for each constellation point."""
    psi: np.ndarray
    gram: np.ndarray
    n_max: int
    trace_loss: float

    @property
    def D(self) -> int:
        return self.psi.shape[1]

    def conditional_entropies(self) -> np.ndarray:
        n = self.D
        return np.array([_mixture_entropy(self.gram[k * n:(k + 1) * n, k * n:(k + 1) * n],
                                          np.ones(1), n) for k in range(self.psi.shape[0])])

    def mixture_entropy(self, weights: np.ndarray) -> float:
        return _mixture_entropy(self.gram, np.asarray(weights, dtype=float), self.D)


def eve_states(c: Constellation, tau: float, nbar: float, n_max: int | None = None) -> EveStates:
    n_max = choose_cutoff(c, nbar, n_max)
    psi = _eve_blocks(c, tau, nbar, n_max)
    Y = psi.reshape(-1, psi.shape[2])
    # rho_Eve|k = Psi_k^T Psi_k^*: nonzero spectrum of mixtures comes from Y^* Y^T
    gram = np.conj(Y) @ Y.T
    return EveStates(psi, gram, n_max, _truncation_loss(c, nbar, n_max))


def thermal_channel_evolve(c: Constellation, k: int, tau: float, nbar: float,
                           n_max: int | None = None) -> FockDensity:
    """Eve's two-mode state (E', e) given that Alice sent a_k."""
    ev = eve_states(c, tau, nbar, n_max)
    D, n1 = ev.D, ev.n_max + 1
    P = ev.psi[k]
    rho = P.T @ P.conj()
    return FockDensity(rho, (D, n1), ev.trace_loss)


def bob_state(c: Constellation, k: int, tau: float, nbar: float,
              n_max: int | None = None) -> FockDensity:
    """Bob's reduced state given a_k (a displaced thermal state)."""
    ev = eve_states(c, tau, nbar, n_max)
    P = ev.psi[k]
    return FockDensity(P @ P.conj().T, (ev.D,), ev.trace_loss)


def husimi(rho: np.ndarray, b: complex) -> float:
    """<b|rho|b>/pi, the heterodyne density of ``rho`` at outcome ``b``."""
    v = coherent_vector(b, rho.shape[0] - 1)
    return float(np.real(np.conj(v) @ rho @ v) / np.pi)


def _projected_entropies(ev: EveStates, b: np.ndarray, chunk: int = 256) -> np.ndarray:
    """S(rho_Eve|b) with Bob's mode projected on the coherent state |b>.

    The unnormalized conditional state is sum_k v_k v_k^dag with
    v_k = <b|_B |psi_k>, so its spectrum is that of the N x N Gram matrix.
    """
    out = np.empty(len(b))
    for i in range(0, len(b), chunk):
        C = np.array([coherent_vector(x, ev.D - 1) for x in b[i:i + chunk]])
        v = np.einsum("nd,kde->nke", np.conj(C), ev.psi)
        G = np.einsum("nke,nle->nkl", np.conj(v), v)
        tr = np.trace(G, axis1=1, axis2=2).real
        ev_b = np.linalg.eigvalsh(G / tr[:, None, None])
        out[i:i + chunk] = [entropy_from_eigs(e) for e in ev_b]
    return out


CONDITIONING = ("projected", "mixture")


def thermal_rates(c: Constellation, tau: float, nbar: float, n_max: int | None = None,
                  n_r: int = 48, n_phi: int = 16, reverse: bool = True,
                  conditioning: str = "projected") -> DiscreteRates:
    """Direct and reverse reconciliation rates on a thermal-loss channel.

    ``conditioning`` selects Eve's state given Bob's outcome in reverse
    reconciliation: ``"projected"`` applies Bob's heterodyne projector to the
    joint output (keeps the B-e correlations from Eve's idler), ``"mixture"``
    reweights Eve's per-symbol states by p(a_k|b) only.  Both coincide on a
    pure-loss channel.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    if conditioning not in CONDITIONING:
        raise ValueError(f"conditioning must be one of {CONDITIONING}")
    ev = eve_states(c, tau, nbar, n_max)
    s_k = ev.conditional_entropies()
    s_avg = ev.mixture_entropy(c.probs)
    nbar_out = (1.0 - tau) * nbar
    grid = _grid_for(c, tau, nbar_out, n_r, n_phi)
    pb, post = _posteriors(_likelihoods(c, tau, nbar_out, grid), c.probs)
    h_cond = -np.sum(xlogy(post, post), axis=1) / np.log(2.0)
    i_ab = float(np.log2(c.N) - np.dot(grid.w, pb * h_cond))
    chi_dr = s_avg - float(s_k[0])
    extra = {"n_max": ev.n_max, "trace_loss": ev.trace_loss,
             "k_spread": float(np.ptp(s_k)), "nbar": nbar}
    if not reverse:
        return DiscreteRates(i_ab - chi_dr, float("nan"), i_ab, chi_dr, float("nan"), extra=extra)
    if conditioning == "projected":
        s_b = _projected_entropies(ev, grid.b)
    else:
        s_b = np.array([ev.mixture_entropy(p) for p in post])
    chi_rr = s_avg - float(np.dot(grid.w, pb * s_b))
    extra["conditioning"] = conditioning
    return DiscreteRates(i_ab - chi_dr, i_ab - chi_rr, i_ab, chi_dr, chi_rr, extra=extra)


def thermal_rates_eps(c: Constellation, tau: float, eps: float, **kw) -> DiscreteRates:
    return thermal_rates(c, tau, nbar_from_excess(tau, eps), **kw)


# ---------------------------------------------------------------- thresholds and radius

@dataclass
class DiscreteThreshold:
    eps: float
    bracketed: bool
    residual: float


def threshold_discrete(N: int, z: float, tau: float, eps_hi: float = 0.5,
                       tol: float = 1e-4, n_max: int | None = None) -> DiscreteThreshold:
    """Largest input-referred excess noise with a positive direct-reconciliation rate."""
    c = Constellation(N, z)

    def rate(eps):
        return thermal_rates_eps(c, tau, eps, n_max=n_max, reverse=False).R_dr

    r0 = rate(0.0)
    if r0 <= 0.0:
        return DiscreteThreshold(0.0, True, r0)
    r_hi = rate(eps_hi)
    if r_hi > 0.0:
        return DiscreteThreshold(eps_hi, False, r_hi)
    lo, hi, rl, rh = 0.0, eps_hi, r0, r_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        rm = rate(mid)
        if rm > 0.0:
            lo, rl = mid, rm
        else:
            hi, rh = mid, rm
    # linear interpolation inside the final bracket
    eps = lo + (hi - lo) * rl / (rl - rh)
    return DiscreteThreshold(eps, True, rate(eps))


def optimize_radius(rate_fn: Callable[[float], float], lo: float = 1e-3, hi: float = 2.0,
                    xtol: float = 1e-3) -> tuple[float, float]:
    return maximize_scalar(rate_fn, lo, hi, grid=11, xtol=xtol)
