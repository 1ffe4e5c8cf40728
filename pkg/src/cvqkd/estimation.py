"""Finite-size parameter estimation and finite-size key rates.

Confidence intervals follow the Gaussian (central-limit) treatment: the
transmissivity estimator has variance ~ 1/m and the excess-noise estimator
is chi-squared, so worst-case values sit ``z`` standard deviations away from
the point estimates.  The interval is two-sided, so ``Phi(z) = 1 - eps_PE/2``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np
from scipy.special import ndtri

from ._optim import maximize_log
from .mdi_protocols import MdiAttack, PhysicalityError, keyrate_mdi_lambda
from .oneway_protocols import LossyChannel, OneWaySpec, keyrate_oneway
from .gaussian_core import GaussianError

ROUNDED_Z = 6.5
TAU_FLOOR = 1e-12


@dataclass(frozen=True)
class EstimationSetup:
    N: float
    r: float
    eps_PE: float = 1e-10
    d: int = 1
    eps_sm: float = 1e-10
    rounded_z: bool = False

    def __post_init__(self):
        if not 0.0 < self.r < 1.0:
            raise ValueError(f"PE ratio {self.r} outside (0, 1)")

    @property
    def m(self) -> float:
        return self.r * self.N

    @property
    def n(self) -> float:
        return (1.0 - self.r) * self.N

    @property
    def z(self) -> float:
        return ROUNDED_Z if self.rounded_z else zscore(self.eps_PE)


@dataclass
class WorstCaseParams:
    tau_low: float
    V_eps_up: float
    too_noisy: bool = False


def zscore(eps: float) -> float:
    """Half-width (in sigmas) of a two-sided interval with failure probability eps.

    Solves Phi(z) = 1 - eps/2; evaluated in the lower tail for accuracy.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"error probability {eps} outside (0, 1)")
    return float(-ndtri(0.5 * eps))


def delta_fs(n: float, d: int = 1, eps_sm: float = 1e-10) -> float:
    """Privacy-amplification penalty (2*2^d + 3) sqrt(log2(2/eps_sm)/n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return (2.0 * 2.0 ** d + 3.0) * np.sqrt(np.log2(2.0 / eps_sm) / n)


def noise_variance_oneway(tau: float, V_th: float, omega: float) -> float:
    """V_N = 1 + tau V_th + (1 - tau)(omega - 1)."""
    return 1.0 + tau * V_th + (1.0 - tau) * (omega - 1.0)


def estimator_variances_oneway(tau: float, V_M: float, V_th: float, omega: float,
                               m: float) -> tuple[float, float]:
    """Leading-order (Var tau~, Var V~_eps)."""
    if m < 2:
        raise ValueError("need m >= 2")
    V_N = noise_variance_oneway(tau, V_th, omega)
    var_tau = 4.0 * tau * tau / m * (2.0 + V_N / (tau * V_M))
    var_eps = 2.0 * V_N * V_N / m + V_th * V_th * var_tau
    return var_tau, var_eps


def combine_variances(v1: float, v2: float) -> float:
    """Variance of the optimal linear combination of two estimators."""
    return v1 * v2 / (v1 + v2)


def estimator_variances_mdi(tau_A: float, tau_B: float, omega_A: float, omega_B: float,
                            g: float, g_p: float, V_M: float, m: float):
    """Return (sigma_A^2, sigma_B^2, s_Q^2, s_P^2)."""
    at = MdiAttack(tau_A, tau_B, omega_A, omega_B, g, g_p)
    V_QN, V_PN = 1.0 + at.V_Q_eps, 1.0 + at.V_P_eps

    def var_tau(ta, tb, vn):
        c = ta + 0.5 * tb
        return 8.0 * ta / m * c * (1.0 + vn / (c * V_M))

    sA = combine_variances(var_tau(tau_A, tau_B, V_QN), var_tau(tau_A, tau_B, V_PN))
    sB = combine_variances(var_tau(tau_B, tau_A, V_QN), var_tau(tau_B, tau_A, V_PN))
    return sA, sB, 2.0 * V_QN ** 2 / m, 2.0 * V_PN ** 2 / m


def worst_case(tau: float, V_eps: float, var_tau: float, var_eps: float,
               eps_PE: float = 1e-10, z: float | None = None) -> WorstCaseParams:
    """Pessimistic (tau_low, V_eps_up) from estimator variances."""
    if var_tau < 0 or var_eps < 0:
        raise ValueError("variances must be nonnegative")
    z = zscore(eps_PE) if z is None else z
    tau_low = tau - z * np.sqrt(var_tau)
    too_noisy = tau_low <= 0.0
    tau_low = min(max(tau_low, TAU_FLOOR), tau)
    return WorstCaseParams(tau_low, V_eps + z * np.sqrt(var_eps), too_noisy)


# ---------------------------------------------------------------- one-way

@dataclass
class FiniteResult:
    K: float
    raw: float
    R_tilde: float
    delta: float
    worst: WorstCaseParams | dict
    setup: EstimationSetup

    def as_dict(self) -> dict:
        w = self.worst if isinstance(self.worst, dict) else vars(self.worst)
        return {"rate": self.K, "raw_rate": self.raw, "R_tilde": self.R_tilde,
                "delta": self.delta, "N": self.setup.N, "r": self.setup.r,
                **{k: (float(v) if not isinstance(v, bool) else v) for k, v in w.items()}}


def keyrate_finite_oneway(spec: OneWaySpec, ch: LossyChannel, N: float, r: float,
                          eps_PE: float = 1e-10, d: int | None = None,
                          eps_sm: float = 1e-10, rounded_z: bool = False) -> FiniteResult:
    """K = (1 - r)(R(tau_low, V_eps_up) - Delta((1 - r) N))."""
    if d is None:
        d = 4 if spec.V_th > 0 else 1
    setup = EstimationSetup(N, r, eps_PE, d, eps_sm, rounded_z)
    if setup.m < 2 or setup.n < 1:
        raise ValueError("block too small for the chosen ratio")
    var_tau, var_eps = estimator_variances_oneway(ch.tau, spec.V_M, spec.V_th, ch.omega, setup.m)
    wc = worst_case(ch.tau, ch.V_eps, var_tau, var_eps, z=setup.z)
    delta = delta_fs(setup.n, d, eps_sm)
    if wc.too_noisy or wc.tau_low >= 1.0:
        R = -np.inf if wc.too_noisy else keyrate_oneway(spec, LossyChannel(1.0, 1.0)).rate
    else:
        omega_up = 1.0 + max(wc.V_eps_up, 0.0) / (1.0 - wc.tau_low)
        R = keyrate_oneway(spec, LossyChannel(wc.tau_low, omega_up)).rate
    raw = (1.0 - r) * (R - delta)
    return FiniteResult(max(raw, 0.0), raw, R, delta, wc, setup)


# ---------------------------------------------------------------- MDI

def keyrate_finite_mdi(xi: float, mu: float, attack: MdiAttack, N: float, r: float,
                       eps_PE: float = 1e-10, d: int = 1, eps_sm: float = 1e-10,
                       rounded_z: bool = False) -> FiniteResult:
    """K = (n/N)(R(tau_A_low, tau_B_low, V_Q_up, V_P_up) - Delta(n))."""
    setup = EstimationSetup(N, r, eps_PE, d, eps_sm, rounded_z)
    V_M = mu - 1.0
    sA, sB, sQ, sP = estimator_variances_mdi(attack.tau_A, attack.tau_B, attack.omega_A,
                                             attack.omega_B, attack.g, attack.g_p, V_M, setup.m)
    z = setup.z
    wA = worst_case(attack.tau_A, attack.V_Q_eps, sA, sQ, z=z)
    wB = worst_case(attack.tau_B, attack.V_P_eps, sB, sP, z=z)
    tA, tB = wA.tau_low, wB.tau_low
    VQ, VP = wA.V_eps_up, wB.V_eps_up
    lam = 2.0 + 2.0 * VQ - tA - tB
    lam_p = 2.0 + 2.0 * VP - tA - tB
    delta = delta_fs(setup.n, d, eps_sm)
    worst = {"tau_A_low": tA, "tau_B_low": tB, "V_Q_eps_up": VQ, "V_P_eps_up": VP,
             "too_noisy": wA.too_noisy or wB.too_noisy}
    try:
        R = -np.inf if worst["too_noisy"] else keyrate_mdi_lambda(xi, mu, tA, tB, lam, lam_p).rate
    except (PhysicalityError, GaussianError):
        R = -np.inf
    raw = (1.0 - r) * (R - delta)
    return FiniteResult(max(raw, 0.0), raw, R, delta, worst, setup)


# ---------------------------------------------------------------- optimizer

def optimize_finite(rate_fn: Callable[..., float], over: tuple[str, ...] = ("V_M", "r"),
                    bounds: Mapping[str, tuple[float, float]] | None = None,
                    xtol: float = 1e-4) -> tuple[dict, float]:
    """Nested maximization: log-scale V_M outside, r inside.

    ``rate_fn`` takes keyword arguments named in ``over``.
    """
    b = {"V_M": (1e-2, 1e6), "r": (1e-4, 0.99)}
    if bounds:
        b.update(bounds)

    def inner_r(**kw):
        if "r" not in over:
            return None, rate_fn(**kw)
        lo, hi = b["r"]
        # r spans decades at large blocks, so search log(r)
        r, v = maximize_log(lambda r: rate_fn(r=r, **kw), lo, hi, grid=21, xtol=xtol)
        return r, v

    if "V_M" in over:
        best = {}

        def f(vm):
            r, v = inner_r(V_M=vm)
            best[vm] = r
            return v
        lo, hi = b["V_M"]
        vm, val = maximize_log(f, lo, hi, grid=15, xtol=xtol)
        if vm not in best:
            f(vm)
        params = {"V_M": vm}
        if "r" in over:
            params["r"] = best[vm]
        return params, float(val)
    r, v = inner_r()
    return ({"r": r} if r is not None else {}), float(v)


def optimized_finite_oneway(spec: OneWaySpec, ch: LossyChannel, N: float, **kw):
    def fn(V_M, r):
        try:
            return keyrate_finite_oneway(replace(spec, V_M=V_M), ch, N, r, **kw).raw
        except ValueError:
            return -np.inf
    return optimize_finite(fn, ("V_M", "r"))


def optimized_finite_mdi(xi: float, attack: MdiAttack, N: float, **kw):
    def fn(V_M, r):
        try:
            return keyrate_finite_mdi(xi, V_M + 1.0, attack, N, r, **kw).raw
        except ValueError:
            return -np.inf
    return optimize_finite(fn, ("V_M", "r"))
