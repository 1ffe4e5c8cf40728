"""Key rates over uniformly fading channels.

Fast fading: the transmissivity changes every use and the parties only know
its distribution, so the mutual information is taken at the worst value
``tau_min`` while Eve's Holevo term is averaged.  Slow fading: each block sees
a fixed value, so the full rate is averaged.  Averages use tensor-product
Gauss-Legendre quadrature over the uniform support.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._optim import maximize_scalar
from .mdi_protocols import keyrate_mdi, keyrate_star3, optimal_attack
from .oneway_protocols import LossyChannel, OneWaySpec, keyrate_oneway

NODES_1D = 64
NODES_2D = 32
NODES_3D = 24
STAR_MU_BOUNDS = (2.0, 20.0)


class IntegrationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class UniformFade:
    tau_min: float
    dtau: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.tau_min < 1.0:
            raise ValueError(f"tau_min {self.tau_min} outside (0, 1)")
        if self.dtau < 0.0:
            raise ValueError("dtau must be nonnegative")
        # a support above 1 would turn the channel into an amplifier
        if self.tau_min + self.dtau > 1.0 + 1e-12:
            raise ValueError(f"fading support [{self.tau_min}, {self.tau_min + self.dtau}] exceeds 1")

    @property
    def tau_max(self) -> float:
        return min(self.tau_min + self.dtau, 1.0)

    @property
    def tau_mean(self) -> float:
        return 0.5 * (self.tau_min + self.tau_max)

    @property
    def degenerate(self) -> bool:
        return self.dtau == 0.0

    @classmethod
    def from_db(cls, db: float, dtau: float) -> "UniformFade":
        return cls(10.0 ** (-db / 10.0), dtau)


def _nodes(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * w


def integrate_uniform(f: Callable[[float], float], a: float, b: float,
                      nodes: int = NODES_1D) -> float:
    """Mean of ``f`` over [a, b], i.e. (1/(b-a)) * integral."""
    if not b > a:
        raise ValueError("need a < b")
    x, w = _nodes(a, b, nodes)
    vals = np.array([f(float(t)) for t in x])
    if not np.all(np.isfinite(vals)):
        raise IntegrationError("non-finite integrand sample")
    return float(np.dot(w, vals))


def average_uniform_nd(f: Callable[..., float], a: float, b: float, dim: int,
                       nodes: int):
    """Mean of ``f`` over the hypercube [a, b]^dim (tensor Gauss-Legendre).

    ``f`` may return a scalar or a fixed-length array.
    """
    if not b > a:
        raise ValueError("need a < b")
    x, w = _nodes(a, b, nodes)
    total = 0.0
    # fixed iteration order keeps the sum reproducible
    for idx in np.ndindex(*(nodes,) * dim):
        v = np.asarray(f(*(float(x[i]) for i in idx)), dtype=float)
        if not np.all(np.isfinite(v)):
            raise IntegrationError("non-finite integrand sample")
        total = total + float(np.prod(w[list(idx)])) * v
    return total if np.ndim(total) else float(total)


@dataclass
class FadingRate:
    rate: float
    i_ab: float
    i_e: float
    fixed: float        # non-fading rate at tau_min
    mean_rate: float    # non-fading rate at the mean transmissivity
    extra: dict

    @property
    def clamped(self) -> float:
        return max(0.0, self.rate)

    def as_dict(self) -> dict:
        return {"rate": self.clamped, "raw_rate": self.rate, "i_ab": self.i_ab,
                "i_e": self.i_e, "fixed_rate": self.fixed, "mean_rate": self.mean_rate,
                **self.extra}


# ---------------------------------------------------------------- one-way

def _oneway(spec: OneWaySpec, tau: float, omega: float):
    return keyrate_oneway(spec, LossyChannel(tau, omega))


def keyrate_fast_oneway(fade: UniformFade, spec: OneWaySpec, omega: float = 1.0,
                        nodes: int = NODES_1D) -> FadingRate:
    fixed = _oneway(spec, fade.tau_min, omega)
    mean = _oneway(spec, fade.tau_mean, omega).rate
    if fade.degenerate:
        return FadingRate(fixed.rate, fixed.i_ab, fixed.i_e, fixed.rate, mean, {})
    i_e = integrate_uniform(lambda t: _oneway(spec, t, omega).i_e,
                            fade.tau_min, fade.tau_max, nodes)
    return FadingRate(spec.xi * fixed.i_ab - i_e, fixed.i_ab, i_e, fixed.rate, mean, {})


def keyrate_slow_oneway(fade: UniformFade, spec: OneWaySpec, omega: float = 1.0,
                        nodes: int = NODES_1D) -> FadingRate:
    fixed = _oneway(spec, fade.tau_min, omega)
    mean = _oneway(spec, fade.tau_mean, omega).rate
    if fade.degenerate:
        return FadingRate(fixed.rate, fixed.i_ab, fixed.i_e, fixed.rate, mean, {})
    x, w = _nodes(fade.tau_min, fade.tau_max, nodes)
    rs = [_oneway(spec, float(t), omega) for t in x]
    i_ab = float(np.dot(w, [r.i_ab for r in rs]))
    i_e = float(np.dot(w, [r.i_e for r in rs]))
    rate = float(np.dot(w, [r.rate for r in rs]))
    if not np.isfinite(rate):
        raise IntegrationError("non-finite integrand sample")
    return FadingRate(rate, i_ab, i_e, fixed.rate, mean, {})


# ---------------------------------------------------------------- symmetric MDI

def _mdi(xi: float, mu: float, omega: float, ta: float, tb: float):
    return keyrate_mdi(xi, mu, optimal_attack(ta, tb, omega, omega))


def keyrate_fast_mdi(fade: UniformFade, xi: float, mu: float, omega: float = 1.0,
                     nodes: int = NODES_2D) -> FadingRate:
    t0 = fade.tau_min
    fixed = _mdi(xi, mu, omega, t0, t0)
    mean = _mdi(xi, mu, omega, fade.tau_mean, fade.tau_mean).rate
    if fade.degenerate:
        return FadingRate(fixed.rate, fixed.i_ab, fixed.i_e, fixed.rate, mean, {})
    i_e = average_uniform_nd(lambda a, b: _mdi(xi, mu, omega, a, b).i_e,
                             t0, fade.tau_max, 2, nodes)
    return FadingRate(xi * fixed.i_ab - i_e, fixed.i_ab, i_e, fixed.rate, mean, {})


def keyrate_slow_mdi(fade: UniformFade, xi: float, mu: float, omega: float = 1.0,
                     nodes: int = NODES_2D) -> FadingRate:
    t0 = fade.tau_min
    fixed = _mdi(xi, mu, omega, t0, t0)
    mean = _mdi(xi, mu, omega, fade.tau_mean, fade.tau_mean).rate
    if fade.degenerate:
        return FadingRate(fixed.rate, fixed.i_ab, fixed.i_e, fixed.rate, mean, {})

    def f(a, b):
        r = _mdi(xi, mu, omega, a, b)
        return (r.rate, r.i_ab, r.i_e)
    rate, i_ab, i_e = average_uniform_nd(f, t0, fade.tau_max, 2, nodes)
    return FadingRate(float(rate), float(i_ab), float(i_e), fixed.rate, mean, {})


# ---------------------------------------------------------------- three-user star

def _star_fast(fade: UniformFade, xi: float, mu: float, omega: float, nodes: int) -> FadingRate:
    t0 = fade.tau_min
    fixed = keyrate_star3(xi, mu, omega, t0)
    mean = keyrate_star3(xi, mu, omega, fade.tau_mean).rate
    if fade.degenerate:
        return FadingRate(fixed.rate, fixed.i_ab, fixed.i_e, fixed.rate, mean, {"mu": mu})
    i_e = average_uniform_nd(lambda a, b, c: keyrate_star3(xi, mu, omega, [a, b, c]).i_e,
                             t0, fade.tau_max, 3, nodes)
    return FadingRate(xi * fixed.i_ab - i_e, fixed.i_ab, i_e, fixed.rate, mean, {"mu": mu})


def _star_slow(fade: UniformFade, xi: float, mu: float, omega: float, nodes: int) -> FadingRate:
    t0 = fade.tau_min
    fixed = keyrate_star3(xi, mu, omega, t0)
    mean = keyrate_star3(xi, mu, omega, fade.tau_mean).rate
    if fade.degenerate:
        return FadingRate(fixed.rate, fixed.i_ab, fixed.i_e, fixed.rate, mean, {"mu": mu})

    def f(a, b, c):
        r = keyrate_star3(xi, mu, omega, [a, b, c])
        return (r.rate, r.i_ab, r.i_e)
    rate, i_ab, i_e = average_uniform_nd(f, t0, fade.tau_max, 3, nodes)
    return FadingRate(float(rate), float(i_ab), float(i_e), fixed.rate, mean, {"mu": mu})


def _optimize_mu(fn, mu: float | None, bounds) -> FadingRate:
    if mu is not None:
        return fn(mu)
    cache: dict[float, FadingRate] = {}

    def f(m):
        cache[m] = fn(m)
        return cache[m].rate
    best, _ = maximize_scalar(f, *bounds, grid=7, xtol=1e-2)
    return cache[best] if best in cache else fn(best)


def keyrate_fast_star(fade: UniformFade, xi: float, mu: float | None = None,
                      omega: float = 1.0, nodes: int = NODES_3D,
                      mu_bounds: tuple[float, float] = STAR_MU_BOUNDS) -> FadingRate:
    """Fast-fading star rate; ``mu=None`` optimizes over ``mu_bounds``."""
    return _optimize_mu(lambda m: _star_fast(fade, xi, m, omega, nodes), mu, mu_bounds)


def keyrate_slow_star(fade: UniformFade, xi: float, mu: float | None = None,
                      omega: float = 1.0, nodes: int = NODES_3D,
                      mu_bounds: tuple[float, float] = STAR_MU_BOUNDS) -> FadingRate:
    return _optimize_mu(lambda m: _star_slow(fade, xi, m, omega, nodes), mu, mu_bounds)
