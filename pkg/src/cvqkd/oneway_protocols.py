"""Asymptotic key rates for one-way Gaussian-modulated protocols.

Alice sends coherent (``V_th = 0``) or thermal states modulated with variance
``V_M``.  The channel is an entangling cloner: Eve mixes the signal with one
arm ``E`` of a TMSV of variance ``omega`` and keeps both outputs ``(E', e)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from scipy import constants

from .gaussian_core import (
    I2, Z2, apply_symplectic, beamsplitter, condition_heterodyne,
    condition_homodyne, direct_sum, embed, entropy_h, select_modes,
    symplectic_eigenvalues, thermal_cm, tmsv_cm, two_mode_spectrum,
)

Detection = Literal["homodyne", "heterodyne"]
Direction = Literal["direct", "reverse"]

_DET_ALIASES = {"hom": "homodyne", "homodyne": "homodyne",
                "het": "heterodyne", "heterodyne": "heterodyne"}
_DIR_ALIASES = {"dr": "direct", "direct": "direct",
                "rr": "reverse", "reverse": "reverse"}


@dataclass(frozen=True)
class OneWaySpec:
    detection: str = "homodyne"
    direction: str = "reverse"
    V_M: float = 10.0
    V_th: float = 0.0
    xi: float = 1.0

    def __post_init__(self):
        det = _DET_ALIASES.get(str(self.detection).lower())
        dr = _DIR_ALIASES.get(str(self.direction).lower())
        if det is None:
            raise ValueError(f"unknown detection {self.detection!r}")
        if dr is None:
            raise ValueError(f"unknown direction {self.direction!r}")
        object.__setattr__(self, "detection", det)
        object.__setattr__(self, "direction", dr)
        if self.V_M < 0 or self.V_th < 0:
            raise ValueError("V_M and V_th must be nonnegative")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError(f"reconciliation efficiency {self.xi} outside [0, 1]")

    @property
    def variant(self) -> str:
        return ("DR" if self.direction == "direct" else "RR") + "-" + self.detection[:3]


@dataclass(frozen=True)
class LossyChannel:
    tau: float
    omega: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"transmissivity {self.tau} outside [0, 1]")
        if self.omega < 1.0:
            raise ValueError(f"thermal variance {self.omega} below 1")

    @classmethod
    def from_excess_noise(cls, tau: float, eps: float) -> "LossyChannel":
        """Channel with input-referred excess noise ``eps``."""
        if tau >= 1.0:
            return cls(1.0, 1.0)
        return cls(tau, 1.0 + tau * eps / (1.0 - tau))

    @property
    def excess_noise(self) -> float:
        return (1.0 - self.tau) * (self.omega - 1.0) / self.tau

    @property
    def V_eps(self) -> float:
        return (1.0 - self.tau) * (self.omega - 1.0)


@dataclass
class KeyRateBreakdown:
    rate: float
    i_ab: float
    i_e: float
    xi: float = 1.0
    spectra: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def clamped(self) -> float:
        return max(0.0, self.rate)

    def as_dict(self) -> dict:
        out = {"rate": max(0.0, self.rate), "raw_rate": self.rate,
               "i_ab": self.i_ab, "i_e": self.i_e, "xi": self.xi}
        out["spectra"] = {k: [float(x) for x in v] for k, v in self.spectra.items()}
        out.update(self.extra)
        return out


def db_to_tau(db: float) -> float:
    return 10.0 ** (-db / 10.0)


def tau_to_db(tau: float) -> float:
    return -10.0 * np.log10(tau)


# ---------------------------------------------------------------- mutual information

def mutual_info_oneway(spec: OneWaySpec, ch: LossyChannel) -> float:
    tau, w = ch.tau, ch.omega
    num = tau * (spec.V_M + spec.V_th + 1.0) + (1.0 - tau) * w
    den = tau * (spec.V_th + 1.0) + (1.0 - tau) * w
    if spec.detection == "homodyne":
        return 0.5 * np.log2(num / den)
    # two identical quadrature terms with the extra heterodyne vacuum unit
    return np.log2((num + 1.0) / (den + 1.0))


# ---------------------------------------------------------------- Eve's states

def _cloner_average(X: float, tau: float, w: float) -> np.ndarray:
    v_e = tau * w + (1.0 - tau) * X
    c = np.sqrt(tau * (w * w - 1.0))
    return np.block([[v_e * I2, c * Z2], [c * Z2, w * I2]])


def _closed_form_cms(spec: OneWaySpec, ch: LossyChannel):
    tau, w = ch.tau, ch.omega
    X = spec.V_M + spec.V_th + 1.0
    Y = spec.V_th + 1.0
    avg = _cloner_average(X, tau, w)
    c = np.sqrt(tau * (w * w - 1.0))
    if spec.direction == "direct":
        # knowing the modulation replaces V_M by 0 in the measured quadratures
        vq = tau * w + (1.0 - tau) * Y
        vp = vq if spec.detection == "heterodyne" else tau * w + (1.0 - tau) * X
        cond = avg.copy()
        cond[0, 0], cond[1, 1] = vq, vp
        return avg, cond
    vb = tau * X + (1.0 - tau) * w
    if spec.detection == "homodyne":
        A = np.diag([X * w / vb, tau * w + (1.0 - tau) * X])
        B = np.diag([(1.0 - tau + tau * X * w) / vb, w])
        C = np.diag([c * X / vb, -c])
        return avg, np.block([[A, C], [C.T, B]])
    den = vb + 1.0
    a = ((1.0 - tau) * X + (tau + X) * w) / den
    b = ((1.0 - tau) + (1.0 + tau * X) * w) / den
    cc = c * (X + 1.0) / den
    return avg, np.block([[a * I2, cc * Z2], [cc * Z2, b * I2]])


def cloner_state(spec: OneWaySpec, ch: LossyChannel) -> np.ndarray:
    """Three-mode CM of (E', e, B) built from the symplectic circuit."""
    X = spec.V_M + spec.V_th + 1.0
    # modes: 0 = A (Alice's signal), 1 = E, 2 = e
    V = direct_sum(thermal_cm(X), tmsv_cm(ch.omega))
    V = apply_symplectic(V, embed(beamsplitter(ch.tau), [0, 1], 3))
    # after the beamsplitter mode 0 is B, mode 1 is E'
    return select_modes(V, [1, 2, 0])


def _circuit_cms(spec: OneWaySpec, ch: LossyChannel):
    V = cloner_state(spec, ch)
    avg = select_modes(V, [0, 1])
    if spec.direction == "reverse":
        if spec.detection == "homodyne":
            return avg, condition_homodyne(V, 2, "q")
        return avg, condition_heterodyne(V, 2)
    known = replace(spec, V_M=0.0)
    cond = select_modes(cloner_state(known, ch), [0, 1])
    if spec.detection == "homodyne":
        # only q is known; p keeps the full modulation
        cond = cond.copy()
        cond[1, 1] = avg[1, 1]
    return avg, cond


def eve_cms_oneway(spec: OneWaySpec, ch: LossyChannel, method: str = "closed"):
    """Eve's average and conditional two-mode CMs on (E', e)."""
    if method == "closed":
        return _closed_form_cms(spec, ch)
    if method == "circuit":
        return _circuit_cms(spec, ch)
    raise ValueError(f"unknown method {method!r}")


def holevo_oneway(spec: OneWaySpec, ch: LossyChannel, method: str = "closed",
                  return_spectra: bool = False):
    if ch.tau >= 1.0:
        out = (0.0, {"average": np.ones(2), "conditional": np.ones(2)})
        return out if return_spectra else 0.0
    avg, cond = eve_cms_oneway(spec, ch, method)
    if method == "closed":
        s_avg, s_cond = two_mode_spectrum(avg), two_mode_spectrum(cond)
    else:
        s_avg, s_cond = symplectic_eigenvalues(avg), symplectic_eigenvalues(cond)
    chi = (sum(entropy_h(max(v, 1.0)) for v in s_avg)
           - sum(entropy_h(max(v, 1.0)) for v in s_cond))
    if return_spectra:
        return chi, {"average": s_avg, "conditional": s_cond}
    return chi


def average_spectrum_closed(spec: OneWaySpec, ch: LossyChannel) -> np.ndarray:
    """Average-state spectrum from nu = ½[√((V_E'+ω)² − 4τ(ω²−1)) ± (V_E'−ω)]."""
    tau, w = ch.tau, ch.omega
    X = spec.V_M + spec.V_th + 1.0
    v_e = tau * w + (1.0 - tau) * X
    root = np.sqrt((v_e + w) ** 2 - 4.0 * tau * (w * w - 1.0))
    return np.array([0.5 * (root + abs(v_e - w)), 0.5 * (root - abs(v_e - w))])


def keyrate_oneway(spec: OneWaySpec, ch: LossyChannel, method: str = "closed") -> KeyRateBreakdown:
    i_ab = mutual_info_oneway(spec, ch)
    i_e, spectra = holevo_oneway(spec, ch, method, return_spectra=True)
    return KeyRateBreakdown(spec.xi * i_ab - i_e, i_ab, i_e, spec.xi, spectra)


def rate_oneway(spec: OneWaySpec, tau: float, omega: float = 1.0) -> float:
    """Signed rate as a plain float."""
    return keyrate_oneway(spec, LossyChannel(tau, omega)).rate


# ---------------------------------------------------------------- infinite modulation

def keyrate_infinite_modulation(variant: str, tau: float, omega: float = 1.0) -> float:
    """Closed-form V_M -> infinity rates for coherent states (xi = 1)."""
    v = variant.upper().replace("_", "-")
    w = omega
    if tau <= 0.0:
        return -np.inf
    if tau >= 1.0:
        return np.inf
    h = entropy_h
    if v == "DR-HOM":
        arg = np.sqrt((tau + (1 - tau) * w) * w / (tau * w + 1 - tau))
        return (0.5 * np.log2(tau / (1 - tau) * (tau * w + 1 - tau) / (tau + (1 - tau) * w))
                + h(arg) - h(w))
    if v == "DR-HET":
        return (np.log2(2 * tau / (np.e * (1 - tau) * (tau + (1 - tau) * w + 1)))
                + h(tau + (1 - tau) * w) - h(w))
    if v == "RR-HOM":
        return 0.5 * np.log2(w / ((1 - tau) * (tau + (1 - tau) * w))) - h(w)
    if v == "RR-HET":
        return (np.log2(2 * tau / (np.e * (1 - tau) * (tau + (1 - tau) * w + 1)))
                + h(((1 - tau) * w + 1) / tau) - h(w))
    raise ValueError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------- thresholds

@dataclass
class ThresholdResult:
    eps: float
    bracketed: bool
    residual: float


def security_threshold(spec: OneWaySpec, tau: float, eps_hi: float = 1.0,
                       tol: float = 1e-6, rate_fn=None) -> ThresholdResult:
    """Largest tolerable excess noise at ``tau`` by bisection on R(eps) = 0."""
    if rate_fn is None:
        def rate_fn(eps):
            return keyrate_oneway(spec, LossyChannel.from_excess_noise(tau, eps)).rate
    r0 = rate_fn(0.0)
    if r0 <= 0.0:
        return ThresholdResult(0.0, True, r0)
    r_hi = rate_fn(eps_hi)
    if r_hi > 0.0:
        return ThresholdResult(eps_hi, False, r_hi)
    lo, hi = 0.0, eps_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if rate_fn(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    eps = 0.5 * (lo + hi)
    return ThresholdResult(eps, True, rate_fn(eps))


def thermal_photons_from_frequency(f: float, T: float = 300.0) -> float:
    """Bose occupation number at frequency ``f`` (Hz) and temperature ``T`` (K)."""
    if f <= 0 or T <= 0:
        raise ValueError("frequency and temperature must be positive")
    x = constants.h * f / (constants.k * T)
    if x > 700.0:
        return 0.0
    return float(1.0 / np.expm1(x))
