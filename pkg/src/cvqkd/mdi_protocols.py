"""Continuous-variable MDI relay: two-user rates and the three-user star.

Each party holds a TMSV(mu) with local mode a (b, c) and travelling mode
A (B, C).  Eve attacks the links with ancillas E1, E2 whose joint CM is
[[wA I, G], [G, wB I]], G = diag(g, g').  The relay Bell-detects A', B'.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._optim import maximize_log, maximize_scalar
from .gaussian_core import (
    GaussianError, I2, apply_symplectic, beamsplitter,
    condition_heterodyne, condition_homodyne, direct_sum, embed, entropy_h, is_valid_cm,
    place_block, purify, select_modes, symplectic_eigenvalues, thermal_cm, tmsv_cm,
    von_neumann_entropy,
)
from .oneway_protocols import KeyRateBreakdown


class PhysicalityError(GaussianError):
    pass


@dataclass(frozen=True)
class MdiAttack:
    tau_A: float
    tau_B: float
    omega_A: float = 1.0
    omega_B: float = 1.0
    g: float = 0.0
    g_p: float = 0.0

    def __post_init__(self):
        for t in (self.tau_A, self.tau_B):
            if not 0.0 < t <= 1.0:
                raise ValueError(f"transmissivity {t} outside (0, 1]")
        if self.omega_A < 1.0 or self.omega_B < 1.0:
            raise ValueError("thermal variances must be >= 1")

    @property
    def u(self) -> float:
        return np.sqrt((1.0 - self.tau_A) * (1.0 - self.tau_B))

    @property
    def lam(self) -> float:
        return ((1.0 - self.tau_A) * self.omega_A + (1.0 - self.tau_B) * self.omega_B
                - 2.0 * self.g * self.u)

    @property
    def lam_p(self) -> float:
        return ((1.0 - self.tau_A) * self.omega_A + (1.0 - self.tau_B) * self.omega_B
                + 2.0 * self.g_p * self.u)

    def eve_cm(self) -> np.ndarray:
        G = np.diag([self.g, self.g_p])
        return np.block([[self.omega_A * I2, G], [G, self.omega_B * I2]])

    def is_physical(self) -> bool:
        return is_valid_cm(self.eve_cm())

    @property
    def V_Q_eps(self) -> float:
        """Excess noise of the relay's q output: k - g u."""
        return self.k - self.g * self.u

    @property
    def V_P_eps(self) -> float:
        return self.k + self.g_p * self.u

    @property
    def k(self) -> float:
        return 0.5 * ((1.0 - self.tau_B) * (self.omega_B - 1.0)
                      + (1.0 - self.tau_A) * (self.omega_A - 1.0))


def omega_from_excess(tau: float, eps: float) -> float:
    """Thermal variance giving input-referred excess noise ``eps``."""
    if tau >= 1.0:
        return 1.0
    return 1.0 + tau * eps / (1.0 - tau)


def optimal_g(omega_A: float, omega_B: float) -> float:
    """Strongest two-mode correlation; used as g = -g'."""
    return float(min(np.sqrt((omega_A - 1.0) * (omega_B + 1.0)),
                     np.sqrt((omega_B - 1.0) * (omega_A + 1.0))))


def optimal_attack(tau_A: float, tau_B: float, omega_A: float, omega_B: float) -> MdiAttack:
    g = optimal_g(omega_A, omega_B)
    return MdiAttack(tau_A, tau_B, omega_A, omega_B, g, -g)


def attack_from_excess(tau_A: float, tau_B: float, eps_A: float, eps_B: float,
                       correlated: bool = True) -> MdiAttack:
    wA, wB = omega_from_excess(tau_A, eps_A), omega_from_excess(tau_B, eps_B)
    if correlated:
        return optimal_attack(tau_A, tau_B, wA, wB)
    return MdiAttack(tau_A, tau_B, wA, wB)


# ---------------------------------------------------------------- closed forms

def _theta(mu, tau_A, tau_B, lam):
    return (tau_A + tau_B) * mu + lam


def cm_ab_given_gamma_closed(mu: float, tau_A: float, tau_B: float,
                             lam: float, lam_p: float) -> np.ndarray:
    s = mu * mu - 1.0
    th, thp = _theta(mu, tau_A, tau_B, lam), _theta(mu, tau_A, tau_B, lam_p)
    r = np.sqrt(tau_A * tau_B)
    M = np.array([
        [tau_A / th, 0.0, -r / th, 0.0],
        [0.0, tau_A / thp, 0.0, r / thp],
        [-r / th, 0.0, tau_B / th, 0.0],
        [0.0, r / thp, 0.0, tau_B / thp],
    ])
    return mu * np.eye(4) - s * M


def cm_b_given_gamma_alpha_closed(mu: float, tau_A: float, tau_B: float,
                                  lam: float, lam_p: float) -> np.ndarray:
    s = mu * mu - 1.0
    return np.diag([mu - tau_B * s / (tau_A + tau_B * mu + lam),
                    mu - tau_B * s / (tau_A + tau_B * mu + lam_p)])


def cm_ab_given_gamma(mu: float, attack: MdiAttack, method: str = "closed") -> np.ndarray:
    if method == "circuit":
        return _circuit(mu, attack)["ab"]
    V = cm_ab_given_gamma_closed(mu, attack.tau_A, attack.tau_B, attack.lam, attack.lam_p)
    if not is_valid_cm(V):
        raise PhysicalityError("conditional CM violates the uncertainty relation")
    return V


def cm_b_given_gamma_alpha(mu: float, attack: MdiAttack, method: str = "closed") -> np.ndarray:
    if method == "circuit":
        return condition_heterodyne(_circuit(mu, attack)["ab"], 0)
    return cm_b_given_gamma_alpha_closed(mu, attack.tau_A, attack.tau_B,
                                         attack.lam, attack.lam_p)


# ---------------------------------------------------------------- circuit route

def relay_state(mu: float, attack: MdiAttack, purify_eve: bool = False) -> np.ndarray:
    """CM after the link beamsplitters and the balanced relay beamsplitter.

    Mode order: a, A'', E1', E2', B'', b, then Eve's purifying ancillas when
    ``purify_eve`` is set.
    """
    eve = purify(attack.eve_cm()) if purify_eve else attack.eve_cm()
    n = 6 + (2 if purify_eve else 0)
    V = np.zeros((2 * n, 2 * n))
    place_block(V, tmsv_cm(mu), [0, 1])
    place_block(V, tmsv_cm(mu), [4, 5])
    place_block(V, eve, [2, 3, 6, 7] if purify_eve else [2, 3])
    # A' = sqrt(tA) A + sqrt(1-tA) E1 and B' = sqrt(tB) B + sqrt(1-tB) E2
    S1 = (embed(beamsplitter(attack.tau_A), [1, 2], n)
          @ embed(beamsplitter(attack.tau_B).T, [3, 4], n))
    V = apply_symplectic(V, S1)
    # A'' = (A' + B')/sqrt2, B'' = (B' - A')/sqrt2
    return apply_symplectic(V, embed(beamsplitter(0.5), [1, 4], n))


def _circuit(mu: float, attack: MdiAttack, purify_eve: bool = False) -> dict:
    V = relay_state(mu, attack, purify_eve)
    n = V.shape[0] // 2
    # Bell detection: q of B'' = (B' - A')/sqrt2 and p of A'' = (A' + B')/sqrt2
    V1 = condition_homodyne(V, 4, "q")           # drops mode 4, order: a A'' E1 E2 b ...
    V2 = condition_homodyne(V1, 1, "p")          # order: a E1 E2 b ...
    eve_modes = [1, 2] + list(range(4, n - 2))
    return {"ab": select_modes(V2, [0, 3]), "global": V2, "eve": eve_modes}


def purification_check(mu: float, attack: MdiAttack) -> dict:
    """Party-side and Eve-side entropies of the conditional states."""
    out = _circuit(mu, attack, purify_eve=True)
    G = out["global"]
    eve = out["eve"]
    s_ab = von_neumann_entropy(out["ab"])
    s_eve = von_neumann_entropy(select_modes(G, eve))
    # heterodyne on a: mode 0 removed, remaining order b-side shifts down
    Ga = condition_heterodyne(G, 0)
    eve_a = [m - 1 for m in eve]
    b_idx = 2
    s_b = von_neumann_entropy(select_modes(Ga, [b_idx]))
    s_eve_a = von_neumann_entropy(select_modes(Ga, eve_a))
    return {"S_ab": s_ab, "S_eve": s_eve, "S_b_alpha": s_b, "S_eve_alpha": s_eve_a,
            "chi_party": s_ab - s_b, "chi_eve": s_eve - s_eve_a}


# ---------------------------------------------------------------- rates

def _sigma_term(V: np.ndarray) -> float:
    return 1.0 + np.linalg.det(V) + np.trace(V)


def _mi_from_cms(V_ab: np.ndarray, V_b_alpha: np.ndarray) -> float:
    return 0.5 * np.log2(_sigma_term(V_ab[2:, 2:]) / _sigma_term(V_b_alpha))


def mutual_info_mdi(mu: float, attack: MdiAttack, method: str = "closed") -> float:
    V_ab = cm_ab_given_gamma(mu, attack, method)
    return _mi_from_cms(V_ab, cm_b_given_gamma_alpha(mu, attack, method))


def holevo_mdi(mu: float, attack: MdiAttack, method: str = "closed") -> float:
    V_ab = cm_ab_given_gamma(mu, attack, method)
    return von_neumann_entropy(V_ab) - von_neumann_entropy(cm_b_given_gamma_alpha(mu, attack, method))


def keyrate_mdi_lambda(xi: float, mu: float, tau_A: float, tau_B: float,
                       lam: float, lam_p: float) -> KeyRateBreakdown:
    """Rate from (tau_A, tau_B, lambda, lambda'), which fix the closed forms."""
    V_ab = cm_ab_given_gamma_closed(mu, tau_A, tau_B, lam, lam_p)
    V_b = cm_b_given_gamma_alpha_closed(mu, tau_A, tau_B, lam, lam_p)
    try:
        s_ab = symplectic_eigenvalues(V_ab)
        s_b = symplectic_eigenvalues(V_b)
    except GaussianError as exc:
        raise PhysicalityError(str(exc)) from exc
    i_e = (sum(entropy_h(max(v, 1.0)) for v in s_ab) - sum(entropy_h(max(v, 1.0)) for v in s_b))
    i_ab = _mi_from_cms(V_ab, V_b)
    return KeyRateBreakdown(xi * i_ab - i_e, i_ab, i_e, xi,
                            {"average": s_ab, "conditional": s_b})


def keyrate_mdi(xi: float, mu: float, attack: MdiAttack, method: str = "closed") -> KeyRateBreakdown:
    if method == "closed":
        return keyrate_mdi_lambda(xi, mu, attack.tau_A, attack.tau_B, attack.lam, attack.lam_p)
    i_ab = mutual_info_mdi(mu, attack, method)
    i_e = holevo_mdi(mu, attack, method)
    return KeyRateBreakdown(xi * i_ab - i_e, i_ab, i_e, xi)


def optimize_mu(rate_fn, lo: float = 1.01, hi: float = 1e6, xtol: float = 1e-4):
    """Maximize a rate over mu on a log scale.  Returns (mu, rate)."""
    return maximize_log(rate_fn, lo, hi, grid=25, xtol=xtol)


def keyrate_mdi_optimized(xi: float, attack: MdiAttack, lo: float = 1.01, hi: float = 1e6):
    return optimize_mu(lambda mu: keyrate_mdi(xi, mu, attack).rate, lo, hi)


# ---------------------------------------------------------------- three-user star

def star_state(mu: float, omega: float, eta) -> np.ndarray:
    """Conditional CM of (a, b, c) after the three-user relay measurement.

    ``eta`` is a common link transmissivity or one value per link.
    """
    etas = np.broadcast_to(np.asarray(eta, dtype=float), (3,))
    # modes: a A b B c C EA EB EC
    n = 9
    V = direct_sum(tmsv_cm(mu), tmsv_cm(mu), tmsv_cm(mu),
                   thermal_cm(omega), thermal_cm(omega), thermal_cm(omega))
    for (sig, env), e in zip(((1, 6), (3, 7), (5, 8)), etas):
        V = apply_symplectic(V, embed(beamsplitter(e), [sig, env], n))
    V = select_modes(V, range(6))
    n = 6
    # A', B' -> R1+ (mode 1), R1- (mode 3)
    V = apply_symplectic(V, embed(beamsplitter(0.5), [1, 3], n))
    # R1+, C' -> R2+ (mode 1), R2- (mode 5)
    V = apply_symplectic(V, embed(beamsplitter(2.0 / 3.0), [1, 5], n))
    V = condition_homodyne(V, 5, "q")    # R2-: a R2+ b R1- c
    V = condition_homodyne(V, 3, "q")    # R1-: a R2+ b c
    V = condition_homodyne(V, 1, "p")    # R2+: a b c
    return V


def keyrate_star3(xi: float, mu: float, omega: float, eta) -> KeyRateBreakdown:
    V = star_state(mu, omega, eta)
    V_x1 = condition_heterodyne(V, 0)            # b c | gamma, x1
    i_e = von_neumann_entropy(V) - von_neumann_entropy(V_x1)
    sig_b = _sigma_term(select_modes(V, [1])) / _sigma_term(select_modes(V_x1, [0]))
    sig_c = _sigma_term(select_modes(V, [2])) / _sigma_term(select_modes(V_x1, [1]))
    i_ab, i_ac = 0.5 * np.log2(sig_b), 0.5 * np.log2(sig_c)
    i_min = min(i_ab, i_ac)
    return KeyRateBreakdown(xi * i_min - i_e, i_min, i_e, xi,
                            extra={"i_ab": i_ab, "i_ac": i_ac})


def keyrate_star3_optimized(xi: float, omega: float, eta: float,
                            lo: float = 2.0, hi: float = 20.0):
    return maximize_scalar(lambda mu: keyrate_star3(xi, mu, omega, eta).rate, lo, hi,
                           grid=10, xtol=1e-3)
