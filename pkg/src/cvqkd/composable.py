"""Composable finite-size rates for the CV-MDI relay.

Parameter estimation uses chi-squared tail bounds instead of the central
limit theorem.  The estimated quantities are the entries of the classical
covariance matrix [[x I, z I], [z I, y I]] of Alice's and Bob's
relay-corrected variables; worst-case entries feed the key rate
``r0 = xi I_AB - I_E`` and the collective or coherent-attack bounds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from ._optim import maximize_log
from .gaussian_core import (GaussianError, I2, Z2, condition_heterodyne,
                            is_valid_cm, von_neumann_entropy)
from .mdi_protocols import PhysicalityError

# order of the variables in a MomentSet / moment-sum matrix
VARS = ("QA", "PA", "QB", "PB", "QZ", "PZ")


class DegenerateRelayError(GaussianError):
    pass


@dataclass(frozen=True)
class EpsilonBudget:
    eps: float
    eps_s: float
    eps_EC: float
    eps_PE: float
    p: float = 0.99
    d: int = 1

    def __post_init__(self):
        for name in ("eps", "eps_s", "eps_EC", "eps_PE", "p"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name}={v} outside (0, 1)")

    @property
    def eps_prime(self) -> float:
        return self.eps + self.eps_s + self.eps_EC + self.eps_PE

    def eps_coherent(self, K: float) -> float:
        """eps'' = K^4 eps' / 50."""
        return K ** 4 / 50.0 * self.eps_prime

    @classmethod
    def equal(cls, e: float, p: float = 0.99, d: int = 1) -> "EpsilonBudget":
        return cls(e, e, e, e, p, d)

    @classmethod
    def for_target(cls, K: float, target: float = 1e-20, p: float = 0.99,
                   d: int = 1) -> "EpsilonBudget":
        """Equal components with K^4/50 * 4e strictly below ``target``."""
        e = 0.5 * target * 50.0 / (4.0 * float(K) ** 4)
        return cls.equal(e, p, d)


@dataclass
class MomentSet:
    """Second moments of (Q'_A, P'_A, Q'_B, P'_B, Q_Z, P_Z) as a 6x6 matrix."""
    M: np.ndarray

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=float)
        if self.M.shape != (6, 6):
            raise ValueError("moment matrix must be 6x6")
        if np.any(np.diag(self.M) <= 0):
            raise ValueError("variances must be positive")

    def __call__(self, a: str, b: str) -> float:
        return float(self.M[VARS.index(a), VARS.index(b)])


# ---------------------------------------------------------------- moments

def displacement_coeffs(moments: MomentSet) -> dict[str, tuple[float, float]]:
    """Optimal affine corrections g(gamma) = u Q_Z + v P_Z for each variable."""
    m = moments
    qq, pp, qp = m("QZ", "QZ"), m("PZ", "PZ"), m("QZ", "PZ")
    den = qq * pp - qp * qp
    if den <= 1e-14 * qq * pp:
        raise DegenerateRelayError("relay outputs are linearly dependent")
    out = {}
    for s in VARS[:4]:
        sq, sp = m(s, "QZ"), m(s, "PZ")
        out[s] = ((sq * pp - sp * qp) / den, (sp * qq - sq * qp) / den)
    return out


def cloner_moments(tau_A: float, tau_B: float, xi_A: float, xi_B: float,
                   V_M: float) -> MomentSet:
    """Relay statistics under an entangling-cloner attack on both links."""
    if not (0.0 < tau_A <= 1.0 and 0.0 < tau_B <= 1.0) or xi_A < 0 or xi_B < 0:
        raise ValueError("invalid channel parameters")
    nu = 0.5 * (tau_A + tau_B) * V_M + 1.0 + 0.5 * (xi_A + xi_B)
    a, b = np.sqrt(tau_A / 2.0) * V_M, np.sqrt(tau_B / 2.0) * V_M
    M = np.diag([V_M, V_M, V_M, V_M, nu, nu]).astype(float)
    for i, j, v in ((0, 4, -a), (1, 5, a), (2, 4, b), (3, 5, b)):
        M[i, j] = M[j, i] = v
    if V_M == 0:
        M[:4, :4] = np.eye(4)  # keep the MomentSet invariant; unused downstream
    return MomentSet(M)


def cloner_nu(tau_A, tau_B, xi_A, xi_B, V_M) -> float:
    return 0.5 * (tau_A + tau_B) * V_M + 1.0 + 0.5 * (xi_A + xi_B)


def w_coeffs(coeffs: dict) -> tuple[float, float, float]:
    (uqa, vqa), (upa, vpa) = coeffs["QA"], coeffs["PA"]
    (uqb, vqb), (upb, vpb) = coeffs["QB"], coeffs["PB"]
    w1 = 0.5 * (uqa * uqb + upa * upb)
    w2 = 0.5 * (vqa * vqb + vpa * vpb)
    w3 = 0.5 * (uqa * vqb + vqa * uqb + upa * vpb + vpa * upb)
    return w1, w2, w3


# ---------------------------------------------------------------- tail bounds

def tail_t(n: float, eps_PE: float) -> float:
    """t = sqrt(8 ln(8/eps_PE) / n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return float(np.sqrt(8.0 * np.log(8.0 / eps_PE) / n))


def union_failure(n: float, t: float) -> float:
    """Sum of the x, y and z tail probabilities: (2 + 2 + 4) exp(-n t^2 / 8)."""
    return 8.0 * np.exp(-n * t * t / 8.0)


@dataclass
class WorstCaseCM:
    x_max: float
    y_max: float
    z_min: float
    t: float
    candidates: list = field(default_factory=list, repr=False)


def worst_case_cm_analytic(tau_A: float, tau_B: float, xi_A: float, xi_B: float,
                           V_M: float, n: float, eps_PE: float) -> WorstCaseCM:
    """Closed-form worst case for the entangling-cloner statistics."""
    t = tail_t(n, eps_PE)
    if t >= 1.0:
        raise ValueError("block too small: tail parameter t >= 1")
    nu = cloner_nu(tau_A, tau_B, xi_A, xi_B, V_M)
    return WorstCaseCM(
        x_max=V_M / (1.0 - t) * (1.0 - 0.5 * tau_A * V_M / nu),
        y_max=V_M / (1.0 - t) * (1.0 - 0.5 * tau_B * V_M / nu),
        z_min=np.sqrt(tau_A * tau_B) * V_M * V_M / (2.0 * (1.0 + t) * nu),
        t=t,
    )


def worst_case_cm(sums: np.ndarray, n: int, eps_PE: float,
                  conjugate: bool = True) -> WorstCaseCM:
    """Worst case from empirical moment sums of (Q'_A, P'_A, Q'_B, P'_B, Q_Z, P_Z).

    ``sums[i, j]`` is the sum over the n records of X_i X_j.  The displacement
    coefficients are estimated from the same data; z_min is minimized over all
    eight sign assignments of the tail bounds.

    The relay correlates Bob's p with Alice's conjugated p, so by default
    P'_A is sign-flipped before estimation; without it the q and p
    correlations cancel in z.
    """
    t = tail_t(n, eps_PE)
    if t >= 1.0:
        raise ValueError("block too small: tail parameter t >= 1")
    S = np.asarray(sums, dtype=float) / n
    if conjugate:
        D = np.ones(6)
        D[VARS.index("PA")] = -1.0
        S = S * np.outer(D, D)
    coeffs = displacement_coeffs(MomentSet(S))
    iz = (VARS.index("QZ"), VARS.index("PZ"))

    def corrected_var(name):
        u, v = coeffs[name]
        c = np.zeros(6)
        c[VARS.index(name)] = 1.0
        c[iz[0]], c[iz[1]] = -u, -v
        return c @ S @ c

    x = 0.5 * (corrected_var("QA") + corrected_var("PA"))
    y = 0.5 * (corrected_var("QB") + corrected_var("PB"))
    w1, w2, w3 = w_coeffs(coeffs)
    qq, pp, qp = S[iz[0], iz[0]], S[iz[1], iz[1]], S[iz[0], iz[1]]
    plus, minus = qq + pp + 2.0 * qp, qq + pp - 2.0 * qp
    cands = []
    for s1, s2, s3 in product((-1, 1), repeat=3):
        val = (w1 * qq / (1.0 + s1 * t) + w2 * pp / (1.0 + s2 * t)
               + w3 * (plus / (4.0 * (1.0 + s3 * t)) - minus / (4.0 * (1.0 - s3 * t))))
        cands.append(abs(val))
    return WorstCaseCM(x / (1.0 - t), y / (1.0 - t), min(cands), t, cands)


# ---------------------------------------------------------------- rates

def quantum_cm(x: float, y: float, z: float, V_M: float) -> np.ndarray:
    """Two-mode CM of the local modes (a, b) matching the classical (x, y, z).

    Heterodyne outcomes rescaled by kappa^2 = V_M/(V_M + 2) reproduce the
    prepared displacements, so x = kappa^2 (V_a + 1) and z = kappa^2 c.  The
    quantum cross block is c Z: Alice's p outcome is conjugated with respect
    to her displacement, which is why the classical block reads z I.
    """
    k2 = V_M / (V_M + 2.0)
    a, b, c = x / k2 - 1.0, y / k2 - 1.0, z / k2
    return np.block([[a * I2, c * Z2], [c * Z2, b * I2]])


def mutual_info_cm(x: float, y: float, z: float) -> float:
    """Gaussian mutual information of two quadrature pairs, summed."""
    det = x * y - z * z
    if det <= 0:
        raise PhysicalityError("classical CM is not positive definite")
    return float(np.log2(x * y / det))


@dataclass
class ComposableRate:
    rate: float
    raw: float
    r0: float
    i_ab: float
    i_e: float
    extra: dict = field(default_factory=dict)


def rate_from_cm(x: float, y: float, z: float, xi: float, V_M: float,
                 condition_on: str = "alice") -> ComposableRate:
    """r0 = xi I_AB - I_E for the Gaussian state matching (x, y, z).

    I_E = S(ab) - S(rest | heterodyne on the reference party); ``alice`` is
    the relay convention in which Bob infers Alice's variable.
    """
    V = quantum_cm(x, y, z, V_M)
    if not is_valid_cm(V):
        raise PhysicalityError("estimated CM violates the uncertainty relation")
    mode = {"alice": 0, "bob": 1}[condition_on]
    i_ab = mutual_info_cm(x, y, z)
    i_e = von_neumann_entropy(V) - von_neumann_entropy(condition_heterodyne(V, mode))
    r0 = xi * i_ab - i_e
    return ComposableRate(max(r0, 0.0), r0, r0, i_ab, i_e)


def delta_aep(delta: float, d: int) -> float:
    """4 (d + 1) sqrt(log2(2 / delta^2))."""
    return 4.0 * (d + 1) * np.sqrt(np.log2(2.0) - 2.0 * np.log2(delta))


def _corrections(n: float, budget: EpsilonBudget, n_eff: float) -> float:
    b = budget
    delta = 2.0 * b.p * b.eps_s / 3.0
    return (-np.sqrt(n_eff) / n * delta_aep(delta, b.d)
            + np.log2(b.p - delta) / n + 2.0 * np.log2(2.0 * b.eps) / n)


@dataclass(frozen=True)
class CloneParams:
    tau_A: float
    tau_B: float
    xi_A: float = 0.0
    xi_B: float = 0.0
    xi: float = 0.95

    @classmethod
    def from_db(cls, db_A: float, db_B: float, **kw) -> "CloneParams":
        return cls(10 ** (-db_A / 10), 10 ** (-db_B / 10), **kw)


def r0_worst(n: float, V_M: float, prm: CloneParams, eps_PE: float,
             condition_on: str = "alice") -> ComposableRate:
    wc = worst_case_cm_analytic(prm.tau_A, prm.tau_B, prm.xi_A, prm.xi_B, V_M, n, eps_PE)
    res = rate_from_cm(wc.x_max, wc.y_max, wc.z_min, prm.xi, V_M, condition_on)
    res.extra.update(x_max=wc.x_max, y_max=wc.y_max, z_min=wc.z_min, t=wc.t)
    return res


def keyrate_composable_collective(n: float, budget: EpsilonBudget, prm: CloneParams,
                                  V_M: float, condition_on: str = "alice") -> ComposableRate:
    if n < 1e3:
        raise ValueError("n must be >= 1e3")
    base = r0_worst(n, V_M, prm, budget.eps_PE, condition_on)
    raw = base.r0 + _corrections(n, budget, n)
    return ComposableRate(max(raw, 0.0), raw, base.r0, base.i_ab, base.i_e, base.extra)


def keyrate_composable_coherent(n: float, k: float, K: float, budget: EpsilonBudget,
                                prm: CloneParams, V_M: float,
                                condition_on: str = "alice") -> ComposableRate:
    """Coherent-attack bound with k energy-test signals and K ~ n."""
    if not 0 <= k < n:
        raise ValueError("need 0 <= k < n")
    base = r0_worst(n, V_M, prm, budget.eps_PE, condition_on)
    raw = ((n - k) / n * base.r0 + _corrections(n, budget, n - k)
           - 2.0 * np.log2((K + 4.0) / 4.0) / n)
    extra = dict(base.extra, k=k, K=K, eps_coherent=budget.eps_coherent(K))
    return ComposableRate(max(raw, 0.0), raw, base.r0, base.i_ab, base.i_e, extra)


def _safe(fn):
    def g(*a, **kw):
        try:
            return fn(*a, **kw).raw
        except (GaussianError, ValueError):
            return -np.inf
    return g


def optimize_collective(n: float, prm: CloneParams, budget: EpsilonBudget | None = None,
                        vm_bounds=(0.1, 1e4)):
    """Maximize the collective bound over V_M.  Returns (V_M, rate)."""
    budget = budget or EpsilonBudget.for_target(n)
    f = _safe(keyrate_composable_collective)
    return maximize_log(lambda vm: f(n, budget, prm, vm), *vm_bounds, grid=21)


def optimize_coherent(n: float, prm: CloneParams, budget: EpsilonBudget | None = None,
                      K: float | None = None, k_min: float = 0.0, vm_bounds=(0.1, 1e4)):
    """Maximize the coherent bound over V_M and k in [k_min, n/2].

    Returns ({"V_M", "k"}, rate).  The bound decreases monotonically in k, so
    the optimum sits at ``k_min``; the search is kept for non-default inputs.
    """
    K = n if K is None else K
    budget = budget or EpsilonBudget.for_target(K)
    f = _safe(keyrate_composable_coherent)

    def over_vm(k):
        return maximize_log(lambda vm: f(n, k, K, budget, prm, vm), *vm_bounds, grid=21)

    ks = np.unique(np.concatenate([[k_min], np.geomspace(max(k_min, 1.0), n / 2, 8)]))
    best = max(((k, *over_vm(k)) for k in ks), key=lambda r: r[2])
    return {"V_M": best[1], "k": best[0]}, best[2]
