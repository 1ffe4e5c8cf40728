"""Seeded Monte Carlo sampling of the Gaussian channel and relay models.

Synthetic quadrature records are drawn from numpy's PCG64 generator, fed to
the maximum-likelihood estimators, and compared against the analytic
estimator variances in :mod:`cvqkd.estimation`.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .estimation import (estimator_variances_mdi,
                         estimator_variances_oneway, noise_variance_oneway, zscore)
from .mdi_protocols import MdiAttack

RNG_NAME = "numpy.random.PCG64"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class SampleBatch:
    """Quadrature records for one parameter-estimation block."""
    kind: str
    m: int
    seed: int
    params: dict
    data: dict[str, np.ndarray] = field(repr=False)
    rng: str = RNG_NAME

    def __getitem__(self, key: str) -> np.ndarray:
        return self.data[key]

    def to_csv(self, path: str | Path) -> None:
        keys = list(self.data)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"# kind={self.kind} m={self.m} seed={self.seed} rng={self.rng}"])
            w.writerow(keys)
            for row in zip(*(self.data[k] for k in keys)):
                w.writerow([f"{v:.12g}" for v in row])


# ---------------------------------------------------------------- sampling

def sample_oneway(tau: float, omega: float, V_M: float, V_th: float, m: int,
                  seed: int) -> SampleBatch:
    """M_i ~ N(0, V_M) and B_i = sqrt(tau) M_i + N(0, V_N)."""
    if not 0.0 <= tau <= 1.0 or omega < 1.0 or V_M < 0 or V_th < 0:
        raise ValueError("invalid channel or modulation parameters")
    rng = make_rng(seed)
    V_N = noise_variance_oneway(tau, V_th, omega)
    M = np.sqrt(V_M) * rng.standard_normal(m)
    B = np.sqrt(tau) * M + np.sqrt(V_N) * rng.standard_normal(m)
    params = dict(tau=tau, omega=omega, V_M=V_M, V_th=V_th)
    return SampleBatch("oneway", m, seed, params, {"M": M, "B": B})


def sample_mdi(attack: MdiAttack, V_M: float, m: int, seed: int) -> SampleBatch:
    """Relay outputs built from modulations, vacuum noise and Eve's ancillas.

    Eve's ancilla pairs (E1, E2) are drawn with covariance
    [[omega_A, g], [g, omega_B]] in q and the g' analogue in p.
    """
    at = attack
    if not at.is_physical():
        raise ValueError("attack covariance matrix is not physical")
    rng = make_rng(seed)
    s = np.sqrt(V_M)
    AQ, AP, BQ, BP = (s * rng.standard_normal(m) for _ in range(4))
    vac = rng.standard_normal((4, m))
    Lq = np.linalg.cholesky([[at.omega_A, at.g], [at.g, at.omega_B]])
    Lp = np.linalg.cholesky([[at.omega_A, at.g_p], [at.g_p, at.omega_B]])
    eq = Lq @ rng.standard_normal((2, m))
    ep = Lp @ rng.standard_normal((2, m))
    tA, tB = at.tau_A, at.tau_B
    rA, rB = np.sqrt(1.0 - tA), np.sqrt(1.0 - tB)
    r2 = np.sqrt(0.5)
    RQ = r2 * (np.sqrt(tB) * (BQ + vac[0]) - np.sqrt(tA) * (AQ + vac[1])
               + rB * eq[1] - rA * eq[0])
    RP = r2 * (np.sqrt(tB) * (BP + vac[2]) + np.sqrt(tA) * (AP + vac[3])
               + rB * ep[1] + rA * ep[0])
    params = dict(tau_A=tA, tau_B=tB, omega_A=at.omega_A, omega_B=at.omega_B,
                  g=at.g, g_p=at.g_p, V_M=V_M)
    data = {"AQ": AQ, "AP": AP, "BQ": BQ, "BP": BP, "RQ": RQ, "RP": RP}
    return SampleBatch("mdi", m, seed, params, data)


# ---------------------------------------------------------------- estimators
#
# Every estimator below is a function of second-moment sums only, so the
# record-level path and the exact Wishart path share one implementation.

def _oneway_from_moments(W: np.ndarray, m: int, V_M: float, V_th: float):
    """W = sums over records of [[M M, M B], [B M, B B]]; leading axes allowed."""
    SMM, SMB, SBB = W[..., 0, 0], W[..., 0, 1], W[..., 1, 1]
    C = SMB / m
    tau = C * C / (V_M * V_M)
    a = np.sqrt(tau)
    V_N = (SBB - 2.0 * a * SMB + a * a * SMM) / m
    return tau, V_N - tau * V_th - 1.0


def mle_oneway(batch: SampleBatch) -> tuple[float, float]:
    """(tau~, V~_eps) with V~_eps = V~_N - tau~ V_th - 1.

    A negative V~_eps signals an unphysical (e.g. noiseless) record.
    """
    if batch.m < 2:
        raise ValueError("need m >= 2")
    V_M, V_th = batch.params["V_M"], batch.params["V_th"]
    if V_M <= 0:
        raise ValueError("transmissivity is not identifiable without modulation")
    X = np.stack([batch["M"], batch["B"]])
    tau, V_eps = _oneway_from_moments(X @ X.T, batch.m, V_M, V_th)
    return float(tau), float(V_eps)


def _mdi_from_moments(Wq: np.ndarray, Wp: np.ndarray, m: int, V_M: float):
    """Wq, Wp = sums of outer products of (A, B, R) for each quadrature.

    Returns (tau~_A, tau~_B, V~_Q_eps, V~_P_eps); Q and P estimates of each
    transmissivity are merged with inverse-variance weights evaluated at the
    plug-in estimates.
    """
    def tau_hat(W, i):
        C = W[..., i, 2] / m
        return 2.0 * C * C / (V_M * V_M)

    def noise(W, tA, tB, sign):
        # R - (sqrt(tB) B + sign sqrt(tA) A)/sqrt(2), squared and averaged
        c = np.stack([-sign * np.sqrt(tA / 2.0), -np.sqrt(tB / 2.0), np.ones_like(tA)], -1)
        return np.einsum("...i,...ij,...j->...", c, W, c) / m

    def var_tau(ta, tb, vn):
        c = ta + 0.5 * tb
        return 8.0 * ta / m * c * (1.0 + vn / (c * V_M))

    def merge(xq, xp, vq, vp):
        return (xq * vp + xp * vq) / (vq + vp)

    tAQ, tAP, tBQ, tBP = tau_hat(Wq, 0), tau_hat(Wp, 0), tau_hat(Wq, 1), tau_hat(Wp, 1)
    tA, tB = 0.5 * (tAQ + tAP), 0.5 * (tBQ + tBP)
    VQN, VPN = noise(Wq, tA, tB, -1.0), noise(Wp, tA, tB, 1.0)
    tA, tB = (merge(tAQ, tAP, var_tau(tA, tB, VQN), var_tau(tA, tB, VPN)),
              merge(tBQ, tBP, var_tau(tB, tA, VQN), var_tau(tB, tA, VPN)))
    VQN, VPN = noise(Wq, tA, tB, -1.0), noise(Wp, tA, tB, 1.0)
    return tA, tB, VQN - 1.0, VPN - 1.0


def mle_mdi(batch: SampleBatch) -> tuple[float, float, float, float]:
    """(tau~_A, tau~_B, V~_Q_eps, V~_P_eps) from relay records."""
    if batch.m < 2:
        raise ValueError("need m >= 2")
    d = batch.data
    Xq = np.stack([d["AQ"], d["BQ"], d["RQ"]])
    Xp = np.stack([d["AP"], d["BP"], d["RP"]])
    out = _mdi_from_moments(Xq @ Xq.T, Xp @ Xp.T, batch.m, batch.params["V_M"])
    return tuple(float(x) for x in out)


# ---------------------------------------------------------------- exact moment sampling

def _wishart(rng: np.random.Generator, cov: np.ndarray, m: int, size: int) -> np.ndarray:
    """Sums of m outer products of N(0, cov) vectors, via the Bartlett decomposition."""
    return stats.wishart(df=m, scale=cov).rvs(size=size, random_state=rng).reshape(
        size, *cov.shape)


def moments_oneway(tau: float, omega: float, V_M: float, V_th: float, m: int,
                   trials: int, seed: int) -> np.ndarray:
    """Exact draws of the (M, B) moment sums for ``trials`` independent blocks."""
    V_N = noise_variance_oneway(tau, V_th, omega)
    L = np.array([[1.0, 0.0], [np.sqrt(tau), 1.0]])
    W = _wishart(make_rng(seed), np.diag([V_M, V_N]), m, trials)
    return L @ W @ L.T


def moments_mdi(attack: MdiAttack, V_M: float, m: int, trials: int, seed: int):
    """Exact draws of the (A, B, R) moment sums per quadrature."""
    a = attack
    rng = make_rng(seed)
    sA, sB = np.sqrt(a.tau_A / 2.0), np.sqrt(a.tau_B / 2.0)
    out = []
    for sign, VN in ((-1.0, 1.0 + a.V_Q_eps), (1.0, 1.0 + a.V_P_eps)):
        L = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [sign * sA, sB, 1.0]])
        W = _wishart(rng, np.diag([V_M, V_M, VN]), m, trials)
        out.append(L @ W @ L.T)
    return out[0], out[1]


# ---------------------------------------------------------------- studies

def _seeds(seed: int, trials: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1, np.uint64)[0]) for c in ss.spawn(trials)]


def estimator_study_oneway(tau: float, omega: float, V_M: float, V_th: float,
                           m: int, trials: int, seed: int = 0, exact: bool = False) -> dict:
    """Empirical mean/variance of (tau~, V~_eps) next to the analytic variances.

    ``exact=True`` draws the moment sums from their Wishart law instead of
    generating every record; the estimator distribution is identical.
    """
    if exact:
        est = np.stack(_oneway_from_moments(
            moments_oneway(tau, omega, V_M, V_th, m, trials, seed), m, V_M, V_th), -1)
    else:
        est = np.array([mle_oneway(sample_oneway(tau, omega, V_M, V_th, m, s))
                        for s in _seeds(seed, trials)])
    var_tau, var_eps = estimator_variances_oneway(tau, V_M, V_th, omega, m)
    return {
        "mean_tau": est[:, 0].mean(), "mean_V_eps": est[:, 1].mean(),
        "var_tau": est[:, 0].var(ddof=1), "var_V_eps": est[:, 1].var(ddof=1),
        "var_tau_analytic": var_tau, "var_V_eps_analytic": var_eps,
        "V_eps_true": (1.0 - tau) * (omega - 1.0), "trials": trials, "m": m,
    }


def estimator_study_mdi(attack: MdiAttack, V_M: float, m: int, trials: int,
                        seed: int = 0, exact: bool = False) -> dict:
    if exact:
        Wq, Wp = moments_mdi(attack, V_M, m, trials, seed)
        est = np.stack(_mdi_from_moments(Wq, Wp, m, V_M), -1)
    else:
        est = np.array([mle_mdi(sample_mdi(attack, V_M, m, s)) for s in _seeds(seed, trials)])
    a = attack
    sA, sB, sQ, sP = estimator_variances_mdi(a.tau_A, a.tau_B, a.omega_A, a.omega_B,
                                             a.g, a.g_p, V_M, m)
    emp = est.var(axis=0, ddof=1)
    return {
        "mean": est.mean(axis=0), "var": emp,
        "var_analytic": np.array([sA, sB, sQ, sP]),
        "true": np.array([a.tau_A, a.tau_B, a.V_Q_eps, a.V_P_eps]),
        "trials": trials, "m": m,
    }


@dataclass
class CoverageResult:
    miss_tau: float
    miss_V_eps: float
    miss_rate: float
    trials: int


def coverage_test(params: dict, eps_PE: float, trials: int, seed: int = 0,
                  sigma_scale: float = 1.0) -> CoverageResult:
    """Fraction of blocks whose worst-case interval misses the true value.

    ``params`` holds tau, omega, V_M, V_th and m.  Interval widths use the
    analytic variances evaluated at the point estimates, scaled by
    ``sigma_scale`` (0 collapses the interval onto the estimate).
    """
    if trials < 100:
        raise ValueError("coverage needs at least 100 trials")
    tau, omega = params["tau"], params["omega"]
    V_M, V_th, m = params["V_M"], params.get("V_th", 0.0), int(params["m"])
    z = zscore(eps_PE)
    V_eps_true = (1.0 - tau) * (omega - 1.0)
    miss_t = miss_v = miss_any = 0
    for s in _seeds(seed, trials):
        t_hat, v_hat = mle_oneway(sample_oneway(tau, omega, V_M, V_th, m, s))
        om_hat = 1.0 + max(v_hat, 0.0) / max(1.0 - t_hat, 1e-12)
        vt, ve = estimator_variances_oneway(min(max(t_hat, 0.0), 1.0), V_M, V_th, om_hat, m)
        lo = t_hat - sigma_scale * z * np.sqrt(vt)
        up = v_hat + sigma_scale * z * np.sqrt(ve)
        a, b = tau < lo, V_eps_true > up
        miss_t += a
        miss_v += b
        miss_any += a or b
    return CoverageResult(miss_t / trials, miss_v / trials, miss_any / trials, trials)
