import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from cvqkd.gaussian_core import is_valid_cm
from cvqkd.mdi_protocols import (
    MdiAttack, attack_from_excess, cm_ab_given_gamma, cm_b_given_gamma_alpha,
    keyrate_mdi, keyrate_mdi_optimized, keyrate_star3, mutual_info_mdi,
    omega_from_excess, optimal_attack, optimal_g, purification_check, star_state,
)


def test_attack_validation():
    with pytest.raises(ValueError):
        MdiAttack(0.0, 0.5)
    with pytest.raises(ValueError):
        MdiAttack(0.5, 0.5, 0.9, 1.0)


def test_lossless_pure_example():
    mu = 2.0
    at = MdiAttack(1.0, 1.0)
    V = cm_ab_given_gamma(mu, at)
    # theta = 2 mu = 4, so the diagonal is mu - (mu^2 - 1)/4 and the cross term (mu^2 - 1)/4
    assert np.allclose(np.diag(V), 1.25)
    assert V[0, 2] == pytest.approx(0.75) and V[1, 3] == pytest.approx(-0.75)
    # Bob's mode is pure once Alice's mode is heterodyned
    assert np.allclose(cm_b_given_gamma_alpha(mu, at), np.eye(2))
    expected = 0.5 * np.log2((1 + 1.25 ** 2 + 2 * 1.25) / 4.0)
    assert expected == pytest.approx(0.169925001442, abs=1e-12)
    for method in ("closed", "circuit"):
        assert mutual_info_mdi(mu, at, method) == pytest.approx(expected, abs=1e-12)


attacks = st.builds(
    lambda ta, tb, wa, wb, frac, sign: (ta, tb, wa, wb, frac, sign),
    st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.floats(1.0, 2.0), st.floats(1.0, 2.0),
    st.floats(0.0, 1.0), st.sampled_from([-1.0, 1.0]))


def _attack(p):
    ta, tb, wa, wb, frac, sign = p
    g = frac * optimal_g(wa, wb)
    return MdiAttack(ta, tb, wa, wb, sign * g, -sign * g)


@settings(max_examples=200, deadline=None)
@given(attacks, st.floats(1.01, 200.0))
def test_closed_cms_match_circuit(p, mu):
    at = _attack(p)
    assume(at.is_physical())
    for fn in (cm_ab_given_gamma, cm_b_given_gamma_alpha):
        a, b = fn(mu, at, "closed"), fn(mu, at, "circuit")
        assert np.allclose(a, b, rtol=1e-9, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(attacks, st.floats(1.01, 100.0))
def test_eve_purification_identity(p, mu):
    at = _attack(p)
    assume(at.is_physical())
    out = purification_check(mu, at)
    assert out["chi_party"] == pytest.approx(out["chi_eve"], abs=1e-8)
    assert out["S_ab"] == pytest.approx(out["S_eve"], abs=1e-8)


def test_optimal_attack_on_physical_boundary():
    at = optimal_attack(0.7, 0.8, 1.2, 1.5)
    assert at.is_physical()
    assert at.g == -at.g_p > 0
    over = MdiAttack(0.7, 0.8, 1.2, 1.5, 1.05 * at.g, -1.05 * at.g)
    assert not over.is_physical()


def test_omega_from_excess():
    tau, eps = 0.4, 0.02
    w = omega_from_excess(tau, eps)
    assert (1 - tau) * (w - 1) / tau == pytest.approx(eps)
    assert omega_from_excess(1.0, 0.5) == 1.0
    at = attack_from_excess(0.4, 0.6, eps, eps, correlated=False)
    assert at.g == 0.0 and at.omega_A == pytest.approx(w)


def test_keyrate_closed_matches_circuit():
    at = attack_from_excess(0.98, 0.5, 0.01, 0.01)
    for mu in (2.0, 30.0, 1e3):
        a = keyrate_mdi(0.98, mu, at, "closed")
        b = keyrate_mdi(0.98, mu, at, "circuit")
        assert a.rate == pytest.approx(b.rate, abs=1e-8)


def test_rate_falls_with_loss_and_optimizer():
    rates = [keyrate_mdi_optimized(1.0, optimal_attack(0.95, tb, 1.0, 1.0))[1]
             for tb in (0.9, 0.7, 0.5)]
    assert rates[0] > rates[1] > rates[2]
    mu, best = keyrate_mdi_optimized(1.0, optimal_attack(0.95, 0.7, 1.0, 1.0))
    grid = [keyrate_mdi(1.0, m, optimal_attack(0.95, 0.7, 1.0, 1.0)).rate
            for m in np.geomspace(1.01, 1e6, 200)]
    assert best >= max(grid) - 1e-6


def test_symmetric_configuration_has_no_key_at_high_loss():
    # symmetric relay loses all key well before 3 dB per link
    r = keyrate_mdi_optimized(1.0, optimal_attack(0.8, 0.8, 1.0, 1.0))[1]
    assert r < 0


def test_star_state_and_rate():
    V = star_state(5.0, 1.0, 0.99)
    assert V.shape == (6, 6) and is_valid_cm(V)
    assert np.allclose(star_state(5.0, 1.0, [0.99, 0.99, 0.99]), V)
    hi = keyrate_star3(1.0, 5.0, 1.0, 0.995).rate
    lo = keyrate_star3(1.0, 5.0, 1.0, 0.95).rate
    assert hi > lo
    r = keyrate_star3(1.0, 5.0, 1.0, 0.99)
    assert r.i_ab == min(r.extra["i_ab"], r.extra["i_ac"])
