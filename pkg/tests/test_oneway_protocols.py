import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvqkd.gaussian_core import entropy_h
from cvqkd.oneway_protocols import (
    LossyChannel, OneWaySpec, db_to_tau, holevo_oneway, keyrate_infinite_modulation,
    keyrate_oneway, mutual_info_oneway, security_threshold, tau_to_db,
    thermal_photons_from_frequency,
)

VARIANTS = [("homodyne", "direct"), ("heterodyne", "direct"),
            ("homodyne", "reverse"), ("heterodyne", "reverse")]


def test_spec_aliases_and_validation():
    s = OneWaySpec("het", "rr")
    assert (s.detection, s.direction, s.variant) == ("heterodyne", "reverse", "RR-het")
    with pytest.raises(ValueError):
        OneWaySpec("photon", "rr")
    with pytest.raises(ValueError):
        OneWaySpec(xi=1.2)
    with pytest.raises(ValueError):
        LossyChannel(1.5)
    with pytest.raises(ValueError):
        LossyChannel(0.5, 0.9)


def test_excess_noise_roundtrip():
    ch = LossyChannel.from_excess_noise(0.3, 0.05)
    assert ch.excess_noise == pytest.approx(0.05)
    assert ch.V_eps == pytest.approx(0.3 * 0.05)
    assert db_to_tau(tau_to_db(0.37)) == pytest.approx(0.37)
    assert db_to_tau(10.0) == pytest.approx(0.1)


def test_mutual_information_values():
    ch = LossyChannel(0.5, 1.0)
    # Bob's variance 0.5*11 + 0.5 = 6 over a unit conditional variance
    assert mutual_info_oneway(OneWaySpec("hom", V_M=10.0), ch) == pytest.approx(0.5 * np.log2(6))
    assert mutual_info_oneway(OneWaySpec("het", V_M=10.0), ch) == pytest.approx(np.log2(7 / 2))


@pytest.mark.parametrize("det,dirn", VARIANTS)
@settings(max_examples=25, deadline=None)
@given(tau=st.floats(0.02, 0.98), omega=st.floats(1.0, 3.0), vm=st.floats(0.1, 1e3),
       vth=st.floats(0.0, 5.0))
def test_closed_form_matches_circuit(det, dirn, tau, omega, vm, vth):
    spec = OneWaySpec(det, dirn, vm, vth)
    ch = LossyChannel(tau, omega)
    a = holevo_oneway(spec, ch, "closed")
    b = holevo_oneway(spec, ch, "circuit")
    assert a == pytest.approx(b, abs=1e-8)


@pytest.mark.parametrize("det,dirn", VARIANTS)
def test_lossless_channel_leaks_nothing(det, dirn):
    spec = OneWaySpec(det, dirn, 10.0)
    r = keyrate_oneway(spec, LossyChannel(1.0))
    assert r.i_e == 0.0
    assert r.rate == pytest.approx(r.i_ab)


def test_xi_scales_mutual_information_only():
    ch = LossyChannel(0.6, 1.1)
    a = keyrate_oneway(OneWaySpec(V_M=5.0, xi=1.0), ch)
    b = keyrate_oneway(OneWaySpec(V_M=5.0, xi=0.9), ch)
    assert b.i_e == pytest.approx(a.i_e)
    assert b.rate == pytest.approx(0.9 * a.i_ab - a.i_e)
    assert b.as_dict()["xi"] == 0.9


@pytest.mark.parametrize("det,dirn", VARIANTS)
@settings(max_examples=20, deadline=None)
@given(tau=st.floats(0.05, 0.95), eps=st.floats(0.0, 0.2), deps=st.floats(0.01, 0.2))
def test_rate_decreases_with_excess_noise(det, dirn, tau, eps, deps):
    spec = OneWaySpec(det, dirn, 20.0)
    r1 = keyrate_oneway(spec, LossyChannel.from_excess_noise(tau, eps)).rate
    r2 = keyrate_oneway(spec, LossyChannel.from_excess_noise(tau, eps + deps)).rate
    assert r2 <= r1 + 1e-12


def test_rr_homodyne_pure_loss_limit():
    # V_M -> inf at omega = 1: R = -1/2 log2(1 - tau)
    for tau in (0.1, 0.5, 0.9):
        assert keyrate_infinite_modulation("RR-hom", tau) == pytest.approx(-0.5 * np.log2(1 - tau))


def test_dr_het_pure_loss_limit():
    # I_AB -> log2(tau V_M / 2) and chi -> h((1 - tau) V_M + 1) - h(1); difference -> log2(tau/(e(1 - tau)))
    for tau in (0.6, 0.8):
        assert keyrate_infinite_modulation("DR-het", tau) == pytest.approx(
            np.log2(tau / (np.e * (1 - tau))), abs=1e-12)


@pytest.mark.parametrize("variant,det,dirn", [("DR-hom", "hom", "dr"), ("DR-het", "het", "dr"),
                                              ("RR-hom", "hom", "rr"), ("RR-het", "het", "rr")])
@pytest.mark.parametrize("tau", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("omega", [1.0, 1.3])
def test_infinite_modulation_is_limit(variant, det, dirn, tau, omega):
    finite = keyrate_oneway(OneWaySpec(det, dirn, 1e8), LossyChannel(tau, omega)).rate
    assert finite == pytest.approx(keyrate_infinite_modulation(variant, tau, omega), abs=1e-4)


def test_infinite_modulation_edges():
    assert keyrate_infinite_modulation("RR-het", 1.0) == np.inf
    assert keyrate_infinite_modulation("RR-het", 0.0) == -np.inf
    with pytest.raises(ValueError):
        keyrate_infinite_modulation("XX-hom", 0.5)


def test_security_threshold_root():
    spec = OneWaySpec("hom", "rr", 20.0)
    res = security_threshold(spec, 0.5)
    assert res.bracketed
    assert abs(res.residual) < 1e-5
    r_in = keyrate_oneway(spec, LossyChannel.from_excess_noise(0.5, 0.9 * res.eps)).rate
    assert r_in > 0


def test_security_threshold_no_key():
    # DR beyond 3 dB has no key even without excess noise
    res = security_threshold(OneWaySpec("hom", "dr", 1e4), 0.3)
    assert res.eps == 0.0 and res.residual <= 0.0


def test_thermal_photons():
    from scipy import constants
    f, T = 1e9, 300.0
    x = constants.h * f / (constants.k * T)
    assert thermal_photons_from_frequency(f, T) == pytest.approx(1.0 / (np.exp(x) - 1.0))
    # Rayleigh-Jeans regime: n ~ kT / (h f) ~ 6250
    assert thermal_photons_from_frequency(f, T) == pytest.approx(6250, rel=1e-3)
    assert thermal_photons_from_frequency(1e15, 1.0) == 0.0
    with pytest.raises(ValueError):
        thermal_photons_from_frequency(-1.0)


def test_breakdown_spectra_are_physical():
    r = keyrate_oneway(OneWaySpec("het", "rr", 10.0, 1.0), LossyChannel(0.4, 1.2))
    for nus in r.spectra.values():
        assert np.all(np.asarray(nus) >= 1.0 - 1e-12)
    chi = (sum(entropy_h(v) for v in r.spectra["average"])
           - sum(entropy_h(v) for v in r.spectra["conditional"]))
    assert chi == pytest.approx(r.i_e)
