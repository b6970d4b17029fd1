import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eitlab.params import mhz, apparatus_defaults
from eitlab.susceptibility import (BranchJumpError, check_branch_continuity, chi_canonical,
                                   chi_continuous, chi_discrete, chi_quadrature, log_ratio,
                                   matched_single_ion_coupling, sample_disk_positions,
                                   susceptibility, theta)

G, G0 = mhz(12.6), mhz(1e-3)


def test_theta_values():
    assert theta(0.0, G, G0, 0.0) == 0
    th = theta(0.0, G, G0, mhz(4.1))
    assert th.imag == 0
    assert th.real == pytest.approx((4.1**2 / 2) / (12.6 * 0.001), rel=1e-12)
    assert th.real == pytest.approx(667, abs=1)
    th = theta(G, G, 0.0, mhz(3.0))
    assert th.imag != 0
    assert cmath.isinf(theta(0.0, G, 0.0, mhz(1.0)))


def test_log_ratio_against_mpmath():
    mpmath.mp.dps = 40
    rng = np.random.default_rng(5)
    for mag in (1e-8, 1e-7, 2e-6, 1e-3, 1.0, 1e3, 1e9):
        for phase in rng.uniform(-3.0, 3.0, 20):
            th = mag * complex(math.cos(phase), math.sin(phase))
            exact = complex(mpmath.log1p(mpmath.mpc(th)) / mpmath.mpc(th))
            assert abs(log_ratio(th) - exact) <= 1e-14 * abs(exact)
    assert log_ratio(0.0) == 1.0
    assert log_ratio(complex("inf")) == 0.0


def test_two_level_limit():
    g_n = mhz(13.6)
    chi = chi_continuous(0.0, g_n, G, G0, 0.0)
    assert chi == pytest.approx(1j * g_n**2 / G, rel=1e-15)


def test_continuous_value_at_resonance(eit_params):
    p = eit_params
    chi = chi_continuous(0.0, p.g_n, p.gamma, p.gamma0, p.omega_c)
    th = (4.1**2 / 2) / (12.6e-3)
    expected = 13.6**2 / 12.6 * math.log1p(th) / th  # MHz, by hand
    assert chi.real == pytest.approx(0.0, abs=1e-6 * abs(chi))
    assert chi.imag / (2 * math.pi * 1e6) == pytest.approx(expected, rel=1e-12)
    assert chi.imag / (2 * math.pi * 1e6) == pytest.approx(0.143, abs=0.001)


def test_quadrature_oracle_dense(eit_params):
    p = eit_params
    d = np.linspace(-mhz(30), mhz(30), 2001)
    q = chi_quadrature(d, p.g_n, p.gamma, p.gamma0, p.omega_c)
    c = chi_continuous(d, p.g_n, p.gamma, p.gamma0, p.omega_c)
    assert np.max(np.abs(q - c) / np.abs(c)) <= 1e-8


def test_quadrature_limits():
    g_n = mhz(13.6)
    for beta in (0.5, 1.0, 2.0):
        assert chi_quadrature(mhz(1.0), g_n, G, G0, 0.0, beta) == pytest.approx(
            1j * g_n**2 / (G - 1j * mhz(1.0)), rel=1e-14)
    # large real Theta: value ~ ln(Theta)/Theta
    om = mhz(40.0)
    th = theta(0.0, G, G0, om).real
    q = chi_quadrature(0.0, g_n, G, G0, om)
    assert q.imag / (g_n**2 / G) == pytest.approx(math.log1p(th) / th, rel=1e-9)


def test_canonical_forms():
    g_n = mhz(13.6)
    d = np.linspace(-mhz(20), mhz(20), 101)
    assert np.allclose(chi_canonical(d, g_n, G, G0, 0.0), chi_continuous(d, g_n, G, G0, 0.0),
                       rtol=1e-15, atol=0)
    assert chi_canonical(0.0, g_n, G, 0.0, mhz(2.0)) == 0
    assert abs(chi_canonical(0.0, g_n, G, G0, mhz(4.1))) < abs(chi_continuous(0.0, g_n, G, G0, mhz(4.1)))


def test_continuous_infinite_theta():
    assert chi_continuous(0.0, mhz(13.6), G, 0.0, mhz(4.1)) == 0


def test_ordering_at_resonance():
    g_n = mhz(13.6)
    for om in (0.5, 2.0, 4.1, 9.0):
        can = abs(chi_canonical(0.0, g_n, G, G0, mhz(om)))
        con = abs(chi_continuous(0.0, g_n, G, G0, mhz(om)))
        bare = abs(chi_continuous(0.0, g_n, G, G0, 0.0))
        assert can <= con <= bare


def test_discrete_trivial_cases():
    g = mhz(0.55)
    chi = chi_discrete(np.zeros(10), g, G, G0, 0.0, 0.0, 37e-6)
    assert chi == pytest.approx(1j * g**2 / 2 * 10 / G, rel=1e-14)
    w = 37e-6
    for d in (0.0, mhz(3.0)):
        chi = chi_discrete([w], g, G, G0, 0.0, d, w)
        assert chi == pytest.approx(1j * g**2 / 2 * math.exp(-2) / (G - 1j * d), rel=1e-14)
    assert chi_discrete([], g, G, G0, 0.0, 0.0, w) == 0


def test_discrete_on_axis_equals_canonical():
    count = 400
    g_n = mhz(13.6)
    g = g_n / math.sqrt(count) * math.sqrt(2)  # gbar sqrt(count) = g_N
    d = np.linspace(-mhz(10), mhz(10), 41)
    a = chi_discrete(np.zeros(count), g, G, G0, mhz(4.1), d, 37e-6)
    b = chi_canonical(d, g_n, G, G0, mhz(4.1))
    assert np.allclose(a, b, rtol=1e-12, atol=0)


def test_discrete_converges_to_continuum():
    # 2e5 ions keep this quick; the 1e6-ion check lives in the acceptance suite
    g_n, om, w = mhz(13.6), mhz(4.1), 37e-6
    count, radius = 200_000, 5 * w
    pos = sample_disk_positions(count, radius, seed=7)
    g = matched_single_ion_coupling(g_n, count, radius, w)
    d = np.linspace(-mhz(20), mhz(20), 21)
    a = chi_discrete(pos, g, G, G0, om, d, w)
    b = chi_continuous(d, g_n, G, G0, om)
    assert np.max(np.abs(a - b) / np.abs(b)) < 0.03


def test_disk_sampling_deterministic():
    a = sample_disk_positions(1000, 1.0, seed=3)
    b = sample_disk_positions(1000, 1.0, seed=3)
    assert np.array_equal(a, b)
    assert a.max() <= 1.0 and a.min() >= 0


def _all_variants(d, p, count=20_000):
    w = 37e-6
    pos = sample_disk_positions(count, 5 * w, seed=11)
    g = matched_single_ion_coupling(p.g_n, count, 5 * w, w)
    out = {v: susceptibility(d, p, v) for v in ("continuous", "canonical", "quadrature")}
    out["discrete"] = susceptibility(d, p, "discrete", positions=pos, g=g, w_p=w)
    return out


def test_passivity_all_variants(eit_params):
    d = np.arange(-5000, 5001) * mhz(0.01)  # +-50 MHz at 10 kHz
    for name, chi in _all_variants(d, eit_params, count=2_000).items():
        assert np.all(np.real(-1j * chi) >= 0), name


def test_conjugation_symmetry(eit_params):
    d = np.linspace(0, mhz(50), 501)
    plus = _all_variants(d, eit_params, count=2_000)
    minus = _all_variants(-d, eit_params, count=2_000)
    for name in plus:
        assert np.allclose(minus[name], -np.conj(plus[name]), rtol=1e-12, atol=0), name


def test_branch_continuity_guard():
    th = np.array([1.0 + 1e-3j, -2.0 + 1e-3j, -2.0 - 1e-3j])
    with pytest.raises(BranchJumpError):
        check_branch_continuity(th)
    ok = theta(np.linspace(-mhz(50), mhz(50), 2001), G, G0, mhz(4.1))
    check_branch_continuity(ok)


def test_unknown_variant(eit_params):
    with pytest.raises(ValueError):
        susceptibility(0.0, eit_params, "bogus")


rates = st.floats(min_value=0.05, max_value=30.0)


@settings(max_examples=200, deadline=None)
@given(delta=st.floats(min_value=-60.0, max_value=60.0), gamma=st.floats(min_value=1.0, max_value=30.0),
       gamma0=st.floats(min_value=0.0, max_value=0.1), omega=st.floats(min_value=1e-3, max_value=20.0),
       g_n=rates)
def test_properties_branch_passivity_ordering(delta, gamma, gamma0, omega, g_n):
    d, gm, g0, om, gn = (mhz(x) for x in (delta, gamma, gamma0, omega, g_n))
    th = theta(d, gm, g0, om)
    if d != 0 and om > 0:
        assert th.imag != 0
    elif not cmath.isinf(th):
        assert th.real > -1
    chi = chi_continuous(d, gn, gm, g0, om)
    can = chi_canonical(d, gn, gm, g0, om)
    assert (-1j * chi).real >= -1e-12 * abs(chi)
    assert (-1j * can).real >= -1e-12 * abs(can)
    if d == 0 and g0 > 0:
        assert abs(can) <= abs(chi) * (1 + 1e-12) + 1e-300


@settings(max_examples=60, deadline=None)
@given(delta=st.floats(min_value=-40.0, max_value=40.0), omega=st.floats(min_value=0.01, max_value=15.0),
       gamma0=st.floats(min_value=1e-4, max_value=0.05))
def test_property_quadrature_matches_closed_form(delta, omega, gamma0):
    p = apparatus_defaults(g_n=mhz(16.2), omega_c=mhz(omega), gamma0=mhz(gamma0))
    d = mhz(delta)
    q = chi_quadrature(d, p.g_n, p.gamma, p.gamma0, p.omega_c)
    c = chi_continuous(d, p.g_n, p.gamma, p.gamma0, p.omega_c)
    assert abs(q - c) <= 1e-8 * abs(c)
