import math
import warnings

import numpy as np
import pytest

from eitlab.params import (APPARATUS_GEOMETRY, CavityGeometry, CavityRates, DriveParams,
                           EnsembleParams, InvalidParameterError, ParameterConsistencyWarning,
                           SystemParams, build_system, collective_coupling, cooperativity,
                           derive_cavity_rates, effective_ion_number, g_n_for_cooperativity,
                           mhz, apparatus_defaults, photons_from_rabi, rabi_from_photons,
                           to_mhz, total_ion_count)

C = 299_792_458.0


def test_cavity_rates_from_mirrors():
    r = derive_cavity_rates(APPARATUS_GEOMETRY)
    # independent arithmetic: kappa_i = c T_i / (4 L)
    kappa = C * 2154e-6 / (4 * 11.7e-3)
    assert r.kappa == pytest.approx(kappa, rel=1e-12)
    assert to_mhz(r.kappa) == pytest.approx(2.20, abs=0.01)
    assert r.finesse == pytest.approx(2 * math.pi / 2154e-6, rel=1e-12)
    assert r.finesse == pytest.approx(2917, abs=1)
    assert to_mhz(r.kappa_h) == pytest.approx(1.52929, abs=1e-4)
    assert r.kappa_h / r.kappa == pytest.approx(1500 / 2154, rel=1e-12)


def test_lossless_mirrors():
    g = CavityGeometry(cavity_length=0.01, t_h_ppm=0.0, t_l_ppm=0.0, loss_ppm=100.0)
    r = derive_cavity_rates(g)
    assert r.kappa_h == 0 and r.kappa_l == 0
    assert r.kappa == pytest.approx(C * 100e-6 / 0.04)


def test_rates_homogeneous_in_transmissions():
    g = APPARATUS_GEOMETRY
    s = 3.7
    scaled = CavityGeometry(g.cavity_length, g.t_h_ppm * s, g.t_l_ppm * s, g.loss_ppm * s)
    a, b = derive_cavity_rates(g), derive_cavity_rates(scaled)
    for name in ("kappa", "kappa_h", "kappa_l"):
        assert getattr(b, name) == pytest.approx(s * getattr(a, name), rel=1e-12)


@pytest.mark.parametrize("bad", [dict(cavity_length=0.0), dict(t_h_ppm=-1.0),
                                 dict(t_h_ppm=3.0, t_l_ppm=4.0)])
def test_invalid_geometry(bad):
    kw = dict(cavity_length=11.7e-3, t_h_ppm=1500.0, t_l_ppm=4.0, loss_ppm=650.0)
    kw.update(bad)
    with pytest.raises(InvalidParameterError):
        CavityGeometry(**kw)


def test_rates_invariant():
    with pytest.raises(InvalidParameterError):
        CavityRates(kappa=1.0, kappa_h=0.8, kappa_l=0.3)


def test_effective_ion_number():
    n = effective_ion_number(5.6e14, 37e-6, 801e-6)
    assert n == pytest.approx(5.6e14 * math.pi * (37e-6) ** 2 * 801e-6 / 2, rel=1e-12)
    assert n == pytest.approx(964.6, abs=0.1)
    assert effective_ion_number(0.0, 37e-6, 801e-6) == 0
    assert effective_ion_number(2 * 5.6e14, 37e-6, 801e-6) == pytest.approx(2 * n)


def test_total_ion_count():
    n = total_ion_count(1602e-6, 282e-6, 5.6e14)
    assert n == pytest.approx(3.74e4, rel=0.01)
    assert total_ion_count(1602e-6, 0.0, 5.6e14) == 0
    assert total_ion_count(1602e-6, 282e-6, 2.8e14) == pytest.approx(n / 2)


def test_cooperativity_values():
    assert cooperativity(mhz(16.6), mhz(2.2), mhz(12.6)) == pytest.approx(4.97, abs=0.01)
    assert cooperativity(mhz(13.6), mhz(2.2), mhz(12.6)) == pytest.approx(3.336, abs=0.01)
    assert cooperativity(0.0, mhz(2.2), mhz(12.6)) == 0
    with pytest.raises(InvalidParameterError):
        cooperativity(1.0, 0.0, 1.0)
    g = g_n_for_cooperativity(5.4, mhz(2.2), mhz(12.6))
    assert cooperativity(g, mhz(2.2), mhz(12.6)) == pytest.approx(5.4, rel=1e-12)


def test_collective_coupling_scaling():
    g = mhz(0.55)
    assert collective_coupling(g, 4 * 700) == 2 * collective_coupling(g, 700)


def test_unit_round_trip():
    x = np.array([0.0, 1e-3, 2.2, 12.6, 16.2])
    assert np.array_equal(to_mhz(mhz(x)), x) or np.allclose(to_mhz(mhz(x)), x, rtol=1e-15, atol=0)
    p = apparatus_defaults(g_n=mhz(16.2), omega_c=mhz(3.0))
    q = SystemParams.from_mhz(**{k: v for k, v in p.to_mhz().items() if k.endswith("_mhz")})
    for name in ("kappa", "kappa_h", "kappa_l", "gamma", "gamma0", "g_n", "omega_c"):
        assert getattr(q, name) == pytest.approx(getattr(p, name), rel=1e-15)


def test_apparatus_defaults():
    p = apparatus_defaults()
    assert to_mhz(p.kappa) == pytest.approx(2.2)
    assert p.kappa_h / p.kappa == pytest.approx(0.696)
    assert to_mhz(p.gamma0) == pytest.approx(1e-3)
    assert p.kappa >= p.kappa_h + p.kappa_l
    # one photon in the bare resonant cavity by default
    assert 2 * p.kappa_h * p.flux / p.kappa**2 == pytest.approx(1.0)


def test_invalid_ensemble_and_drive():
    with pytest.raises(InvalidParameterError):
        EnsembleParams(gamma=1.0, gamma0=2.0)
    with pytest.raises(InvalidParameterError):
        DriveParams(omega_c=-1.0)


def test_build_system_direct_values_win():
    ens = EnsembleParams(gamma=mhz(12.6), gamma0=mhz(1e-3), g=mhz(0.5), n_eff=900.0)
    rates = CavityRates(mhz(2.5), mhz(1.7), mhz(0.01))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        p = build_system(geometry=APPARATUS_GEOMETRY, rates=rates, ensemble=ens, g_n=mhz(20.0))
    assert p.kappa == rates.kappa and p.g_n == mhz(20.0)
    cats = [x.category for x in w]
    assert cats.count(ParameterConsistencyWarning) == 2


def test_build_system_derived():
    ens = EnsembleParams(gamma=mhz(12.6), gamma0=mhz(1e-3), g=mhz(0.5), density=5.6e14,
                         half_length=801e-6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        p = build_system(geometry=APPARATUS_GEOMETRY, ensemble=ens)
    assert p.kappa == pytest.approx(derive_cavity_rates(APPARATUS_GEOMETRY).kappa)
    assert p.g_n == pytest.approx(mhz(0.5) * math.sqrt(964.6), rel=1e-4)


def test_photon_rabi_round_trip():
    g_c = mhz(0.2)
    om = rabi_from_photons(500.0, g_c)
    assert photons_from_rabi(om, g_c) == pytest.approx(500.0)
