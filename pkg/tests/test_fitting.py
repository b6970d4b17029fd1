import numpy as np
import pytest
from scipy.optimize import least_squares

from eitlab.dynamics import DynamicsTrace
from eitlab.fitting import (DegenerateFitError, FitError, InsufficientDataError,
                            alpha_from_slope, buildup_window, fit_exponential_buildup,
                            fit_lorentzian, fit_scaling, fit_spectrum_global, fit_two_level,
                            levenberg_marquardt, lorentzian_dip)
from eitlab.params import mhz, apparatus_defaults
from eitlab.spectrum import SpectrumTable, detuning_grid, scan_spectrum


def _table(x, y):
    z = np.zeros_like(y)
    return SpectrumTable(delta=x, reflectivity=y, transmittivity=z, photon_number=z)


TRUE = dict(center=2e3, hwhm=3.1e5, depth=0.62, baseline=0.81)


def _dip(noise=0.0, seed=7):
    x = np.linspace(-3e6, 3e6, 241)
    y = lorentzian_dip(x, **TRUE)
    if noise:
        y = y + np.random.default_rng(seed).normal(0.0, noise, x.size)
    return x, y


def test_lorentzian_round_trip():
    x, y = _dip()
    res = fit_lorentzian(_table(x, y))
    assert res.converged
    for k, v in TRUE.items():
        assert res[k] == pytest.approx(v, rel=1e-4)


def test_lm_matches_scipy_oracle():
    x, y = _dip(noise=0.01)
    ours = fit_lorentzian(_table(x, y), p0=[0.0, 2e5, 0.5, 0.8])
    w = 1e6
    ref = least_squares(lambda q: lorentzian_dip(x, q[0] * w, q[1] * w, q[2], q[3]) - y,
                        [0.0, 0.2, 0.5, 0.8], xtol=1e-14, ftol=1e-14, gtol=1e-14)
    expected = ref.x * np.array([w, w, 1, 1])
    assert np.allclose(ours.values, expected, rtol=1e-5, atol=1.0)
    assert ours.rss == pytest.approx(2 * ref.cost, rel=1e-8)


def test_noisy_fit_within_errors():
    x, y = _dip(noise=0.01, seed=11)
    res = fit_lorentzian(_table(x, y))
    assert abs(res["hwhm"] - TRUE["hwhm"]) < 4 * res.error("hwhm")
    assert res["hwhm"] == pytest.approx(TRUE["hwhm"], rel=0.05)


def test_cost_monotone_and_quick_from_truth():
    x, y = _dip()
    res = fit_lorentzian(_table(x, y), p0=[3e4, 2.5e5, 0.5, 0.7])
    assert all(b <= a for a, b in zip(res.cost_history, res.cost_history[1:]))
    exact = fit_lorentzian(_table(x, y), p0=list(TRUE.values()))
    assert exact.iterations <= 2


def test_lm_reports_nonconvergence():
    with pytest.raises(FitError) as info:
        levenberg_marquardt(lambda q: np.array([np.exp(q[0]), 1.0, 2.0]), [0.0], max_iter=3)
    assert info.value.result is not None and not info.value.result.converged


def test_degenerate_parameter():
    x = np.linspace(0, 1, 10)
    with pytest.raises(DegenerateFitError):
        levenberg_marquardt(lambda q: q[0] * x - x ** 2 + 0.0 * q[1], [1.0, 1.0])


def test_insufficient_data():
    with pytest.raises(InsufficientDataError):
        levenberg_marquardt(lambda q: np.array([q[0] - 1.0]), [0.0, 0.0])
    with pytest.raises(InsufficientDataError):
        fit_lorentzian(_table(np.arange(4.0), np.ones(4)))
    with pytest.raises(InsufficientDataError):
        fit_scaling([1.0], [2.0], 1.0, 1.0)


def test_scaling_exact_line():
    gamma, c = mhz(12.6), 5.4
    om2 = mhz(np.array([1.0, 3.0, 5.0, 7.0])) ** 2
    rates = 2e3 + 1.7e-9 * om2
    fit = fit_scaling(om2, rates, gamma, c)
    assert fit.slope == pytest.approx(1.7e-9, rel=1e-12)
    assert fit.offset == pytest.approx(2e3, rel=1e-8)
    assert fit.alpha == pytest.approx(alpha_from_slope(1.7e-9, gamma, c), rel=1e-12)
    two = fit_scaling(om2[:2], rates[:2], gamma, c)
    assert two.slope == pytest.approx(1.7e-9, rel=1e-12) and two.slope_err == 0.0
    with pytest.raises(DegenerateFitError):
        fit_scaling([4.0, 4.0], [1.0, 2.0], gamma, c)


def test_exponential_round_trip():
    t = np.arange(0, 3e-6, 1e-9)
    R = 0.7 * np.exp(-2 * 4.2e5 * t)
    z = np.zeros_like(t)
    tr = DynamicsTrace(t=t, a=z.astype(complex), reflectivity=R, photon_number=z)
    res = fit_exponential_buildup(tr, (0.0, 3e-6))
    assert res["gamma_eit"] == pytest.approx(4.2e5, rel=1e-6)
    assert res["b"] == pytest.approx(0.7, rel=1e-6)
    with pytest.raises(InsufficientDataError):
        fit_exponential_buildup(tr, (0.0, 2e-9))


def test_buildup_window_levels():
    t = np.arange(0, 3e-6, 1e-9)
    R = 0.1 + 0.6 * np.exp(-t / 0.5e-6)
    z = np.zeros_like(t)
    tr = DynamicsTrace(t=t, a=z.astype(complex), reflectivity=R, photon_number=z,
                       meta={"absorptive_reflectivity": 0.7, "steady_reflectivity": 0.1})
    t1, t2 = buildup_window(tr, guard=0.0)
    assert t1 == 0.0
    assert t2 == pytest.approx(0.5e-6 * np.log(10), abs=2e-9)
    assert buildup_window(tr, guard=0.0, max_end=1e-6)[1] == 1e-6


def test_global_fit_recovers_coupling():
    base = apparatus_defaults(g_n=mhz(13.6))
    omegas = [mhz(w) for w in (1.18, 3.23, 5.91, 8.62)]
    grid = np.unique(np.concatenate([detuning_grid(mhz(20), mhz(0.1)),
                                     detuning_grid(mhz(1), mhz(0.01))]))
    data = [scan_spectrum(base.with_(omega_c=o), deltas=grid) for o in omegas]
    res = fit_spectrum_global(data, base, g_n0=mhz(14.5), omega_c0=[o * 1.05 for o in omegas])
    assert res.converged
    assert res["g_n"] == pytest.approx(base.g_n, rel=1e-2)
    for i, o in enumerate(omegas):
        assert res[f"omega_c_{i}"] == pytest.approx(o, rel=1e-2)


def test_two_level_fit():
    base = apparatus_defaults(g_n=mhz(16.2), omega_c=0.0)
    data = scan_spectrum(base, deltas=detuning_grid(mhz(25), mhz(0.25)))
    res = fit_two_level(data, base, g_n0=mhz(14.0))
    assert res["g_n"] == pytest.approx(base.g_n, rel=1e-6)
