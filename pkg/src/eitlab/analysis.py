"""Scan protocols combining spectra, dynamics and fits."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dynamics import DEFAULT_SHELLS, ShellDiscretization, discretize, step_response
from .fitting import (ScalingFit, buildup_window, fit_exponential_buildup,
                      fit_scaling, fit_spectrum_global)
from .params import G_SINGLE_LARGE_CRYSTAL, SystemParams, mhz
from .spectrum import detuning_grid, scan_spectrum, transparency_dip

# Buildup-fit protocol defaults
FIT_SAMPLE_DT = 1e-9
FIT_WINDOW_START = 0.0
FIT_WINDOW_MAX = 3e-6


def worker_count(default=None) -> int:
    env = os.environ.get("EITLAB_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return default or min(4, os.cpu_count() or 1)


def ordered_map(fn, items, workers=None):
    """map() over a bounded thread pool; results keep input order."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def buildup_rate(params: SystemParams, disc: Optional[ShellDiscretization] = None, *,
                 sample_dt=FIT_SAMPLE_DT, window_start=FIT_WINDOW_START,
                 window_max=FIT_WINDOW_MAX):
    """Simulate the resonant buildup and fit R = b exp(-2 gamma_EIT t).

    Returns (fit, trace, window).
    """
    disc = disc or discretize(DEFAULT_SHELLS, params.beta)
    trace = step_response(params.with_(delta=0.0), disc, t_end=window_max,
                          sample_dt=sample_dt)
    window = buildup_window(trace, params.kappa, start=window_start, max_end=window_max)
    return fit_exponential_buildup(trace, window), trace, window


@dataclass(frozen=True)
class ScanPoint:
    omega_c: float
    hwhm: Optional[float]
    rate: Optional[float]
    rate_err: Optional[float] = None

    @property
    def ratio(self) -> Optional[float]:
        if self.hwhm is None or self.rate is None:
            return None
        return self.rate / self.hwhm


def omega_scan(params: SystemParams, omegas: Sequence[float], *, dynamics=True,
               spectra=True, disc=None, workers=None, **fit_kw) -> list:
    disc = disc or discretize(DEFAULT_SHELLS, params.beta)

    def one(om):
        p = params.with_(omega_c=om)
        hw = transparency_dip(p).hwhm if spectra else None
        rate = err = None
        if dynamics:
            fit, _, _ = buildup_rate(p, disc, **fit_kw)
            rate, err = fit["gamma_eit"], fit.error("gamma_eit")
        return ScanPoint(om, hw, rate, err)

    return ordered_map(one, omegas, workers)


def scaling_from_scan(points: Sequence[ScanPoint], params: SystemParams,
                      source="hwhm") -> ScalingFit:
    x = np.array([p.omega_c for p in points]) ** 2
    y = np.array([getattr(p, "hwhm" if source == "hwhm" else "rate") for p in points])
    return fit_scaling(x, y, params.gamma, params.cooperativity)


def crystal(n_eff, base: SystemParams, g=G_SINGLE_LARGE_CRYSTAL) -> SystemParams:
    """Same cavity and atoms, different effective ion number."""
    return base.with_(g_n=g * np.sqrt(n_eff), extras={"n_eff": float(n_eff)})


def synthetic_grid():
    """Wide normal-mode grid plus a fine grid across the transparency window."""
    wide = detuning_grid(mhz(25.0), mhz(0.05))
    fine = detuning_grid(mhz(1.0), mhz(0.002))
    return np.unique(np.concatenate([wide, fine]))


@dataclass(frozen=True)
class NScanRow:
    n_eff: float
    g_n: float
    hwhm: float
    rate: float
    g_n_fit: float
    g_n_fit_err: float
    omega_c_fit: float


def n_scan_report(crystals: Sequence[SystemParams], omega_c, *, disc=None, workers=None,
                  fit_guess=(1.05, 0.95), **fit_kw) -> list:
    """Per crystal: dip HWHM, buildup rate, and g_N recovered from its own spectrum."""
    first = crystals[0]
    for c in crystals[1:]:
        if (c.kappa, c.gamma, c.gamma0) != (first.kappa, first.gamma, first.gamma0):
            raise ValueError("crystals must share kappa, gamma and gamma0")
    disc = disc or discretize(DEFAULT_SHELLS, first.beta)
    grid = synthetic_grid()

    def one(cr):
        p = cr.with_(omega_c=omega_c)
        hw = transparency_dip(p).hwhm
        fit, _, _ = buildup_rate(p, disc, **fit_kw)
        data = scan_spectrum(p, deltas=grid)
        gfit = fit_spectrum_global([data], p, g_n0=p.g_n * fit_guess[0],
                                   omega_c0=[omega_c * fit_guess[1]])
        return NScanRow(n_eff=float(cr.extras.get("n_eff", np.nan)), g_n=p.g_n, hwhm=hw,
                        rate=fit["gamma_eit"], g_n_fit=gfit["g_n"],
                        g_n_fit_err=gfit.error("g_n"), omega_c_fit=gfit["omega_c_0"])

    return ordered_map(one, crystals, workers)
