"""Steady-state cavity response: intracavity field, reflectivity, transmittivity."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .params import CavityRates, InvalidParameterError, SystemParams, TWO_PI, mhz
from .susceptibility import susceptibility, theta, check_branch_continuity

CSV_HEADER = ("delta_hz", "reflectivity", "transmittivity", "photon_number")

# Grid defaults (rad/s)
FULL_SPAN = mhz(25.0)
FULL_STEP = mhz(5e-3)
DIP_SPAN = mhz(1.0)
DIP_STEP = mhz(0.2e-3)


class NoDipError(ArithmeticError):
    """The control field opens no measurable transparency window."""


def fmt(x: float) -> str:
    """CSV number format: scientific, 12 significant digits."""
    return f"{x:.11e}"


@dataclass
class SpectrumTable:
    delta: np.ndarray  # rad/s
    reflectivity: np.ndarray
    transmittivity: np.ndarray
    photon_number: np.ndarray

    def __len__(self):
        return len(self.delta)

    def rows(self):
        return zip(self.delta, self.reflectivity, self.transmittivity, self.photon_number)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for d, r, t, n in self.rows():
                w.writerow([fmt(d / TWO_PI), fmt(r), fmt(t), fmt(n)])

    @classmethod
    def from_csv(cls, path) -> "SpectrumTable":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        with open(path) as fh:
            header = tuple(fh.readline().strip().split(","))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected spectrum header {header}")
        return cls(data[:, 0] * TWO_PI, data[:, 1], data[:, 2], data[:, 3])


@dataclass(frozen=True)
class DipFeature:
    center: float
    hwhm: float
    depth: float
    baseline: float
    minimum: float


def intracavity_amplitude(delta, chi, kappa, kappa_h, a_in=1.0):
    """Steady-state field sqrt(2 kappa_H) a_in / (kappa - i Delta - i chi)."""
    if kappa <= 0:
        raise InvalidParameterError("kappa must be positive")
    delta = np.asarray(delta, dtype=float)
    return math.sqrt(2.0 * kappa_h) * a_in / (kappa - 1j * delta - 1j * np.asarray(chi))


def reflectivity_transmittivity(delta, chi, rates: CavityRates, a_in=1.0):
    if a_in == 0:
        raise InvalidParameterError("reflectivity undefined for zero input amplitude")
    a = intracavity_amplitude(delta, chi, rates.kappa, rates.kappa_h, a_in)
    r = np.abs(math.sqrt(2.0 * rates.kappa_h) * a / a_in - 1.0) ** 2
    t = 2.0 * rates.kappa_l * np.abs(a / a_in) ** 2
    return r, t


def loss_fractions(delta, chi, rates: CavityRates, a_in=1.0):
    """Fractions of input power lost inside the cavity: (mirror/scatter loss, atomic absorption)."""
    a = intracavity_amplitude(delta, chi, rates.kappa, rates.kappa_h, a_in)
    n_rel = np.abs(a / a_in) ** 2
    mirror = 2.0 * rates.kappa_loss * n_rel
    atomic = 2.0 * np.real(-1j * np.asarray(chi)) * n_rel
    return mirror, atomic


def _chi(delta, params, variant, **kw):
    return susceptibility(delta, params, variant, **kw)


def spectrum_at(delta, params: SystemParams, variant="continuous", **kw):
    """(R, T, n) at the given detunings."""
    chi = _chi(delta, params, variant, **kw)
    r, t = reflectivity_transmittivity(delta, chi, params.rates)
    a = intracavity_amplitude(delta, chi, params.kappa, params.kappa_h,
                              math.sqrt(params.flux))
    return r, t, np.abs(a) ** 2


def detuning_grid(span, step, center=0.0):
    """Symmetric grid center +- span; always contains the center point."""
    if not step > 0:
        raise InvalidParameterError("grid step must be positive")
    if not span >= 0:
        raise InvalidParameterError("grid span must be non-negative")
    n = int(math.floor(span / step + 1e-9))
    return center + step * np.arange(-n, n + 1)


def scan_spectrum(params: SystemParams, span=FULL_SPAN, step=FULL_STEP, variant="continuous",
                  *, deltas=None, **kw) -> SpectrumTable:
    grid = detuning_grid(span, step) if deltas is None else np.asarray(deltas, dtype=float)
    if grid.size == 0:
        raise InvalidParameterError("empty detuning grid")
    if variant == "continuous" and params.omega_c > 0:
        check_branch_continuity(theta(grid, params.gamma, params.gamma0, params.omega_c))
    r, t, n = spectrum_at(grid, params, variant, **kw)
    return SpectrumTable(grid, r, t, n)


def atomic_transparency(params: SystemParams, variant="continuous", **kw) -> float:
    """|a(with ions) / a(empty cavity)|^2 on two-photon resonance."""
    chi = complex(np.atleast_1d(_chi(0.0, params, variant, **kw))[0])
    return abs(params.kappa / (params.kappa - 1j * chi)) ** 2


def transparency_dip(params: SystemParams, variant="continuous", *, tol_hz=1.0,
                     max_delta=None, **kw) -> DipFeature:
    """Half-depth half-width of the reflectivity dip at two-photon resonance.

    The dip is measured against the no-control reflectivity at Delta = 0.
    """
    if params.omega_c <= 0:
        raise InvalidParameterError("transparency dip needs omega_c > 0")

    def refl(d, p=params):
        return float(spectrum_at(np.array([d]), p, variant, **kw)[0][0])

    r_min = refl(0.0)
    baseline = refl(0.0, params.with_(omega_c=0.0))
    depth = baseline - r_min
    if depth < 1e-6 * baseline:
        raise NoDipError(f"dip depth {depth:.3g} below 1e-6 of baseline {baseline:.3g}")
    half = r_min + depth / 2.0

    if max_delta is None:
        max_delta = 100.0 * (params.kappa + params.g_n + params.gamma)
    lo, hi = 0.0, TWO_PI * 10.0
    while refl(hi) < half:
        lo, hi = hi, 2.0 * hi
        if hi > max_delta:
            raise NoDipError("reflectivity never recovers to half depth")
    tol = TWO_PI * tol_hz
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if refl(mid) < half:
            lo = mid
        else:
            hi = mid
    return DipFeature(center=0.0, hwhm=0.5 * (lo + hi), depth=depth, baseline=baseline,
                      minimum=r_min)


def eit_linewidth(omega_c, gamma0, gamma, c, *, alpha=1.0, as_printed=False):
    """Lorentzian-limit transparency HWHM, gamma0 + Omega_c^2 / (2 alpha gamma (1 + 2C)).

    ``as_printed=True`` returns gamma0 + (Omega_c^2/2)/(1+2C) without the 1/gamma;
    its units are inconsistent and it exists for documentation only.
    """
    if as_printed:
        return gamma0 + (omega_c**2 / 2.0) / (1.0 + 2.0 * c)
    return gamma0 + omega_c**2 / (2.0 * alpha * gamma * (1.0 + 2.0 * c))


def local_minima(table: SpectrumTable, column="reflectivity"):
    """Detunings of strict interior local minima of a spectrum column."""
    y = np.asarray(getattr(table, column))
    idx = np.nonzero((y[1:-1] < y[:-2]) & (y[1:-1] < y[2:]))[0] + 1
    return table.delta[idx]
