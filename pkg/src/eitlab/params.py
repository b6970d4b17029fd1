"""Physical parameters, unit conventions and derived rates.

Rates are stored in angular units (rad/s) everywhere inside the package.
Values that cross a user-facing boundary (config files, CSV, reports) are
"linear MHz", i.e. angular / 2pi / 1e6; use :func:`mhz` and :func:`to_mhz`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

SPEED_OF_LIGHT = 299_792_458.0  # m/s
TWO_PI = 2.0 * math.pi
MHZ = TWO_PI * 1e6  # rad/s per linear MHz
PPM = 1e-6


class InvalidParameterError(ValueError):
    """A physical parameter is outside its allowed domain."""


class ParameterConsistencyWarning(UserWarning):
    """Directly supplied rates disagree with apparatus-derived ones."""


def mhz(value):
    """Linear MHz -> rad/s."""
    return value * MHZ


def to_mhz(value):
    """rad/s -> linear MHz."""
    return value / MHZ


def _require_positive(**values):
    for name, v in values.items():
        if not (v > 0 and math.isfinite(v)):
            raise InvalidParameterError(f"{name} must be positive and finite, got {v!r}")


def _require_nonnegative(**values):
    for name, v in values.items():
        if not (v >= 0 and math.isfinite(v)):
            raise InvalidParameterError(f"{name} must be non-negative and finite, got {v!r}")


@dataclass(frozen=True)
class CavityGeometry:
    """Mirror transmissions (ppm), round-trip loss (ppm), length and waists (m)."""

    cavity_length: float
    t_h_ppm: float
    t_l_ppm: float
    loss_ppm: float
    waist_probe: float = 37e-6
    waist_control: float = 37e-6

    def __post_init__(self):
        _require_positive(cavity_length=self.cavity_length,
                          waist_probe=self.waist_probe,
                          waist_control=self.waist_control)
        _require_nonnegative(t_h_ppm=self.t_h_ppm, t_l_ppm=self.t_l_ppm,
                             loss_ppm=self.loss_ppm)
        if self.t_h_ppm + self.t_l_ppm + self.loss_ppm <= 0:
            raise InvalidParameterError("total round-trip loss must be positive")
        if self.t_h_ppm < self.t_l_ppm:
            raise InvalidParameterError("incoupling mirror must be the high-transmission one")

    @property
    def total_loss_ppm(self) -> float:
        return self.t_h_ppm + self.t_l_ppm + self.loss_ppm


@dataclass(frozen=True)
class CavityRates:
    """Total and per-mirror field decay rates (rad/s)."""

    kappa: float
    kappa_h: float
    kappa_l: float
    finesse: Optional[float] = None

    def __post_init__(self):
        _require_positive(kappa=self.kappa)
        _require_nonnegative(kappa_h=self.kappa_h, kappa_l=self.kappa_l)
        # small slack: rates derived from ppm values round independently
        if self.kappa_h + self.kappa_l > self.kappa * (1 + 1e-12):
            raise InvalidParameterError("kappa_h + kappa_l exceeds the total decay rate")

    @property
    def kappa_loss(self) -> float:
        """Decay rate into intracavity losses other than the two mirrors."""
        return max(self.kappa - self.kappa_h - self.kappa_l, 0.0)


@dataclass(frozen=True)
class EnsembleParams:
    """Atomic rates (rad/s) plus the crystal quantities that set g_N."""

    gamma: float
    gamma0: float
    g: Optional[float] = None
    n_eff: Optional[float] = None
    density: Optional[float] = None  # 1/m^3
    half_length: Optional[float] = None  # m

    def __post_init__(self):
        _require_positive(gamma=self.gamma)
        _require_nonnegative(gamma0=self.gamma0)
        if not self.gamma > self.gamma0:
            raise InvalidParameterError("optical decay must exceed ground-state decoherence")
        if self.n_eff is not None:
            _require_nonnegative(n_eff=self.n_eff)
        if self.g is not None:
            _require_nonnegative(g=self.g)


@dataclass(frozen=True)
class DriveParams:
    omega_c: float = 0.0
    delta: float = 0.0
    input_flux: Optional[float] = None  # photons/s

    def __post_init__(self):
        _require_nonnegative(omega_c=self.omega_c)
        if self.input_flux is not None:
            _require_nonnegative(input_flux=self.input_flux)
        if not math.isfinite(self.delta):
            raise InvalidParameterError("delta must be finite")


@dataclass(frozen=True)
class SystemParams:
    """Everything the spectrum and dynamics models need, in rad/s.

    ``beta`` is the probe/control waist ratio squared, w_p^2 / w_c^2.
    """

    kappa: float
    kappa_h: float
    kappa_l: float
    gamma: float
    gamma0: float
    g_n: float
    omega_c: float = 0.0
    delta: float = 0.0
    beta: float = 1.0
    input_flux: Optional[float] = None  # photons/s; None -> one photon in the bare resonant cavity
    extras: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        CavityRates(self.kappa, self.kappa_h, self.kappa_l)
        EnsembleParams(self.gamma, self.gamma0)
        DriveParams(self.omega_c, self.delta, self.flux)
        _require_nonnegative(g_n=self.g_n)
        _require_positive(beta=self.beta)

    @property
    def cooperativity(self) -> float:
        return cooperativity(self.g_n, self.kappa, self.gamma)

    @property
    def flux(self) -> float:
        if self.input_flux is not None:
            return self.input_flux
        if self.kappa_h == 0:
            return 0.0
        return self.kappa**2 / (2.0 * self.kappa_h)

    @property
    def rates(self) -> CavityRates:
        return CavityRates(self.kappa, self.kappa_h, self.kappa_l)

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def to_mhz(self) -> dict:
        """Flat dict of rates in linear MHz (beta and flux passed through)."""
        out = {}
        for name in ("kappa", "kappa_h", "kappa_l", "gamma", "gamma0", "g_n", "omega_c", "delta"):
            out[name + "_mhz"] = to_mhz(getattr(self, name))
        out["beta"] = self.beta
        out["input_flux"] = self.flux
        return out

    @classmethod
    def from_mhz(cls, *, kappa_mhz, kappa_h_mhz, kappa_l_mhz, gamma_mhz, gamma0_mhz,
                 g_n_mhz, omega_c_mhz=0.0, delta_mhz=0.0, beta=1.0, input_flux=None):
        return cls(kappa=mhz(kappa_mhz), kappa_h=mhz(kappa_h_mhz), kappa_l=mhz(kappa_l_mhz),
                   gamma=mhz(gamma_mhz), gamma0=mhz(gamma0_mhz), g_n=mhz(g_n_mhz),
                   omega_c=mhz(omega_c_mhz), delta=mhz(delta_mhz), beta=beta,
                   input_flux=input_flux)


def derive_cavity_rates(geom: CavityGeometry) -> CavityRates:
    """Field decay rates from mirror transmissions, kappa_i = c T_i / (4 L)."""
    scale = SPEED_OF_LIGHT / (4.0 * geom.cavity_length) * PPM
    kappa_h = scale * geom.t_h_ppm
    kappa_l = scale * geom.t_l_ppm
    kappa = scale * geom.total_loss_ppm
    finesse = TWO_PI / (geom.total_loss_ppm * PPM)
    return CavityRates(kappa=kappa, kappa_h=kappa_h, kappa_l=kappa_l, finesse=finesse)


def effective_ion_number(density: float, waist: float, half_length: float) -> float:
    """Ions effectively coupled to a Gaussian mode: rho * (pi w^2 / 2) * L."""
    _require_nonnegative(density=density)
    _require_positive(waist=waist, half_length=half_length)
    return density * math.pi * waist**2 / 2.0 * half_length


def total_ion_count(length: float, diameter: float, density: float) -> float:
    """Ion count of a uniformly filled prolate spheroid."""
    _require_nonnegative(length=length, diameter=diameter, density=density)
    return density * 4.0 / 3.0 * math.pi * (length / 2.0) * (diameter / 2.0) ** 2


def collective_coupling(g: float, n_eff: float) -> float:
    _require_nonnegative(g=g, n_eff=n_eff)
    return g * math.sqrt(n_eff)


def cooperativity(g_n: float, kappa: float, gamma: float) -> float:
    if kappa * gamma == 0:
        raise InvalidParameterError("cooperativity undefined for kappa*gamma = 0")
    _require_positive(kappa=kappa, gamma=gamma)
    return g_n**2 / (2.0 * kappa * gamma)


def g_n_for_cooperativity(c: float, kappa: float, gamma: float) -> float:
    """Inverse of :func:`cooperativity`."""
    _require_nonnegative(c=c)
    return math.sqrt(2.0 * kappa * gamma * c)


def rabi_from_photons(n_photons: float, g_c: float) -> float:
    """Control Rabi frequency Omega_c = sqrt(2) * (g_c/sqrt(2)) * sqrt(n) = g_c sqrt(n).

    g_c is the peak single-ion control coupling; it is not derivable from the
    other inputs and must be supplied.
    """
    _require_nonnegative(n_photons=n_photons, g_c=g_c)
    return g_c * math.sqrt(n_photons)


def photons_from_rabi(omega_c: float, g_c: float) -> float:
    _require_positive(g_c=g_c)
    _require_nonnegative(omega_c=omega_c)
    return (omega_c / g_c) ** 2


# Apparatus values used throughout the figure presets.
APPARATUS_GEOMETRY = CavityGeometry(cavity_length=11.7e-3, t_h_ppm=1500.0, t_l_ppm=4.0,
                                loss_ppm=650.0, waist_probe=37e-6, waist_control=37e-6)
APPARATUS_KAPPA = mhz(2.2)
APPARATUS_GAMMA = mhz(12.6)
APPARATUS_GAMMA0 = mhz(1e-3)
APPARATUS_KAPPA_H_FRACTION = 0.696
APPARATUS_DENSITY = 5.6e14  # m^-3, 5.6e8 cm^-3

# Single-ion couplings implied by the two crystals (quoted g_N over quoted N).
G_SINGLE_SMALL_CRYSTAL = mhz(13.8) / math.sqrt(680.0)
G_SINGLE_LARGE_CRYSTAL = mhz(16.6) / math.sqrt(890.0)


def apparatus_defaults(*, g_n: float = 0.0, omega_c: float = 0.0, delta: float = 0.0,
                   **overrides) -> SystemParams:
    """Canonical preset: kappa/2pi = 2.2 MHz, gamma/2pi = 12.6 MHz, gamma0/2pi = 1 kHz.

    The low-transmission mirror keeps its ppm share of the total loss.
    """
    kappa = overrides.pop("kappa", APPARATUS_KAPPA)
    geom = APPARATUS_GEOMETRY
    base = dict(
        kappa=kappa,
        kappa_h=APPARATUS_KAPPA_H_FRACTION * kappa,
        kappa_l=kappa * geom.t_l_ppm / geom.total_loss_ppm,
        gamma=APPARATUS_GAMMA,
        gamma0=APPARATUS_GAMMA0,
        g_n=g_n,
        omega_c=omega_c,
        delta=delta,
    )
    base.update(overrides)
    return SystemParams(**base)


def build_system(*, geometry: Optional[CavityGeometry] = None,
                 rates: Optional[CavityRates] = None,
                 ensemble: Optional[EnsembleParams] = None,
                 g_n: Optional[float] = None,
                 drive: Optional[DriveParams] = None,
                 rtol: float = 1e-2) -> SystemParams:
    """Assemble SystemParams from apparatus inputs and/or direct rates.

    Directly supplied rates (``rates``, ``g_n``) win over derived ones; when
    both are present and differ by more than ``rtol`` a
    :class:`ParameterConsistencyWarning` is emitted.
    """
    if ensemble is None:
        raise InvalidParameterError("ensemble parameters are required")
    drive = drive or DriveParams()

    derived_rates = derive_cavity_rates(geometry) if geometry is not None else None
    if rates is None and derived_rates is None:
        raise InvalidParameterError("need either cavity rates or a cavity geometry")
    if rates is not None and derived_rates is not None:
        if not math.isclose(rates.kappa, derived_rates.kappa, rel_tol=rtol):
            warnings.warn(
                f"direct kappa/2pi={to_mhz(rates.kappa):.4g} MHz differs from geometry-derived "
                f"{to_mhz(derived_rates.kappa):.4g} MHz; using the direct value",
                ParameterConsistencyWarning, stacklevel=2)
    use_rates = rates if rates is not None else derived_rates

    n_eff = ensemble.n_eff
    if n_eff is None and ensemble.density is not None and ensemble.half_length is not None:
        waist = geometry.waist_probe if geometry is not None else APPARATUS_GEOMETRY.waist_probe
        n_eff = effective_ion_number(ensemble.density, waist, ensemble.half_length)
    derived_g_n = None
    if ensemble.g is not None and n_eff is not None:
        derived_g_n = collective_coupling(ensemble.g, n_eff)
    if g_n is None and derived_g_n is None:
        raise InvalidParameterError("need g_n or (g and an ion number)")
    if g_n is not None and derived_g_n is not None:
        if not math.isclose(g_n, derived_g_n, rel_tol=rtol):
            warnings.warn(
                f"direct g_N/2pi={to_mhz(g_n):.4g} MHz differs from derived "
                f"{to_mhz(derived_g_n):.4g} MHz; using the direct value",
                ParameterConsistencyWarning, stacklevel=2)
    use_g_n = g_n if g_n is not None else derived_g_n

    beta = 1.0
    if geometry is not None:
        beta = (geometry.waist_probe / geometry.waist_control) ** 2

    extras = {}
    if n_eff is not None:
        extras["n_eff"] = n_eff
    if derived_rates is not None and derived_rates.finesse is not None:
        extras["finesse"] = derived_rates.finesse
    return SystemParams(kappa=use_rates.kappa, kappa_h=use_rates.kappa_h,
                        kappa_l=use_rates.kappa_l, gamma=ensemble.gamma,
                        gamma0=ensemble.gamma0, g_n=use_g_n, omega_c=drive.omega_c,
                        delta=drive.delta, beta=beta, input_flux=drive.input_flux,
                        extras=extras)
