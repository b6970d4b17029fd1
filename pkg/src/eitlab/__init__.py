"""Cavity EIT with an inhomogeneous control field: spectra, buildup dynamics, fits."""

__version__ = "0.1.0"

from .params import (CavityGeometry, CavityRates, DriveParams, EnsembleParams,  # noqa: E402
                     InvalidParameterError, SystemParams, derive_cavity_rates, mhz,
                     apparatus_defaults, to_mhz)
from .susceptibility import (chi_canonical, chi_continuous, chi_discrete,  # noqa: E402
                             chi_quadrature, susceptibility, theta)
from .spectrum import (SpectrumTable, atomic_transparency, scan_spectrum,  # noqa: E402
                       transparency_dip)
from .dynamics import (DynamicsTrace, discretize, step_response,  # noqa: E402
                       switchoff_response)
from .fitting import (FitResult, ScalingFit, fit_exponential_buildup,  # noqa: E402
                      fit_lorentzian, fit_scaling, fit_spectrum_global)

__all__ = [
    "CavityGeometry", "CavityRates", "DriveParams", "EnsembleParams", "InvalidParameterError",
    "SystemParams", "derive_cavity_rates", "mhz", "apparatus_defaults", "to_mhz",
    "chi_canonical", "chi_continuous", "chi_discrete", "chi_quadrature", "susceptibility", "theta",
    "SpectrumTable", "atomic_transparency", "scan_spectrum", "transparency_dip",
    "DynamicsTrace", "discretize", "step_response", "switchoff_response",
    "FitResult", "ScalingFit", "fit_exponential_buildup", "fit_lorentzian", "fit_scaling",
    "fit_spectrum_global",
]
