"""Complex EIT susceptibility of the ensemble, in rad/s.

Four routes to the same quantity:

* ``chi_continuous``: uniform-density medium with Gaussian probe and control
  modes, closed form ``i g_N^2/(gamma - i Delta) * ln(1+Theta)/Theta``.
* ``chi_canonical``: homogeneous control, ``... * 1/(1+Theta)``.
* ``chi_discrete``: explicit sum over ion radial positions.
* ``chi_quadrature``: adaptive numerical integration of the radial integral,
  used as an oracle for the closed form and for unequal waists.

All functions broadcast over ``delta``.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate

from .params import InvalidParameterError

SERIES_THRESHOLD = 1e-6
VARIANTS = ("continuous", "canonical", "discrete", "quadrature")


class QuadratureError(ArithmeticError):
    pass


class BranchJumpError(ArithmeticError):
    pass


def theta(delta, gamma, gamma0, omega_c):
    """Two-photon saturation parameter (Omega_c^2/2) / ((gamma - i D)(gamma0 - i D)).

    ``gamma0 = 0`` on exact two-photon resonance gives ``inf``; downstream
    ratios take the corresponding limit.
    """
    if gamma <= 0 or gamma0 < 0:
        raise InvalidParameterError("need gamma > 0 and gamma0 >= 0")
    delta = np.asarray(delta, dtype=float)
    den = (gamma - 1j * delta) * (gamma0 - 1j * delta)
    num = omega_c**2 / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den == 0, complex(np.inf, 0.0) if num > 0 else 0j, num / np.where(den == 0, 1, den))
    return out if out.ndim else complex(out)


def _log1p_complex(z):
    """Complex log(1+z) without the cancellation numpy's complex log1p suffers for small |z|."""
    z = np.asarray(z, dtype=complex)
    out = np.log(1.0 + z)
    near = np.abs(z) < 1.0
    x, y = z[near].real, z[near].imag
    out[near] = 0.5 * np.log1p(2 * x + x * x + y * y) + 1j * np.arctan2(y, 1.0 + x)
    return out


def log_ratio(th):
    """ln(1+Theta)/Theta on the principal branch, with its Theta -> 0 and -> inf limits."""
    th = np.asarray(th, dtype=complex)
    out = np.empty_like(th)
    small = np.abs(th) < SERIES_THRESHOLD
    inf = ~np.isfinite(th)
    big = ~(small | inf)
    ts = th[small]
    out[small] = 1 - ts / 2 + ts**2 / 3 - ts**3 / 4
    out[inf] = 0.0
    out[big] = _log1p_complex(th[big]) / th[big]
    return out if out.ndim else complex(out)


def _inverse_one_plus(th):
    th = np.asarray(th, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(np.isfinite(th), 1.0 / (1.0 + th), 0.0)
    return out if out.ndim else complex(out)


def check_branch_continuity(th):
    """Raise if arg(1 + Theta) jumps by more than pi between neighbouring samples.

    A jump would mean the sweep crossed the log branch cut.
    """
    th = np.atleast_1d(np.asarray(th, dtype=complex))
    finite = th[np.isfinite(th)]
    if finite.size < 2:
        return
    phase = np.angle(1.0 + finite)
    if np.any(np.abs(np.diff(phase)) > np.pi):
        raise BranchJumpError("1 + Theta crossed the negative real axis during the sweep")


def two_level(delta, g_n, gamma):
    """Bare two-level response i g_N^2/(gamma - i Delta)."""
    delta = np.asarray(delta, dtype=float)
    out = 1j * g_n**2 / (gamma - 1j * delta)
    return out if out.ndim else complex(out)


def chi_continuous(delta, g_n, gamma, gamma0, omega_c, *, check_branch=False):
    th = theta(delta, gamma, gamma0, omega_c)
    if check_branch:
        check_branch_continuity(th)
    return two_level(delta, g_n, gamma) * log_ratio(th)


def chi_canonical(delta, g_n, gamma, gamma0, omega_c):
    th = theta(delta, gamma, gamma0, omega_c)
    return two_level(delta, g_n, gamma) * _inverse_one_plus(th)


def chi_discrete(radial_positions, g, gamma, gamma0, omega_c, delta, w_p, w_c=None):
    """Sum of single-ion responses; ``g`` is the peak single-ion coupling.

    The thermal longitudinal average g -> g/sqrt(2) is applied here.
    Positions are distances from the cavity axis in the same units as the waists.
    """
    if w_c is None:
        w_c = w_p
    r = np.asarray(radial_positions, dtype=float).ravel()
    delta = np.asarray(delta, dtype=float)
    if r.size == 0:
        return np.zeros_like(delta, dtype=complex) if delta.ndim else 0j
    if not np.all(np.isfinite(r)):
        raise InvalidParameterError("ion positions must be finite")
    psi_p2 = np.exp(-2.0 * r**2 / w_p**2)
    psi_c2 = np.exp(-2.0 * r**2 / w_c**2)
    gbar2 = g**2 / 2.0
    flat = np.atleast_1d(delta)
    out = np.empty(flat.shape, dtype=complex)
    for i, d in enumerate(flat):
        dressing = (omega_c**2 / 2.0) / (gamma0 - 1j * d) if (gamma0 != 0 or d != 0) else np.inf
        den = (gamma - 1j * d) + dressing * psi_c2
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(np.isfinite(den), psi_p2 / den, 0.0)
        out[i] = 1j * gbar2 * np.sum(terms)
    return out.reshape(delta.shape) if delta.ndim else complex(out[0])


def sample_disk_positions(count, radius, seed):
    """Radii of ``count`` points uniform over a disk, from a seeded generator."""
    rng = np.random.default_rng(seed)
    return radius * np.sqrt(rng.random(count))


def matched_single_ion_coupling(g_n, count, radius, waist):
    """Coupling g that makes ``count`` ions uniform over a disk of ``radius``
    reproduce the continuum collective coupling ``g_n`` for Gaussian waist ``waist``.

    With areal density n_A = count/(pi R^2) (the volume density integrated over
    the crystal length 2L), rho*pi*w^2*L/2 becomes n_A*pi*w^2/4, i.e.
    N_eff = count * w^2 / (4 R^2).
    """
    n_eff = count * waist**2 / (4.0 * radius**2)
    return g_n / np.sqrt(n_eff)


def matched_disk(params, count, radius, waist, seed, beta=1.0) -> dict:
    """Keyword arguments for the discrete variant: ``count`` seeded ions on a disk,
    with g matched to ``params.g_n``. The control waist is waist/sqrt(beta)."""
    return {"positions": sample_disk_positions(count, radius, seed),
            "g": matched_single_ion_coupling(params.g_n, count, radius, waist),
            "w_p": waist, "w_c": waist / np.sqrt(beta)}


def chi_quadrature(delta, g_n, gamma, gamma0, omega_c, beta=1.0, *, rtol=1e-10):
    """i g_N^2 * integral_0^1 du / (gamma - i D + (Omega_c^2/2) u^beta / (gamma0 - i D)).

    Evaluated by adaptive Gauss-Kronrod; the knee of the integrand at
    u ~ |Theta|^(-1/beta) is passed as a breakpoint.
    """
    if beta <= 0:
        raise InvalidParameterError("beta must be positive")
    delta = np.asarray(delta, dtype=float)
    flat = np.atleast_1d(delta)
    out = np.empty(flat.shape, dtype=complex)
    for i, d in enumerate(flat):
        base = gamma - 1j * d
        if omega_c == 0:
            out[i] = 1j * g_n**2 / base
            continue
        if gamma0 == 0 and d == 0:
            # every u > 0 is fully dressed; only the measure-zero axis point is not
            out[i] = 0.0
            continue
        dress = (omega_c**2 / 2.0) / (gamma0 - 1j * d)

        def f(u):
            return 1.0 / (base + dress * u**beta)

        knee = abs(dress / base) ** (-1.0 / beta)
        points = [knee] if 0 < knee < 1 else None
        with np.errstate(all="ignore"):
            val, err, info = integrate.quad(f, 0.0, 1.0, epsrel=rtol, epsabs=0.0, limit=400,
                                            points=points, complex_func=True, full_output=True)
        if abs(err) > 10 * rtol * abs(val) and abs(err) > 1e-300:
            raise QuadratureError(
                f"quadrature did not converge at delta={d:.6g} rad/s: value={val}, "
                f"error estimate={err:.3g}, info={info.get('real', info)!s:.200}")
        out[i] = 1j * g_n**2 * val
    return out.reshape(delta.shape) if delta.ndim else complex(out[0])


def susceptibility(delta, params, variant="continuous", *, positions=None, g=None, w_p=None,
                   w_c=None):
    """Dispatch on the model variant using a :class:`SystemParams`."""
    if variant == "continuous":
        if params.beta != 1.0:
            return chi_quadrature(delta, params.g_n, params.gamma, params.gamma0,
                                  params.omega_c, params.beta)
        return chi_continuous(delta, params.g_n, params.gamma, params.gamma0, params.omega_c)
    if variant == "canonical":
        return chi_canonical(delta, params.g_n, params.gamma, params.gamma0, params.omega_c)
    if variant == "quadrature":
        return chi_quadrature(delta, params.g_n, params.gamma, params.gamma0, params.omega_c,
                              params.beta)
    if variant == "discrete":
        if positions is None or g is None or w_p is None:
            raise InvalidParameterError("discrete variant needs positions, g and w_p")
        return chi_discrete(positions, g, params.gamma, params.gamma0, params.omega_c,
                            delta, w_p, w_c)
    raise InvalidParameterError(f"unknown susceptibility variant {variant!r}")
