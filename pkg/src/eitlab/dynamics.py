"""Transient buildup of cavity EIT after the probe is switched on.

The ensemble is split into M radial shells. Shell k carries a fraction
``weights[k]`` of the probe-intensity-weighted ion number and sees the local
control intensity ``u_k**beta`` (u = Psi_p^2 is the probe mode intensity).
Each shell contributes one collective optical coherence and one collective
ground-state coherence, so the linear system has 2M + 1 complex amplitudes::

    a'   = -(kappa - i D) a + i sum_k G_k sigma_k + sqrt(2 kappa_H) a_in
    sigma_k' = -(gamma - i D) sigma_k + i G_k a + i Oc_k s_k
    s_k' = -(gamma0 - i D) s_k + i Oc_k sigma_k

with G_k = g_N sqrt(weights[k]) and Oc_k = (Omega_c / sqrt 2) u_k**(beta/2).
Between switching events the system is linear time-invariant and is
propagated exactly through an eigendecomposition.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, linalg

from .params import InvalidParameterError, SystemParams
from .spectrum import fmt, reflectivity_transmittivity

CSV_HEADER = ("t_us", "reflectivity", "photon_number")
SCHEMES = ("gauss-log", "uniform")
DEFAULT_SHELLS = 64
LOG_SPAN = 40.0  # shells cover probe intensities down to exp(-LOG_SPAN)


class IntegrationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ShellDiscretization:
    u: np.ndarray  # probe mode intensity per shell, strictly decreasing
    weights: np.ndarray  # sums to one
    beta: float = 1.0
    scheme: str = "gauss-log"

    @property
    def size(self) -> int:
        return len(self.u)

    def couplings(self, g_n):
        return g_n * np.sqrt(self.weights)

    def control(self, omega_c):
        return omega_c / math.sqrt(2.0) * self.u ** (self.beta / 2.0)

    def susceptibility(self, delta, params: SystemParams):
        """Steady-state susceptibility of the shell model (the quadrature sum)."""
        delta = np.atleast_1d(np.asarray(delta, dtype=float))
        g2 = self.couplings(params.g_n) ** 2
        oc2 = self.control(params.omega_c) ** 2
        out = np.empty(delta.shape, dtype=complex)
        for i, d in enumerate(delta):
            if params.gamma0 == 0 and d == 0:
                den = np.where(oc2 > 0, np.inf, params.gamma)
            else:
                den = params.gamma - 1j * d + oc2 / (params.gamma0 - 1j * d)
            out[i] = 1j * np.sum(g2 / den)
        return out


def discretize(m: int, beta: float = 1.0, scheme: str = "gauss-log",
               log_span: float = LOG_SPAN) -> ShellDiscretization:
    """Split the radial integral over u in (0, 1] into ``m`` shells.

    ``uniform``: midpoints of a uniform partition of (0, 1], equal weights.
    ``gauss-log``: Gauss-Legendre nodes in x = -ln u on [0, log_span] with
    weights exp(-x) dx. Equal-x steps are equal-area rings, and the rule
    resolves the u ~ 1/Theta knee that the uniform partition smears out when
    the control saturates the two-photon transition.
    """
    if m < 1:
        raise InvalidParameterError("need at least one shell")
    if beta <= 0:
        raise InvalidParameterError("beta must be positive")
    if scheme == "uniform":
        u = (np.arange(m, 0, -1) - 0.5) / m
        w = np.full(m, 1.0 / m)
    elif scheme == "gauss-log":
        x, gw = np.polynomial.legendre.leggauss(m)
        x = (x + 1.0) * log_span / 2.0
        w = gw * log_span / 2.0 * np.exp(-x)
        u = np.exp(-x)
        w = w / w.sum()
    else:
        raise InvalidParameterError(f"unknown shell scheme {scheme!r}")
    return ShellDiscretization(u=u, weights=w, beta=beta, scheme=scheme)


def system_matrix(params: SystemParams, disc: ShellDiscretization, omega_c=None,
                  a_in=None):
    """(A, b) with y' = A y + b, y = [a, sigma_1..sigma_M, s_1..s_M]."""
    if omega_c is None:
        omega_c = params.omega_c
    if a_in is None:
        a_in = math.sqrt(params.flux)
    m = disc.size
    n = 2 * m + 1
    d = params.delta
    g = disc.couplings(params.g_n)
    oc = disc.control(omega_c)
    k = np.arange(m)
    A = np.zeros((n, n), dtype=complex)
    A[0, 0] = -(params.kappa - 1j * d)
    A[0, 1:m + 1] = 1j * g
    A[1 + k, 0] = 1j * g
    A[1 + k, 1 + k] = -(params.gamma - 1j * d)
    A[1 + k, 1 + m + k] = 1j * oc
    A[1 + m + k, 1 + m + k] = -(params.gamma0 - 1j * d)
    A[1 + m + k, 1 + k] = 1j * oc
    b = np.zeros(n, dtype=complex)
    b[0] = math.sqrt(2.0 * params.kappa_h) * a_in
    return A, b


def _phi1(z):
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-8
    out = np.empty_like(z)
    out[small] = 1.0 + z[small] / 2.0
    out[~small] = np.expm1(z[~small]) / z[~small]
    return out


class LinearPropagator:
    """Exact solution of y' = A y + b for constant A, b.

    Uses A = V diag(lam) V^-1 when V is well conditioned, otherwise matrix
    exponentials of the augmented system.
    """

    def __init__(self, A, b, max_cond=1e10):
        self.A = np.asarray(A, dtype=complex)
        self.b = np.asarray(b, dtype=complex)
        lam, V = np.linalg.eig(self.A)
        cond = np.linalg.cond(V)
        self.use_eig = bool(np.isfinite(cond) and cond < max_cond)
        self.cond = cond
        if self.use_eig:
            self.lam = lam
            self.V = V
            self.cb = np.linalg.solve(V, self.b)

    def steady_state(self):
        return np.linalg.solve(self.A, -self.b)

    def __call__(self, y0, times):
        """States at ``times`` (measured from the moment y = y0), shape (len(times), n)."""
        times = np.asarray(times, dtype=float)
        y0 = np.asarray(y0, dtype=complex)
        if self.use_eig:
            c0 = np.linalg.solve(self.V, y0)
            z = np.outer(times, self.lam)
            coeff = np.exp(z) * c0 + times[:, None] * _phi1(z) * self.cb
            return coeff @ self.V.T
        return self._expm_path(y0, times)

    def _expm_path(self, y0, times):
        n = len(self.b)
        aug = np.zeros((n + 1, n + 1), dtype=complex)
        aug[:n, :n] = self.A
        aug[:n, n] = self.b
        out = np.empty((len(times), n), dtype=complex)
        steps = np.diff(times)
        uniform = len(times) > 2 and np.allclose(steps, steps[0], rtol=1e-9, atol=0)
        if uniform:
            first = linalg.expm(aug * times[0]) @ np.append(y0, 1.0)
            step = linalg.expm(aug * steps[0])
            state = first
            out[0] = state[:n]
            for i in range(1, len(times)):
                state = step @ state
                out[i] = state[:n]
            return out
        for i, t in enumerate(times):
            out[i] = (linalg.expm(aug * t) @ np.append(y0, 1.0))[:n]
        return out


def propagate_adaptive(A, b, y0, times, rtol=1e-10, atol=1e-14, method="DOP853"):
    """Cross-check path: explicit adaptive Runge-Kutta on the same linear system."""
    times = np.asarray(times, dtype=float)
    A = np.asarray(A, dtype=complex)
    b = np.asarray(b, dtype=complex)
    sol = integrate.solve_ivp(lambda t, y: A @ y + b, (times[0], times[-1]),
                              np.asarray(y0, dtype=complex), method=method, t_eval=times,
                              rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(f"{method} failed: {sol.message} (nfev={sol.nfev}, "
                               f"last t={sol.t[-1] if sol.t.size else times[0]:.4g} s)")
    return sol.y.T


@dataclass
class DynamicsTrace:
    t: np.ndarray  # s
    a: np.ndarray  # intracavity amplitude
    reflectivity: np.ndarray
    photon_number: np.ndarray
    sigma: Optional[np.ndarray] = None  # (len(t), M)
    s: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for t, r, n in zip(self.t, self.reflectivity, self.photon_number):
                w.writerow([fmt(t * 1e6), fmt(r), fmt(n)])

    @classmethod
    def from_csv(cls, path) -> "DynamicsTrace":
        with open(path) as fh:
            header = tuple(fh.readline().strip().split(","))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected trace header {header}")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(t=data[:, 0] * 1e-6, a=np.full(len(data), np.nan + 0j),
                   reflectivity=data[:, 1], photon_number=data[:, 2])


def sample_times(t_end, sample_dt, t_start=0.0):
    if not sample_dt > 0:
        raise InvalidParameterError("sample_dt must be positive")
    if not t_end > t_start:
        raise InvalidParameterError("t_end must exceed the start time")
    n = int(math.floor((t_end - t_start) / sample_dt + 1e-9))
    return t_start + sample_dt * np.arange(n + 1)


def _reflectivity(a, params: SystemParams, a_in):
    return np.abs(math.sqrt(2.0 * params.kappa_h) * a / a_in - 1.0) ** 2


def _trace(times, Y, params, disc, a_in, keep_shells, meta):
    m = disc.size
    a = Y[:, 0]
    return DynamicsTrace(
        t=times, a=a, reflectivity=_reflectivity(a, params, a_in),
        photon_number=np.abs(a) ** 2,
        sigma=Y[:, 1:m + 1].copy() if keep_shells else None,
        s=Y[:, m + 1:].copy() if keep_shells else None,
        meta=meta)


def _steady_reflectivity(params, disc, omega_c, a_in):
    p = params.with_(omega_c=omega_c)
    chi = disc.susceptibility(params.delta, p)[0]
    r, _ = reflectivity_transmittivity(params.delta, chi, params.rates)
    return float(r)


def step_response(params: SystemParams, disc: Optional[ShellDiscretization] = None,
                  t_end=10e-6, sample_dt=10e-9, *, method="exact", a_in=None,
                  keep_shells=False, rtol=1e-10) -> DynamicsTrace:
    """Probe switched on at t = 0 with the control already in steady state."""
    disc = disc or discretize(DEFAULT_SHELLS, params.beta)
    if a_in is None:
        a_in = math.sqrt(params.flux)
    times = sample_times(t_end, sample_dt)
    A, b = system_matrix(params, disc, a_in=a_in)
    y0 = np.zeros(len(b), dtype=complex)
    if method == "exact":
        prop = LinearPropagator(A, b)
        Y = prop(y0, times)
        meta = {"method": "eig" if prop.use_eig else "expm", "cond": float(prop.cond)}
    elif method == "adaptive":
        Y = propagate_adaptive(A, b, y0, times, rtol=rtol, atol=rtol * abs(a_in) * 1e-3)
        meta = {"method": "adaptive"}
    else:
        raise InvalidParameterError(f"unknown propagation method {method!r}")
    meta["steady_reflectivity"] = _steady_reflectivity(params, disc, params.omega_c, a_in)
    meta["absorptive_reflectivity"] = _steady_reflectivity(params, disc, 0.0, a_in)
    meta["kappa"] = params.kappa
    meta["a_in"] = a_in
    return _trace(times, Y, params, disc, a_in, keep_shells, meta)


def switchoff_response(params: SystemParams, disc: Optional[ShellDiscretization] = None,
                       t_off=5e-6, t_end=10e-6, sample_dt=10e-9, *, method="exact",
                       a_in=None, keep_shells=False, rtol=1e-10) -> DynamicsTrace:
    """As :func:`step_response`, with the control switched off abruptly at ``t_off``.

    The state is continuous across the switch; the sample grid always includes
    ``t_off`` itself, holding the pre-switch state.
    """
    if not 0 <= t_off < t_end:
        raise InvalidParameterError("need 0 <= t_off < t_end")
    disc = disc or discretize(DEFAULT_SHELLS, params.beta)
    if a_in is None:
        a_in = math.sqrt(params.flux)
    times = sample_times(t_end, sample_dt)
    before = times[times <= t_off]
    if before.size == 0 or before[-1] != t_off:
        before = np.append(before, t_off)
    after = times[times > t_off]

    A_on, b = system_matrix(params, disc, a_in=a_in)
    A_off, _ = system_matrix(params, disc, omega_c=0.0, a_in=a_in)
    y0 = np.zeros(len(b), dtype=complex)
    if method == "exact":
        y_before = LinearPropagator(A_on, b)(y0, before) if t_off > 0 else y0[None, :]
        y_after = LinearPropagator(A_off, b)(y_before[-1], after - t_off)
    elif method == "adaptive":
        atol = rtol * abs(a_in) * 1e-3
        y_before = (propagate_adaptive(A_on, b, y0, before, rtol=rtol, atol=atol)
                    if t_off > 0 else y0[None, :])
        y_after = propagate_adaptive(A_off, b, y_before[-1], np.append(0.0, after - t_off),
                                     rtol=rtol, atol=atol)[1:]
    else:
        raise InvalidParameterError(f"unknown propagation method {method!r}")
    all_t = np.concatenate([before, after])
    Y = np.vstack([y_before, y_after])
    meta = {"method": method, "t_off": t_off, "a_in": a_in, "kappa": params.kappa,
            "steady_reflectivity": _steady_reflectivity(params, disc, 0.0, a_in),
            "steady_reflectivity_on": _steady_reflectivity(params, disc, params.omega_c, a_in)}
    return _trace(all_t, Y, params, disc, a_in, keep_shells, meta)


def detector_average(trace: DynamicsTrace, window) -> DynamicsTrace:
    """Boxcar average over [t, t + window], emulating a gated photodetector.

    The returned trace stops at t_end - window.
    """
    if not window > 0:
        raise InvalidParameterError("window must be positive")
    t = trace.t
    keep = t <= t[-1] - window + 1e-15
    if not np.any(keep):
        raise InvalidParameterError("trace shorter than the averaging window")

    def avg(y):
        cum = integrate.cumulative_trapezoid(y, t, initial=0.0)
        return (np.interp(t[keep] + window, t, cum) - cum[keep]) / window

    return DynamicsTrace(t=t[keep], a=trace.a[keep], reflectivity=avg(trace.reflectivity),
                         photon_number=avg(trace.photon_number),
                         meta=dict(trace.meta, boxcar=window))
