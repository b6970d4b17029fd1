"""Parameter extraction from spectra and buildup traces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .params import InvalidParameterError, SystemParams, TWO_PI, mhz, to_mhz
from .spectrum import SpectrumTable, spectrum_at

MAX_ITER = 200
XTOL = 1e-8
GTOL = 1e-10
FD_STEP = 1e-6


class FitError(ArithmeticError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class DegenerateFitError(FitError):
    pass


class InsufficientDataError(FitError):
    pass


@dataclass
class FitResult:
    names: tuple
    values: np.ndarray
    errors: np.ndarray
    rss: float
    iterations: int
    converged: bool
    grad_norm: float
    cost_history: list = field(default_factory=list, repr=False)
    covariance: Optional[np.ndarray] = field(default=None, repr=False)
    n_points: int = 0

    def __getitem__(self, name):
        return self.values[self.names.index(name)]

    def error(self, name):
        return self.errors[self.names.index(name)]

    def as_dict(self):
        return dict(zip(self.names, self.values))

    def report(self, scale=None) -> str:
        """Flat ``key = value`` text. ``scale`` maps a name to (factor, unit)."""
        scale = scale or {}
        lines = []
        for n, v, e in zip(self.names, self.values, self.errors):
            f, unit = scale.get(n, (1.0, ""))
            suffix = f" {unit}" if unit else ""
            lines.append(f"{n} = {v * f:.10g}{suffix}")
            lines.append(f"{n}_err = {e * f:.3g}{suffix}")
        lines += [f"rss = {self.rss:.6g}", f"iterations = {self.iterations}",
                  f"converged = {str(self.converged).lower()}",
                  f"grad_norm = {self.grad_norm:.3g}", f"n_points = {self.n_points}"]
        return "\n".join(lines) + "\n"

    def csv_row(self):
        row = {}
        for n, v, e in zip(self.names, self.values, self.errors):
            row[n] = v
            row[n + "_err"] = e
        row.update(rss=self.rss, iterations=self.iterations, converged=self.converged,
                   grad_norm=self.grad_norm)
        return row


def _jacobian(fun, p, r0, step, typical):
    """Central differences; the step is relative to max(|p_j|, typical_j)."""
    J = np.empty((r0.size, p.size))
    for j in range(p.size):
        h = step * max(abs(p[j]), typical[j])
        hi = p.copy()
        lo = p.copy()
        hi[j] += h
        lo[j] -= h
        J[:, j] = (fun(hi) - fun(lo)) / (hi[j] - lo[j])
    return J


def _grad_cosine(J, r):
    """Largest |cos| between the residual and any Jacobian column (0 at a stationary point)."""
    rn = np.linalg.norm(r)
    if rn == 0:
        return 0.0
    cn = np.linalg.norm(J, axis=0)
    cn[cn == 0] = 1.0
    return float(np.max(np.abs(J.T @ r) / (cn * rn)))


def _newton_step_norm(J, r, p, xtol):
    """Relative size of the Gauss-Newton step, |(J^T J)^-1 J^T r| / |p|.

    This is the gradient measured in the metric of J^T J; it vanishes at a
    stationary point and stays at rounding level when the residual is pure noise.
    """
    try:
        step = np.linalg.lstsq(J, r, rcond=None)[0]
    except np.linalg.LinAlgError:
        return math.inf
    return float(np.linalg.norm(step) / (np.linalg.norm(p) + xtol))


def levenberg_marquardt(fun: Callable, p0, names=None, *, max_iter=MAX_ITER, xtol=XTOL,
                        gtol=GTOL, fd_step=FD_STEP, lam0=1e-3) -> FitResult:
    """Damped Gauss-Newton with Marquardt's diagonal scaling.

    Only steps that do not increase the cost are accepted, so the cost
    history is non-increasing. Stops when the relative parameter step drops
    below ``xtol``, the residual is orthogonal to the Jacobian to ``gtol``, or
    no damping yields a decrease. The result counts as converged only if the
    relative Gauss-Newton step at the final point (``grad_norm``) is below ``xtol``.
    """
    p = np.asarray(p0, dtype=float).copy()
    typical = np.where(p != 0, np.abs(p), 1.0)
    names = tuple(names) if names is not None else tuple(f"p{i}" for i in range(p.size))
    r = np.asarray(fun(p), dtype=float)
    if r.size < p.size:
        raise InsufficientDataError(f"{r.size} residuals for {p.size} parameters")
    cost = float(r @ r)
    history = [cost]
    lam = lam0
    stopped = False
    it = 0
    J = _jacobian(fun, p, r, fd_step, typical)
    while it < max_iter:
        g = J.T @ r
        if _grad_cosine(J, r) <= gtol:
            stopped = True
            break
        JTJ = J.T @ J
        diag = np.diag(JTJ).copy()
        if np.any(diag == 0):
            raise DegenerateFitError(
                f"parameters {[n for n, d in zip(names, diag) if d == 0]} do not affect the residuals")
        it += 1
        accepted = False
        while not accepted:
            try:
                step = np.linalg.solve(JTJ + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError as exc:
                raise DegenerateFitError(f"singular normal equations: {exc}") from exc
            trial = p + step
            r_trial = np.asarray(fun(trial), dtype=float)
            c_trial = float(r_trial @ r_trial)
            if np.isfinite(c_trial) and c_trial <= cost:
                accepted = True
                p, r, cost = trial, r_trial, c_trial
                history.append(cost)
                lam = max(lam / 10.0, 1e-12)
            else:
                lam *= 10.0
                if lam > 1e16:
                    break
        small_step = np.linalg.norm(step) <= xtol * (np.linalg.norm(p) + xtol)
        J = _jacobian(fun, p, r, fd_step, typical)
        if not accepted or small_step:
            stopped = True
            break

    JTJ = J.T @ J
    dof = max(r.size - p.size, 1)
    try:
        cov = np.linalg.inv(JTJ) * (cost / dof)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFitError(f"singular normal equations at the optimum: {exc}") from exc
    errors = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    grad_norm = _newton_step_norm(J, r, p, xtol)
    converged = stopped and grad_norm <= xtol
    result = FitResult(names=names, values=p, errors=errors, rss=cost, iterations=it,
                       converged=converged, grad_norm=grad_norm, cost_history=history,
                       covariance=cov, n_points=r.size)
    if not converged:
        why = (f"no convergence after {max_iter} iterations" if not stopped else
               f"stalled with relative Gauss-Newton step {grad_norm:.3g} > {xtol:.3g}")
        raise FitError(f"{why} (rss={cost:.4g})", result)
    return result


# ---------------------------------------------------------------------------
# Lorentzian

def lorentzian_dip(delta, center, hwhm, depth, baseline):
    return baseline - depth * hwhm**2 / ((delta - center) ** 2 + hwhm**2)


def fit_lorentzian(spectrum: SpectrumTable, column="reflectivity", p0=None) -> FitResult:
    """Least-squares Lorentzian dip; values in rad/s for center and hwhm."""
    x = np.asarray(spectrum.delta, dtype=float)
    y = np.asarray(getattr(spectrum, column), dtype=float)
    if x.size < 5:
        raise InsufficientDataError("need at least 5 points for a Lorentzian fit")
    if p0 is None:
        i = int(np.argmin(y))
        baseline = float(np.max(y))
        depth = baseline - float(y[i])
        half = y[i] + depth / 2
        inside = x[y <= half]
        hwhm = max((inside.max() - inside.min()) / 2, np.min(np.abs(np.diff(x))))
        p0 = [x[i], hwhm, depth, baseline]
    # frequencies in units of the initial width
    w = max(abs(p0[1]), 1.0)
    scale = np.array([w, w, 1.0, 1.0])

    def resid(q):
        return lorentzian_dip(x, *(q * scale)) - y

    res = levenberg_marquardt(resid, np.asarray(p0, dtype=float) / scale,
                              names=("center", "hwhm", "depth", "baseline"))
    res.values = res.values * scale
    res.values[1] = abs(res.values[1])
    res.errors = res.errors * scale
    return res


# ---------------------------------------------------------------------------
# Full-model spectrum fits

def fit_spectrum_global(datasets: Sequence[SpectrumTable], base: SystemParams,
                        g_n0=None, omega_c0=None, *, observable="reflectivity",
                        variant="continuous", fit_g_n=True) -> FitResult:
    """Shared g_N with one Omega_c per dataset; kappa, gamma, gamma0 held at ``base``.

    Parameters are fitted in linear MHz; returned values and errors are rad/s.
    """
    if not datasets:
        raise InsufficientDataError("no datasets")
    n = len(datasets)
    g_n0 = base.g_n if g_n0 is None else g_n0
    if omega_c0 is None:
        omega_c0 = [base.omega_c] * n
    omega_c0 = list(omega_c0)
    if len(omega_c0) != n:
        raise InvalidParameterError("one initial Omega_c per dataset")
    col = {"reflectivity": 0, "transmittivity": 1}[observable]
    ys = [np.asarray(getattr(d, observable), dtype=float) for d in datasets]

    def unpack(q):
        if fit_g_n:
            return mhz(q[0]), [mhz(v) for v in q[1:]]
        return g_n0, [mhz(v) for v in q]

    def resid(q):
        g_n, oms = unpack(q)
        out = []
        for ds, y, om in zip(datasets, ys, oms):
            p = base.with_(g_n=abs(g_n), omega_c=abs(om))
            model = spectrum_at(ds.delta, p, variant)[col]
            out.append(model - y)
        return np.concatenate(out)

    q0 = ([to_mhz(g_n0)] if fit_g_n else []) + [to_mhz(o) for o in omega_c0]
    names = (("g_n",) if fit_g_n else ()) + tuple(f"omega_c_{i}" for i in range(n))
    res = levenberg_marquardt(resid, q0, names=names)
    res.values = np.abs(mhz(res.values))
    res.errors = mhz(res.errors)
    if res.covariance is not None:
        res.covariance = res.covariance * (TWO_PI * 1e6) ** 2
    return res


def fit_two_level(spectrum: SpectrumTable, base: SystemParams, g_n0=None,
                  observable="reflectivity") -> FitResult:
    """g_N from a no-control spectrum (control field fixed at zero)."""
    g_n0 = base.g_n if g_n0 is None else g_n0
    col = {"reflectivity": 0, "transmittivity": 1}[observable]
    y = np.asarray(getattr(spectrum, observable), dtype=float)

    def resid(q):
        p = base.with_(g_n=abs(mhz(q[0])), omega_c=0.0)
        return spectrum_at(spectrum.delta, p)[col] - y

    res = levenberg_marquardt(resid, [to_mhz(g_n0)], names=("g_n",))
    res.values = np.abs(mhz(res.values))
    res.errors = mhz(res.errors)
    return res


# ---------------------------------------------------------------------------
# Buildup traces

def buildup_window(trace, kappa=None, *, start=0.0, max_end=3e-6, fraction=0.9,
                   initial=None, steady=None, guard=None):
    """(t1, t2) for the exponential buildup fit.

    The fit starts at ``start`` (the probe turn-on by default). It ends at the
    earlier of ``max_end`` and the first time after ``guard`` (default 5/kappa,
    past the bare-cavity transient) at which R has covered ``fraction`` of its
    drop from the no-control absorptive level to the EIT steady level.
    Levels default to the trace metadata, then to R(start) and the last sample.
    """
    t = trace.t
    R = trace.reflectivity
    meta = trace.meta
    if initial is None:
        initial = meta.get("absorptive_reflectivity", float(np.interp(start, t, R)))
    if steady is None:
        steady = meta.get("steady_reflectivity", R[-1])
    if guard is None:
        kappa = kappa if kappa is not None else meta.get("kappa")
        guard = 5.0 / kappa if kappa else start
    target = initial - fraction * (initial - steady)
    after = t >= max(guard, start)
    if initial >= steady:
        hit = np.nonzero(after & (R <= target))[0]
    else:
        hit = np.nonzero(after & (R >= target))[0]
    t2 = max_end
    if hit.size:
        t2 = min(t2, float(t[hit[0]]))
    return start, t2


def fit_exponential_buildup(trace, window=None, *, p0=None) -> FitResult:
    """Least-squares R(t) = b exp(-2 gamma_EIT t), uniform weights, over ``window``."""
    if window is None:
        window = buildup_window(trace)
    t1, t2 = window
    t = np.asarray(trace.t)
    R = np.asarray(trace.reflectivity)
    sel = (t >= t1 - 1e-15) & (t <= t2 + 1e-15)
    if sel.sum() < 5:
        raise InsufficientDataError(f"window [{t1:.3g}, {t2:.3g}] s holds {sel.sum()} samples")
    tt, rr = t[sel], R[sel]
    if p0 is None:
        pos = rr > 0
        if pos.sum() >= 2 and np.ptp(tt[pos]) > 0:
            slope, icpt = np.polyfit(tt[pos], np.log(rr[pos]), 1)
            p0 = [math.exp(icpt), max(-slope / 2.0, 1.0)]
        else:
            p0 = [float(rr[0]), 1.0 / max(np.ptp(tt), 1e-12)]
    # fit rate in units of 1/window length for conditioning
    tau = max(tt[-1] - tt[0], 1e-12)

    def resid(q):
        return q[0] * np.exp(-2.0 * q[1] / tau * tt) - rr

    res = levenberg_marquardt(resid, [p0[0], p0[1] * tau], names=("b", "gamma_eit"))
    res.values = res.values * np.array([1.0, 1.0 / tau])
    res.errors = res.errors * np.array([1.0, 1.0 / tau])
    return res


# ---------------------------------------------------------------------------
# Linear scaling gamma_EIT = offset + slope * Omega_c^2

@dataclass(frozen=True)
class ScalingFit:
    slope: float  # 1/(rad/s), against Omega_c^2 in (rad/s)^2
    offset: float  # rad/s
    alpha: float
    slope_err: float
    offset_err: float
    alpha_err: float
    n_points: int

    @property
    def slope_per_2pi_mhz(self) -> float:
        """Slope in the units of a gamma/2pi [MHz] vs (Omega/2pi)^2 [MHz^2] plot."""
        return self.slope * TWO_PI * 1e6

    @property
    def offset_khz(self) -> float:
        return self.offset / TWO_PI / 1e3

    def report(self) -> str:
        return (f"slope_per_2pi_mhz = {self.slope_per_2pi_mhz:.6g}\n"
                f"slope_err_per_2pi_mhz = {self.slope_err * TWO_PI * 1e6:.3g}\n"
                f"offset_khz = {self.offset_khz:.6g}\n"
                f"offset_err_khz = {self.offset_err / TWO_PI / 1e3:.3g}\n"
                f"alpha = {self.alpha:.6g}\n"
                f"alpha_err = {self.alpha_err:.3g}\n"
                f"n_points = {self.n_points}\n")

    def csv_row(self):
        return {"slope_per_2pi_mhz": self.slope_per_2pi_mhz, "offset_khz": self.offset_khz,
                "alpha": self.alpha, "alpha_err": self.alpha_err, "n_points": self.n_points}


def alpha_from_slope(slope, gamma, c):
    """Scaling factor in gamma_EIT = gamma0 + Omega_c^2 / (2 alpha gamma (1 + 2C))."""
    return 1.0 / (2.0 * slope * gamma * (1.0 + 2.0 * c))


def fit_scaling(omega_c_sq, rates, gamma, c) -> ScalingFit:
    """Ordinary least squares of rate against Omega_c^2 (both in angular units)."""
    x = np.asarray(omega_c_sq, dtype=float)
    y = np.asarray(rates, dtype=float)
    if x.size != y.size:
        raise InvalidParameterError("abscissa and ordinate lengths differ")
    if x.size < 2:
        raise InsufficientDataError("need at least two points")
    if np.ptp(x) == 0:
        raise DegenerateFitError("all Omega_c^2 values coincide")
    xs = np.max(np.abs(x))
    X = np.column_stack([x / xs, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    slope, offset = coef[0] / xs, coef[1]
    if x.size > 2:
        resid = y - X @ coef
        s2 = resid @ resid / (x.size - 2)
        cov = s2 * np.linalg.inv(X.T @ X)
        slope_err, offset_err = np.sqrt(np.diag(cov)) / np.array([xs, 1.0])
    else:
        slope_err = offset_err = 0.0
    alpha = alpha_from_slope(slope, gamma, c)
    alpha_err = abs(alpha * slope_err / slope) if slope != 0 else math.inf
    return ScalingFit(slope=float(slope), offset=float(offset), alpha=float(alpha),
                      slope_err=float(slope_err), offset_err=float(offset_err),
                      alpha_err=float(alpha_err), n_points=int(x.size))
