"""Config-driven scenario runner.

A scenario is one JSON document (frequencies in linear MHz, times in us).
Every run validates the whole config, computes all results in memory, and
only then writes CSV files plus ``manifest.json`` into the output directory.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import __version__
from .analysis import (FIT_SAMPLE_DT, FIT_WINDOW_MAX, FIT_WINDOW_START, crystal, n_scan_report,
                       omega_scan, scaling_from_scan)
from .dynamics import (DEFAULT_SHELLS, LOG_SPAN, SCHEMES, DynamicsTrace, _steady_reflectivity,
                       detector_average, discretize, step_response, switchoff_response)
from .fitting import (buildup_window, fit_exponential_buildup, fit_lorentzian, fit_scaling,
                      fit_spectrum_global, fit_two_level)
from .params import (G_SINGLE_LARGE_CRYSTAL, APPARATUS_GEOMETRY, CavityGeometry, CavityRates,
                     DriveParams, EnsembleParams, InvalidParameterError, SystemParams, TWO_PI,
                     build_system, derive_cavity_rates, g_n_for_cooperativity, mhz,
                     apparatus_defaults, to_mhz)
from .reproduce import FIGURES, SCALING_HEADER, reproduce, write_rows
from .spectrum import (FULL_SPAN, FULL_STEP, SpectrumTable, detuning_grid, scan_spectrum,
                       transparency_dip)
from .susceptibility import VARIANTS, matched_disk

SCHEMA_VERSION = 1
MODES = ("spectrum", "dynamics", "scan-omega", "scan-n", "fit", "reproduce")
FIT_KINDS = ("lorentzian", "global", "two-level", "buildup", "scaling")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_pos_list = {"type": "array", "items": _pos, "minItems": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "mode": {"enum": list(MODES)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["apparatus", "none"]},
                "kappa_mhz": _pos, "kappa_h_mhz": _nonneg, "kappa_l_mhz": _nonneg,
                "gamma_mhz": _pos, "gamma0_mhz": _nonneg,
                "g_n_mhz": _nonneg, "cooperativity": _nonneg,
                "omega_c_mhz": _nonneg, "delta_mhz": _num, "beta": _pos,
                "input_flux": _nonneg,
                "geometry": {
                    "type": "object", "additionalProperties": False,
                    "required": ["cavity_length_mm", "t_h_ppm", "t_l_ppm", "loss_ppm"],
                    "properties": {"cavity_length_mm": _pos, "t_h_ppm": _nonneg,
                                   "t_l_ppm": _nonneg, "loss_ppm": _nonneg,
                                   "waist_probe_um": _pos, "waist_control_um": _pos},
                },
                "ensemble": {
                    "type": "object", "additionalProperties": False,
                    "properties": {"g_mhz": _nonneg, "n_eff": _nonneg,
                                   "density_cm3": _nonneg, "half_length_um": _pos},
                },
            },
        },
        "spectrum": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "span_mhz": _nonneg, "step_mhz": _pos, "center_mhz": _num,
                "deltas_mhz": {"type": "array", "items": _num, "minItems": 1},
                "variant": {"enum": list(VARIANTS)},
                "ions": {"type": "integer", "minimum": 1},
                "disk_radius_waists": _pos,
                "dip": {"type": "boolean"},
            },
        },
        "dynamics": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "t_end_us": _pos, "sample_dt_us": _pos, "t_off_us": _nonneg,
                "shells": {"type": "integer", "minimum": 1},
                "scheme": {"enum": list(SCHEMES)}, "log_span": _pos,
                "method": {"enum": ["exact", "adaptive"]},
                "boxcar_us": _pos, "keep_shells": {"type": "boolean"},
            },
        },
        "buildup_fit": {
            "type": "object", "additionalProperties": False,
            "properties": {"start_us": _nonneg, "max_end_us": _pos, "sample_dt_us": _pos,
                           "fraction": {"type": "number", "exclusiveMinimum": 0,
                                        "exclusiveMaximum": 1},
                           "guard_us": _nonneg},
        },
        "scan_omega": {
            "type": "object", "additionalProperties": False, "required": ["omega_c_mhz"],
            "properties": {"omega_c_mhz": _pos_list, "dynamics": {"type": "boolean"},
                           "spectra": {"type": "boolean"}},
        },
        "scan_n": {
            "type": "object", "additionalProperties": False, "required": ["n_eff", "omega_c_mhz"],
            "properties": {"n_eff": _pos_list, "omega_c_mhz": _pos, "g_single_mhz": _pos},
        },
        "fit": {
            "type": "object", "additionalProperties": False, "required": ["kind", "data"],
            "properties": {
                "kind": {"enum": list(FIT_KINDS)},
                "data": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "observable": {"enum": ["reflectivity", "transmittivity"]},
                "g_n0_mhz": _pos,
                "omega_c0_mhz": _pos_list,
                "window_us": {"type": "array", "items": _nonneg, "minItems": 2, "maxItems": 2},
            },
        },
        "reproduce": {
            "type": "object", "additionalProperties": False, "required": ["figure"],
            "properties": {"figure": {"type": "string"}},
        },
        "output": {
            "type": "object", "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "svg": {"type": "boolean"}},
        },
    },
}


class ConfigError(ValueError):
    """Invalid scenario; the CLI maps it to exit status 2."""


@dataclass
class RunManifest:
    mode: str
    version: str
    seed: Optional[int]
    params: dict
    outputs: list
    duration_s: float
    config: dict
    summary: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"tool": "eitlab", "version": self.version, "mode": self.mode,
                           "seed": self.seed, "resolved_params": self.params,
                           "outputs": self.outputs, "summary": self.summary,
                           "duration_s": round(self.duration_s, 3), "config": self.config},
                          indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Loading and validation

def _line_of(text, key):
    """1-based line of the first occurrence of ``"key"`` in the raw JSON, if any."""
    if not text or key is None:
        return None
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def validate(config: dict, text: Optional[str] = None) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if not errors:
        return
    msgs = []
    for e in errors:
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        key = next((p for p in reversed(e.absolute_path) if isinstance(p, str)), None)
        if e.validator == "additionalProperties":
            extra = [k for k in e.instance if k not in e.schema.get("properties", {})]
            key = extra[0] if extra else key
        line = _line_of(text, key)
        where = f"line {line}, " if line else ""
        msgs.append(f"{where}field {path}: {e.message}")
    raise ConfigError("invalid config:\n  " + "\n  ".join(msgs))


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    validate(config, text)
    return config


# ---------------------------------------------------------------------------
# Resolution of config blocks

def resolve_params(block: Optional[dict]) -> SystemParams:
    """SystemParams from the ``params`` block; unspecified rates come from the preset."""
    block = dict(block or {})
    preset = block.pop("preset", "apparatus")
    geometry = block.pop("geometry", None)
    ensemble = block.pop("ensemble", None)
    try:
        geom = None
        if geometry is not None:
            geom = CavityGeometry(
                cavity_length=geometry["cavity_length_mm"] * 1e-3,
                t_h_ppm=geometry["t_h_ppm"], t_l_ppm=geometry["t_l_ppm"],
                loss_ppm=geometry["loss_ppm"],
                waist_probe=geometry.get("waist_probe_um", APPARATUS_GEOMETRY.waist_probe * 1e6) * 1e-6,
                waist_control=geometry.get("waist_control_um",
                                           APPARATUS_GEOMETRY.waist_control * 1e6) * 1e-6)
        base = apparatus_defaults() if preset == "apparatus" else None
        direct_rates = None
        if "kappa_mhz" in block:
            kappa = mhz(block["kappa_mhz"])
            kh = mhz(block["kappa_h_mhz"]) if "kappa_h_mhz" in block else (
                base.kappa_h / base.kappa * kappa if base else None)
            kl = mhz(block["kappa_l_mhz"]) if "kappa_l_mhz" in block else (
                base.kappa_l / base.kappa * kappa if base else 0.0)
            if kh is None:
                raise ConfigError("params.kappa_h_mhz is required without a preset")
            direct_rates = CavityRates(kappa, kh, kl)
        elif geom is None and base is not None:
            direct_rates = base.rates
        elif geom is None:
            raise ConfigError("params need kappa_mhz or a geometry block when preset is none")

        def rate(name, default_attr):
            if name in block:
                return mhz(block[name])
            if base is None:
                raise ConfigError(f"params.{name} is required when preset is none")
            return getattr(base, default_attr)

        gamma = rate("gamma_mhz", "gamma")
        gamma0 = rate("gamma0_mhz", "gamma0")
        ens = EnsembleParams(
            gamma=gamma, gamma0=gamma0,
            g=mhz(ensemble["g_mhz"]) if ensemble and "g_mhz" in ensemble else None,
            n_eff=ensemble.get("n_eff") if ensemble else None,
            density=ensemble["density_cm3"] * 1e6 if ensemble and "density_cm3" in ensemble else None,
            half_length=(ensemble["half_length_um"] * 1e-6
                         if ensemble and "half_length_um" in ensemble else None))
        kappa_for_c = direct_rates.kappa if direct_rates else derive_cavity_rates(geom).kappa
        if "g_n_mhz" in block and "cooperativity" in block:
            raise ConfigError("params: give g_n_mhz or cooperativity, not both")
        g_n = None
        if "g_n_mhz" in block:
            g_n = mhz(block["g_n_mhz"])
        elif "cooperativity" in block:
            g_n = g_n_for_cooperativity(block["cooperativity"], kappa_for_c, gamma)
        elif ens.g is None or (ens.n_eff is None and ens.density is None):
            g_n = 0.0
        drive = DriveParams(omega_c=mhz(block.get("omega_c_mhz", 0.0)),
                            delta=mhz(block.get("delta_mhz", 0.0)),
                            input_flux=block.get("input_flux"))
        p = build_system(geometry=geom, rates=direct_rates, ensemble=ens, g_n=g_n, drive=drive)
        if "beta" in block:
            p = p.with_(beta=float(block["beta"]))
        return p
    except InvalidParameterError as exc:
        raise ConfigError(f"params: {exc}") from exc


def _shells(cfg: dict, params: SystemParams):
    d = cfg.get("dynamics", {})
    return discretize(d.get("shells", DEFAULT_SHELLS), params.beta, d.get("scheme", "gauss-log"),
                      d.get("log_span", LOG_SPAN))


def _fit_kw(cfg: dict) -> dict:
    b = cfg.get("buildup_fit", {})
    return {"sample_dt": b.get("sample_dt_us", FIT_SAMPLE_DT * 1e6) * 1e-6,
            "window_start": b.get("start_us", FIT_WINDOW_START * 1e6) * 1e-6,
            "window_max": b.get("max_end_us", FIT_WINDOW_MAX * 1e6) * 1e-6}


def _window_kw(cfg: dict) -> dict:
    b = cfg.get("buildup_fit", {})
    kw = {}
    if "fraction" in b:
        kw["fraction"] = b["fraction"]
    if "guard_us" in b:
        kw["guard"] = b["guard_us"] * 1e-6
    return kw


def _require_seed(cfg, seed):
    if seed is None:
        raise ConfigError("field seed: required when stochastic sampling is requested "
                          "(spectrum.variant = discrete)")


# ---------------------------------------------------------------------------
# Modes. Each returns (writers, summary lines); writers map file name -> callable(path).

def _spectrum_grid(s: dict):
    if "deltas_mhz" in s:
        return mhz(np.asarray(s["deltas_mhz"], dtype=float))
    span = mhz(s.get("span_mhz", to_mhz(FULL_SPAN)))
    step = mhz(s.get("step_mhz", to_mhz(FULL_STEP)))
    grid = detuning_grid(span, step, mhz(s.get("center_mhz", 0.0)))
    if grid.size == 0:
        raise ConfigError("field spectrum: empty detuning grid")
    return grid


def run_spectrum(cfg, params, seed):
    s = cfg.get("spectrum", {})
    grid = _spectrum_grid(s)
    variant = s.get("variant", "continuous")
    kw = {}
    if variant == "discrete":
        _require_seed(cfg, seed)
        count = s.get("ions", 100_000)
        w = APPARATUS_GEOMETRY.waist_probe
        radius = s.get("disk_radius_waists", 5.0) * w
        kw = matched_disk(params, count, radius, w, seed, beta=params.beta)
    table = scan_spectrum(params, variant=variant, deltas=grid, **kw)
    writers = {"spectrum.csv": lambda path: table.to_csv(path)}
    summary = [f"points = {len(table)}", f"variant = {variant}",
               f"min_reflectivity = {table.reflectivity.min():.6g}"]
    if s.get("dip", False) and params.omega_c > 0:
        dip = transparency_dip(params, variant, **kw)
        summary += [f"dip_hwhm_khz = {dip.hwhm / TWO_PI / 1e3:.6g}",
                    f"dip_depth = {dip.depth:.6g}", f"dip_baseline = {dip.baseline:.6g}"]
        writers["dip.txt"] = _text("\n".join(summary[-3:]) + "\n")
    return writers, summary


def run_dynamics(cfg, params, seed):
    d = cfg.get("dynamics", {})
    disc = _shells(cfg, params)
    t_end = d.get("t_end_us", 10.0) * 1e-6
    dt = d.get("sample_dt_us", 0.01) * 1e-6
    method = d.get("method", "exact")
    keep = d.get("keep_shells", False)
    if "t_off_us" in d:
        t_off = d["t_off_us"] * 1e-6
        if not t_off < t_end:
            raise ConfigError("field dynamics/t_off_us: must be below t_end_us")
        tr = switchoff_response(params, disc, t_off, t_end, dt, method=method, keep_shells=keep)
    else:
        tr = step_response(params, disc, t_end, dt, method=method, keep_shells=keep)
    writers = {"trace.csv": lambda path: tr.to_csv(path)}
    if "boxcar_us" in d:
        avg = detector_average(tr, d["boxcar_us"] * 1e-6)
        writers["trace_boxcar.csv"] = lambda path: avg.to_csv(path)
    if keep:
        writers["shells.csv"] = _shell_writer(tr, disc)
    summary = [f"samples = {len(tr)}", f"method = {tr.meta.get('method')}",
               f"final_reflectivity = {tr.reflectivity[-1]:.6g}",
               f"steady_reflectivity = {tr.meta['steady_reflectivity']:.6g}"]
    return writers, summary


def _shell_writer(tr: DynamicsTrace, disc):
    def write(path):
        m = disc.size
        header = ["t_us"] + [f"{part}_{k}_{c}" for part in ("sigma", "s") for k in range(m)
                             for c in ("re", "im")]
        rows = []
        for i, t in enumerate(tr.t):
            row = [t * 1e6]
            for arr in (tr.sigma, tr.s):
                for v in arr[i]:
                    row += [v.real, v.imag]
            rows.append(row)
        write_rows(path, header, rows)
    return write


def _scan_rows(points):
    out = []
    for p in points:
        hw = p.hwhm / TWO_PI / 1e3 if p.hwhm is not None else math.nan
        rt = p.rate / TWO_PI / 1e3 if p.rate is not None else math.nan
        err = p.rate_err / TWO_PI / 1e3 if p.rate_err is not None else math.nan
        ratio = p.ratio if p.ratio is not None else math.nan
        out.append((to_mhz(p.omega_c), hw, rt, err, ratio))
    return out


def run_scan_omega(cfg, params, seed):
    s = cfg["scan_omega"] if "scan_omega" in cfg else None
    if s is None:
        raise ConfigError("field scan_omega: required for mode scan-omega")
    dyn, spec = s.get("dynamics", True), s.get("spectra", True)
    if not (dyn or spec):
        raise ConfigError("field scan_omega: enable dynamics and/or spectra")
    pts = omega_scan(params, [mhz(o) for o in s["omega_c_mhz"]], dynamics=dyn, spectra=spec,
                     disc=_shells(cfg, params), **_fit_kw(cfg))
    rows = _scan_rows(pts)
    writers = {"scan_omega.csv": _rows_writer(
        ("omega_c_mhz", "hwhm_khz", "rate_khz", "rate_err_khz", "rate_over_hwhm"), rows)}
    fits = []
    summary = []
    if len(pts) >= 2:
        for src, on in (("hwhm", spec), ("rate", dyn)):
            if on:
                f = scaling_from_scan(pts, params, src)
                fits.append((src, f))
                summary.append(f"{src}: slope_per_2pi_mhz = {f.slope_per_2pi_mhz:.6g}, "
                               f"offset_khz = {f.offset_khz:.6g}, alpha = {f.alpha:.6g}")
        writers["scaling.csv"] = _rows_writer(
            SCALING_HEADER, [(n, f.slope_per_2pi_mhz, f.offset_khz, f.alpha, f.alpha_err,
                              f.n_points) for n, f in fits])
    return writers, summary


def run_scan_n(cfg, params, seed):
    s = cfg.get("scan_n")
    if s is None:
        raise ConfigError("field scan_n: required for mode scan-n")
    g = mhz(s["g_single_mhz"]) if "g_single_mhz" in s else G_SINGLE_LARGE_CRYSTAL
    crystals = [crystal(n, params, g) for n in s["n_eff"]]
    rows = n_scan_report(crystals, mhz(s["omega_c_mhz"]), disc=_shells(cfg, params),
                         **_fit_kw(cfg))
    table = [(r.n_eff, to_mhz(r.g_n), r.hwhm / TWO_PI / 1e3, r.rate / TWO_PI / 1e3,
              to_mhz(r.g_n_fit), to_mhz(r.g_n_fit_err), to_mhz(r.omega_c_fit)) for r in rows]
    widths = [r.hwhm for r in rows]
    summary = [f"crystals = {len(rows)}",
               f"hwhm_strictly_decreasing = {str(bool(np.all(np.diff(widths) < 0))).lower()}"]
    return {"scan_n.csv": _rows_writer(
        ("n_eff", "g_n_mhz", "hwhm_khz", "rate_khz", "g_n_fit_mhz", "g_n_fit_err_mhz",
         "omega_c_fit_mhz"), table)}, summary


def _read_table(path):
    try:
        return SpectrumTable.from_csv(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"field fit/data: cannot read spectrum {path}: {exc}") from exc


def run_fit(cfg, params, seed, base_dir="."):
    f = cfg.get("fit")
    if f is None:
        raise ConfigError("field fit: required for mode fit")
    kind = f["kind"]
    paths = [Path(base_dir, p) for p in f["data"]]
    obs = f.get("observable", "reflectivity")
    if kind == "lorentzian":
        res = fit_lorentzian(_read_table(paths[0]), obs)
        scale = {"center": (1 / TWO_PI / 1e6, "MHz"), "hwhm": (1 / TWO_PI / 1e6, "MHz")}
        text = res.report(scale)
    elif kind in ("global", "two-level"):
        tables = [_read_table(p) for p in paths]
        g0 = mhz(f["g_n0_mhz"]) if "g_n0_mhz" in f else params.g_n
        if kind == "global":
            om0 = f.get("omega_c0_mhz", [to_mhz(params.omega_c)] * len(tables))
            if len(om0) != len(tables):
                raise ConfigError("field fit/omega_c0_mhz: one value per dataset")
            res = fit_spectrum_global(tables, params, g_n0=g0, omega_c0=[mhz(o) for o in om0],
                                      observable=obs)
        else:
            res = fit_two_level(tables[0], params, g_n0=g0, observable=obs)
        text = res.report({n: (1 / TWO_PI / 1e6, "MHz") for n in res.names})
    elif kind == "buildup":
        try:
            tr = DynamicsTrace.from_csv(paths[0])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"field fit/data: cannot read trace {paths[0]}: {exc}") from exc
        if "window_us" in f:
            window = tuple(w * 1e-6 for w in f["window_us"])
        else:
            disc = _shells(cfg, params)
            a_in = math.sqrt(params.flux)
            tr.meta.update(kappa=params.kappa,
                           steady_reflectivity=_steady_reflectivity(params, disc, params.omega_c, a_in),
                           absorptive_reflectivity=_steady_reflectivity(params, disc, 0.0, a_in))
            b = _fit_kw(cfg)
            window = buildup_window(tr, params.kappa, start=b["window_start"],
                                    max_end=b["window_max"], **_window_kw(cfg))
        res = fit_exponential_buildup(tr, window)
        text = res.report({"gamma_eit": (1 / TWO_PI / 1e3, "kHz")})
        text += f"window_us = {window[0] * 1e6:.6g}, {window[1] * 1e6:.6g}\n"
    else:  # scaling, from a scan_omega.csv
        try:
            data = np.genfromtxt(paths[0], delimiter=",", names=True)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"field fit/data: cannot read {paths[0]}: {exc}") from exc
        col = "rate_khz" if obs == "reflectivity" and "rate_khz" in data.dtype.names else "hwhm_khz"
        x = mhz(np.atleast_1d(data["omega_c_mhz"])) ** 2
        y = np.atleast_1d(data[col]) * TWO_PI * 1e3
        ok = np.isfinite(y)
        sc = fit_scaling(x[ok], y[ok], params.gamma, params.cooperativity)
        text = sc.report()
        return {"fit_report.txt": _text(text),
                "fit.csv": _rows_writer(SCALING_HEADER, [(col, sc.slope_per_2pi_mhz,
                                                          sc.offset_khz, sc.alpha, sc.alpha_err,
                                                          sc.n_points)])}, text.splitlines()
    row = res.csv_row()
    return {"fit_report.txt": _text(text),
            "fit.csv": _rows_writer(tuple(row), [tuple(row.values())])}, text.splitlines()


def run_reproduce(cfg, params, seed, figure=None):
    figure = figure or cfg.get("reproduce", {}).get("figure")
    if figure is None:
        raise ConfigError("field reproduce/figure: required for mode reproduce")
    if figure not in FIGURES:
        raise ConfigError(f"field reproduce/figure: unknown figure {figure!r} "
                          f"(known: {', '.join(FIGURES)})")
    rep = reproduce(figure, base=params.with_(g_n=0.0, omega_c=0.0))
    lines = [c.line() for c in rep.checks]
    writers = dict(rep.writers)
    writers[f"{figure}_summary.csv"] = _rows_writer(
        ("figure", "quantity", "computed", "expected", "tolerance", "unit", "status"),
        [(c.figure, c.quantity.replace(",", ";"), c.computed, c.expected, c.tolerance,
          c.unit, "PASS" if c.passed else "FAIL") for c in rep.checks])
    writers[f"{figure}_summary.txt"] = _text("\n".join(lines) + "\n")
    return writers, lines


def _text(s):
    def write(path):
        with open(path, "w") as fh:
            fh.write(s)
    return write


def _rows_writer(header, rows):
    rows = [tuple(r) for r in rows]
    return lambda path: write_rows(path, header, rows)


RUNNERS = {"spectrum": run_spectrum, "dynamics": run_dynamics, "scan-omega": run_scan_omega,
           "scan-n": run_scan_n, "fit": run_fit, "reproduce": run_reproduce}


# ---------------------------------------------------------------------------

def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _plot_svgs(out_dir, names):
    """One quick-look SVG per CSV output; silently skipped without matplotlib."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return []
    made = []
    for name in names:
        if not name.endswith(".csv") or "summary" in name:
            continue
        path = Path(out_dir, name)
        try:
            data = np.genfromtxt(path, delimiter=",", names=True)
        except ValueError:
            continue
        cols = data.dtype.names
        if data.size < 2 or not cols or len(cols) < 2:
            continue
        x = np.atleast_1d(data[cols[0]])
        if not np.issubdtype(x.dtype, np.number):
            continue
        fig, ax = plt.subplots(figsize=(6, 4))
        for c in cols[1:]:
            y = np.atleast_1d(data[c])
            if np.issubdtype(y.dtype, np.number):
                ax.plot(x, y, label=c)
        ax.set_xlabel(cols[0])
        ax.legend(fontsize=7)
        svg = path.with_suffix(".svg")
        fig.savefig(svg, format="svg", metadata={"Date": None})
        plt.close(fig)
        made.append(svg.name)
    return made


def run(config: dict, mode: Optional[str] = None, out_dir=None, seed=None, svg=None,
        base_dir=".") -> RunManifest:
    """Execute one scenario; returns the manifest after writing all outputs."""
    validate(config)
    started = time.perf_counter()
    mode = mode or config.get("mode")
    if mode is None:
        raise ConfigError("no mode given on the command line or in the config")
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r} (known: {', '.join(MODES)})")
    if config.get("mode") not in (None, mode):
        raise ConfigError(f"field mode: config says {config['mode']!r} but {mode!r} was requested")
    seed = config.get("seed") if seed is None else seed
    if seed is not None and not 0 <= int(seed) < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    out_cfg = config.get("output", {})
    out_dir = Path(out_dir or out_cfg.get("dir", "eitlab_out"))
    svg = out_cfg.get("svg", False) if svg is None else svg
    params = resolve_params(config.get("params"))

    runner = RUNNERS[mode]
    if mode == "fit":
        writers, summary = runner(config, params, seed, base_dir=base_dir)
    else:
        writers, summary = runner(config, params, seed)

    out_dir.mkdir(parents=True, exist_ok=True)
    names = sorted(writers)
    for name in names:
        writers[name](out_dir / name)
    if svg:
        names += _plot_svgs(out_dir, names)
    outputs = [{"file": n, "sha256": _sha256(out_dir / n)} for n in sorted(names)
               if not n.endswith(".svg")]
    outputs += [{"file": n} for n in sorted(names) if n.endswith(".svg")]
    manifest = RunManifest(mode=mode, version=__version__, seed=seed, params=params.to_mhz(),
                           outputs=outputs, duration_s=time.perf_counter() - started,
                           config=config, summary=summary)
    (out_dir / "manifest.json").write_text(manifest.to_json())
    return manifest
