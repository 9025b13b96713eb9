"""
Command implementations for the mission pipeline.

Each command reads the validated config (and, for analysis stages, the
intermediate CSVs of earlier stages from the output directory), writes its
artifacts into a staging directory and moves them into place only when the
whole command succeeded. ``manifest.json`` lists every artifact in the output
directory with its SHA-256.
"""

import hashlib
import io
import json
import math
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

from . import analysis, comag, earth, field, geomag, orbit, svgplot
from .config import duration_seconds, rotation_rate
from .constants import DEG, SECONDS_PER_DAY
from .errors import ValidationError

COMMANDS = ("simulate-field", "simulate-sensor", "spectrum", "allan", "exclusion", "budget")
MANIFEST = "manifest.json"
OUT_ENV = "GEOSPIN_OUT"


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else None


class _Stage:
    """Collects artifacts in memory; committed to disk only on success."""

    def __init__(self):
        self.files = {}

    def text(self, name, content):
        self.files[name] = content

    def csv(self, name, writer):
        buf = io.StringIO()
        writer(buf)
        self.files[name] = buf.getvalue()

    def json(self, name, obj):
        self.files[name] = _json(obj)


def load_inputs(cfg):
    p = cfg.paths
    coeffs = geomag.load_coefficients(p["wmm"])
    profile = earth.load_profile(p["profile"])
    tle = orbit.parse_tle(Path(p["tle"]).read_text())
    return coeffs, profile, tle


def make_orbit(cfg, tle, duration=None):
    w = cfg["window"]
    start = 0.0 if w["start"] == "epoch" else (w["start"] - tle.epoch).total_seconds()
    return orbit.propagate_circular(
        tle, duration if duration is not None else duration_seconds(cfg), w["dt_s"], start=start
    )


def make_grid(cfg, profile, coeffs):
    g = cfg["grid"]
    return earth.build_grid(profile, coeffs, cfg.resolution,
                            domain=(g["r_min_m"], g["r_max_m"]), spin_sign=g["spin_sign"])


def make_kernel(cfg):
    k = cfg["kernel"]
    return field.InteractionKernel(k["kind"], k["coupling"], k["lambda_m"], k["nucleon_factor"])


def sensor_axis(cfg, orb):
    ax = cfg["sensor"]["axis"]
    return orb.normal if ax == "normal" else np.asarray(ax)


def sensor_config(cfg, orb, seed):
    s = cfg["sensor"]
    return comag.SensorConfig(
        b0=s["b0_T"],
        axis=tuple(sensor_axis(cfg, orb)),
        shield_factor=s["shield_factor"],
        calibration_error=s["calibration_error"],
        gyro_noise=s["gyro_noise_deg_s"] * DEG,
        reference_time=s["reference_time_s"],
        laser_coefficient=s["laser_coefficient_T_per_ppm"],
        laser_stability_ppm=s["laser_stability_ppm"],
        shot_sensitivity=s["shot_sensitivity_T"],
        ambient_peak=s["ambient_peak_T"],
        add_sensor_noise=s["add_sensor_noise"],
        rng_seed=seed,
    )


def _read_intermediate(out_dir, name, stage):
    path = Path(out_dir) / name
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found; run '{stage}' first")
    return path.read_text()


def cmd_simulate_field(cfg, out_dir, seed, st):
    coeffs, profile, tle = load_inputs(cfg)
    orb = make_orbit(cfg, tle)
    grid = make_grid(cfg, profile, coeffs)
    kernel = make_kernel(cfg)
    series = field.integrate_field(grid, orb, kernel, axis=sensor_axis(cfg, orb))
    normal = field.project_normal(series, orb)
    b = series.b_eci
    b_ac = b - b.mean(axis=0)
    n_ac = normal - normal.mean()
    total_spins = earth.total_polarized_spins(grid)

    st.csv("orbit.csv", orb.write_csv)
    st.csv("field_series.csv", series.write_csv)
    st.text("field_projection.svg", svgplot.line_plot(
        [("orbit-normal projection", orb.t / 3600.0, normal * 1e12)],
        title="Pseudomagnetic field along the orbit normal",
        xlabel="time since start (h)", ylabel="B (pT)"))

    lat, lon, rho = earth.density_map(profile, coeffs, radius=5.0e6)

    def write_map(stream):
        stream.write("lat_deg,lon_deg,rho_per_m3\n")
        for i, la in enumerate(lat):
            for j, lo in enumerate(lon):
                stream.write(f"{la!r},{lo!r},{float(rho[i, j])!r}\n")

    st.csv("density_map.csv", write_map)
    st.text("density_map.svg", svgplot.heat_map(
        rho, title="Polarized geoelectron density at r = 5000 km (m^-3)"))
    st.json("field_summary.json", {
        "total_polarized_spins": total_spins,
        "grid_resolution": list(grid.resolution),
        "n_samples": len(orb),
        "orbit_radius_m": orb.meta["radius_m"],
        "orbit_speed_m_s": orb.meta["speed_m_s"],
        "orbit_period_s": 2 * math.pi / orb.meta["angular_rate"],
        "orbit_normal_eci": orb.normal,
        "kernel": series.meta,
        "peak_normal_projection_T": float(np.max(np.abs(normal))),
        # share of the mean-square field carried by the normal component, with
        # and without the constant part
        "normal_power_fraction": float(np.sum(normal**2) / np.sum(b**2)) if np.any(b) else None,
        "normal_power_fraction_ac":
            float(np.sum(n_ac**2) / np.sum(b_ac**2)) if np.any(b_ac) else None,
    })


def cmd_simulate_sensor(cfg, out_dir, seed, st):
    coeffs, _, tle = load_inputs(cfg)
    orb = make_orbit(cfg, tle)
    series = field.FieldSeries.read_csv(
        io.StringIO(_read_intermediate(out_dir, "field_series.csv", "simulate-field")))
    if series.t.shape != orb.t.shape or not np.allclose(series.t, orb.t, rtol=0, atol=1e-6):
        raise ValidationError("field_series.csv does not match the configured window")
    scfg = sensor_config(cfg, orb, seed)
    axis = np.asarray(scfg.axis)
    b_true = series.b_eci @ axis
    ambient = orb.ecef_to_eci(geomag.field_ecef(coeffs, orb.position_ecef)) @ axis
    rng = np.random.default_rng([seed, 1])
    rot = rng.standard_normal(len(orb)) * rotation_rate(cfg)

    rec = comag.forward_model(orb.t, b_true, ambient, rot, scfg)
    recovered = comag.extract_pseudofield(rec, cfg=scfg)
    resid = recovered - b_true

    st.csv("precession_record.csv", rec.write_csv)

    def write_recovered(stream):
        stream.write("t_s,b_true_T,b_recovered_T\n")
        for row in zip(orb.t, b_true, recovered):
            stream.write(",".join(repr(float(v)) for v in row) + "\n")

    st.csv("recovered_field.csv", write_recovered)
    st.text("sensor.svg", svgplot.line_plot(
        [("recovered", orb.t / 3600.0, recovered * 1e12), ("injected", orb.t / 3600.0, b_true * 1e12)],
        title="Comagnetometer readout", xlabel="time since start (h)", ylabel="B (pT)"))
    st.json("sensor_summary.json", {
        "ambient_peak_raw_T": float(np.max(np.abs(ambient))),
        "ambient_peak_shielded_T": float(np.max(np.abs(rec.b_gmf))),
        "residual_rms_T": float(np.sqrt(np.mean(resid**2))),
        "residual_mean_T": float(np.mean(resid)),
        "residual_std_T": float(np.std(resid)),
        "orientation_sign": rec.meta["orientation_sign"],
        "gamma_hz_per_T": rec.meta["gamma_hz_per_T"],
        "sensor_noise": scfg.add_sensor_noise,
    })


def _projection_series(cfg, out_dir):
    series = field.FieldSeries.read_csv(
        io.StringIO(_read_intermediate(out_dir, "field_series.csv", "simulate-field")))
    _, _, tle = load_inputs(cfg)
    orb = make_orbit(cfg, tle)
    if series.t.shape != orb.t.shape:
        raise ValidationError("field_series.csv does not match the configured window")
    return series, orb


def cmd_spectrum(cfg, out_dir, seed, st):
    series, orb = _projection_series(cfg, out_dir)
    period = 2 * math.pi / orb.meta["angular_rate"]
    span = float(series.t[-1] - series.t[0]) + orb.dt
    if span < 2 * period:
        raise ValidationError(
            f"field series spans {span:.0f} s, shorter than two orbital periods ({2 * period:.0f} s)")
    a = cfg["analysis"]
    proj = field.project_normal(series, orb)
    spec = analysis.amplitude_spectrum(series.t, proj, window=a["window"],
                                       prominence=a["prominence"], min_separation=a["min_split_Hz"])
    st.csv("spectrum.csv", spec.write_csv)
    summary = spec.summary()
    summary["orbital_frequency_Hz"] = 1.0 / period
    st.json("spectrum.json", summary)
    keep = spec.frequency <= 1e-3
    st.text("spectrum.svg", svgplot.line_plot(
        [("", spec.frequency[keep] * 1e3, spec.amplitude[keep] * 1e12)],
        title="Amplitude spectrum of the orbit-normal projection",
        xlabel="frequency (mHz)", ylabel="amplitude (pT)"))


def cmd_allan(cfg, out_dir, seed, st):
    rec_path = Path(out_dir) / "recovered_field.csv"
    if rec_path.is_file():
        data = np.loadtxt(rec_path, delimiter=",", skiprows=1, ndmin=2)
        t, y, source = data[:, 0], data[:, 2], "recovered_field.csv"
    else:
        series, orb = _projection_series(cfg, out_dir)
        t, y, source = series.t, field.project_normal(series, orb), "field_series.csv"
    dt = float(t[1] - t[0])
    taus = [tau for tau in cfg["analysis"]["tau_s"]
            if tau >= dt * (1 - 1e-9) and 2 * math.floor(tau / dt + 1e-9) <= t.size]
    if not taus:
        raise ValidationError("no averaging time fits the series (need >= 2 clusters)")
    curve = analysis.allan_deviation(t, y, taus)
    st.csv("allan.csv", curve.write_csv)
    st.json("allan.json", {
        "source": source,
        "tau_s": curve.tau, "adev": curve.adev, "n_terms": curve.n_terms,
        "snapped": curve.snapped,
        "minimum": {"tau_s": float(curve.tau[np.argmin(curve.adev)]),
                    "adev": float(np.min(curve.adev))},
    })
    st.text("allan.svg", svgplot.line_plot(
        [("overlapping ADEV", curve.tau, curve.adev * 1e15)],
        title="Allan deviation", xlabel="tau (s)", ylabel="sigma (fT)", logx=True, logy=True))


def cmd_exclusion(cfg, out_dir, seed, st):
    coeffs, profile, tle = load_inputs(cfg)
    a = cfg["analysis"]
    orb = make_orbit(cfg, tle, duration=a["exclusion_days"] * SECONDS_PER_DAY)
    grid = make_grid(cfg, profile, coeffs)
    s = cfg["sensor"]
    threshold = a["threshold_T"]
    if threshold == "auto":
        threshold = analysis.campaign_sensitivity(
            s["shot_sensitivity_T"], s["reference_time_s"], a["campaign_days"])
    curve = analysis.exclusion_curve(grid, orb, make_kernel(cfg), a["lambda_m"], threshold)
    bound = cfg["kernel"]["terrestrial_bound"]
    st.csv("exclusion.csv", curve.write_csv)
    st.json("exclusion.json", {
        "threshold_T": threshold,
        "terrestrial_bound": bound,
        "lambda_m": curve.ranges,
        "f_limit": [_finite(v) for v in curve.f_limit],
        "unbounded": curve.unbounded,
        "improvement_orders": [
            _finite(math.log10(bound / v)) if math.isfinite(v) else None for v in curve.f_limit],
        "minimum": {"lambda_m": float(curve.ranges[np.argmin(curve.f_limit)]),
                    "f_limit": _finite(np.min(curve.f_limit))},
        **curve.meta,
    })
    st.text("exclusion.svg", svgplot.line_plot(
        [("forecast", curve.ranges, curve.f_limit),
         ("terrestrial bound", curve.ranges, np.full(curve.ranges.size, bound))],
        title="Coupling sensitivity vs force range", xlabel="lambda (m)", ylabel="f",
        logx=True, logy=True))


def cmd_budget(cfg, out_dir, seed, st):
    s = cfg["sensor"]
    scfg = comag.SensorConfig(
        b0=s["b0_T"], shield_factor=s["shield_factor"],
        calibration_error=s["calibration_error"], gyro_noise=s["gyro_noise_deg_s"] * DEG,
        reference_time=s["reference_time_s"], laser_coefficient=s["laser_coefficient_T_per_ppm"],
        laser_stability_ppm=s["laser_stability_ppm"], shot_sensitivity=s["shot_sensitivity_T"],
        ambient_peak=s["ambient_peak_T"], rng_seed=seed)
    st.json("budget.json", comag.noise_budget(scfg).as_dict())


HANDLERS = {
    "simulate-field": cmd_simulate_field,
    "simulate-sensor": cmd_simulate_sensor,
    "spectrum": cmd_spectrum,
    "allan": cmd_allan,
    "exclusion": cmd_exclusion,
    "budget": cmd_budget,
}


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir):
    out_dir = Path(out_dir)
    files = {
        p.name: sha256(p)
        for p in sorted(out_dir.iterdir())
        if p.is_file() and p.name != MANIFEST
    }
    (out_dir / MANIFEST).write_text(_json({"artifacts": files}))
    return files


def resolve_out_dir(cfg, out=None):
    if out:
        return Path(out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    d = Path(cfg["output"]["dir"])
    if not d.is_absolute() and cfg.source:
        d = Path(cfg.source).parent / d
    return d


def run(command, cfg, out=None, threads=None, seed=None):
    """Execute one pipeline command; returns the list of files written."""
    if command not in HANDLERS:
        raise ValidationError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    out_dir = resolve_out_dir(cfg, out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = cfg["run"]["seed"] if seed is None else int(seed)
    field.set_threads(threads if threads is not None else cfg["run"]["threads"])

    st = _Stage()
    st.text("resolved_config.ini", cfg.echo())
    HANDLERS[command](cfg, out_dir, seed, st)

    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir))
    try:
        for name, content in st.files.items():
            (staging / name).write_text(content)
        for name in st.files:
            os.replace(staging / name, out_dir / name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    write_manifest(out_dir)
    return sorted(st.files)
