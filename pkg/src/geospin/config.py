"""
Pipeline configuration: an INI file with fixed sections and keys.

Every key has a default except the three input paths. Paths are resolved
relative to the config file; ``pkg:NAME`` points at a file shipped in
``geospin/data``.
"""

from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
import configparser
import io
import math
import os
from pathlib import Path

import numpy as np

from .constants import DEG, SECONDS_PER_DAY
from .errors import ConfigError

# Coupling whose mission peak projection is about 20 pT with the shipped
# profile; the stand-in for the tightest terrestrial constraint.
TERRESTRIAL_BOUND = 3.2e-41

REQUIRED = object()


def _float(lo=-math.inf, hi=math.inf, lo_open=False):
    def conv(text):
        v = float(text)
        bad = v < lo or v > hi or (lo_open and v == lo) or math.isnan(v)
        if bad:
            lb = "(" if lo_open else "["
            raise ConfigError(f"value {v} outside valid range {lb}{lo}, {hi}]")
        return v
    return conv


def _int(lo=-math.inf, hi=math.inf, choices=None):
    def conv(text):
        v = int(text)
        if choices is not None and v not in choices:
            raise ConfigError(f"value {v} not in {sorted(choices)}")
        if not lo <= v <= hi:
            raise ConfigError(f"value {v} outside valid range [{lo}, {hi}]")
        return v
    return conv


def _choice(*options):
    def conv(text):
        if text not in options:
            raise ConfigError(f"value {text!r} not one of {', '.join(options)}")
        return text
    return conv


def _floats(lo_open=0.0):
    def conv(text):
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
        if not vals:
            raise ConfigError("empty list")
        if any(not v > lo_open for v in vals):
            raise ConfigError(f"all values must be > {lo_open}")
        return vals
    return conv


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"value {text!r} is not a boolean")


def _instant(text):
    if text == "epoch":
        return text
    s = text.strip().replace("Z", "+00:00")
    dt = datetime.fromisoformat(s)
    return dt if dt.tzinfo else dt.replace(tzinfo=timezone.utc)


def _optional_instant(text):
    return None if text in ("", "none") else _instant(text)


def _axis(text):
    if text == "normal":
        return text
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 3 or np.linalg.norm(vals) == 0:
        raise ConfigError("axis must be 'normal' or three comma-separated numbers")
    return tuple(v / float(np.linalg.norm(vals)) for v in vals)


def _threshold(text):
    return text if text == "auto" else _float(0.0, lo_open=True)(text)


SCHEMA = {
    "paths": {
        "wmm": (str, REQUIRED),
        "profile": (str, REQUIRED),
        "tle": (str, REQUIRED),
    },
    "window": {
        "start": (_instant, "epoch"),
        "end": (_optional_instant, "none"),
        "duration_days": (_float(0.0, 366.0, lo_open=True), "12"),
        "dt_s": (_float(0.0, 86400.0, lo_open=True), "60"),
    },
    "grid": {
        "n_r": (_int(4, 4096), "32"),
        "n_theta": (_int(8, 4096), "64"),
        "n_phi": (_int(16, 8192), "128"),
        "r_min_m": (_float(3.48e6, 6.371e6), "3480000"),
        "r_max_m": (_float(3.48e6, 6.371e6), "6371000"),
        "spin_sign": (_int(choices={-1, 1}), "-1"),
    },
    "kernel": {
        "kind": (str, "vs"),
        "coupling": (_float(), repr(TERRESTRIAL_BOUND)),
        "lambda_m": (_float(0.0, lo_open=True), "inf"),
        "nucleon_factor": (_float(), "1.0"),
        "terrestrial_bound": (_float(0.0, lo_open=True), repr(TERRESTRIAL_BOUND)),
    },
    "sensor": {
        "b0_T": (_float(), "1e-6"),
        "axis": (_axis, "normal"),
        "shield_factor": (_float(1.0), "1e8"),
        "calibration_error": (_float(0.0), "1e-4"),
        "gyro_noise_deg_s": (_float(0.0), "2e-6"),
        "rotation_deg_s": (_float(0.0), "0.005"),
        "reference_time_s": (_float(0.0, lo_open=True), "1165"),
        "laser_coefficient_T_per_ppm": (_float(0.0), "19e-18"),
        "laser_stability_ppm": (_float(0.0), "190"),
        "shot_sensitivity_T": (_float(0.0), "4.3e-15"),
        "ambient_peak_T": (_float(0.0), "20e-6"),
        "add_sensor_noise": (_bool, "true"),
    },
    "analysis": {
        "window": (_choice("none", "hann"), "none"),
        "prominence": (_float(0.0, 1.0, lo_open=True), "0.05"),
        "min_split_Hz": (_float(0.0, lo_open=True), "6e-6"),
        "tau_s": (_floats(), "60,120,300,600,1200,2400,6000,12000,30000"),
        "lambda_m": (_floats(), "1e5,3e5,1e6,3e6,1e7,3e7,1e8,1e9"),
        "threshold_T": (_threshold, "auto"),
        "campaign_days": (_float(0.0, lo_open=True), "100"),
        "exclusion_days": (_float(0.0, 366.0, lo_open=True), "1"),
    },
    "output": {
        "dir": (str, "out"),
    },
    "run": {
        "seed": (_int(0), "0"),
        "threads": (_int(1, 1024), "1"),
    },
}


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved configuration. ``values[section][key]`` holds typed values."""

    values: dict
    raw: dict
    defaulted: frozenset
    source: str = ""

    def __getitem__(self, section):
        return self.values[section]

    @property
    def paths(self):
        return self.values["paths"]

    @property
    def resolution(self):
        g = self.values["grid"]
        return (g["n_r"], g["n_theta"], g["n_phi"])

    def with_overrides(self, **sections):
        vals = {s: dict(v) for s, v in self.values.items()}
        raw = {s: dict(v) for s, v in self.raw.items()}
        for sec, kv in sections.items():
            for k, v in kv.items():
                vals[sec][k] = v
                raw[sec][k] = str(v)
        return PipelineConfig(vals, raw, self.defaulted, self.source)

    def echo(self):
        """Resolved config as INI text; defaulted keys are marked."""
        out = io.StringIO()
        out.write(f"# resolved configuration ({self.source or 'in-memory'})\n")
        for sec in SCHEMA:
            out.write(f"\n[{sec}]\n")
            for key in SCHEMA[sec]:
                mark = "  ; default" if (sec, key) in self.defaulted else ""
                out.write(f"{key} = {self.raw[sec][key]}{mark}\n")
        return out.getvalue()


def resolve_path(text, base_dir):
    if text.startswith("pkg:"):
        return Path(str(resources.files("geospin.data").joinpath(text[4:])))
    p = Path(os.path.expanduser(text))
    return p if p.is_absolute() else Path(base_dir) / p


def parse_config(text, base_dir=".", source=""):
    """Validate config text; see :func:`validate_config`."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from None

    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key in parser[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key '{key}' in section [{sec}]")

    values, raw, defaulted = {}, {}, set()
    for sec, keys in SCHEMA.items():
        values[sec], raw[sec] = {}, {}
        for key, (conv, default) in keys.items():
            if parser.has_option(sec, key):
                text_val = parser[sec][key].strip()
            elif default is REQUIRED:
                raise ConfigError(f"missing required key '{key}' in section [{sec}]")
            else:
                text_val = default
                defaulted.add((sec, key))
            try:
                values[sec][key] = conv(text_val)
            except ConfigError as exc:
                raise ConfigError(f"[{sec}] {key}: {exc}") from None
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key}: cannot parse {text_val!r} ({exc})") from None
            raw[sec][key] = text_val

    for key in ("wmm", "profile", "tle"):
        p = resolve_path(values["paths"][key], base_dir)
        if not p.is_file():
            raise ConfigError(f"[paths] {key}: file not found: {p}")
        values["paths"][key] = p

    g = values["grid"]
    if not g["r_max_m"] > g["r_min_m"]:
        raise ConfigError("[grid] r_max_m must exceed r_min_m")
    w = values["window"]
    if w["end"] is not None:
        if w["start"] == "epoch":
            raise ConfigError("[window] end requires an explicit start")
        dur = (w["end"] - w["start"]).total_seconds()
        if not dur > 0:
            raise ConfigError("[window] end must be after start")
        w["duration_days"] = dur / SECONDS_PER_DAY
        raw["window"]["duration_days"] = repr(w["duration_days"])
        defaulted.discard(("window", "duration_days"))
    if w["duration_days"] * SECONDS_PER_DAY < w["dt_s"]:
        raise ConfigError("[window] duration shorter than dt_s")
    return PipelineConfig(values, raw, frozenset(defaulted), source)


def validate_config(path):
    """Read, default and range-check a pipeline config file.

    Raises
    ------
    ConfigError
        Unknown section or key (named), missing required path, value out of
        range (message gives the valid range).
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent, source=str(path))


def duration_seconds(cfg):
    return cfg["window"]["duration_days"] * SECONDS_PER_DAY


def rotation_rate(cfg):
    return cfg["sensor"]["rotation_deg_s"] * DEG
