"""
Dual noble-gas comagnetometer: forward precession model, differential
extraction of the pseudomagnetic field, and the noise budget.

Precession of species i (rad/s):

    Omega_i = gamma_i (B0 + B_gmf) - Omega_rot + mu_N / (hbar F_i) * B_pseu

with ``gamma_i`` converted from the Hz/T convention to rad/s/T. The
extraction forms ``|Omega_1| - |R Omega_2|`` with ``R = gamma_1 / gamma_2``.

Sign bookkeeping: the magnitudes are taken with the orientation sign
``s = sign(gamma_1 B0)`` rather than ``abs`` of noisy data, i.e.
``|Omega_1| - |R Omega_2| = s (Omega_1 - R Omega_2)``. For the shipped pair
(129Xe negative, 131Xe positive, B0 > 0) ``s = -1``, which reproduces the
usual closed form

    B_pseu = hbar F1 F2 [(|Omega_1| - |R Omega_2|) - (1 - R) Omega_rot]
             / (mu_N (R F1 - F2)).

The general form used below, ``-hbar F1 F2 [s D + (1 - R) Omega_rot] /
(mu_N (R F1 - F2))``, stays correct if both gyromagnetic signs are flipped.
"""

from dataclasses import dataclass, field, replace
import csv
import math

import numpy as np

from .constants import CONSTANTS, DEG
from .errors import AlignmentError, DomainError, ValidationError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SpeciesParams:
    name: str
    gamma: float  # Hz/T, signed
    spin: float  # F

    def __post_init__(self):
        if self.gamma == 0:
            raise ValidationError(f"{self.name}: gyromagnetic ratio must be nonzero")
        if not self.spin > 0:
            raise ValidationError(f"{self.name}: spin quantum number must be positive")

    @property
    def gamma_rad(self):
        """Gyromagnetic ratio in rad/s/T."""
        return TWO_PI * self.gamma

    def flipped(self):
        return SpeciesParams(self.name, -self.gamma, self.spin)


XE129 = SpeciesParams("129Xe", -11.86e6, 0.5)
XE131 = SpeciesParams("131Xe", 3.52e6, 1.5)
XENON_PAIR = (XE129, XE131)


@dataclass(frozen=True)
class SensorConfig:
    """Sensor and noise parameters.

    Noise levels are quoted at ``reference_time`` (s); per-sample white noise
    is scaled up by ``sqrt(reference_time / dt)`` so that averaging over the
    reference time returns the quoted level.
    """

    b0: float = 1e-6
    axis: tuple = (0.0, 0.0, 1.0)
    shield_factor: float = 1e8
    calibration_error: float = 1e-4
    gyro_noise: float = 2e-6 * DEG  # rad/s
    reference_time: float = 1165.0
    laser_coefficient: float = 19e-18  # T per ppm
    laser_stability_ppm: float = 190.0
    shot_sensitivity: float = 4.3e-15  # T
    ambient_peak: float = 20e-6  # T, raw geomagnetic amplitude for the budget
    add_sensor_noise: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        ax = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(ax)
        if not abs(norm - 1.0) < 1e-9:
            raise ValidationError(f"sensor axis must be a unit vector, |axis| = {norm}")
        object.__setattr__(self, "axis", tuple(float(a) for a in ax / norm))
        if self.shield_factor < 1:
            raise ValidationError("shield_factor must be >= 1")
        if self.calibration_error < 0:
            raise ValidationError("calibration_error must be >= 0")
        for name in ("gyro_noise", "laser_coefficient", "laser_stability_ppm",
                     "shot_sensitivity", "ambient_peak"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if not self.reference_time > 0:
            raise ValidationError("reference_time must be positive")

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class PrecessionRecord:
    t: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    omega_rot_true: np.ndarray
    omega_rot_measured: np.ndarray
    b_gmf: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = np.asarray(self.t).shape
        for name in ("t", "omega1", "omega2", "omega_rot_true", "omega_rot_measured", "b_gmf"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            if arr.shape != n:
                raise AlignmentError(f"{name} has shape {arr.shape}, expected {n}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise AlignmentError("record times must be strictly increasing")

    def write_csv(self, stream):
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["t_s", "omega1_rad_s", "omega2_rad_s", "omega_rot_true",
                    "omega_rot_meas", "b_gmf_T"])
        for row in zip(self.t, self.omega1, self.omega2, self.omega_rot_true,
                       self.omega_rot_measured, self.b_gmf):
            w.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class NoiseBudget:
    laser: float
    gyro_residual: float
    shield_leakage: float
    shot: float

    @property
    def total(self):
        return math.sqrt(self.laser**2 + self.gyro_residual**2
                         + self.shield_leakage**2 + self.shot**2)

    def as_dict(self):
        return {
            "laser_T": self.laser,
            "gyro_residual_T": self.gyro_residual,
            "shield_leakage_T": self.shield_leakage,
            "shot_T": self.shot,
            "total_T": self.total,
        }


def ratio(species):
    g1, g2 = species
    return g1.gamma / g2.gamma


def _denominator(species, r):
    f1, f2 = species[0].spin, species[1].spin
    den = r * f1 - f2
    if den == 0:
        raise DomainError("degenerate species pair: R F1 - F2 = 0")
    return den


def _as_series(x, n, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise AlignmentError(f"{name} has {arr.shape[0]} samples, expected {n}")
    return arr


def forward_model(t, b_pseu, ambient_gmf, omega_rot, cfg, species=XENON_PAIR):
    """Simulate both precession frequencies.

    Parameters
    ----------
    t : array (N,)
        Sample times (s).
    b_pseu : array (N,) or FieldSeries
        Pseudomagnetic field along the sensor axis (T). A FieldSeries is
        projected on ``cfg.axis``.
    ambient_gmf : array (N,) or scalar
        Unshielded geomagnetic field along the sensor axis (T); divided by
        ``cfg.shield_factor`` before it reaches the spins.
    omega_rot : array (N,) or scalar
        True platform rotation rate about the axis (rad/s).

    Returns
    -------
    PrecessionRecord
        ``omega_rot_measured`` carries seeded gyroscope white noise.
    """
    t = np.asarray(t, dtype=float)
    n = t.size
    if hasattr(b_pseu, "b_eci"):
        if not np.array_equal(b_pseu.t, t):
            raise AlignmentError("field series and record time bases differ")
        b_pseu = b_pseu.b_eci @ np.asarray(cfg.axis)
    bp = _as_series(b_pseu, n, "b_pseu")
    b_gmf = _as_series(ambient_gmf, n, "ambient_gmf") / cfg.shield_factor
    rot = _as_series(omega_rot, n, "omega_rot")

    rng = np.random.default_rng(cfg.rng_seed)
    dt = float(t[1] - t[0]) if n > 1 else cfg.reference_time
    scale = math.sqrt(cfg.reference_time / dt)
    gyro = rng.standard_normal(n) * cfg.gyro_noise * scale
    if cfg.add_sensor_noise:
        bp = bp + rng.standard_normal(n) * cfg.shot_sensitivity * scale

    hb = CONSTANTS.hbar
    mu = CONSTANTS.mu_N
    s1, s2 = species
    total_b = cfg.b0 + b_gmf
    omega1 = s1.gamma_rad * total_b - rot + mu / (hb * s1.spin) * bp
    omega2 = s2.gamma_rad * total_b - rot + mu / (hb * s2.spin) * bp
    return PrecessionRecord(
        t, omega1, omega2, rot, rot + gyro, b_gmf,
        meta={"orientation_sign": _orientation_sign(species, cfg),
              "gamma_hz_per_T": [s1.gamma, s2.gamma]},
    )


def _orientation_sign(species, cfg):
    return 1.0 if species[0].gamma * cfg.b0 > 0 else -1.0


def extract_pseudofield(record, species=XENON_PAIR, cfg=None, use_measured_rotation=True):
    """Recover the pseudomagnetic field (T) from a precession record.

    The ratio applied is ``R (1 + cfg.calibration_error)``, modelling an
    imperfect calibration of the gyromagnetic ratio.
    """
    cfg = cfg or SensorConfig()
    r_true = ratio(species)
    r = r_true * (1.0 + cfg.calibration_error)
    den = _denominator(species, r)
    s = _orientation_sign(species, cfg)
    f1, f2 = species[0].spin, species[1].spin
    rot = record.omega_rot_measured if use_measured_rotation else record.omega_rot_true
    mag_diff = s * (record.omega1 - r * record.omega2)  # |Omega_1| - |R Omega_2|
    return -CONSTANTS.hbar * f1 * f2 * (s * mag_diff + (1.0 - r) * rot) / (CONSTANTS.mu_N * den)


def rotation_equivalent_field(omega_rot, species=XENON_PAIR):
    """Field error (T, magnitude) left by an uncorrected rotation rate (rad/s)."""
    r = ratio(species)
    den = _denominator(species, r)
    f1, f2 = species[0].spin, species[1].spin
    val = CONSTANTS.hbar * f1 * f2 * (1.0 - r) * np.asarray(omega_rot, dtype=float) / (
        CONSTANTS.mu_N * den
    )
    val = np.abs(val)
    return float(val) if val.ndim == 0 else val


def noise_budget(cfg, species=XENON_PAIR):
    """Itemized equivalent-field noise at the reference integration time."""
    leakage = 0.0
    if cfg.calibration_error > 0:
        leakage = (cfg.ambient_peak / cfg.shield_factor) * cfg.calibration_error
    return NoiseBudget(
        laser=cfg.laser_coefficient * cfg.laser_stability_ppm,
        gyro_residual=rotation_equivalent_field(cfg.gyro_noise, species),
        shield_leakage=leakage,
        shot=cfg.shot_sensitivity,
    )
