"""
Two-line element parsing and circular two-body propagation.

Inertial (ECI) and Earth-fixed (ECEF) frames share the z axis and differ by
the Earth rotation angle ``theta(t) = gmst(epoch) + omega_earth * t``.
"""

from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
import csv
import math

import numpy as np

from .constants import CONSTANTS, DEG, SECONDS_PER_DAY
from .errors import ChecksumError, FormatError, ParseError, ValidationError

TLE_LINE_LENGTH = 69
# Circular radius quoted alongside the mean motion; kept only as a cross-check.
QUOTED_ORBIT_RADIUS = 6.7e6


@dataclass(frozen=True)
class TwoLineElement:
    name: str
    norad_id: int
    classification: str
    intl_designator: str
    epoch: datetime
    mean_motion_dot: float
    mean_motion_ddot: float
    bstar: float
    inclination: float  # rad
    raan: float  # rad
    eccentricity: float
    arg_perigee: float  # rad
    mean_anomaly: float  # rad
    mean_motion: float  # rev/day
    rev_number: int = 0

    def __post_init__(self):
        if not 0.0 <= self.inclination <= math.pi:
            raise ValidationError(f"inclination {self.inclination} outside [0, pi]")
        if not self.mean_motion > 0:
            raise ValidationError("mean motion must be positive")
        if not 0.0 <= self.eccentricity < 1.0:
            raise ValidationError(f"eccentricity {self.eccentricity} outside [0, 1)")

    @property
    def period(self):
        """Orbital period in seconds."""
        return SECONDS_PER_DAY / self.mean_motion


def tle_checksum(line):
    """Modulo-10 sum of digits, with '-' counting as 1, over columns 1-68."""
    total = 0
    for ch in line[:68]:
        if ch.isdigit():
            total += int(ch)
        elif ch == "-":
            total += 1
    return total % 10


def _field(line, lineno, start, stop, conv=float):
    text = line[start:stop]
    try:
        return conv(text.strip() or "0")
    except ValueError:
        raise ParseError(
            f"columns {start + 1}-{stop}: cannot parse {text!r}", lineno
        ) from None


def _implied_exp(text):
    """Decode the TLE ' 12345-3' implied-decimal exponent notation."""
    s = text.strip()
    if not s:
        return 0.0
    sign = -1.0 if s[0] == "-" else 1.0
    s = s.lstrip("+-")
    mant, exp = s[:-2], s[-2:]
    return sign * float("0." + mant.strip()) * 10.0 ** int(exp)


def _tle_epoch(yy, day):
    year = 2000 + yy if yy < 57 else 1900 + yy
    return datetime(year, 1, 1, tzinfo=timezone.utc) + timedelta(days=day - 1.0)


def parse_tle(text):
    """Parse a two- or three-line element set.

    Parameters
    ----------
    text : str or sequence of str
        Two 69-column lines, optionally preceded by a name line.

    Raises
    ------
    FormatError
        Wrong number of lines, short lines or bad line numbers.
    ChecksumError
        A line fails the modulo-10 checksum.
    ParseError
        A numeric field cannot be read; the message gives the column range.
    """
    lines = text.splitlines() if isinstance(text, str) else list(text)
    lines = [l.rstrip("\r\n ") for l in lines if l.strip()]
    if len(lines) == 3:
        name, l1, l2 = lines[0].strip(), lines[1], lines[2]
    elif len(lines) == 2:
        name, l1, l2 = "", lines[0], lines[1]
    else:
        raise FormatError(f"expected 2 or 3 lines, got {len(lines)}")

    for idx, line in ((1, l1), (2, l2)):
        if len(line) < TLE_LINE_LENGTH:
            raise FormatError(f"TLE line {idx} has {len(line)} columns, expected {TLE_LINE_LENGTH}")
        if line[0] != str(idx):
            raise FormatError(f"TLE line {idx} must start with '{idx}'")
        if not line[68].isdigit():
            raise ParseError(f"column 69: checksum {line[68]!r} is not a digit", idx)
        if tle_checksum(line) != int(line[68]):
            raise ChecksumError(
                f"checksum mismatch (computed {tle_checksum(line)}, found {line[68]})", idx
            )

    norad = _field(l1, 1, 2, 7, int)
    if _field(l2, 2, 2, 7, int) != norad:
        raise FormatError("catalog numbers of line 1 and line 2 differ")
    yy = _field(l1, 1, 18, 20, int)
    day = _field(l1, 1, 20, 32)
    try:
        nddot = _implied_exp(l1[44:52])
        bstar = _implied_exp(l1[53:61])
    except ValueError:
        raise ParseError("columns 45-61: bad implied-exponent field", 1) from None

    return TwoLineElement(
        name=name,
        norad_id=norad,
        classification=l1[7],
        intl_designator=l1[9:17].strip(),
        epoch=_tle_epoch(yy, day),
        mean_motion_dot=_field(l1, 1, 33, 43),
        mean_motion_ddot=nddot,
        bstar=bstar,
        inclination=_field(l2, 2, 8, 16) * DEG,
        raan=_field(l2, 2, 17, 25) * DEG,
        eccentricity=_field(l2, 2, 26, 33, lambda s: float("0." + s)),
        arg_perigee=_field(l2, 2, 34, 42) * DEG,
        mean_anomaly=_field(l2, 2, 43, 51) * DEG,
        mean_motion=_field(l2, 2, 52, 63),
        rev_number=_field(l2, 2, 63, 68, int),
    )


def format_tle(name, norad_id, epoch, inclination_deg, raan_deg, mean_motion,
               eccentricity=0.0, arg_perigee_deg=0.0, mean_anomaly_deg=0.0,
               intl_designator="21035A", rev_number=0):
    """Build a checksummed three-line element set from orbital elements."""
    start = datetime(epoch.year, 1, 1, tzinfo=epoch.tzinfo)
    day = (epoch - start).total_seconds() / SECONDS_PER_DAY + 1.0
    l1 = (
        f"1 {norad_id:05d}U {intl_designator:<8s} {epoch.year % 100:02d}{day:012.8f} "
        f" .00000000  00000-0  00000-0 0  999"
    )
    ecc = f"{eccentricity:.7f}"[2:]
    l2 = (
        f"2 {norad_id:05d} {inclination_deg:8.4f} {raan_deg:8.4f} {ecc} "
        f"{arg_perigee_deg:8.4f} {mean_anomaly_deg:8.4f} {mean_motion:11.8f}{rev_number:5d}"
    )
    l1 += str(tle_checksum(l1))
    l2 += str(tle_checksum(l2))
    return "\n".join([name, l1, l2])


def gmst(instant):
    """Greenwich mean sidereal angle (rad) at a UTC datetime."""
    if instant.tzinfo is None:
        instant = instant.replace(tzinfo=timezone.utc)
    j2000 = datetime(2000, 1, 1, 12, tzinfo=timezone.utc)
    d = (instant - j2000).total_seconds() / SECONDS_PER_DAY
    deg = 280.46061837 + 360.98564736629 * d
    return math.radians(deg % 360.0)


def rot_z(angle):
    """Rotation matrices about +z, shape ``angle.shape + (3, 3)``."""
    angle = np.asarray(angle, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    z, o = np.zeros_like(c), np.ones_like(c)
    return np.stack(
        [np.stack([c, -s, z], -1), np.stack([s, c, z], -1), np.stack([z, z, o], -1)], -2
    )


@dataclass(frozen=True)
class OrbitSample:
    t: float
    position_eci: np.ndarray
    velocity_eci: np.ndarray
    position_ecef: np.ndarray
    velocity_ecef: np.ndarray
    earth_angle: float


@dataclass(frozen=True)
class OrbitStateSeries:
    """Sampled sensor state; ``t`` in seconds since the element epoch.

    ``velocity_ecef`` is the velocity seen in the rotating frame. The ECEF
    axes are the ECI axes turned by ``earth_angle`` about z.
    """

    t: np.ndarray
    position_eci: np.ndarray
    velocity_eci: np.ndarray
    position_ecef: np.ndarray
    velocity_ecef: np.ndarray
    earth_angle: np.ndarray
    epoch: datetime = None
    orbit_id: str = ""
    omega_earth: float = CONSTANTS.omega_earth
    frame: str = "ECI: equator/equinox of date, ECEF: rotated by GMST"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("t", "position_eci", "velocity_eci", "position_ecef",
                     "velocity_ecef", "earth_angle"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise ValidationError("sample times must be strictly increasing")

    def __len__(self):
        return self.t.size

    def sample(self, i):
        return OrbitSample(
            float(self.t[i]), self.position_eci[i], self.velocity_eci[i],
            self.position_ecef[i], self.velocity_ecef[i], float(self.earth_angle[i]),
        )

    @property
    def dt(self):
        return float(self.t[1] - self.t[0]) if len(self) > 1 else float("nan")

    @property
    def normal(self):
        """Unit orbit-plane normal in ECI (from the first sample)."""
        n = np.cross(self.position_eci[0], self.velocity_eci[0])
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValidationError("degenerate orbit: r x v vanishes")
        return n / norm

    def eci_to_ecef(self, vec):
        """Rotate ECI vectors ``(N, 3)`` sample-wise into the ECEF frame."""
        return np.einsum("nji,nj->ni", rot_z(self.earth_angle), vec)

    def ecef_to_eci(self, vec):
        return np.einsum("nij,nj->ni", rot_z(self.earth_angle), vec)

    def write_csv(self, stream):
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["t", "x_eci", "y_eci", "z_eci", "vx", "vy", "vz",
                    "x_ecef", "y_ecef", "z_ecef"])
        for i in range(len(self)):
            w.writerow([repr(float(v)) for v in (
                self.t[i], *self.position_eci[i], *self.velocity_eci[i],
                *self.position_ecef[i])])


def circular_radius(mean_motion, gm=CONSTANTS.GM_earth):
    """Semi-major axis (m) of a circular orbit with ``mean_motion`` rev/day."""
    w = 2.0 * math.pi * mean_motion / SECONDS_PER_DAY
    return (gm / (w * w)) ** (1.0 / 3.0)


def propagate_circular(tle, duration, dt=60.0, start=0.0, constants=CONSTANTS):
    """Circular two-body propagation from the element set.

    The radius follows from the mean motion through Kepler's third law;
    eccentricity is ignored. The along-track phase at the epoch is
    ``arg_perigee + mean_anomaly``.

    Parameters
    ----------
    tle : TwoLineElement
    duration, dt : float
        Window length and cadence in seconds; samples at ``start + k*dt``
        for ``k*dt <= duration``.
    start : float
        Offset of the first sample from the element epoch (s).
    """
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    if not duration >= dt:
        raise ValidationError(f"duration {duration} shorter than dt {dt}")
    n = int(math.floor(duration / dt + 1e-9)) + 1
    t = start + dt * np.arange(n)

    w = 2.0 * math.pi * tle.mean_motion / SECONDS_PER_DAY
    a = circular_radius(tle.mean_motion, constants.GM_earth)
    ci, si = math.cos(tle.inclination), math.sin(tle.inclination)
    cO, sO = math.cos(tle.raan), math.sin(tle.raan)
    p_hat = np.array([cO, sO, 0.0])
    q_hat = np.array([-ci * sO, ci * cO, si])

    u = tle.arg_perigee + tle.mean_anomaly + w * t
    cu, su = np.cos(u)[:, None], np.sin(u)[:, None]
    r_eci = a * (cu * p_hat + su * q_hat)
    v_eci = a * w * (-su * p_hat + cu * q_hat)

    theta = gmst(tle.epoch) + constants.omega_earth * t
    rot_t = np.swapaxes(rot_z(theta), -1, -2)
    r_ecef = np.einsum("nij,nj->ni", rot_t, r_eci)
    omega = np.array([0.0, 0.0, constants.omega_earth])
    v_ecef = np.einsum("nij,nj->ni", rot_t, v_eci) - np.cross(omega, r_ecef)

    return OrbitStateSeries(
        t, r_eci, v_eci, r_ecef, v_ecef, theta,
        epoch=tle.epoch,
        orbit_id=f"{tle.name or 'NORAD'} {tle.norad_id}".strip(),
        omega_earth=constants.omega_earth,
        meta={"radius_m": a, "angular_rate": w, "speed_m_s": a * w},
    )


def relative_velocity(sample, cell_position_ecef, omega_earth=CONSTANTS.omega_earth):
    """Sensor velocity relative to a co-rotating source point, in ECI (m/s).

    ``cell_position_ecef`` may be ``(3,)`` or ``(N, 3)``.
    """
    cell = np.asarray(cell_position_ecef, dtype=float)
    cell_eci = cell @ rot_z(sample.earth_angle).T
    omega = np.array([0.0, 0.0, omega_earth])
    return np.asarray(sample.velocity_eci, dtype=float) - np.cross(omega, cell_eci)
