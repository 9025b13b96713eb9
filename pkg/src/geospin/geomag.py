"""
Internal geomagnetic field from a spherical-harmonic Gauss coefficient model.

The model file is the WMM ``.COF`` text layout: one header line (epoch, model
name, release date) followed by ``n m g h g_dot h_dot`` rows in nanotesla and
an optional line of ``9`` characters closing the table.

Positions are geocentric spherical (radius in meters, colatitude and
longitude in radians) and fields are returned in tesla as
``(B_r, B_theta, B_phi)``. The expansion is an internal potential and is only
valid outside its sources, so evaluation inside the core-mantle boundary is
refused.
"""

from dataclasses import dataclass
from importlib import resources
import io
import math
import os

import numpy as np

from .constants import CMB_RADIUS, REFERENCE_RADIUS
from .errors import DomainError, FormatError, ParseError, ValidationError

MAX_SUPPORTED_DEGREE = 12
NT = 1e-9

# WGS84 ellipsoid, only used to place publisher test points.
WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)


@dataclass(frozen=True)
class GaussCoefficientSet:
    """Schmidt semi-normalized Gauss coefficients.

    ``g`` and ``h`` are ``(max_degree + 1, max_degree + 1)`` arrays indexed
    ``[n, m]`` in nanotesla; entries with ``m > n`` and the ``n = 0`` row are
    zero. Secular variation (``g_dot``, ``h_dot``, nT/yr) is kept but not
    applied: the field is frozen at ``epoch``.
    """

    epoch: float
    max_degree: int
    g: np.ndarray
    h: np.ndarray
    g_dot: np.ndarray
    h_dot: np.ndarray
    model_name: str = ""
    release_date: str = ""
    reference_radius: float = REFERENCE_RADIUS

    def __post_init__(self):
        if not 1 <= self.max_degree <= MAX_SUPPORTED_DEGREE:
            raise ValidationError(
                f"max_degree {self.max_degree} outside 1..{MAX_SUPPORTED_DEGREE}"
            )
        shape = (self.max_degree + 1, self.max_degree + 1)
        for name in ("g", "h", "g_dot", "h_dot"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValidationError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.h[:, 0] != 0.0):
            raise ValidationError("h[n][0] must be zero")

    @classmethod
    def dipole(cls, g10, g11=0.0, h11=0.0, epoch=2020.0):
        """Degree-1 model, handy for analytic checks."""
        g = np.zeros((2, 2))
        h = np.zeros((2, 2))
        g[1, 0], g[1, 1], h[1, 1] = g10, g11, h11
        z = np.zeros((2, 2))
        return cls(epoch, 1, g, h, z, z.copy(), model_name="dipole")


@dataclass(frozen=True)
class GeoPosition:
    radius: float
    colatitude: float
    longitude: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValidationError(f"radius must be positive, got {self.radius}")
        if not 0.0 <= self.colatitude <= math.pi:
            raise ValidationError(f"colatitude {self.colatitude} outside [0, pi]")
        if not -math.pi <= self.longitude < math.pi:
            raise ValidationError(f"longitude {self.longitude} outside [-pi, pi)")


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def _is_fill_line(line):
    s = line.strip()
    return len(s) >= 8 and set(s) == {"9"}


def load_coefficients(source):
    """Parse a WMM ``.COF`` coefficient table.

    Parameters
    ----------
    source : str, os.PathLike or text stream
        Path to the file or an open text stream.

    Returns
    -------
    GaussCoefficientSet

    Raises
    ------
    FormatError
        Missing or malformed header.
    ParseError
        A coefficient row that cannot be read (message names the line).
    ValidationError
        Degree or order out of range, or a nonzero ``h[n][0]``.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="ascii") as fh:
            return load_coefficients(fh)

    lines = source.read().splitlines()
    idx = 0
    while idx < len(lines) and not lines[idx].strip():
        idx += 1
    if idx == len(lines):
        raise FormatError("empty coefficient file")

    header = lines[idx].split()
    # a header is "<epoch> <model name> [date]"; a coefficient row has a numeric
    # second column instead of a name
    if len(header) < 2 or not _is_number(header[0]) or _is_number(header[1]):
        raise FormatError(f"line {idx + 1}: missing header (epoch, model name, date)")
    epoch = float(header[0])
    model_name = header[1]
    release_date = header[2] if len(header) > 2 else ""

    rows = []
    for lineno, line in enumerate(lines[idx + 1:], start=idx + 2):
        if not line.strip():
            continue
        if _is_fill_line(line):
            break
        parts = line.split()
        if len(parts) not in (4, 6):
            raise ParseError(f"expected 4 or 6 columns, got {len(parts)}", lineno)
        try:
            n, m = int(parts[0]), int(parts[1])
            vals = [float(p) for p in parts[2:]]
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if len(vals) == 2:
            vals += [0.0, 0.0]
        if not 1 <= n <= MAX_SUPPORTED_DEGREE:
            raise ValidationError(
                f"line {lineno}: degree {n} outside 1..{MAX_SUPPORTED_DEGREE}"
            )
        if not 0 <= m <= n:
            raise ValidationError(f"line {lineno}: order {m} outside 0..{n}")
        if m == 0 and (vals[1] != 0.0 or vals[3] != 0.0):
            raise ValidationError(f"line {lineno}: h[{n}][0] must be zero")
        rows.append((n, m, *vals))

    if not rows:
        raise FormatError("no coefficient rows after header")
    nmax = max(r[0] for r in rows)
    g, h, gd, hd = (np.zeros((nmax + 1, nmax + 1)) for _ in range(4))
    for n, m, gv, hv, gdv, hdv in rows:
        g[n, m], h[n, m], gd[n, m], hd[n, m] = gv, hv, gdv, hdv
    return GaussCoefficientSet(
        epoch, nmax, g, h, gd, hd, model_name=model_name, release_date=release_date
    )


def load_wmm2020():
    """The WMM2020 coefficients shipped with the package."""
    text = resources.files("geospin.data").joinpath("WMM2020.COF").read_text("ascii")
    return load_coefficients(io.StringIO(text))


def schmidt_legendre(x, nmax):
    """Schmidt semi-normalized associated Legendre functions, sine-reduced.

    Returns ``Q`` and ``dQ`` of shape ``(nmax + 1, nmax + 1) + x.shape`` with
    ``P_n^m(cos t) = sin(t)**m * Q[n, m]`` and ``dQ = dQ/dx``. Keeping the
    ``sin**m`` factor out makes the ``1/sin`` terms of the field regular at
    the poles.
    """
    x = np.asarray(x, dtype=float)
    Q = np.zeros((nmax + 1, nmax + 1) + x.shape)
    dQ = np.zeros_like(Q)
    Q[0, 0] = 1.0
    for m in range(nmax + 1):
        if m >= 1:
            scale = 1.0 if m == 1 else math.sqrt((2 * m - 1) / (2 * m))
            Q[m, m] = scale * Q[m - 1, m - 1]
        for n in range(m + 1, nmax + 1):
            inv = 1.0 / math.sqrt(n * n - m * m)
            k = math.sqrt((n - 1) ** 2 - m * m)
            Q[n, m] = (2 * n - 1) * x * Q[n - 1, m]
            dQ[n, m] = (2 * n - 1) * (Q[n - 1, m] + x * dQ[n - 1, m])
            if n - 2 >= m:
                Q[n, m] -= k * Q[n - 2, m]
                dQ[n, m] -= k * dQ[n - 2, m]
            Q[n, m] *= inv
            dQ[n, m] *= inv
    return Q, dQ


def degree_contributions(coeffs, radius, colatitude, longitude, truncate_degree=None):
    """Per-degree field terms, shape ``(nmax,) + radius.shape + (3,)``.

    Row ``k`` holds the degree ``k + 1`` part of ``(B_r, B_theta, B_phi)``
    in tesla. Summing over the first axis gives :func:`evaluate_field`.
    """
    nmax = coeffs.max_degree if truncate_degree is None else int(truncate_degree)
    if not 1 <= nmax <= coeffs.max_degree:
        raise ValidationError(
            f"truncate_degree {truncate_degree} outside 1..{coeffs.max_degree}"
        )
    r, theta, phi = np.broadcast_arrays(
        np.asarray(radius, dtype=float),
        np.asarray(colatitude, dtype=float),
        np.asarray(longitude, dtype=float),
    )
    if np.any(~(r >= CMB_RADIUS)):
        bad = float(np.min(r))
        raise DomainError(
            f"radius {bad:.6g} m is below the core-mantle boundary "
            f"({CMB_RADIUS:.4g} m): internal expansion invalid inside the core"
        )

    c = np.cos(theta)
    s = np.sin(theta)
    Q, dQ = schmidt_legendre(c, nmax)
    a = coeffs.reference_radius
    ratio = a / r
    out = np.zeros((nmax,) + r.shape + (3,))

    cos_m = [np.cos(m * phi) for m in range(nmax + 1)]
    sin_m = [np.sin(m * phi) for m in range(nmax + 1)]
    s_pow = [np.ones_like(s)]
    for _ in range(nmax + 1):
        s_pow.append(s_pow[-1] * s)

    for n in range(1, nmax + 1):
        br = np.zeros_like(r)
        bt = np.zeros_like(r)
        bp = np.zeros_like(r)
        for m in range(n + 1):
            gnm = coeffs.g[n, m]
            hnm = coeffs.h[n, m]
            if gnm == 0.0 and hnm == 0.0:
                continue
            gh = gnm * cos_m[m] + hnm * sin_m[m]
            p = s_pow[m] * Q[n, m]
            dp = -s_pow[m + 1] * dQ[n, m]
            if m >= 1:
                dp = dp + m * s_pow[m - 1] * c * Q[n, m]
                bp += m * (gnm * sin_m[m] - hnm * cos_m[m]) * s_pow[m - 1] * Q[n, m]
            br += (n + 1) * gh * p
            bt -= gh * dp
        scale = ratio ** (n + 2) * NT
        out[n - 1, ..., 0] = br * scale
        out[n - 1, ..., 1] = bt * scale
        out[n - 1, ..., 2] = bp * scale
    return out


def evaluate_field(coeffs, pos, truncate_degree=None):
    """Geomagnetic field ``-grad V`` in tesla.

    Parameters
    ----------
    coeffs : GaussCoefficientSet
    pos : GeoPosition or tuple of arrays ``(radius, colatitude, longitude)``
    truncate_degree : int, optional
        Highest degree summed, defaults to ``coeffs.max_degree``.

    Returns
    -------
    ndarray, shape ``(..., 3)``
        ``(B_r, B_theta, B_phi)`` in tesla.
    """
    if isinstance(pos, GeoPosition):
        r, t, p = pos.radius, pos.colatitude, pos.longitude
    else:
        r, t, p = pos
    terms = degree_contributions(coeffs, r, t, p, truncate_degree)
    total = terms[0].copy()
    for k in range(1, terms.shape[0]):
        total += terms[k]
    return total


def cartesian_to_spherical(xyz):
    xyz = np.asarray(xyz, dtype=float)
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    r = np.sqrt(x * x + y * y + z * z)
    theta = np.arccos(np.clip(z / r, -1.0, 1.0))
    phi = np.arctan2(y, x)
    return r, theta, phi


def spherical_basis(theta, phi):
    """Unit vectors ``r_hat, theta_hat, phi_hat`` as ``(..., 3)`` arrays."""
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    r_hat = np.stack([st * cp, st * sp, ct], axis=-1)
    t_hat = np.stack([ct * cp, ct * sp, -st], axis=-1)
    p_hat = np.stack([-sp, cp, np.zeros_like(st)], axis=-1)
    return r_hat, t_hat, p_hat


def field_ecef(coeffs, xyz, truncate_degree=None):
    """Field at Earth-fixed Cartesian points, returned as ECEF Cartesian (T)."""
    r, theta, phi = cartesian_to_spherical(xyz)
    b = evaluate_field(coeffs, (r, theta, phi), truncate_degree)
    r_hat, t_hat, p_hat = spherical_basis(theta, phi)
    return (
        b[..., 0:1] * r_hat + b[..., 1:2] * t_hat + b[..., 2:3] * p_hat
    )


def geodetic_to_geocentric(lat, height):
    """WGS84 geodetic latitude (rad) and height (m) -> radius, colatitude, psi.

    ``psi`` is geodetic minus geocentric latitude, the tilt needed to rotate
    geocentric north/up components into the local geodetic frame.
    """
    lat = np.asarray(lat, dtype=float)
    sl, cl = np.sin(lat), np.cos(lat)
    n_curv = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sl * sl)
    rho = (n_curv + height) * cl
    z = (n_curv * (1.0 - WGS84_E2) + height) * sl
    r = np.hypot(rho, z)
    lat_gc = np.arctan2(z, rho)
    return r, np.pi / 2 - lat_gc, lat - lat_gc


def geodetic_components(coeffs, lat, lon, height):
    """North, east, down field components (T) at a WGS84 geodetic point."""
    r, theta, psi = geodetic_to_geocentric(lat, height)
    b = evaluate_field(coeffs, (r, theta, np.asarray(lon, dtype=float)))
    north_gc, up_gc = -b[..., 1], b[..., 0]
    x = north_gc * np.cos(psi) - up_gc * np.sin(psi)
    down = -(up_gc * np.cos(psi) + north_gc * np.sin(psi))
    return x, b[..., 2], down
