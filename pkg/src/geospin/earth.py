"""
Polarized geoelectron spin source.

Unpaired electrons in the mantle and crust pick up a thermal (Curie-law)
polarization in the geomagnetic field,

    rho = rho_e * 2 mu_B |B| / (k_B T),

and the Earth volume is cut into cells carrying that density and the local
polarization direction. Electron spins point against the local field by
default (negative electron gyromagnetic ratio); ``spin_sign=+1`` flips it.
"""

from dataclasses import dataclass
import csv
import io
import math
import os
from importlib import resources

import numpy as np

from .constants import CMB_RADIUS, CONSTANTS, EARTH_RADIUS
from .errors import DomainError, FormatError, ParseError, ValidationError
from . import geomag

PROFILE_COLUMNS = ("r_inner_m", "r_outer_m", "T_K", "rho_e_per_m3")
# optional fifth column: temperature at the outer radius, for a linear ramp
RAMP_COLUMN = "T_outer_K"
MIN_RESOLUTION = (4, 8, 16)
_CHUNK = 65536


@dataclass(frozen=True)
class Layer:
    inner_radius: float
    outer_radius: float
    temperature_inner: float
    temperature_outer: float
    rho_e: float

    def temperature(self, r):
        frac = (np.asarray(r, dtype=float) - self.inner_radius) / (
            self.outer_radius - self.inner_radius
        )
        return self.temperature_inner + frac * (
            self.temperature_outer - self.temperature_inner
        )


@dataclass(frozen=True)
class RadialProfile:
    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValidationError("profile has no layers")
        for k, lay in enumerate(layers):
            if not lay.outer_radius > lay.inner_radius > 0:
                raise ValidationError(f"layer {k}: radii must satisfy 0 < inner < outer")
            if lay.temperature_inner <= 0 or lay.temperature_outer <= 0:
                raise ValidationError(f"layer {k}: temperatures must be positive")
            if lay.rho_e < 0:
                raise ValidationError(f"layer {k}: rho_e must be non-negative")
            if k and not math.isclose(
                lay.inner_radius, layers[k - 1].outer_radius, rel_tol=0, abs_tol=1e-6
            ):
                raise ValidationError(
                    f"layer {k}: not contiguous with layer {k - 1} "
                    f"({layers[k - 1].outer_radius} != {lay.inner_radius})"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def inner_radius(self):
        return self.layers[0].inner_radius

    @property
    def outer_radius(self):
        return self.layers[-1].outer_radius

    def scaled(self, factor):
        """Copy with every rho_e multiplied by ``factor``."""
        return RadialProfile(
            tuple(
                Layer(l.inner_radius, l.outer_radius, l.temperature_inner,
                      l.temperature_outer, l.rho_e * factor)
                for l in self.layers
            )
        )

    @classmethod
    def uniform(cls, rho_e, temperature, inner=CMB_RADIUS, outer=EARTH_RADIUS):
        return cls((Layer(inner, outer, temperature, temperature, rho_e),))

    def values_at(self, r):
        """``(rho_e, T)`` at radii ``r``; zero density outside the profile."""
        r = np.asarray(r, dtype=float)
        rho = np.zeros_like(r)
        temp = np.ones_like(r)
        for k, lay in enumerate(self.layers):
            last = k == len(self.layers) - 1
            inside = (r >= lay.inner_radius) & (
                (r <= lay.outer_radius) if last else (r < lay.outer_radius)
            )
            rho = np.where(inside, lay.rho_e, rho)
            temp = np.where(inside, lay.temperature(r), temp)
        return rho, temp

    def mean_susceptibility_factor(self, r1, r2):
        """Volume average of ``rho_e / T`` over the spherical shell ``[r1, r2]``.

        Layer boundaries inside the shell are honored exactly; within a layer
        a 6-point Gauss-Legendre rule handles the linear temperature ramp
        (exact to high order since ``r**2 / T(r)`` is smooth there).
        """
        xg, wg = np.polynomial.legendre.leggauss(6)
        total = 0.0
        for lay in self.layers:
            a = max(r1, lay.inner_radius)
            b = min(r2, lay.outer_radius)
            if b <= a or lay.rho_e == 0.0:
                continue
            rr = 0.5 * (b - a) * xg + 0.5 * (a + b)
            total += 0.5 * (b - a) * float(np.sum(wg * rr**2 / lay.temperature(rr))) * lay.rho_e
        return 3.0 * total / (r2**3 - r1**3)


def default_profile():
    """Shipped four-layer mantle and crust profile."""
    text = resources.files("geospin.data").joinpath("default_profile.csv").read_text("ascii")
    return load_profile(io.StringIO(text))


def load_profile(source):
    """Read a radial profile CSV (``r_inner_m,r_outer_m,T_K,rho_e_per_m3``)."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="ascii") as fh:
            return load_profile(fh)
    rows = [r for r in csv.reader(line for line in source if not line.lstrip().startswith("#"))]
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise FormatError("empty profile file")
    header = tuple(c.strip() for c in rows[0])
    if header[:4] != PROFILE_COLUMNS or header[4:] not in ((), (RAMP_COLUMN,)):
        raise FormatError(
            f"profile header must be {','.join(PROFILE_COLUMNS)}[,{RAMP_COLUMN}], got {','.join(header)}"
        )
    layers = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} columns, got {len(row)}", lineno)
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        t_out = vals[4] if len(vals) == 5 else vals[2]
        layers.append(Layer(vals[0], vals[1], vals[2], t_out, vals[3]))
    return RadialProfile(tuple(layers))


def polarized_density(rho_e, b_mag, temperature, constants=CONSTANTS):
    """Thermally polarized spin density ``rho_e * 2 mu_B B / (k_B T)`` (m^-3)."""
    temperature = np.asarray(temperature, dtype=float)
    if np.any(~(temperature > 0)):
        raise DomainError("temperature must be positive")
    rho_e = np.asarray(rho_e, dtype=float)
    b_mag = np.asarray(b_mag, dtype=float)
    if np.any(rho_e < 0) or np.any(b_mag < 0):
        raise DomainError("rho_e and |B| must be non-negative")
    out = rho_e * (2.0 * constants.mu_B * b_mag) / (constants.k_B * temperature)
    return out if out.ndim else float(out)


def density_at(profile, coeffs, xyz, truncate_degree=None):
    """Point evaluation of the polarized density at ECEF positions (m^-3)."""
    xyz = np.asarray(xyz, dtype=float)
    b = geomag.field_ecef(coeffs, xyz, truncate_degree)
    rho_e, temp = profile.values_at(np.linalg.norm(xyz, axis=-1))
    return polarized_density(rho_e, np.linalg.norm(b, axis=-1), temp)


@dataclass(frozen=True)
class SpinSourceGrid:
    """Discretized spin source in the Earth-fixed frame.

    Arrays are in a fixed radial-major, then colatitude, then longitude cell
    order; downstream sums rely on that order for reproducibility.
    """

    centers: np.ndarray  # (N, 3) m, ECEF
    volumes: np.ndarray  # (N,) m^3
    rho: np.ndarray  # (N,) spins / m^3
    sigma: np.ndarray  # (N, 3) unit polarization direction, ECEF
    resolution: tuple = (1, 1, 1)
    r_bounds: tuple = (0.0, 0.0)
    spin_sign: int = -1

    def __post_init__(self):
        for name in ("centers", "volumes", "rho", "sigma"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.volumes.shape[0]
        if self.centers.shape != (n, 3) or self.sigma.shape != (n, 3) or self.rho.shape != (n,):
            raise ValidationError("inconsistent grid array shapes")
        if np.any(self.rho < 0):
            raise ValidationError("negative spin density")

    def __len__(self):
        return self.volumes.shape[0]

    @property
    def spins(self):
        """Polarized spin count per cell, ``rho * V``."""
        return self.rho * self.volumes

    @property
    def max_radius(self):
        return float(np.max(np.linalg.norm(self.centers, axis=1))) if len(self) else 0.0

    def scaled(self, factor):
        return SpinSourceGrid(
            self.centers, self.volumes, self.rho * factor, self.sigma,
            self.resolution, self.r_bounds, self.spin_sign,
        )

    @classmethod
    def single_cell(cls, position, spins=1.0, sigma=(0.0, 0.0, 1.0)):
        """One point-like cell of unit volume; used for closed-form checks."""
        s = np.asarray(sigma, dtype=float)
        s = s / np.linalg.norm(s)
        return cls(
            np.asarray(position, dtype=float).reshape(1, 3),
            np.ones(1),
            np.array([float(spins)]),
            s.reshape(1, 3),
        )


def radial_edges(r_min, r_max, n_r):
    """Shell edges giving equal-volume shells."""
    k = np.arange(n_r + 1) / n_r
    edges = np.cbrt(r_min**3 + k * (r_max**3 - r_min**3))
    edges[0], edges[-1] = r_min, r_max
    return edges


def build_grid(profile, coeffs, resolution=(32, 64, 128), domain=None,
               spin_sign=-1, truncate_degree=None):
    """Cell the source domain and attach polarized density and direction.

    Parameters
    ----------
    profile : RadialProfile
    coeffs : GaussCoefficientSet
    resolution : (n_r, n_theta, n_phi)
        Shells are equal in volume; colatitude bands are equal in
        ``cos(theta)`` so every cell of a shell has the same volume.
    domain : (r_min, r_max), optional
        Defaults to the core-mantle boundary up to the mean surface radius.
    spin_sign : {-1, +1}
        -1 puts the spin against the local field.

    Returns
    -------
    SpinSourceGrid
    """
    n_r, n_t, n_p = (int(v) for v in resolution)
    if n_r < MIN_RESOLUTION[0] or n_t < MIN_RESOLUTION[1] or n_p < MIN_RESOLUTION[2]:
        raise ValidationError(f"resolution {resolution} below minimum {MIN_RESOLUTION}")
    if spin_sign not in (-1, 1):
        raise ValidationError("spin_sign must be -1 or +1")
    r_min, r_max = domain if domain is not None else (CMB_RADIUS, EARTH_RADIUS)
    if r_min < CMB_RADIUS * (1 - 1e-12):
        raise DomainError(
            f"domain inner radius {r_min:.6g} m is below the core-mantle boundary"
        )
    if not r_max > r_min:
        raise ValidationError("domain must satisfy r_min < r_max")

    r_edges = radial_edges(r_min, r_max, n_r)
    mu_edges = np.linspace(1.0, -1.0, n_t + 1)
    p_edges = np.linspace(-math.pi, math.pi, n_p + 1)

    r_c = np.cbrt(0.5 * (r_edges[:-1] ** 3 + r_edges[1:] ** 3))
    shell_vol = (r_edges[1:] ** 3 - r_edges[:-1] ** 3) / 3.0
    factor = np.array(
        [profile.mean_susceptibility_factor(a, b) for a, b in zip(r_edges[:-1], r_edges[1:])]
    )
    theta_c = np.arccos(0.5 * (mu_edges[:-1] + mu_edges[1:]))
    dmu = mu_edges[:-1] - mu_edges[1:]
    phi_c = 0.5 * (p_edges[:-1] + p_edges[1:])
    dphi = np.diff(p_edges)

    R, T, P = np.meshgrid(r_c, theta_c, phi_c, indexing="ij")
    volumes = (shell_vol[:, None, None] * dmu[None, :, None] * dphi[None, None, :]).ravel()
    fac = np.broadcast_to(factor[:, None, None], R.shape).ravel()
    R, T, P = R.ravel(), T.ravel(), P.ravel()
    st = np.sin(T)
    centers = np.stack([R * st * np.cos(P), R * st * np.sin(P), R * np.cos(T)], axis=1)

    bvec = np.empty_like(centers)
    for start in range(0, len(R), _CHUNK):
        sl = slice(start, start + _CHUNK)
        b = geomag.evaluate_field(coeffs, (R[sl], T[sl], P[sl]), truncate_degree)
        r_hat, t_hat, p_hat = geomag.spherical_basis(T[sl], P[sl])
        bvec[sl] = b[:, 0:1] * r_hat + b[:, 1:2] * t_hat + b[:, 2:3] * p_hat
    bmag = np.linalg.norm(bvec, axis=1)
    # fac already carries rho_e / T, so feed T = 1 K
    rho = polarized_density(fac, bmag, 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        sigma = spin_sign * bvec / bmag[:, None]
    sigma[bmag == 0.0] = (0.0, 0.0, 1.0)

    return SpinSourceGrid(
        centers, volumes, rho, sigma, (n_r, n_t, n_p), (float(r_min), float(r_max)), spin_sign
    )


def total_polarized_spins(grid):
    """Total polarized spin count, exactly rounded sum of ``rho * V``."""
    return math.fsum(grid.spins.tolist())


def density_map(profile, coeffs, radius=5.0e6, n_lat=90, n_lon=180):
    """Polarized density on a sphere, shape ``(n_lat, n_lon)``, rows north to south.

    Returns ``(lat_deg, lon_deg, rho)`` for the map plots.
    """
    lat = 90.0 - (np.arange(n_lat) + 0.5) * 180.0 / n_lat
    lon = -180.0 + (np.arange(n_lon) + 0.5) * 360.0 / n_lon
    LA, LO = np.meshgrid(np.radians(lat), np.radians(lon), indexing="ij")
    xyz = radius * np.stack(
        [np.cos(LA) * np.cos(LO), np.cos(LA) * np.sin(LO), np.sin(LA)], axis=-1
    )
    rho = density_at(profile, coeffs, xyz.reshape(-1, 3)).reshape(n_lat, n_lon)
    return lat, lon, rho


def write_grid_csv(grid, stream):
    """Dump cells as ``x_m,y_m,z_m,volume_m3,rho_per_m3,sx,sy,sz``."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["x_m", "y_m", "z_m", "volume_m3", "rho_per_m3", "sx", "sy", "sz"])
    for c, v, r, s in zip(grid.centers, grid.volumes, grid.rho, grid.sigma):
        w.writerow([repr(float(x)) for x in (*c, v, r, *s)])
