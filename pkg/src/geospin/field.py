"""
Spin-spin-velocity pseudomagnetic field of the polarized Earth at the sensor.

Each source spin with polarization ``sigma`` moving at relative velocity
``v`` contributes

    dB = -f * hbar / (4 pi mu_N) * (sigma x v) * exp(-r / lam) / r

per polarized spin (T). The field at a sample is the sum over grid cells of
``dB * rho * V``.

The velocity enters linearly, which the fast path exploits: with
``w_i = N_i exp(-r_i/lam) / r_i`` the sum is

    sum_i w_i sigma_i x (V - u_i) = (sum_i w_i sigma_i) x V - sum_i w_i (sigma_i x u_i)

where ``V`` is the sensor inertial velocity and ``u_i`` the co-rotation
velocity of cell ``i``, both expressed in the Earth-fixed basis. Only the two
weighted sums depend on the cell loop, and they are accumulated with Kahan
compensation in the grid's fixed cell order, one sample per task, so the
result does not depend on the thread count.
"""

from dataclasses import dataclass, field
import csv
import math

import numba
import numpy as np

from .constants import CONSTANTS
from .errors import SingularityError, ValidationError
from .orbit import rot_z

# the TBB layer in this numba build warns on import; workqueue is always present
if numba.config.THREADING_LAYER == "default":
    numba.config.THREADING_LAYER = "workqueue"

# Reserved identifiers for further velocity-dependent potentials; their vector
# forms are supplied at runtime through register_kernel.
RESERVED_KINDS = ("v6+7", "v8", "v14", "v15", "v16", "v2", "v4+5", "v12+13")
EXP_CUTOFF = 700.0


@dataclass(frozen=True)
class InteractionKernel:
    """Interaction choice plus its coupling.

    ``range_m`` is the Yukawa range and may be ``inf``. ``nucleon_factor``
    scales the sensor-side coupling (fraction of participating nucleon
    spin); ``halo_normalization`` converts ``g * |v|`` to tesla for the halo
    kind.
    """

    kind: str = "vs"
    coupling: float = 1.0
    range_m: float = math.inf
    nucleon_factor: float = 1.0
    halo_normalization: float = 1.0

    def __post_init__(self):
        if not (self.range_m > 0):
            raise ValidationError(f"range must be positive or inf, got {self.range_m}")
        if not math.isfinite(self.coupling):
            raise ValidationError("coupling must be finite")

    def with_coupling(self, f):
        return InteractionKernel(self.kind, f, self.range_m, self.nucleon_factor,
                                 self.halo_normalization)

    def with_range(self, lam):
        return InteractionKernel(self.kind, self.coupling, lam, self.nucleon_factor,
                                 self.halo_normalization)

    @property
    def prefactor(self):
        """``f hbar / (4 pi mu_N)`` times the nucleon factor (T m^2 s / m)."""
        return (self.coupling * self.nucleon_factor * CONSTANTS.hbar
                / (4.0 * math.pi * CONSTANTS.mu_N))


@dataclass(frozen=True)
class KernelInput:
    sigma: np.ndarray
    velocity: np.ndarray
    separation: np.ndarray

    @property
    def r(self):
        return np.linalg.norm(np.asarray(self.separation, dtype=float), axis=-1)


def yukawa_factor(r, range_m):
    """``exp(-r/lam)``, exactly 1 for infinite range, 0 past the cutoff."""
    r = np.asarray(r, dtype=float)
    if math.isinf(range_m):
        return np.ones_like(r)
    x = r / range_m
    return np.where(x > EXP_CUTOFF, 0.0, np.exp(-np.minimum(x, EXP_CUTOFF)))


def kernel_vs(inp, kernel):
    """Per-spin field of the velocity-dependent spin-spin interaction (T m^3).

    Multiply by ``rho * dV`` to get tesla.
    """
    r = inp.r
    if np.any(r == 0):
        raise SingularityError("zero source-sensor separation")
    sigma = np.asarray(inp.sigma, dtype=float)
    v = np.asarray(inp.velocity, dtype=float)
    scale = -kernel.prefactor * yukawa_factor(r, kernel.range_m) / r
    return np.cross(sigma, v) * np.asarray(scale)[..., None]


def kernel_halo(v, g_coupling, normalization=1.0):
    """Axion-halo field magnitude ``normalization * g * |v|`` (T).

    Only proportionality to ``g * |v|`` is physical here; ``normalization``
    fixes the absolute scale.
    """
    speed = np.linalg.norm(np.atleast_1d(np.asarray(v, dtype=float)), axis=-1)
    out = normalization * g_coupling * speed
    return float(out) if np.ndim(out) == 0 else out


_REGISTRY = {"vs": kernel_vs}
for _kind in RESERVED_KINDS:
    _REGISTRY[_kind] = None


def register_kernel(kind, func):
    """Attach a vector form ``func(KernelInput, InteractionKernel) -> (..., 3)``."""
    _REGISTRY[kind] = func


def registered_kernel(kind):
    if kind not in _REGISTRY:
        raise ValidationError(f"unknown kernel kind {kind!r}")
    func = _REGISTRY[kind]
    if func is None:
        raise ValidationError(f"kernel kind {kind!r} is reserved but has no registered form")
    return func


@dataclass(frozen=True)
class FieldSeries:
    t: np.ndarray
    b_eci: np.ndarray  # (N, 3) T
    axis: np.ndarray = None  # ECI unit vector, if a sensor axis was declared
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("t", "b_eci"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.axis is not None:
            ax = np.asarray(self.axis, dtype=float)
            object.__setattr__(self, "axis", ax / np.linalg.norm(ax))

    def __len__(self):
        return self.t.size

    @property
    def projection(self):
        if self.axis is None:
            return None
        return self.b_eci @ self.axis

    def scaled(self, factor):
        return FieldSeries(self.t, self.b_eci * factor, self.axis, dict(self.meta))

    def write_csv(self, stream):
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["t_s", "Bx_T", "By_T", "Bz_T", "Bproj_T"])
        proj = self.projection
        for i in range(len(self)):
            p = repr(float(proj[i])) if proj is not None else ""
            w.writerow([repr(float(self.t[i])), *(repr(float(x)) for x in self.b_eci[i]), p])

    @classmethod
    def read_csv(cls, stream, axis=None):
        rows = list(csv.reader(stream))
        if not rows or rows[0] != ["t_s", "Bx_T", "By_T", "Bz_T", "Bproj_T"]:
            raise ValidationError("not a field series CSV")
        t = np.array([float(r[0]) for r in rows[1:]])
        b = np.array([[float(x) for x in r[1:4]] for r in rows[1:]]).reshape(-1, 3)
        return cls(t, b, axis)


@numba.njit(parallel=True, cache=True)
def _weighted_sums(sensor_ecef, centers, spins, sigma, sigma_x_u, inv_ranges, out):
    """Kahan-compensated ``sum w sigma`` and ``sum w (sigma x u)`` per sample.

    ``inv_ranges`` holds ``1/lam`` (0 for infinite range). ``out`` has shape
    ``(n_lambda, n_samples, 6)``.
    """
    n_t = sensor_ecef.shape[0]
    n_c = centers.shape[0]
    n_l = inv_ranges.shape[0]
    for k in numba.prange(n_t):
        sx = sensor_ecef[k, 0]
        sy = sensor_ecef[k, 1]
        sz = sensor_ecef[k, 2]
        acc = np.zeros((n_l, 6))
        comp = np.zeros((n_l, 6))
        vals = np.empty(6)
        for i in range(n_c):
            dx = sx - centers[i, 0]
            dy = sy - centers[i, 1]
            dz = sz - centers[i, 2]
            r = math.sqrt(dx * dx + dy * dy + dz * dz)
            base = spins[i] / r
            vals[0] = sigma[i, 0]
            vals[1] = sigma[i, 1]
            vals[2] = sigma[i, 2]
            vals[3] = sigma_x_u[i, 0]
            vals[4] = sigma_x_u[i, 1]
            vals[5] = sigma_x_u[i, 2]
            for l in range(n_l):
                x = r * inv_ranges[l]
                if x == 0.0:
                    w = base
                elif x > 700.0:
                    w = 0.0
                else:
                    w = base * math.exp(-x)
                for j in range(6):
                    y = w * vals[j] - comp[l, j]
                    s = acc[l, j] + y
                    comp[l, j] = (s - acc[l, j]) - y
                    acc[l, j] = s
        for l in range(n_l):
            for j in range(6):
                out[l, k, j] = acc[l, j]


def set_threads(n):
    """Cap the worker count of the integrator (results do not change)."""
    if n is not None:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def _check_clearance(grid, orbit):
    r_sensor = np.linalg.norm(orbit.position_ecef, axis=1)
    r_max = max(grid.r_bounds[1], grid.max_radius)
    inside = np.nonzero(r_sensor <= r_max)[0]
    if inside.size:
        t_bad = float(orbit.t[inside[0]])
        raise SingularityError(
            f"sensor at t={t_bad:.6g} s is inside the source domain "
            f"(|r|={r_sensor[inside[0]]:.6g} m <= {r_max:.6g} m)"
        )


def integrate_field_ranges(grid, orbit, kernel, ranges, axis=None):
    """Integrate the ``vs`` field for several ranges in one pass over the cells.

    Returns a list of :class:`FieldSeries`, one per entry of ``ranges``.
    """
    if kernel.kind != "vs":
        raise ValidationError("multi-range integration is only defined for the vs kernel")
    _check_clearance(grid, orbit)
    omega = np.array([0.0, 0.0, orbit.omega_earth])
    u = np.cross(omega, grid.centers)
    sigma_x_u = np.cross(grid.sigma, u)
    inv = np.array([0.0 if math.isinf(l) else 1.0 / l for l in ranges])
    out = np.zeros((len(ranges), len(orbit), 6))
    _weighted_sums(
        orbit.position_ecef, grid.centers, np.ascontiguousarray(grid.spins),
        grid.sigma, np.ascontiguousarray(sigma_x_u), inv, out,
    )
    rot = rot_z(orbit.earth_angle)
    # sensor inertial velocity in the Earth-fixed basis
    v_fixed = np.einsum("nji,nj->ni", rot, orbit.velocity_eci)
    series = []
    for l, lam in enumerate(ranges):
        k = kernel.with_range(lam)
        b_fixed = -k.prefactor * (np.cross(out[l, :, :3], v_fixed) - out[l, :, 3:])
        b_eci = np.einsum("nij,nj->ni", rot, b_fixed)
        series.append(FieldSeries(orbit.t, b_eci, axis, _meta(grid, orbit, k)))
    return series


def _meta(grid, orbit, kernel):
    return {
        "kernel": kernel.kind,
        "coupling": kernel.coupling,
        "range_m": kernel.range_m,
        "grid_resolution": list(grid.resolution),
        "orbit_id": orbit.orbit_id,
    }


def integrate_field(grid, orbit, kernel, axis=None):
    """Pseudomagnetic field along the orbit, in ECI (T).

    Parameters
    ----------
    grid : SpinSourceGrid
    orbit : OrbitStateSeries
    kernel : InteractionKernel
    axis : array_like, optional
        ECI sensor axis; fills :attr:`FieldSeries.projection`.

    Raises
    ------
    SingularityError
        The sensor enters the source domain; the message names the sample time.
    """
    if kernel.kind == "vs":
        return integrate_field_ranges(grid, orbit, kernel, [kernel.range_m], axis)[0]
    return _integrate_generic(grid, orbit, kernel, axis)


def _integrate_generic(grid, orbit, kernel, axis):
    """Reference path for registered kernels: exact (fsum) per-sample sums."""
    func = registered_kernel(kernel.kind)
    _check_clearance(grid, orbit)
    omega = np.array([0.0, 0.0, orbit.omega_earth])
    spins = grid.spins
    b = np.zeros((len(orbit), 3))
    for k in range(len(orbit)):
        rot = rot_z(orbit.earth_angle[k])
        cells_eci = grid.centers @ rot.T
        sigma_eci = grid.sigma @ rot.T
        v_rel = orbit.velocity_eci[k] - np.cross(omega, cells_eci)
        inp = KernelInput(sigma_eci, v_rel, orbit.position_eci[k] - cells_eci)
        contrib = func(inp, kernel) * spins[:, None]
        b[k] = [math.fsum(contrib[:, j].tolist()) for j in range(3)]
    return FieldSeries(orbit.t, b, axis, _meta(grid, orbit, kernel))


def project_normal(series, orbit):
    """Component of each field sample along the constant orbit-plane normal (T)."""
    return np.asarray(series.b_eci) @ orbit.normal
