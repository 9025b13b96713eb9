"""Pseudomagnetic field of polarized geoelectrons seen from a low Earth orbit.

Modules
-------
geomag      spherical-harmonic geomagnetic field (WMM coefficient files)
earth       radial profiles and the polarized spin-source grid
orbit       TLE parsing and circular propagation, ECI/ECEF frames
field       interaction kernels and the field integral along the orbit
comag       dual-species comagnetometer model and noise budget
analysis    spectra, Allan deviation, lock-in and exclusion curves
config      INI pipeline configuration
pipeline    command implementations behind the ``geospin`` CLI
"""

from .constants import CONSTANTS, PhysicalConstants
from .errors import (
    AlignmentError,
    ChecksumError,
    ConfigError,
    DomainError,
    FormatError,
    GeospinError,
    ParseError,
    SingularityError,
    ValidationError,
)
from .geomag import GaussCoefficientSet, GeoPosition, evaluate_field, load_coefficients, load_wmm2020
from .earth import (
    RadialProfile,
    SpinSourceGrid,
    build_grid,
    default_profile,
    load_profile,
    polarized_density,
    total_polarized_spins,
)
from .orbit import OrbitStateSeries, TwoLineElement, parse_tle, propagate_circular, relative_velocity
from .field import (
    FieldSeries,
    InteractionKernel,
    KernelInput,
    integrate_field,
    kernel_halo,
    kernel_vs,
    project_normal,
)
from .comag import (
    XENON_PAIR,
    NoiseBudget,
    PrecessionRecord,
    SensorConfig,
    SpeciesParams,
    extract_pseudofield,
    forward_model,
    noise_budget,
    rotation_equivalent_field,
)
from .analysis import (
    allan_deviation,
    amplitude_spectrum,
    campaign_sensitivity,
    exclusion_curve,
    lockin_amplitude,
)
from .config import validate_config

__version__ = "0.1.0"
