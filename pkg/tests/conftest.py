import math
import os
from pathlib import Path

# allow several worker threads even on single-core runners so the
# thread-count invariance tests exercise real parallelism
os.environ.setdefault("NUMBA_NUM_THREADS", "4")

import numpy as np
import pytest

from geospin import earth, geomag, orbit

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

# Elements of the station orbit used throughout the tests
STATION = dict(inclination_deg=41.45, raan_deg=84.98, mean_motion=15.61)


@pytest.fixture(scope="session")
def wmm():
    return geomag.load_wmm2020()


@pytest.fixture(scope="session")
def profile():
    return earth.default_profile()


@pytest.fixture(scope="session")
def station_tle():
    return orbit.parse_tle(
        (ROOT / "src" / "geospin" / "data" / "css_2022-05-20.tle").read_text()
    )


@pytest.fixture(scope="session")
def coarse_grid(profile, wmm):
    return earth.build_grid(profile, wmm, (8, 16, 32))


@pytest.fixture(scope="session")
def short_orbit(station_tle):
    # a little over two orbits at 2-minute cadence
    return orbit.propagate_circular(station_tle, 3 * 5600.0, dt=120.0)


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), np.finfo(float).tiny))


def angle_between(a, b):
    # atan2 form keeps precision for nearly parallel vectors
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    return np.arctan2(cross, np.sum(a * b, axis=-1))


DEG = math.pi / 180.0


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, taken from the test reports."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py::test_c" not in getattr(rep, "nodeid", "") or rep.when != "call" \
                    and outcome != "error":
                continue
            props = dict(rep.user_properties)
            if "criterion" not in props:
                continue
            lines.append((props["criterion"], "PASS" if outcome == "passed" else "FAIL",
                          props.get("title", ""), props.get("detail", "")))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num, status, title, detail in sorted(lines):
        terminalreporter.write_line(f"[{status}] {num:2d}. {title}: {detail}")
