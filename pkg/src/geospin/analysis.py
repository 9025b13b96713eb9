"""
Spectral analysis, Allan deviation, lock-in amplitudes and exclusion curves.
"""

from dataclasses import dataclass, field
import csv
import math

import numpy as np
from scipy.signal import find_peaks

from .constants import CONSTANTS, SECONDS_PER_DAY
from .errors import ValidationError
from .field import integrate_field_ranges, project_normal

# 1 / sidereal day, the Earth-rotation split of the orbital line
EXPECTED_SPLIT_HZ = 1.0 / CONSTANTS.sidereal_day


def _uniform_dt(t, rtol=1e-9):
    t = np.asarray(t, dtype=float)
    if t.size < 2:
        raise ValidationError("need at least two samples")
    d = np.diff(t)
    dt = float(d[0])
    if not dt > 0 or np.max(np.abs(d - dt)) > rtol * max(abs(dt), 1.0) * 10:
        raise ValidationError("series is not uniformly sampled")
    return dt


@dataclass(frozen=True)
class SpectrumResult:
    """Single-sided amplitude spectrum.

    ``amplitude[k]`` is the amplitude of a sinusoid at ``frequency[k]`` (the
    DC bin holds the mean). ``peaks`` is sorted by decreasing amplitude.
    """

    frequency: np.ndarray
    amplitude: np.ndarray
    peaks: list
    main_line: float
    split: float
    split_resolved: bool
    window: str = "none"
    n_samples: int = 0
    meta: dict = field(default_factory=dict)

    def power(self):
        """Per-bin power; sums to the series variance (rectangular window)."""
        p = 0.5 * self.amplitude**2
        p[0] = 0.0
        if self.n_samples % 2 == 0:
            p[-1] = self.amplitude[-1] ** 2
        return p

    def summary(self):
        return {
            "df1_Hz": self.main_line,
            "df2_Hz": self.split if self.split_resolved else None,
            "split_resolved": self.split_resolved,
            "window": self.window,
            "peaks": [{"frequency_Hz": f, "amplitude": a} for f, a in self.peaks],
            **self.meta,
        }

    def write_csv(self, stream):
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["frequency_Hz", "amplitude"])
        for f, a in zip(self.frequency, self.amplitude):
            w.writerow([repr(float(f)), repr(float(a))])


def amplitude_spectrum(t, series, window="none", prominence=0.05,
                       min_separation=0.5 * EXPECTED_SPLIT_HZ, max_peaks=20,
                       split_search=2.0 * EXPECTED_SPLIT_HZ,
                       expected_split=EXPECTED_SPLIT_HZ):
    """Amplitude spectrum with peak detection.

    Parameters
    ----------
    t, series : arrays
        Uniformly sampled scalar series.
    window : {"none", "hann"}
        Hann amplitudes are corrected by the window's coherent gain.
    prominence : float
        Minimum peak prominence as a fraction of the largest non-DC amplitude.
    min_separation : float
        Minimum distance between reported peaks (Hz).
    split_search : float
        The split partner of the main line is the nearest detected peak
        within this distance of it (Hz).
    expected_split : float
        A record shorter than ``2 / expected_split`` cannot resolve the
        split, which is then reported as unresolved.
    """
    dt = _uniform_dt(t)
    x = np.asarray(series, dtype=float)
    n = x.size
    if window == "none":
        w = np.ones(n)
    elif window == "hann":
        w = np.hanning(n)
    else:
        raise ValidationError(f"unknown window {window!r}")
    spec = np.fft.rfft(x * w)
    gain = np.sum(w)
    amp = 2.0 * np.abs(spec) / gain
    amp[0] *= 0.5
    if n % 2 == 0:
        amp[-1] *= 0.5
    freq = np.fft.rfftfreq(n, dt)
    df = freq[1] - freq[0]

    ac = amp.copy()
    ac[0] = 0.0
    top = float(np.max(ac)) if ac.size > 1 else 0.0
    peaks = []
    if top > 0:
        idx, _ = find_peaks(ac, prominence=prominence * top,
                            distance=max(1, int(round(min_separation / df))))
        idx = sorted(idx, key=lambda i: (-ac[i], i))[:max_peaks]
        peaks = [(float(freq[i]), float(amp[i])) for i in idx]

    main = peaks[0][0] if peaks else float("nan")
    split = float("nan")
    resolved = False
    duration = dt * n
    if len(peaks) > 1 and duration >= 2.0 / expected_split:
        others = [f for f, _ in peaks[1:] if 0 < abs(f - main) <= split_search]
        if others:
            partner = min(others, key=lambda f: (abs(f - main), f))
            split = abs(partner - main)
            resolved = True
    return SpectrumResult(freq, amp, peaks, main, split, resolved, window, n,
                          meta={"dt_s": dt, "duration_s": duration})


@dataclass(frozen=True)
class AllanCurve:
    tau: np.ndarray
    adev: np.ndarray
    n_terms: np.ndarray
    snapped: bool = False

    def write_csv(self, stream):
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["tau_s", "adev", "n_terms"])
        for row in zip(self.tau, self.adev, self.n_terms):
            w.writerow([repr(float(row[0])), repr(float(row[1])), int(row[2])])


def allan_deviation(t, series, taus):
    """Overlapping Allan deviation of a uniformly sampled series.

    The series is treated as rate-like data (the quantity being averaged).
    ``taus`` that are not multiples of the sample step are snapped down and
    ``snapped`` is set on the result.
    """
    dt = _uniform_dt(t)
    y = np.asarray(series, dtype=float)
    n = y.size
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    ms = np.floor(taus / dt + 1e-9).astype(int)
    snapped = bool(np.any(np.abs(ms * dt - taus) > 1e-9 * taus))
    if np.any(ms < 1):
        raise ValidationError(f"tau below the sample step {dt}")
    if 2 * ms.max() > n:
        raise ValidationError(
            f"series of {n} samples too short for tau = {ms.max() * dt} s (need >= 2 clusters)"
        )
    ms = np.unique(ms)
    # phase-like integral; x[k] = sum of the first k samples
    x = np.concatenate([[0.0], np.cumsum(y - y.mean())])
    adev = np.empty(ms.size)
    nterms = np.empty(ms.size, dtype=int)
    for k, m in enumerate(ms):
        d2 = x[2 * m:] - 2.0 * x[m:-m] + x[:-2 * m]
        nterms[k] = d2.size
        adev[k] = math.sqrt(float(np.sum(d2 * d2)) / (2.0 * m * m * d2.size))
    return AllanCurve(ms * dt, adev, nterms, snapped)


def allan_deviation_blocks(series, m):
    """Non-overlapping two-sample deviation at averaging factor ``m``."""
    y = np.asarray(series, dtype=float)
    nb = y.size // m
    means = y[: nb * m].reshape(nb, m).mean(axis=1)
    d = np.diff(means)
    return math.sqrt(0.5 * float(np.mean(d * d)))


def lockin_amplitude(series, template):
    """Least-squares amplitude of ``template`` in ``series``."""
    amp, _ = lockin_fit(series, template)
    return amp


def lockin_fit(series, template):
    """Lock-in amplitude and its standard error from the fit residual."""
    s = np.asarray(series, dtype=float)
    tp = np.asarray(template, dtype=float)
    if s.shape != tp.shape:
        raise ValidationError("series and template lengths differ")
    power = float(np.dot(tp, tp))
    if power == 0:
        raise ValidationError("template has zero power")
    amp = float(np.dot(s, tp)) / power
    resid = s - amp * tp
    dof = max(s.size - 1, 1)
    stderr = math.sqrt(float(np.dot(resid, resid)) / dof / power)
    return amp, stderr


def sinusoid_amplitude(t, series, frequency):
    """Amplitude of the best-fit ``a cos + b sin`` at ``frequency`` (plus offset)."""
    t = np.asarray(t, dtype=float)
    ph = 2.0 * math.pi * frequency * (t - t[0])
    design = np.stack([np.ones_like(t), np.cos(ph), np.sin(ph)], axis=1)
    coef, *_ = np.linalg.lstsq(design, np.asarray(series, dtype=float), rcond=None)
    return math.hypot(coef[1], coef[2])


def campaign_sensitivity(shot_sensitivity, shot_time, campaign_days):
    """Averaged sensitivity over a campaign of independent white-noise shots."""
    if shot_sensitivity <= 0 or shot_time <= 0 or campaign_days <= 0:
        raise ValidationError("campaign inputs must be positive")
    shots = campaign_days * SECONDS_PER_DAY / shot_time
    return shot_sensitivity / math.sqrt(shots)


@dataclass(frozen=True)
class ExclusionCurve:
    ranges: np.ndarray
    f_limit: np.ndarray
    amplitude: np.ndarray  # lock-in amplitude at unit coupling, T
    threshold: float
    unbounded: np.ndarray
    meta: dict = field(default_factory=dict)

    def write_csv(self, stream):
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["lambda_m", "f_limit", "amplitude_T_at_f1"])
        for row in zip(self.ranges, self.f_limit, self.amplitude):
            w.writerow([repr(float(v)) for v in row])


def exclusion_curve(grid, orbit, kernel, ranges, detection_threshold, frequency=None):
    """Coupling upper limits versus force range.

    For each range the field is integrated at unit coupling, the orbit-normal
    projection is fitted with a sinusoid at the orbital frequency, and the
    limit is ``threshold / amplitude`` (the field is linear in the coupling).
    """
    if not detection_threshold > 0:
        raise ValidationError("detection threshold must be positive")
    ranges = np.asarray(ranges, dtype=float)
    if frequency is None:
        frequency = orbit.meta.get("angular_rate", 0.0) / (2.0 * math.pi)
    series = integrate_field_ranges(grid, orbit, kernel.with_coupling(1.0), list(ranges))
    amps = np.array([sinusoid_amplitude(orbit.t, project_normal(s, orbit), frequency)
                     for s in series])
    unbounded = amps == 0
    with np.errstate(divide="ignore"):
        limits = np.where(unbounded, np.inf, detection_threshold / np.where(unbounded, 1.0, amps))
    return ExclusionCurve(ranges, limits, amps, float(detection_threshold), unbounded,
                          meta={"kernel": kernel.kind, "frequency_Hz": frequency,
                                "window_s": float(orbit.t[-1] - orbit.t[0])})
