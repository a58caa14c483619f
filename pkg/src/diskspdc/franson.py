"""Unbalanced Michelson interferometers on pair streams.

Each photon of a pair enters its own interferometer with a short and a long
arm separated by arm_delay; both interferometers share the phase setting.
Routing is sampled per photon, which reproduces the three-peak coincidence
structure (short-short and long-long overlap in the central peak, the
cross terms sit at +-arm_delay).  The phase-dependent fringes on the
post-selected central peak are evaluated at expectation level: the
post-selected state (|SS> + e^{2 i xi} |LL>)/sqrt(2) interferes with the
summed phase of the two photons, so quantum fringes run as cos(2 xi) while
a classical field through the same interferometer fringes as cos(xi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .events import EventStream, _sorted_stream


class FitError(RuntimeError):
    """Fringe fit could not be performed."""


@dataclass(frozen=True)
class UmiConfig:
    """Interferometer settings shared by the signal and idler arms."""

    arm_delay_ns: float = 1.6
    phase_xi_rad: float = 0.0
    arm_transmissions: tuple[float, float] = (0.5, 0.5)
    rad_per_kelvin: float = 1.0
    postselect_window_ps: int = 800

    def __post_init__(self) -> None:
        if self.arm_delay_ns < 0:
            raise ValueError("arm_delay_ns must be >= 0")
        t_s, t_l = self.arm_transmissions
        if not (0 <= t_s <= 1 and 0 <= t_l <= 1):
            raise ValueError("arm transmissions must lie in [0, 1]")
        if t_s + t_l <= 0:
            raise ValueError("at least one arm must transmit")
        if self.postselect_window_ps <= 0:
            raise ValueError("postselect_window_ps must be positive")


@dataclass(frozen=True)
class FransonResult:
    """Least-squares fringe fit a + b cos(harmonic * xi + phi0)."""

    visibility: float
    visibility_sigma: float
    offset: float
    amplitude: float
    phase: float
    harmonic: int
    residual_rms: float


def apply_umi(stream: EventStream, config: UmiConfig,
              seed: int) -> EventStream:
    """Route every event through the interferometer.

    Short keeps the timestamp, long adds the arm delay; the routing
    probability of the short arm is t_S / (t_S + t_L).  The returned stream
    carries route_tags (0 short, 1 long) for diagnostics; tags are not
    serialized.  The duration grows by the arm delay so late long-arm events
    stay inside the acquisition window.
    """
    delay_ps = int(round(config.arm_delay_ns * 1e3))
    t_s, t_l = config.arm_transmissions
    p_short = t_s / (t_s + t_l)
    rng = np.random.Generator(np.random.PCG64(seed))
    long_routed = rng.random(len(stream)) >= p_short
    times = stream.timestamps_ps + np.where(long_routed, delay_ps, 0)
    tags = long_routed.astype(np.uint8)
    channels, times, tags = _sorted_stream(stream.channels, times, tags)
    return EventStream(channels=channels, timestamps_ps=times,
                       duration_ps=stream.duration_ps + delay_ps,
                       seed=stream.seed,
                       n_pairs_generated=stream.n_pairs_generated,
                       route_tags=tags)


def quantum_fringe(xi_rad, visibility: float = 1.0, amplitude: float = 1.0,
                   background: float = 0.0,
                   rng: np.random.Generator | None = None):
    """Post-selected central-peak counts amplitude*(1+V cos 2xi)/2 + bg.

    With rng given, returns Poisson draws around the expectation.
    """
    return _fringe(xi_rad, visibility, amplitude, background, 2, rng)


def classical_fringe(xi_rad, visibility: float = 1.0, amplitude: float = 1.0,
                     background: float = 0.0,
                     rng: np.random.Generator | None = None):
    """Single-photon interference through the same device, period 2 pi."""
    return _fringe(xi_rad, visibility, amplitude, background, 1, rng)


def _fringe(xi_rad, visibility, amplitude, background, harmonic, rng):
    if not 0 <= visibility <= 1:
        raise ValueError("visibility must lie in [0, 1]")
    if amplitude < 0 or background < 0:
        raise ValueError("amplitude and background must be >= 0")
    xi = np.asarray(xi_rad, dtype=float)
    expectation = amplitude * (1.0 + visibility * np.cos(harmonic * xi)) / 2.0 \
        + background
    if rng is not None:
        expectation = rng.poisson(expectation).astype(float)
    return float(expectation) if np.isscalar(xi_rad) else expectation


def extract_visibility(xi_rad, counts, sigma=None,
                       harmonic: int = 2) -> FransonResult:
    """Fit counts(xi) = a + b cos(harmonic*xi + phi0), visibility = b/a.

    The model is linear in (a, b cos phi0, -b sin phi0), so the fit is an
    exact weighted least-squares solve; the visibility uncertainty comes
    from the parameter covariance.
    """
    xi = np.asarray(xi_rad, dtype=float)
    y = np.asarray(counts, dtype=float)
    if xi.shape != y.shape or xi.ndim != 1:
        raise FitError("xi and counts must be 1-D arrays of equal length")
    if len(xi) < 4:
        raise FitError(f"need at least 4 points, got {len(xi)}")
    if sigma is None:
        w = np.ones_like(y)
    else:
        w = 1.0 / np.square(np.asarray(sigma, dtype=float))
    design = np.column_stack([np.ones_like(xi), np.cos(harmonic * xi),
                              np.sin(harmonic * xi)])
    wd = design * w[:, None]
    normal = design.T @ wd
    rhs = wd.T @ y
    cond = np.linalg.cond(normal)
    if not np.isfinite(cond) or cond > 1e12:
        # e.g. every xi sits on a node lattice of the requested harmonic
        raise FitError(f"degenerate fringe design matrix "
                       f"(condition number {cond:.3g})")
    try:
        params = np.linalg.solve(normal, rhs)
        cov = np.linalg.inv(normal)
    except np.linalg.LinAlgError as err:
        raise FitError(f"degenerate fringe design matrix: {err}") from err
    a, p, q = params
    residuals = y - design @ params
    dof = max(len(xi) - 3, 1)
    chi2 = float(np.sum(w * residuals ** 2))
    if sigma is None:
        cov = cov * chi2 / dof  # scale by residual variance
    b = math.hypot(p, q)
    phi0 = math.atan2(-q, p)
    if a <= 0:
        raise FitError(f"non-positive fitted offset a={a:g}; "
                       f"residual rms {np.sqrt(chi2 / dof):g}")
    vis = b / a
    if b > 0:
        jac = np.array([-vis / a, p / (a * b), q / (a * b)])
    else:
        jac = np.array([0.0, 1.0 / a, 1.0 / a])
    vis_sigma = float(np.sqrt(jac @ cov @ jac))
    return FransonResult(visibility=float(vis), visibility_sigma=vis_sigma,
                         offset=float(a), amplitude=float(b),
                         phase=float(phi0), harmonic=harmonic,
                         residual_rms=float(np.sqrt(np.mean(residuals ** 2))))


def peak_areas(stream: EventStream, config: UmiConfig,
               ch_signal: int = 0, ch_idler: int = 1,
               peak_delay_ps: int | None = None) -> tuple[int, int, int]:
    """Coincidence counts in the three windows at peak - D, peak, peak + D."""
    from .tcspc import calibrate_peak_delay, window_counts

    delay_ps = int(round(config.arm_delay_ns * 1e3))
    times_s = stream.channel_times(ch_signal)
    times_i = stream.channel_times(ch_idler)
    if peak_delay_ps is None:
        span = max(8 * delay_ps, 8000)
        peak_delay_ps = calibrate_peak_delay(stream, ch_signal, ch_idler,
                                             span_ps=span)
    window = config.postselect_window_ps
    return tuple(
        int(window_counts(times_s, times_i, peak_delay_ps + k * delay_ps,
                          window).sum())
        for k in (-1, 0, +1))


def central_peak_is_same_path(stream: EventStream, config: UmiConfig,
                              ch_signal: int = 0, ch_idler: int = 1,
                              peak_delay_ps: int = 0) -> bool:
    """Check that central-peak coincidences pair same-path photons only.

    Requires route_tags on the stream (as produced by apply_umi); used to
    validate that post-selecting the central peak keeps exactly the
    short-short and long-long amplitudes.
    """
    from .tcspc import window_counts

    if stream.route_tags is None:
        raise ValueError("stream carries no route tags")
    sel_s = stream.channels == ch_signal
    sel_i = stream.channels == ch_idler
    times_s = stream.timestamps_ps[sel_s]
    times_i = stream.timestamps_ps[sel_i]
    tags_s = stream.route_tags[sel_s]
    tags_i = stream.route_tags[sel_i]
    window = config.postselect_window_ps
    lo = np.searchsorted(times_i, times_s + peak_delay_ps - window / 2,
                         side="left")
    hi = np.searchsorted(times_i, times_s + peak_delay_ps + window / 2,
                         side="right")
    for k in range(len(times_s)):
        if hi[k] > lo[k]:
            if np.any(tags_i[lo[k]:hi[k]] != tags_s[k]):
                return False
    return True
