"""Empirical mode decomposition by envelope-mean sifting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .ingest import TimeSeries

SD_EPS = 1e-12
BOUNDARIES = ("mirror", "clamp_endpoints")
# a residue spanning no more than this fraction of the input range is constant
CONSTANT_RTOL = 1e-10
ROUNDING_FACTOR = 64


@dataclass(frozen=True)
class SiftConfig:
    sd_max: float = 0.3
    max_sift_iters: int = 150
    max_imfs: int = 20
    spline_boundary: str = "mirror"

    def __post_init__(self):
        if not 0 < self.sd_max <= 1:
            raise ValueError(f"sd_max must lie in (0, 1], got {self.sd_max}")
        if self.max_sift_iters < 1:
            raise ValueError("max_sift_iters must be >= 1")
        if self.max_imfs < 1:
            raise ValueError("max_imfs must be >= 1")
        if self.spline_boundary not in BOUNDARIES:
            raise ValueError(f"unsupported spline boundary {self.spline_boundary!r}")


@dataclass(frozen=True)
class Imf:
    samples: np.ndarray
    sift_count: int
    valid: bool


@dataclass(frozen=True)
class Decomposition:
    imfs: tuple
    residue: np.ndarray
    source_length: int

    def __len__(self):
        return len(self.imfs)

    def as_array(self) -> np.ndarray:
        """IMFs as rows, shape ``(n_imfs, source_length)``."""
        if not self.imfs:
            return np.empty((0, self.source_length))
        return np.vstack([imf.samples for imf in self.imfs])

    def reconstruct(self) -> np.ndarray:
        return self.as_array().sum(axis=0) + self.residue


def _extrema_indices(x: np.ndarray):
    # Collapse runs of equal values so a plateau is one point at its first index.
    if x.size < 3:
        empty = np.empty(0, dtype=np.intp)
        return empty, empty
    starts = np.concatenate(([0], np.flatnonzero(np.diff(x)) + 1))
    if starts.size < 3:
        empty = np.empty(0, dtype=np.intp)
        return empty, empty
    dv = np.diff(x[starts])
    inner = starts[1:-1]
    maxima = inner[(dv[:-1] > 0) & (dv[1:] < 0)]
    minima = inner[(dv[:-1] < 0) & (dv[1:] > 0)]
    return maxima, minima


def find_extrema(samples: Sequence[float]):
    """Strict interior local maxima and minima as lists of ``(index, value)``.

    A plateau bordered on both sides by lower (higher) values is reported
    once, at its first index.
    """
    x = np.asarray(samples, dtype=float)
    imax, imin = _extrema_indices(x)
    return ([(int(i), float(x[i])) for i in imax],
            [(int(i), float(x[i])) for i in imin])


def spline_envelope(knots, length: int) -> np.ndarray:
    """Natural cubic spline through ``(index, value)`` knots, sampled at
    ``0..length-1``. Outside the knot range the end segments are extended."""
    knots = np.asarray(knots, dtype=float)
    if knots.ndim != 2 or knots.shape[0] < 2:
        raise ValueError("spline_envelope needs at least 2 knots")
    idx, val = knots[:, 0], knots[:, 1]
    if np.any(np.diff(idx) <= 0):
        raise ValueError("knot indices must be strictly increasing")
    return _envelope(idx, val, length)


def _envelope(idx, val, length):
    if idx.size == 2:
        # the natural spline through 2 points is the chord
        slope = (val[1] - val[0]) / (idx[1] - idx[0])
        return val[0] + slope * (np.arange(length) - idx[0])
    spline = CubicSpline(idx, val, bc_type="natural", extrapolate=True)
    return spline(np.arange(length, dtype=float))


def _clamped_knots(h, inner, upper):
    last = h.size - 1
    idx = np.concatenate(([0], inner, [last]))
    return idx, h[idx]


def _mirrored_knots(h, inner, upper, depth=2):
    # Reflect the outermost extrema about each end. The end sample itself is
    # kept as a knot when it lies outside the envelope it would otherwise get.
    last = h.size - 1
    k = min(depth, inner.size)
    head, tail = inner[:k][::-1], inner[-k:][::-1]
    idx = [-head, inner, 2 * last - tail]
    val = [h[head], h[inner], h[tail]]
    beyond = np.greater if upper else np.less
    if beyond(h[0], h[inner[0]]):
        idx.insert(1, [0])
        val.insert(1, [h[0]])
    if beyond(h[last], h[inner[-1]]):
        idx.insert(len(idx) - 1, [last])
        val.insert(len(val) - 1, [h[last]])
    return np.concatenate(idx).astype(float), np.concatenate(val)


_KNOTS = {"clamp_endpoints": _clamped_knots, "mirror": _mirrored_knots}


def _envelope_mean(h: np.ndarray, boundary: str = "mirror"):
    imax, imin = _extrema_indices(h)
    if imax.size < 1 or imin.size < 1:
        return None, imax.size + imin.size
    knots = _KNOTS[boundary]
    upper = _envelope(*knots(h, imax, True), h.size)
    lower = _envelope(*knots(h, imin, False), h.size)
    return 0.5 * (upper + lower), imax.size + imin.size


def sift_once(h, boundary: str = "mirror"):
    """One sifting step: subtract the mean of the upper and lower envelopes.

    ``boundary`` picks the extra knots beyond the interior extrema:
    ``"mirror"`` reflects the outermost extrema about each end, and
    ``"clamp_endpoints"`` appends both end samples to the maxima and the
    minima knots. Returns ``(h_next, extrema_count)``, or ``None`` when ``h``
    lacks an interior maximum or minimum, which ends sifting.
    """
    if boundary not in _KNOTS:
        raise ValueError(f"unknown boundary {boundary!r}")
    h = np.asarray(h, dtype=float)
    mean, count = _envelope_mean(h, boundary)
    if mean is None:
        return None
    return h - mean, count


def sd_value(h_prev, h_curr) -> float:
    h_prev = np.asarray(h_prev, dtype=float)
    h_curr = np.asarray(h_curr, dtype=float)
    if h_prev.shape != h_curr.shape:
        raise ValueError(f"length mismatch: {h_prev.shape} vs {h_curr.shape}")
    return float(np.sum((h_prev - h_curr) ** 2 / (h_prev ** 2 + SD_EPS)))


def sd_stop(h_prev, h_curr, sd_max: float) -> bool:
    """Sum-of-deviations stopping test, ``SD <= sd_max``."""
    return sd_value(h_prev, h_curr) <= sd_max


def count_zero_crossings(x: np.ndarray) -> int:
    # exact zeros are dropped, so +,0,- is one crossing and +,0,+ is none
    s = np.sign(x)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def is_valid_imf(samples) -> bool:
    """Zero-crossing / extrema count condition with at least two extrema."""
    x = np.asarray(samples, dtype=float)
    if x.size < 3:
        return False
    imax, imin = _extrema_indices(x)
    n_ext = imax.size + imin.size
    return n_ext >= 2 and abs(count_zero_crossings(x) - n_ext) <= 1


def _n_extrema(x: np.ndarray) -> int:
    imax, imin = _extrema_indices(x)
    return imax.size + imin.size


def _sift(residue: np.ndarray, config: SiftConfig) -> Imf:
    # Stop on SD <= sd_max, else on the IMF count test, else at the cap.
    h = residue
    iters = 0
    while iters < config.max_sift_iters:
        mean, _ = _envelope_mean(h, config.spline_boundary)
        if mean is None:
            break
        h_next = h - mean
        iters += 1
        converged = sd_value(h, h_next) <= config.sd_max
        h = h_next
        if converged or is_valid_imf(h):
            break
    h = np.array(h)
    h.setflags(write=False)
    return Imf(h, iters, is_valid_imf(h))


def decompose(signal, config: Optional[SiftConfig] = None) -> Decomposition:
    """Split ``signal`` into IMFs plus a residue that sum back to it.

    Extraction stops when the residue has fewer than 2 interior extrema
    (monotonic or single-extremum), when it is constant to within
    ``CONSTANT_RTOL`` of the input's range (or at rounding level relative
    to its magnitude), or when ``max_imfs`` is reached.
    """
    config = config or SiftConfig()
    x = signal.samples if isinstance(signal, TimeSeries) else np.asarray(signal, dtype=float)
    residue = np.array(x, dtype=float)
    # rounding noise on a flat input (e.g. after smoothing) is not a mode
    floor = max(CONSTANT_RTOL * float(np.ptp(x)),
                ROUNDING_FACTOR * np.finfo(float).eps * float(np.max(np.abs(x), initial=0.0)))
    imfs = []
    while (len(imfs) < config.max_imfs and np.ptp(residue) > floor
           and _n_extrema(residue) >= 2):
        imf = _sift(residue, config)
        imfs.append(imf)
        residue = residue - imf.samples
    residue.setflags(write=False)
    return Decomposition(tuple(imfs), residue, x.size)
