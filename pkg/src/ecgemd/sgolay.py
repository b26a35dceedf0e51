"""Savitzky-Golay least-squares polynomial smoothing."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .ingest import TimeSeries


@dataclass(frozen=True)
class SgParams:
    order: int = 3
    frame: int = 13

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order must be non-negative")
        if self.frame < 3 or self.frame % 2 == 0:
            raise ValueError(f"frame must be an odd integer >= 3, got {self.frame}")
        if self.order >= self.frame:
            raise ValueError("order must be less than frame")

    @property
    def half(self) -> int:
        return self.frame // 2


# Frames of roughly 0.1 s: 360 Hz arrhythmia records, 128 Hz normal records.
DISEASE_SG = SgParams(order=3, frame=37)
NORMAL_SG = SgParams(order=3, frame=13)


@lru_cache(maxsize=64)
def _projection(order: int, frame: int) -> np.ndarray:
    # Row i maps window samples to the fitted polynomial's value at position i.
    # lru_cache is safe under threads; the cached array is read-only.
    n = frame // 2
    j = np.arange(-n, n + 1) / max(n, 1)
    vander = np.vander(j, order + 1, increasing=True)
    q, _ = np.linalg.qr(vander)
    hat = q @ q.T
    hat.setflags(write=False)
    return hat


def sg_coefficients(params: SgParams, eval_offset: int = 0) -> np.ndarray:
    """Weights ``w`` with ``sum(w * window)`` equal to the least-squares
    polynomial's value at ``eval_offset`` (window positions ``-n..n``)."""
    n = params.half
    if abs(eval_offset) > n:
        raise ValueError(f"eval_offset must lie in [-{n}, {n}]")
    return _projection(params.order, params.frame)[eval_offset + n].copy()


def sg_smooth(signal: TimeSeries, params: SgParams) -> TimeSeries:
    """Smooth ``signal``; edge samples are evaluated off-center on the first
    and last full windows, so no padding is involved."""
    x = signal.samples
    frame, n = params.frame, params.half
    if x.size < frame:
        raise ValueError(f"signal of length {x.size} is shorter than frame {frame}")
    hat = _projection(params.order, params.frame)
    out = np.empty_like(x)
    # correlate with the centre weights == dot product per window
    out[n:x.size - n] = np.correlate(x, hat[n], mode="valid")
    out[:n] = hat[:n] @ x[:frame]
    out[x.size - n:] = hat[n + 1:] @ x[-frame:]
    return TimeSeries(out, signal.sampling_hz)


def default_sg_params(cohort: str, sampling_hz: float) -> SgParams:
    """Smoothing setting for the cohort; unlabelled records get the shorter
    frame, which distorts least."""
    return DISEASE_SG if cohort == "disease" else NORMAL_SG
