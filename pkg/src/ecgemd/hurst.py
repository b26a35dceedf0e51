"""Rescaled-range (R/S) estimation of the Hurst exponent."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ConstantBlockError(ValueError):
    """The block has zero standard deviation, so R/S is undefined."""


class RsFitError(ValueError):
    """Too few usable sub-series lengths to fit a slope."""


@dataclass(frozen=True)
class RsConfig:
    n_min: int = 10
    n_max_fraction: float = 0.5
    grid_points: int = 20
    std: str = "population"

    def __post_init__(self):
        if self.n_min < 8:
            raise ValueError("n_min must be >= 8")
        if not 0 < self.n_max_fraction <= 0.5:
            raise ValueError("n_max_fraction must lie in (0, 0.5]")
        if self.grid_points < 4:
            raise ValueError("grid_points must be >= 4")
        if self.std not in ("population", "sample"):
            raise ValueError("std must be 'population' or 'sample'")

    @property
    def ddof(self) -> int:
        return 0 if self.std == "population" else 1

    def grid(self, length: int) -> np.ndarray:
        n_max = int(math.floor(length * self.n_max_fraction))
        if n_max <= self.n_min:
            raise RsFitError(
                f"series of length {length} too short for n_min={self.n_min}")
        grid = np.floor(np.geomspace(self.n_min, n_max, self.grid_points)).astype(int)
        return np.unique(grid)


@dataclass(frozen=True)
class RsCurve:
    points: tuple  # ((n, rs_mean), ...)
    hurst: float
    intercept: float
    r_squared: float

    @property
    def n(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def rs_mean(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=float)


def rescaled_range(z, ddof: int = 0) -> float:
    """R/S of one block: range of the mean-adjusted cumulative sum over the
    block's standard deviation."""
    z = np.asarray(z, dtype=float)
    if z.size < 2:
        raise ValueError("a block needs at least 2 samples")
    s = z.std(ddof=ddof)
    if s == 0:
        raise ConstantBlockError("constant block")
    y = np.cumsum(z - z.mean())
    return float((y.max() - y.min()) / s)


def _mean_rs(x: np.ndarray, n: int, ddof: int):
    d = x.size // n
    blocks = x[: d * n].reshape(d, n)
    s = blocks.std(axis=1, ddof=ddof)
    y = np.cumsum(blocks - blocks.mean(axis=1, keepdims=True), axis=1)
    r = y.max(axis=1) - y.min(axis=1)
    keep = s > 0
    if not keep.any():
        return None
    return float(np.mean(r[keep] / s[keep]))


def fit_loglog(n, rs, log=np.log):
    """OLS of ``log(rs)`` on ``log(n)``: returns (slope, intercept, r_squared)."""
    lx = log(np.asarray(n, dtype=float))
    ly = log(np.asarray(rs, dtype=float))
    xm, ym = lx.mean(), ly.mean()
    sxx = np.sum((lx - xm) ** 2)
    sxy = np.sum((lx - xm) * (ly - ym))
    slope = sxy / sxx
    intercept = ym - slope * xm
    ss_res = np.sum((ly - intercept - slope * lx) ** 2)
    ss_tot = np.sum((ly - ym) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def rs_curve(samples, config: RsConfig = RsConfig()) -> RsCurve:
    """Mean R/S over contiguous non-overlapping blocks for each sub-series
    length on a geometric grid, then a log-log least-squares slope.

    Remainder samples beyond the last full block are discarded and
    constant blocks are skipped. Natural logarithms are used.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 2 * config.n_min:
        raise RsFitError(f"need at least {2 * config.n_min} samples, got {x.size}")
    points = []
    for n in config.grid(x.size):
        rs = _mean_rs(x, int(n), config.ddof)
        if rs is not None and rs > 0:
            points.append((int(n), rs))
    if len(points) < 4:
        raise RsFitError(f"only {len(points)} usable sub-series lengths")
    n_arr = np.array([p[0] for p in points], dtype=float)
    rs_arr = np.array([p[1] for p in points])
    h, c, r2 = fit_loglog(n_arr, rs_arr)
    return RsCurve(tuple(points), h, c, r2)


def hurst_exponent(samples, config: RsConfig = RsConfig()) -> float:
    return rs_curve(samples, config).hurst


def interpret_h(h: float, delta: float = 0.01) -> str:
    if h < 0.5 - delta:
        return "anti_persistent"
    if h > 0.5 + delta:
        return "persistent"
    return "random_walk"
