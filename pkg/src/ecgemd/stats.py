"""Cohort statistics: Welch t-test, Pearson r, confidence ellipses,
box-plot summaries and age/gender subgroups."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

AGE_BINS = ((0, 30, "below_30"), (30, 50, "30_50"), (50, 70, "50_70"), (70, None, "above_70"))


class DegenerateDataError(ValueError):
    pass


@dataclass(frozen=True)
class GroupSummary:
    count: int
    mean: float
    median: float
    min: float
    max: float
    q1: float
    q3: float
    std: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EllipseParams:
    center: tuple
    semi_major: float
    semi_minor: float
    angle_rad: float
    confidence: float
    degenerate: bool = False

    @property
    def slope(self) -> float:
        return math.tan(self.angle_rad)

    def polyline(self, points: int = 128) -> np.ndarray:
        """``points`` (x, y) vertices around the ellipse, closed at the end."""
        t = np.linspace(0.0, 2 * np.pi, points)
        ca, sa = math.cos(self.angle_rad), math.sin(self.angle_rad)
        u = self.semi_major * np.cos(t)
        v = self.semi_minor * np.sin(t)
        return np.column_stack((self.center[0] + u * ca - v * sa,
                                self.center[1] + u * sa + v * ca))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["center"] = list(self.center)
        return d


# Regularized incomplete beta by the modified Lentz continued fraction.
_TINY = 1e-300


def _beta_cf(a: float, b: float, x: float, eps: float = 1e-15, max_iter: int = 10000) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = _TINY if abs(d) < _TINY else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    # use the continued fraction where it converges fast, symmetry otherwise
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _beta_cf(b, a, 1.0 - x) / b


def student_t_two_tailed(t: float, df: float) -> float:
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if not math.isfinite(t):
        return 0.0
    return betainc_reg(0.5 * df, 0.5, df / (df + t * t))


def welch_t_test(a, b):
    """Two-sample t-test with unequal variances.

    Returns ``(t, df, p)`` where ``df`` follows Welch-Satterthwaite and
    ``p`` is two-tailed.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise DegenerateDataError("each group needs at least 2 values")
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    if va == 0 and vb == 0:
        raise DegenerateDataError("both groups have zero variance")
    t = (a.mean() - b.mean()) / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    return float(t), float(df), student_t_two_tailed(float(t), float(df))


def pearson_r(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need two equal-length sequences of at least 2 values")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt(np.dot(dx, dx)), np.sqrt(np.dot(dy, dy))
    if sx == 0 or sy == 0:
        raise DegenerateDataError("zero standard deviation")
    # the (N - 1) factors of the covariance and both deviations cancel
    r = np.dot(dx, dy) / (sx * sy)
    return float(min(1.0, max(-1.0, r)))


def chi2_2df_quantile(confidence: float) -> float:
    # chi-square with 2 degrees of freedom is exponential with mean 2
    return -2.0 * math.log1p(-confidence)


def confidence_ellipse(points, confidence: float = 0.95) -> EllipseParams:
    """Covariance ellipse of a 2-D scatter at ``confidence``.

    Collinear points give ``degenerate=True`` and ``semi_minor == 0``
    instead of raising.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("need at least 3 (x, y) points")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    center = pts.mean(axis=0)
    cov = np.cov(pts, rowvar=False, ddof=1)
    evals, evecs = np.linalg.eigh(cov)
    lo, hi = evals
    if hi <= 0:
        raise DegenerateDataError("all points coincide")
    major = evecs[:, 1]
    angle = math.atan2(major[1], major[0])
    # fold into (-pi/2, pi/2]: an axis has no direction
    if angle <= -math.pi / 2:
        angle += math.pi
    elif angle > math.pi / 2:
        angle -= math.pi
    q = chi2_2df_quantile(confidence)
    degenerate = lo <= hi * 1e-12
    minor = 0.0 if degenerate else math.sqrt(lo * q)
    return EllipseParams((float(center[0]), float(center[1])), math.sqrt(hi * q), minor,
                         angle, confidence, bool(degenerate))


def five_number(values) -> GroupSummary:
    """Box-plot summary; quartiles interpolate linearly between order
    statistics (the numpy/R type 7 rule). ``std`` uses ``n - 1`` and is 0
    for a single value."""
    v = np.asarray(values, dtype=float)
    if v.size < 1:
        raise ValueError("need at least one value")
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return GroupSummary(int(v.size), float(v.mean()), float(med), float(v.min()),
                        float(v.max()), float(q1), float(q3), std)


def age_bin(age: int) -> str:
    for lo, hi, label in AGE_BINS:
        if age >= lo and (hi is None or age < hi):
            return label
    raise ValueError(f"age out of range: {age}")


def subgroup(records, scheme: str) -> dict:
    """Summaries of ``h`` per age bin or gender from ``(meta, h)`` pairs.

    Age bins are half-open, so an age of exactly 50 lands in ``50_70``.
    Records missing the grouping attribute are left out; empty groups are
    absent from the result.
    """
    if scheme not in ("age_bins", "gender"):
        raise ValueError(f"unknown scheme {scheme!r}")
    groups: dict = {}
    for meta, h in records:
        if scheme == "age_bins":
            if meta.age is None:
                continue
            key = age_bin(meta.age)
        else:
            if meta.gender is None:
                continue
            key = meta.gender
        groups.setdefault(key, []).append(h)
    order = [b[2] for b in AGE_BINS] if scheme == "age_bins" else ["male", "female"]
    return {k: five_number(groups[k]) for k in order if k in groups}
