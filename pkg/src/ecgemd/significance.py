"""Selection of significant IMFs by normalized correlation with the source."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_ETA = 25.0


@dataclass(frozen=True)
class SignificanceReport:
    correlations: tuple
    lam: float
    eta: float
    significant: tuple

    def to_dict(self) -> dict:
        return {
            "correlations": list(self.correlations),
            "lambda": self.lam,
            "eta": self.eta,
            "significant": list(self.significant),
        }


def imf_correlation(x, c) -> float:
    """``sum(x*c) / sqrt(sum(x**2) * sum(c**2))`` (no mean removal)."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    if x.shape != c.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {c.shape}")
    ex, ec = np.dot(x, x), np.dot(c, c)
    if ex == 0 or ec == 0:
        raise ValueError("zero-energy input")
    r = np.dot(x, c) / np.sqrt(ex * ec)
    return float(min(1.0, max(-1.0, r)))


def threshold_flags(correlations, eta: float = DEFAULT_ETA) -> SignificanceReport:
    if eta <= 1:
        raise ValueError(f"eta must exceed 1, got {eta}")
    corr = [float(v) for v in correlations]
    if not corr:
        raise ValueError("no IMFs to assess")
    lam = max(corr) / eta
    # signed comparison: anti-correlated IMFs are never significant
    return SignificanceReport(tuple(corr), lam, float(eta), tuple(v >= lam for v in corr))


def select_significant(x, imfs, eta: float = DEFAULT_ETA) -> SignificanceReport:
    """Flag IMF ``n`` significant when its correlation with ``x`` is at least
    ``max(correlations) / eta``."""
    imfs = list(imfs)
    if not imfs:
        raise ValueError("no IMFs to assess")
    if eta <= 1:
        raise ValueError(f"eta must exceed 1, got {eta}")
    return threshold_flags([imf_correlation(x, c) for c in imfs], eta)
