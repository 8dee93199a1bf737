"""Reference prediction-error distributions and KS rejection thresholds."""

from __future__ import annotations

import math

import numpy as np

SUPPORTED_ALPHAS = (0.15, 0.10, 0.05, 0.025)


def ks_coefficient(alpha: float) -> float:
    if alpha not in SUPPORTED_ALPHAS:
        raise ValueError(f"alpha={alpha} not in {SUPPORTED_ALPHAS}")
    return math.sqrt(-math.log(alpha / 2.0) / 2.0)


def scaled_threshold(alpha: float, n: int, m: int) -> float:
    """Threshold compared against n*D (rejection rule scaled by n)."""
    return ks_coefficient(alpha) * math.sqrt((n + m) * n / m)


def ped_boundaries(sample: np.ndarray) -> np.ndarray:
    """Sorted, strictly ascending histogram boundaries from one error
    sample; exact ties are separated by one float ulp."""
    b = np.sort(np.asarray(sample, dtype=np.float64))
    for j in range(1, len(b)):
        if b[j] <= b[j - 1]:
            b[j] = np.nextafter(b[j - 1], np.inf)
    return b
