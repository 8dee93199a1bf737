"""Piecewise-linear activation tables exported with every bundle.

Segments interpolate the function at uniform segment endpoints, which keeps
sigmoid(0)=0.5, tanh(0)=0 and exp(0)=1 exact (tanh's odd symmetry holds
segment by segment) and bounds the error by max|f''| * width^2 / 8.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANGES = {"sigmoid": (-8.0, 8.0), "tanh": (-8.0, 8.0), "exp": (-16.0, 0.0)}


def _func(name):
    if name == "sigmoid":
        return lambda x: 1.0 / (1.0 + np.exp(-x))
    if name == "tanh":
        return np.tanh
    if name == "exp":
        return np.exp
    raise ValueError(f"no LUT function {name!r}")


@dataclass
class Lut:
    name: str
    lo: float
    hi: float
    segments: int
    k: np.ndarray
    b: np.ndarray
    max_error: float

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        seg = np.clip(((x - self.lo) / (self.hi - self.lo) * self.segments).astype(int),
                      0, self.segments - 1)
        return self.k[seg] * x + self.b[seg]


def build_lut(name: str, segments: int = 256,
              lo: float | None = None, hi: float | None = None) -> Lut:
    if segments < 2:
        raise ValueError("need at least 2 segments")
    f = _func(name)
    if lo is None or hi is None:
        lo, hi = RANGES[name]
    edges = np.linspace(lo, hi, segments + 1)
    fv = f(edges)
    k = (fv[1:] - fv[:-1]) / (edges[1:] - edges[:-1])
    b = fv[:-1] - k * edges[:-1]
    table = Lut(name, float(lo), float(hi), segments, k, b, 0.0)
    grid = np.linspace(lo, hi, 50 * segments)
    table.max_error = float(np.max(np.abs(table.eval(grid) - f(grid))))
    return table


def default_luts(segments: int = 256) -> dict[str, Lut]:
    return {name: build_lut(name, segments) for name in RANGES}
