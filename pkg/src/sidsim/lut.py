"""Piecewise-linear lookup tables for the nonlinear operation modes.

Each track's first execution stage looks up a slope k[i] and intercept b[i]
for its input and the later stages compute z[i] = k[i]*x[i] + b[i], so the
table is the only place a nonlinearity exists in the datapath.

Tables use S uniform segments over [lo, hi]; segment lines interpolate the
function at the segment endpoints (secant fit). Interpolation keeps the
anchors sigmoid(0)=0.5, tanh(0)=0 and exp(0)=1 exact even after Q16.16
quantization of k and b, and bounds the error by max|f''| * w^2 / 8, which
is 3.8e-4 < 2**-10 for tanh at the default S=256 over [-8, 8].

Out-of-range inputs clamp to the function's asymptote:
  sigmoid: 0 below -8, 1 above +8
  tanh:   -1 below -8, 1 above +8
  exp:     0 below -16, 1 above 0 (the compiler guarantees arguments <= 0;
           the clamp keeps the hardware behavior defined anyway)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fixedpoint as fx

DEFAULT_SEGMENTS = 256

_RANGES = {"sigmoid": (-8.0, 8.0), "tanh": (-8.0, 8.0), "exp": (-16.0, 0.0)}
_CLAMPS = {"sigmoid": (0.0, 1.0), "tanh": (-1.0, 1.0), "exp": (0.0, 1.0)}


def reference_function(func_id: str):
    if func_id == "sigmoid":
        return lambda x: 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))
    if func_id == "tanh":
        return np.tanh
    if func_id == "exp":
        return np.exp
    raise ValueError(f"unknown LUT function {func_id!r}")


@dataclass
class LutTable:
    func_id: str
    lo: float
    hi: float
    segments: int
    k: np.ndarray                       # per-segment slope, float64
    b: np.ndarray                       # per-segment intercept, float64
    k_raw: np.ndarray = field(default=None)
    b_raw: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.segments < 2:
            raise ValueError("a LUT needs at least 2 segments")
        if self.k_raw is None:
            self.k_raw = fx.quantize_arr(self.k)
        if self.b_raw is None:
            self.b_raw = fx.quantize_arr(self.b)
        self._lo_raw = fx.quantize(self.lo)
        self._span_raw = fx.quantize(self.hi) - self._lo_raw
        below, above = _CLAMPS[self.func_id]
        self._below_raw = fx.quantize(below)
        self._above_raw = fx.quantize(above)

    def eval_raw(self, x_raw: np.ndarray) -> tuple[np.ndarray, bool]:
        """Fixed-point evaluation, exactly what the datapath computes."""
        x = np.asarray(x_raw, dtype=np.int64)
        rel = x - self._lo_raw
        seg = np.clip(rel * self.segments // self._span_raw, 0, self.segments - 1)
        k = self.k_raw[seg].astype(np.int64)
        b = self.b_raw[seg].astype(np.int64)
        z = fx._round_arr_shift16(k * x) + b
        clipped = np.clip(z, fx.RAW_MIN, fx.RAW_MAX)
        overflow = bool(np.any(clipped != z))
        out = clipped.astype(np.int32)
        out = np.where(rel < 0, np.int32(self._below_raw), out)
        out = np.where(x > self._lo_raw + self._span_raw, np.int32(self._above_raw), out)
        return out, overflow

    def eval_real(self, x: np.ndarray) -> np.ndarray:
        """Float view of the table (unquantized k/b), for analysis."""
        x = np.asarray(x, dtype=np.float64)
        seg = np.clip(((x - self.lo) / (self.hi - self.lo) * self.segments).astype(int), 0, self.segments - 1)
        below, above = _CLAMPS[self.func_id]
        y = self.k[seg] * x + self.b[seg]
        return np.where(x < self.lo, below, np.where(x > self.hi, above, y))


def build_lut_table(func_id: str, segments: int = DEFAULT_SEGMENTS,
                    lo: float | None = None, hi: float | None = None) -> LutTable:
    """Secant-interpolating table for sigmoid, tanh, or exp."""
    f = reference_function(func_id)
    if lo is None or hi is None:
        lo, hi = _RANGES[func_id]
    edges = np.linspace(lo, hi, segments + 1)
    fv = f(edges)
    k = (fv[1:] - fv[:-1]) / (edges[1:] - edges[:-1])
    b = fv[:-1] - k * edges[:-1]
    return LutTable(func_id, float(lo), float(hi), segments, k, b)


def default_luts(segments: int = DEFAULT_SEGMENTS) -> dict[str, LutTable]:
    return {name: build_lut_table(name, segments) for name in _RANGES}


def max_abs_error(table: LutTable, n_grid: int = 100_000) -> float:
    """Worst fixed-point table error against double precision over [lo, hi]."""
    f = reference_function(table.func_id)
    xs = np.linspace(table.lo, table.hi, n_grid)
    raw, _ = table.eval_raw(fx.quantize_arr(xs))
    return float(np.max(np.abs(fx.dequantize_arr(raw) - f(fx.dequantize_arr(fx.quantize_arr(xs))))))
