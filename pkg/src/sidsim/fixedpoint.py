"""Q16.16 signed 32-bit fixed-point arithmetic with saturation.

Every number the datapath touches is a signed 32-bit word interpreted as
value = raw / 2**16, giving a range of [-32768, 32768 - 2**-16] with a
resolution of 2**-16. All operations saturate to the range bounds instead
of wrapping; callers that care (the machine model) collect the returned
overflow flag into a sticky bit.

Rounding rules:
  * multiply: the exact 64-bit product (Q32.32) is rounded to nearest,
    ties to even, at bit 16, then saturated.
  * quantize: round to nearest, ties to even, then saturate.
  * reductions (dot products, squared norms): Q32.32 products are summed
    exactly and rounded once at writeback, so a reduction carries a single
    rounding error regardless of its length or of how the hardware tiles it.

Scalar helpers work on plain ints; the *_arr variants operate on int32
numpy arrays of raw values and are what the simulator uses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FRAC_BITS = 16
ONE = 1 << FRAC_BITS                      # raw value of 1.0
RAW_MIN = -(1 << 31)
RAW_MAX = (1 << 31) - 1
REAL_MIN = RAW_MIN / ONE                  # -32768.0
REAL_MAX = RAW_MAX / ONE                  # 32768 - 2**-16

# int64 sums of Q32.32 products stay exact as long as the accumulated
# magnitude is below 2**62; programs with realistic operand magnitudes are
# far below this, and the array reductions fall back to Python ints if not.
_I64_SAFE = 1 << 62


def _round_half_even_shift16(p: int) -> int:
    """Round a Q32.32 integer to Q16.16, nearest, ties to even."""
    q, r = p >> FRAC_BITS, p & (ONE - 1)
    half = ONE >> 1
    if r > half or (r == half and (q & 1)):
        q += 1
    return q


def _saturate(raw: int) -> tuple[int, bool]:
    if raw > RAW_MAX:
        return RAW_MAX, True
    if raw < RAW_MIN:
        return RAW_MIN, True
    return raw, False


def sat_add(a: int, b: int) -> tuple[int, bool]:
    """Saturating Q16.16 add of two raw values. Returns (raw, overflowed)."""
    return _saturate(a + b)


def sat_sub(a: int, b: int) -> tuple[int, bool]:
    return _saturate(a - b)


def sat_mul(a: int, b: int) -> tuple[int, bool]:
    """Saturating Q16.16 multiply; exact 64-bit product, round-to-even at bit 16."""
    return _saturate(_round_half_even_shift16(a * b))


def quantize(v: float) -> int:
    """Real value -> raw Q16.16, round-to-nearest-even, saturating."""
    if not np.isfinite(v):
        raise ValueError(f"cannot quantize non-finite value {v!r}")
    raw = int(np.rint(v * ONE))           # rint rounds half to even
    return _saturate(raw)[0]


def dequantize(raw: int) -> float:
    return raw / ONE


@dataclass(frozen=True)
class FixedPoint32:
    """One Q16.16 value with saturating arithmetic and value semantics."""

    raw: int

    def __post_init__(self):
        if not (RAW_MIN <= self.raw <= RAW_MAX):
            raise ValueError(f"raw value {self.raw} outside 32-bit range")

    @classmethod
    def from_real(cls, v: float) -> "FixedPoint32":
        return cls(quantize(v))

    def to_real(self) -> float:
        return dequantize(self.raw)

    def __add__(self, other: "FixedPoint32") -> "FixedPoint32":
        return FixedPoint32(sat_add(self.raw, other.raw)[0])

    def __sub__(self, other: "FixedPoint32") -> "FixedPoint32":
        return FixedPoint32(sat_sub(self.raw, other.raw)[0])

    def __mul__(self, other: "FixedPoint32") -> "FixedPoint32":
        return FixedPoint32(sat_mul(self.raw, other.raw)[0])

    def __repr__(self):
        return f"FixedPoint32({self.to_real()!r})"


# ---------------------------------------------------------------------------
# Array variants (raw int32 in / raw int32 out), used by the simulator.

def quantize_arr(values: np.ndarray) -> np.ndarray:
    """Vector quantize float64 -> raw int32, round-to-even, saturating."""
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot quantize non-finite values")
    raw = np.rint(v * ONE)
    return np.clip(raw, RAW_MIN, RAW_MAX).astype(np.int32)


def dequantize_arr(raw: np.ndarray) -> np.ndarray:
    return np.asarray(raw, dtype=np.int64).astype(np.float64) / ONE


def _clip_flag(wide: np.ndarray) -> tuple[np.ndarray, bool]:
    clipped = np.clip(wide, RAW_MIN, RAW_MAX)
    return clipped.astype(np.int32), bool(np.any(clipped != wide))


def add_arr(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, bool]:
    return _clip_flag(a.astype(np.int64) + b.astype(np.int64))


def sub_arr(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, bool]:
    return _clip_flag(a.astype(np.int64) - b.astype(np.int64))


def _round_arr_shift16(p: np.ndarray) -> np.ndarray:
    q = p >> FRAC_BITS                    # arithmetic shift: floor division
    r = p & np.int64(ONE - 1)
    half = np.int64(ONE >> 1)
    bump = (r > half) | ((r == half) & ((q & 1) == 1))
    return q + bump


def mul_arr(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, bool]:
    p = a.astype(np.int64) * b.astype(np.int64)
    return _clip_flag(_round_arr_shift16(p))


def matvec_arr(mat: np.ndarray, vec: np.ndarray) -> tuple[np.ndarray, bool]:
    """Row dot products of a raw int32 matrix with a raw int32 vector.

    Each row is accumulated exactly in Q32.32 and rounded once, matching the
    scratchpad accumulation of the MVmul datapath.
    """
    m = mat.astype(np.int64)
    v = vec.astype(np.int64)
    bound = m.shape[1] * max(int(np.max(np.abs(m), initial=0)), 1) * max(
        int(np.max(np.abs(v), initial=0)), 1
    )
    if bound < _I64_SAFE:
        sums = m @ v
    else:  # adversarial magnitudes: exact big-int accumulation
        sums = np.array(
            [sum(int(x) * int(y) for x, y in zip(row, v)) for row in m],
            dtype=object,
        )
        return _clip_flag_object(np.array([_round_half_even_shift16(int(s)) for s in sums], dtype=object))
    return _clip_flag(_round_arr_shift16(sums))


def _clip_flag_object(wide: np.ndarray) -> tuple[np.ndarray, bool]:
    clipped = np.array([min(max(int(x), RAW_MIN), RAW_MAX) for x in wide], dtype=np.int64)
    flag = bool(np.any(clipped != np.array([int(x) for x in wide], dtype=object)))
    return clipped.astype(np.int32), flag


def sqnorm_raw(x: np.ndarray) -> tuple[int, bool]:
    """Sum of squares of a raw vector, single rounding at writeback."""
    xi = x.astype(np.int64)
    bound = xi.shape[0] * max(int(np.max(np.abs(xi), initial=0)), 1) ** 2
    if bound < _I64_SAFE:
        total = int(np.dot(xi, xi))
    else:
        total = sum(int(v) * int(v) for v in xi)
    return _saturate(_round_half_even_shift16(total))
