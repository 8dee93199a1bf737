"""Double-precision reference implementations of the detection algorithms.

These are the accuracy ground truth and the oracle the simulator is checked
against. Everything here is pure float64 numpy over immutable parameter
records; nothing knows about fixed point.

Per-reading prediction error is the *squared* L2 norm over the 6 sensor
channels. The instruction set computes squared norms natively (Vsqnorm) and
has no square root; since the two-sample KS statistic is invariant under any
strictly monotone transform applied to both samples, detection behavior is
identical to the plain-norm formulation, and using one domain everywhere
keeps the reference and the compiled pipeline structurally comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptySampleError,
    UnsupportedAlphaError,
)

INPUT_CHANNELS = 6

# Rejection coefficients for the supported significance levels, from the
# closed form c(alpha) = sqrt(-ln(alpha/2) / 2).
SUPPORTED_ALPHAS = (0.15, 0.10, 0.05, 0.025)


def ks_coefficient(alpha: float) -> float:
    if alpha not in SUPPORTED_ALPHAS:
        raise UnsupportedAlphaError(f"alpha={alpha} not in {SUPPORTED_ALPHAS}")
    return math.sqrt(-math.log(alpha / 2.0) / 2.0)


def scaled_ks_threshold(alpha: float, n: int, m: int) -> float:
    """Threshold T compared against n*D (both sides of the rejection rule
    multiplied by n, so the hardware never divides)."""
    return ks_coefficient(alpha) * math.sqrt((n + m) * n / m)


# ---------------------------------------------------------------------------
# LSTM

@dataclass(frozen=True)
class LstmParams:
    """Cell weights plus the linear head that predicts the next reading."""

    w_cand: np.ndarray   # (H, 6)
    w_forget: np.ndarray
    w_input: np.ndarray
    w_output: np.ndarray
    u_cand: np.ndarray   # (H, H)
    u_forget: np.ndarray
    u_input: np.ndarray
    u_output: np.ndarray
    b_cand: np.ndarray   # (H,)
    b_forget: np.ndarray
    b_input: np.ndarray
    b_output: np.ndarray
    proj: np.ndarray       # (6, H)
    proj_bias: np.ndarray  # (6,)

    @property
    def hidden_size(self) -> int:
        return self.w_cand.shape[0]

    def __post_init__(self):
        h = self.w_cand.shape[0]
        for name in ("w_cand", "w_forget", "w_input", "w_output"):
            if getattr(self, name).shape != (h, INPUT_CHANNELS):
                raise DimensionMismatchError(f"{name} must be ({h}, {INPUT_CHANNELS})")
        for name in ("u_cand", "u_forget", "u_input", "u_output"):
            if getattr(self, name).shape != (h, h):
                raise DimensionMismatchError(f"{name} must be ({h}, {h})")
        for name in ("b_cand", "b_forget", "b_input", "b_output"):
            if getattr(self, name).shape != (h,):
                raise DimensionMismatchError(f"{name} must be ({h},)")
        if self.proj.shape != (INPUT_CHANNELS, h):
            raise DimensionMismatchError(f"proj must be ({INPUT_CHANNELS}, {h})")
        if self.proj_bias.shape != (INPUT_CHANNELS,):
            raise DimensionMismatchError(f"proj_bias must be ({INPUT_CHANNELS},)")
        for name in self.__dataclass_fields__:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_step(params: LstmParams, h_prev: np.ndarray, c_prev: np.ndarray,
              x_t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One cell update: gates from (x_t, h_prev), then state and output."""
    if x_t.shape != (INPUT_CHANNELS,) or h_prev.shape != (params.hidden_size,):
        raise DimensionMismatchError(
            f"expected x ({INPUT_CHANNELS},) and h ({params.hidden_size},), "
            f"got {x_t.shape} and {h_prev.shape}"
        )
    cand = np.tanh(params.w_cand @ x_t + params.u_cand @ h_prev + params.b_cand)
    f = _sigmoid(params.w_forget @ x_t + params.u_forget @ h_prev + params.b_forget)
    i = _sigmoid(params.w_input @ x_t + params.u_input @ h_prev + params.b_input)
    o = _sigmoid(params.w_output @ x_t + params.u_output @ h_prev + params.b_output)
    c_t = f * c_prev + i * cand
    h_t = o * np.tanh(c_t)
    return h_t, c_t


def lstm_predict_next(params: LstmParams, h_t: np.ndarray) -> np.ndarray:
    return params.proj @ h_t + params.proj_bias


def prediction_errors(params: LstmParams, window: np.ndarray) -> np.ndarray:
    """Per-step squared prediction errors over a (W, 6) window.

    The cell starts from zero state, consumes readings 0..W-2, and each
    step's prediction is scored against the next reading, giving W-1 errors.
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[1] != INPUT_CHANNELS or window.shape[0] < 2:
        raise DimensionMismatchError(f"window must be (W>=2, {INPUT_CHANNELS}), got {window.shape}")
    h = np.zeros(params.hidden_size)
    c = np.zeros(params.hidden_size)
    errors = np.empty(window.shape[0] - 1)
    for t in range(window.shape[0] - 1):
        h, c = lstm_step(params, h, c, window[t])
        pred = lstm_predict_next(params, h)
        delta = pred - window[t + 1]
        errors[t] = float(delta @ delta)
    return errors


# ---------------------------------------------------------------------------
# Two-sample KS test

def ks_statistic(sample_a: np.ndarray, sample_b: np.ndarray) -> float:
    """D = sup_x |F_n(x) - F_m(x)| over the merged sample points.

    Both empirical CDFs are right-continuous step functions, so the supremum
    is attained at one of the merged points. Computed from integer counts
    scaled by n*m with a single final division, so equal inputs give
    bit-equal results regardless of evaluation order.
    """
    a = np.sort(np.asarray(sample_a, dtype=np.float64))
    b = np.sort(np.asarray(sample_b, dtype=np.float64))
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise EmptySampleError("KS statistic needs non-empty samples")
    points = np.concatenate([a, b])
    cnt_a = np.searchsorted(a, points, side="right").astype(np.int64)
    cnt_b = np.searchsorted(b, points, side="right").astype(np.int64)
    scaled = np.max(np.abs(m * cnt_a - n * cnt_b))
    return float(scaled) / (n * m)


def ks_reject(d: float, n: int, m: int, alpha: float) -> bool:
    """Eq-style rejection rule: D > c(alpha) * sqrt((n+m)/(n*m))."""
    return d > ks_coefficient(alpha) * math.sqrt((n + m) / (n * m))


# ---------------------------------------------------------------------------
# Reference prediction-error distributions (the five-step hardware KS)

@dataclass(frozen=True)
class PedReference:
    """One reference PED: histogram bin boundaries, cumulative counts, and
    the pre-scaled rejection threshold compared against n*D."""

    boundaries: np.ndarray   # (m,) strictly ascending
    cum_ref: np.ndarray      # (m,) nondecreasing counts ending at m
    n: int                   # test-sample size the threshold was scaled for
    m: int
    threshold: float         # T = c(alpha) * sqrt((n+m)*n/m)

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=np.float64)
        c = np.asarray(self.cum_ref, dtype=np.int64)
        if b.ndim != 1 or b.shape != c.shape or len(b) != self.m:
            raise DimensionMismatchError("boundaries/cum_ref must both have m entries")
        if len(b) and np.any(np.diff(b) <= 0):
            raise ValueError("boundaries must be strictly ascending")
        if np.any(np.diff(c) < 0) or (len(c) and c[-1] != self.m):
            raise ValueError("cum_ref must be nondecreasing and end at m")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")


def make_ped_reference(reference_errors: np.ndarray, alpha: float,
                       n: int | None = None) -> PedReference:
    """Reference PED from one validation error sample: bin boundaries are the
    sorted sample values themselves, so the cumulative histogram is 1..m."""
    sample = np.sort(np.asarray(reference_errors, dtype=np.float64))
    m = len(sample)
    if m == 0:
        raise EmptySampleError("reference sample is empty")
    if np.any(np.diff(sample) <= 0):
        # ties would give non-strict boundaries; spread them by float ulps
        for j in range(1, m):
            if sample[j] <= sample[j - 1]:
                sample[j] = np.nextafter(sample[j - 1], np.inf)
    if n is None:
        n = m
    return PedReference(
        boundaries=sample,
        cum_ref=np.arange(1, m + 1, dtype=np.int64),
        n=n,
        m=m,
        threshold=scaled_ks_threshold(alpha, n, m),
    )


def hardware_ks(test_errors: np.ndarray, ref: PedReference) -> tuple[float, bool]:
    """The five-step histogram KS test; bit-level oracle for compiled code.

    1. compare each observed error against the bin boundaries (count ties as
       inside the bin, i.e. error <= boundary),
    2. accumulate the binary vectors into the test cumulative histogram,
    3. subtract the reference cumulative histogram,
    4. take the maximum absolute difference, which is n * D restricted to
       the boundary evaluation points,
    5. compare against the pre-scaled threshold T.
    """
    e = np.asarray(test_errors, dtype=np.float64)
    if len(e) != ref.n:
        raise DimensionMismatchError(f"got {len(e)} test errors, reference expects {ref.n}")
    cum_test = np.searchsorted(np.sort(e), ref.boundaries, side="right")
    scaled = int(np.max(np.abs(cum_test - np.asarray(ref.cum_ref, dtype=np.int64))))
    return float(scaled), scaled > ref.threshold


def ped_vote(test_errors: np.ndarray, references: list[PedReference],
             alpha: float | None = None) -> bool:
    """Majority vote over the per-reference KS tests; True means impostor.

    The verdict requires strictly more than half of the references to
    reject. With alpha given, thresholds are re-derived from it; otherwise
    each reference's stored threshold is used.
    """
    if not references:
        raise EmptySampleError("need at least one reference PED")
    rejections = 0
    for ref in references:
        t = ref.threshold if alpha is None else scaled_ks_threshold(alpha, ref.n, ref.m)
        scaled, _ = hardware_ks(test_errors, ref)
        rejections += scaled > t
    return 2 * rejections > len(references)


def lstm_threshold_detect(test_errors: np.ndarray, threshold: float) -> bool:
    """Baseline detector: impostor iff the mean window error exceeds the
    validation threshold (strict)."""
    e = np.asarray(test_errors, dtype=np.float64)
    if len(e) == 0:
        raise EmptySampleError("no prediction errors")
    return float(np.mean(e)) > threshold


# ---------------------------------------------------------------------------
# MLP / SVM

@dataclass(frozen=True)
class MlpParams:
    """Feed-forward layers; sigmoid hidden activations, 2-way linear output."""

    weights: tuple[np.ndarray, ...]   # each (out, in)
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise DimensionMismatchError("need one bias per weight matrix")
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise DimensionMismatchError(f"bias {b.shape} does not match weights {w.shape}")
        for prev, nxt in zip(self.weights, self.weights[1:]):
            if nxt.shape[1] != prev.shape[0]:
                raise DimensionMismatchError(
                    f"layer widths {prev.shape} -> {nxt.shape} do not chain"
                )
        if self.weights[-1].shape[0] != 2:
            raise DimensionMismatchError("output layer must produce 2 class scores")

    @property
    def input_size(self) -> int:
        return self.weights[0].shape[1]


def mlp_forward(params: MlpParams, window: np.ndarray) -> np.ndarray:
    """Class scores (normal, impostor) for a flattened window."""
    x = np.asarray(window, dtype=np.float64).reshape(-1)
    if x.shape[0] != params.input_size:
        raise DimensionMismatchError(f"input size {x.shape[0]} != {params.input_size}")
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        x = _sigmoid(w @ x + b)
    return params.weights[-1] @ x + params.biases[-1]


@dataclass(frozen=True)
class SvmParams:
    """Gaussian-kernel SVM: two-class or one-class, sign is impostor-positive."""

    support: np.ndarray       # (S, D) flattened windows
    duals: np.ndarray         # (S,)
    bias: float
    gamma: float
    one_class: bool = False

    def __post_init__(self):
        if self.support.ndim != 2 or self.duals.shape != (self.support.shape[0],):
            raise DimensionMismatchError("one dual coefficient per support vector")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    @property
    def input_size(self) -> int:
        return self.support.shape[1]


def _kernel_sum(params: SvmParams, x: np.ndarray) -> float:
    d2 = np.sum((params.support - x) ** 2, axis=1)
    return float(params.duals @ np.exp(-params.gamma * d2) + params.bias)


def svm_decision(params: SvmParams, window: np.ndarray) -> float:
    """Signed decision score; positive means impostor."""
    x = np.asarray(window, dtype=np.float64).reshape(-1)
    if x.shape[0] != params.input_size:
        raise DimensionMismatchError(f"input size {x.shape[0]} != {params.input_size}")
    raw = _kernel_sum(params, x)
    return -raw if params.one_class else raw


def ocsvm_decision(params: SvmParams, window: np.ndarray) -> float:
    if not params.one_class:
        raise DimensionMismatchError("params are not a one-class model")
    return svm_decision(params, window)


# ---------------------------------------------------------------------------
# Metrics

@dataclass(frozen=True)
class MetricCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("counts must be nonnegative")

    def __add__(self, other: "MetricCounts") -> "MetricCounts":
        return MetricCounts(
            self.tp + other.tp, self.tn + other.tn,
            self.fp + other.fp, self.fn + other.fn,
        )


@dataclass(frozen=True)
class Metrics:
    """Undefined fields (zero denominators) are None, never an exception."""

    tnr: float | None
    tpr: float | None
    accuracy: float | None
    precision: float | None
    f1: float | None

    def as_dict(self) -> dict:
        return {
            "tnr": self.tnr, "tpr": self.tpr, "accuracy": self.accuracy,
            "precision": self.precision, "f1": self.f1,
        }


def compute_metrics(counts: MetricCounts) -> Metrics:
    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    tnr = tn / (tn + fp) if tn + fp else None
    tpr = tp / (tp + fn) if tp + fn else None
    total = tp + tn + fp + fn
    accuracy = (tn + tp) / total if total else None
    precision = tp / (tp + fp) if tp + fp else None
    if tpr == 0.0:
        f1 = 0.0
    elif precision is None or tpr is None or precision + tpr == 0.0:
        f1 = None
    else:
        f1 = 2.0 * precision * tpr / (precision + tpr)
    return Metrics(tnr, tpr, accuracy, precision, f1)
