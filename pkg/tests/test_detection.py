import math

import numpy as np
import pytest

from sidsim import detection as det
from sidsim.errors import (
    DimensionMismatchError,
    EmptySampleError,
    UnsupportedAlphaError,
)


def random_lstm(rng, hidden=4, scale=0.5) -> det.LstmParams:
    h, d = hidden, det.INPUT_CHANNELS
    u = lambda *shape: rng.uniform(-scale, scale, size=shape)
    return det.LstmParams(
        w_cand=u(h, d), w_forget=u(h, d), w_input=u(h, d), w_output=u(h, d),
        u_cand=u(h, h), u_forget=u(h, h), u_input=u(h, h), u_output=u(h, h),
        b_cand=u(h), b_forget=u(h), b_input=u(h), b_output=u(h),
        proj=u(d, h), proj_bias=u(d),
    )


def scalar_lstm_step_oracle(p, h_prev, c_prev, x):
    """Element-by-element reimplementation with the math module."""
    H = p.hidden_size
    def dot(mat, vec):
        return [sum(mat[r][k] * vec[k] for k in range(len(vec))) for r in range(len(mat))]
    def sig(v):
        return 1.0 / (1.0 + math.exp(-v))
    pre = {}
    for gate, w, u, b in (("cand", p.w_cand, p.u_cand, p.b_cand),
                          ("f", p.w_forget, p.u_forget, p.b_forget),
                          ("i", p.w_input, p.u_input, p.b_input),
                          ("o", p.w_output, p.u_output, p.b_output)):
        wx = dot(w.tolist(), list(x))
        uh = dot(u.tolist(), list(h_prev))
        pre[gate] = [wx[r] + uh[r] + b[r] for r in range(H)]
    cand = [math.tanh(v) for v in pre["cand"]]
    f = [sig(v) for v in pre["f"]]
    i = [sig(v) for v in pre["i"]]
    o = [sig(v) for v in pre["o"]]
    c = [f[r] * c_prev[r] + i[r] * cand[r] for r in range(H)]
    h = [o[r] * math.tanh(c[r]) for r in range(H)]
    return np.array(h), np.array(c)


def brute_force_ks_scaled(a, b):
    """max over every merged point of |F_n - F_m|, scaled by n*m: integer
    counting at each point, no sorting tricks."""
    best = 0
    for t in list(a) + list(b):
        cnt_a = sum(1 for v in a if v <= t)
        cnt_b = sum(1 for v in b if v <= t)
        best = max(best, abs(cnt_a * len(b) - cnt_b * len(a)))
    return best


def brute_force_ks(a, b):
    return brute_force_ks_scaled(a, b) / (len(a) * len(b))


# --- LSTM ----------------------------------------------------------------------

def test_lstm_step_zero_everything():
    p = random_lstm(np.random.default_rng(0), hidden=3, scale=0.0)
    h, c = det.lstm_step(p, np.zeros(3), np.zeros(3), np.zeros(6))
    assert np.all(h == 0) and np.all(c == 0)


def test_lstm_gate_saturation_preserves_cell():
    rng = np.random.default_rng(1)
    p = random_lstm(rng, hidden=3, scale=0.0)
    p = det.LstmParams(**{**{f: getattr(p, f) for f in p.__dataclass_fields__},
                          "b_forget": np.full(3, 50.0),
                          "b_input": np.full(3, -50.0)})
    c_prev = rng.uniform(-1, 1, size=3)
    _, c = det.lstm_step(p, np.zeros(3), c_prev, rng.uniform(-1, 1, size=6))
    assert np.allclose(c, c_prev, atol=1e-12)


def test_lstm_step_matches_scalar_oracle():
    rng = np.random.default_rng(2)
    p = random_lstm(rng, hidden=4)
    h_prev = rng.uniform(-1, 1, size=4)
    c_prev = rng.uniform(-1, 1, size=4)
    x = rng.uniform(-1, 1, size=6)
    h, c = det.lstm_step(p, h_prev, c_prev, x)
    h_ref, c_ref = scalar_lstm_step_oracle(p, h_prev, c_prev, x)
    assert np.max(np.abs(h - h_ref)) < 1e-12
    assert np.max(np.abs(c - c_ref)) < 1e-12


def test_lstm_gate_ranges():
    rng = np.random.default_rng(3)
    p = random_lstm(rng, hidden=8, scale=3.0)
    h = rng.uniform(-5, 5, size=8)
    c = rng.uniform(-5, 5, size=8)
    for _ in range(20):
        h, c = det.lstm_step(p, h, c, rng.uniform(-10, 10, size=6))
        assert np.all(np.abs(h) < 1.0)


def test_lstm_step_dimension_mismatch():
    p = random_lstm(np.random.default_rng(0), hidden=4)
    with pytest.raises(DimensionMismatchError):
        det.lstm_step(p, np.zeros(5), np.zeros(5), np.zeros(6))


def test_prediction_errors_learned_constant():
    rng = np.random.default_rng(4)
    p = random_lstm(rng, hidden=4, scale=0.0)
    const = rng.uniform(-1, 1, size=6)
    p = det.LstmParams(**{**{f: getattr(p, f) for f in p.__dataclass_fields__},
                          "proj_bias": const})
    window = np.tile(const, (16, 1))
    errors = det.prediction_errors(p, window)
    assert errors.shape == (15,)
    assert np.max(errors) < 1e-20


def test_prediction_errors_minimal_window():
    p = random_lstm(np.random.default_rng(5), hidden=4)
    errors = det.prediction_errors(p, np.zeros((2, 6)))
    assert errors.shape == (1,)


def test_prediction_errors_scalar_oracle():
    rng = np.random.default_rng(6)
    p = random_lstm(rng, hidden=4)
    window = rng.uniform(-1, 1, size=(64, 6))
    errors = det.prediction_errors(p, window)
    assert errors.shape == (63,)
    h = np.zeros(4)
    c = np.zeros(4)
    for t in range(63):
        h, c = scalar_lstm_step_oracle(p, h, c, window[t])
        pred = p.proj @ h + p.proj_bias
        expected = float(np.sum((pred - window[t + 1]) ** 2))
        assert abs(errors[t] - expected) < 1e-10


# --- KS ------------------------------------------------------------------------

def test_ks_identical_samples():
    s = np.array([0.3, 1.0, 2.0, 5.0])
    assert det.ks_statistic(s, s) == 0.0


def test_ks_disjoint_supports():
    assert det.ks_statistic([1, 2, 3, 4, 5], [6, 7, 8, 9, 10]) == 1.0


def test_ks_one_point_moved():
    assert det.ks_statistic([1, 2, 3, 4, 5], [1, 2, 3, 4, 10]) == pytest.approx(0.2)
    assert brute_force_ks([1, 2, 3, 4, 5], [1, 2, 3, 4, 10]) == pytest.approx(0.2)


def test_ks_empty_sample():
    with pytest.raises(EmptySampleError):
        det.ks_statistic([], [1.0])


def test_ks_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(300):
        n, m = rng.integers(1, 50, size=2)
        a = rng.normal(size=n)
        b = rng.normal(loc=rng.uniform(-1, 1), size=m)
        assert det.ks_statistic(a, b) == brute_force_ks(a, b)


def test_ks_symmetric_bounded_monotone_invariant():
    rng = np.random.default_rng(8)
    for _ in range(50):
        a = rng.normal(size=int(rng.integers(1, 30)))
        b = rng.normal(size=int(rng.integers(1, 30)))
        d = det.ks_statistic(a, b)
        assert det.ks_statistic(b, a) == d
        assert 0.0 <= d <= 1.0
        # strictly monotone transforms preserve order, hence D
        assert det.ks_statistic(np.exp(a), np.exp(b)) == d
        assert det.ks_statistic(3 * a + 1, 3 * b + 1) == d


def test_rejection_coefficient_closed_form():
    assert det.ks_coefficient(0.05) == pytest.approx(1.358, abs=1e-3)
    assert det.ks_coefficient(0.05) == pytest.approx(math.sqrt(-math.log(0.025) / 2))


def test_reject_rule():
    assert not det.ks_reject(0.0, 10, 10, 0.05)
    # threshold = 1.358 * sqrt(10/25) ~ 0.859 < 1
    assert det.ks_reject(1.0, 5, 5, 0.05)
    with pytest.raises(UnsupportedAlphaError):
        det.ks_reject(0.5, 5, 5, 0.01)


# --- hardware (histogram) KS ----------------------------------------------------

def test_hardware_ks_identical_is_zero():
    sample = np.array([0.1, 0.5, 1.0, 2.0, 3.0])
    ref = det.make_ped_reference(sample, alpha=0.05)
    stat, reject = det.hardware_ks(sample, ref)
    assert stat == 0.0
    assert not reject


def test_hardware_ks_all_above_boundaries():
    ref = det.make_ped_reference(np.array([1.0, 2.0, 3.0, 4.0, 5.0]), alpha=0.05)
    stat, reject = det.hardware_ks(np.full(5, 100.0), ref)
    assert stat == ref.m == 5
    assert reject


def test_hardware_ks_requires_matching_n():
    ref = det.make_ped_reference(np.arange(1.0, 6.0), alpha=0.05)
    with pytest.raises(DimensionMismatchError):
        det.hardware_ks(np.ones(4), ref)


def restricted_sup_oracle(test, boundaries, cum_ref, n):
    best = 0
    for j, b in enumerate(boundaries):
        cnt = sum(1 for e in test if e <= b)
        best = max(best, abs(cnt - cum_ref[j]))
    return best


def test_hardware_ks_equals_restricted_oracle():
    rng = np.random.default_rng(9)
    for _ in range(200):
        ref_sample = rng.normal(size=64)
        test = rng.normal(loc=rng.uniform(0, 2), size=64)
        ref = det.make_ped_reference(ref_sample, alpha=0.10)
        stat, _ = det.hardware_ks(test, ref)
        assert stat == restricted_sup_oracle(test, ref.boundaries, ref.cum_ref, 64)


def test_hardware_ks_bounded_by_full_statistic():
    rng = np.random.default_rng(10)
    for _ in range(200):
        ref_sample = rng.normal(size=32)
        test = rng.normal(loc=rng.uniform(0, 1), size=32)
        ref = det.make_ped_reference(ref_sample, alpha=0.10)
        stat, _ = det.hardware_ks(test, ref)
        full = det.ks_statistic(test, ref_sample)
        assert stat / ref.n <= full + 1e-12
        # equality when every test value appears among the boundaries
        stat_same, _ = det.hardware_ks(ref_sample, ref)
        assert stat_same / ref.n == det.ks_statistic(ref_sample, ref_sample)


def test_hardware_ks_equals_full_when_test_values_on_boundaries():
    rng = np.random.default_rng(11)
    ref_sample = np.sort(rng.normal(size=40))
    ref = det.make_ped_reference(ref_sample, alpha=0.05, n=40)
    test = rng.choice(ref_sample, size=40, replace=True)
    stat, _ = det.hardware_ks(test, ref)
    assert stat / 40 == pytest.approx(det.ks_statistic(test, ref_sample), abs=1e-12)


# --- vote ------------------------------------------------------------------------

def make_refs(rng, count=20, m=63, alpha=0.10):
    return [det.make_ped_reference(rng.normal(size=m) ** 2, alpha=alpha) for _ in range(count)]


def test_ped_vote_normal_on_reference_data():
    rng = np.random.default_rng(12)
    refs = make_refs(rng)
    assert det.ped_vote(np.asarray(refs[0].boundaries), refs) is False


def test_ped_vote_impostor_on_shifted_data():
    rng = np.random.default_rng(13)
    refs = make_refs(rng)
    assert det.ped_vote(np.full(63, 1e6), refs) is True


def test_ped_vote_strict_majority():
    # exactly half the references rejecting is still normal
    rng = np.random.default_rng(14)
    ref_sample = rng.normal(size=63) ** 2
    agree = det.make_ped_reference(ref_sample, alpha=0.10)
    disagree = det.make_ped_reference(ref_sample + 1e6, alpha=0.10)
    refs = [agree] * 10 + [disagree] * 10
    assert det.ped_vote(ref_sample, refs) is False
    refs = [agree] * 9 + [disagree] * 11
    assert det.ped_vote(ref_sample, refs) is True


def test_ped_vote_permutation_invariant():
    rng = np.random.default_rng(15)
    refs = make_refs(rng, count=7)
    test = rng.normal(size=63) ** 2
    verdict = det.ped_vote(test, refs)
    rng.shuffle(refs)
    assert det.ped_vote(test, refs) == verdict


def test_ped_vote_needs_references():
    with pytest.raises(EmptySampleError):
        det.ped_vote(np.ones(4), [])


# --- threshold detector ------------------------------------------------------------

def test_lstm_threshold_detect():
    assert det.lstm_threshold_detect(np.zeros(10), 0.1) is False
    assert det.lstm_threshold_detect(np.full(10, 0.1), 0.1) is False  # strict >
    assert det.lstm_threshold_detect(np.full(10, 0.2), 0.1) is True
    with pytest.raises(EmptySampleError):
        det.lstm_threshold_detect(np.array([]), 0.1)


# --- MLP / SVM ----------------------------------------------------------------------

def test_mlp_zero_weights_score_is_bias():
    p = det.MlpParams(
        weights=(np.zeros((4, 12)), np.zeros((2, 4))),
        biases=(np.zeros(4), np.array([0.25, -0.5])),
    )
    assert np.allclose(det.mlp_forward(p, np.zeros(12)), [0.25, -0.5])


def test_mlp_dimension_check():
    p = det.MlpParams(weights=(np.zeros((2, 8)),), biases=(np.zeros(2),))
    with pytest.raises(DimensionMismatchError):
        det.mlp_forward(p, np.zeros(9))


def test_svm_kernel_identity():
    sv = np.ones((1, 12))
    p = det.SvmParams(support=sv, duals=np.array([1.0]), bias=0.0, gamma=0.7)
    assert det.svm_decision(p, sv[0]) == pytest.approx(1.0)


def test_svm_matches_kernel_sum_oracle():
    rng = np.random.default_rng(16)
    sv = rng.normal(size=(8, 12))
    duals = rng.normal(size=8)
    p = det.SvmParams(support=sv, duals=duals, bias=0.3, gamma=0.05)
    x = rng.normal(size=12)
    expected = 0.3
    for i in range(8):
        expected += duals[i] * math.exp(-0.05 * float(np.sum((sv[i] - x) ** 2)))
    assert det.svm_decision(p, x) == pytest.approx(expected, abs=1e-12)


def test_ocsvm_sign_flip():
    rng = np.random.default_rng(17)
    sv = rng.normal(size=(4, 6))
    p = det.SvmParams(support=sv, duals=np.full(4, 0.25), bias=-0.2,
                      gamma=0.1, one_class=True)
    x = sv[0]
    # well inside the support: kernel sum beats rho, so not an impostor
    assert det.ocsvm_decision(p, x) < 0
    far = sv[0] + 100
    assert det.ocsvm_decision(p, far) > 0


# --- metrics ---------------------------------------------------------------------

def test_metrics_perfect():
    m = det.compute_metrics(det.MetricCounts(tp=50, tn=50, fp=0, fn=0))
    assert (m.tnr, m.tpr, m.accuracy, m.precision, m.f1) == (1.0, 1.0, 1.0, 1.0, 1.0)


def test_metrics_reverse_engineered_counts():
    m = det.compute_metrics(det.MetricCounts(tp=9757, tn=9926, fp=74, fn=243))
    assert m.tnr == pytest.approx(0.9926)
    assert m.tpr == pytest.approx(0.9757)
    assert m.accuracy == pytest.approx(0.98415)


def test_metrics_degenerate():
    m = det.compute_metrics(det.MetricCounts(tp=0, tn=5, fp=0, fn=3))
    assert m.tpr == 0.0
    assert m.f1 == 0.0
    assert m.precision is None


def test_metrics_identities_random_counts():
    rng = np.random.default_rng(18)
    for _ in range(100):
        tp, tn, fp, fn = (int(v) for v in rng.integers(0, 1000, size=4))
        m = det.compute_metrics(det.MetricCounts(tp=tp, tn=tn, fp=fp, fn=fn))
        if m.accuracy is not None:
            assert m.accuracy == pytest.approx((tn + tp) / (tn + tp + fn + fp))
        if m.precision is not None and m.tpr not in (None, 0.0):
            assert m.f1 == pytest.approx(2 * m.precision * m.tpr / (m.precision + m.tpr))


def test_counts_add():
    total = det.MetricCounts(1, 2, 3, 4) + det.MetricCounts(5, 6, 7, 8)
    assert total == det.MetricCounts(6, 8, 10, 12)
