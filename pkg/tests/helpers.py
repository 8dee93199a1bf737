"""Shared builders for synthetic test bundles and windows."""

import numpy as np

from sidsim import bundle as bnd
from sidsim import detection as det


def random_lstm_params(rng, hidden=4, scale=0.4) -> det.LstmParams:
    h, d = hidden, 6
    u = lambda *shape: rng.uniform(-scale, scale, size=shape)
    return det.LstmParams(
        w_cand=u(h, d), w_forget=u(h, d), w_input=u(h, d), w_output=u(h, d),
        u_cand=u(h, h), u_forget=u(h, h), u_input=u(h, h), u_output=u(h, h),
        b_cand=u(h), b_forget=u(h), b_input=u(h), b_output=u(h),
        proj=u(d, h), proj_bias=u(d),
    )


def random_windows(rng, count, w, loc=0.0, scale=1.0) -> np.ndarray:
    return rng.normal(loc=loc, scale=scale, size=(count, w, 6))


def calibration_errors(lstm, windows):
    """Prediction-error samples of a model over normalized windows."""
    return [det.prediction_errors(lstm, win) for win in windows]


def lstm_vote_bundle(seed=0, hidden=4, window=8, refs=3, alpha=0.10, user_id=0):
    """A PED-vote bundle whose references come from the model's own errors
    on in-distribution data, so verdicts behave like a trained detector."""
    rng = np.random.default_rng(seed)
    lstm = random_lstm_params(rng, hidden=hidden)
    cal = calibration_errors(lstm, random_windows(rng, refs, window))
    peds = [det.make_ped_reference(e, alpha=alpha) for e in cal]
    return bnd.make_lstm_bundle(
        "ped_lstm_vote", lstm, window, alpha=alpha, ped_refs=peds,
        norm_mu=np.zeros(6), norm_sigma=np.ones(6), user_id=user_id,
        provenance={"trainer": "tests.helpers", "dataset_seed": seed},
    )


def lstm_th_bundle(seed=0, hidden=4, window=8, user_id=0):
    rng = np.random.default_rng(seed)
    lstm = random_lstm_params(rng, hidden=hidden)
    cal = calibration_errors(lstm, random_windows(rng, 16, window))
    threshold = float(np.percentile([np.mean(e) for e in cal], 95))
    return bnd.make_lstm_bundle(
        "lstm_th", lstm, window, threshold=threshold,
        norm_mu=np.zeros(6), norm_sigma=np.ones(6), user_id=user_id,
        provenance={"trainer": "tests.helpers", "dataset_seed": seed},
    )


def mlp_bundle(seed=0, window=2, sizes=(8,), scale=0.6, user_id=0):
    rng = np.random.default_rng(seed)
    d = window * 6
    dims = [d, *sizes, 2]
    weights = tuple(rng.uniform(-scale, scale, size=(dims[i + 1], dims[i]))
                    for i in range(len(dims) - 1))
    biases = tuple(rng.uniform(-scale, scale, size=dims[i + 1])
                   for i in range(len(dims) - 1))
    params = det.MlpParams(weights=weights, biases=biases)
    return bnd.make_mlp_bundle(params, window, user_id=user_id)


def svm_bundle(seed=0, window=2, n_sv=6, one_class=False, user_id=0):
    rng = np.random.default_rng(seed)
    d = window * 6
    params = det.SvmParams(
        support=rng.normal(size=(n_sv, d)),
        duals=np.abs(rng.normal(size=n_sv)) if one_class else rng.normal(size=n_sv),
        bias=-0.3 if one_class else float(rng.normal(scale=0.2)),
        gamma=1.0 / d,
        one_class=one_class,
    )
    return bnd.make_svm_bundle(params, window, user_id=user_id)
