"""Trainer-handoff acceptance criteria: accuracy reproduction on real data.

These compare trained detectors against the published accuracy bands, which
needs the real recordings (the UCI HAPT WALK subset) and hours of CPU
training. They run when SIDSIM_HANDOFF_DIR points at a directory produced
by tools/run_handoff.py:

    SIDSIM_HANDOFF_DIR/
      cache.npz  split.json
      bundles/{mlp,svm,ped_lstm_vote,lstm_th}_uNN.sidbundle   (per window)

and are skipped otherwise. Accuracy is the balanced (TNR+TPR)/2 average the
comparison tables use.
"""

import os
from pathlib import Path

import pytest

from sidsim import data as dat
from sidsim.bundle import read_bundle
from sidsim.evaluation import evaluate_pairs

HANDOFF = os.environ.get("SIDSIM_HANDOFF_DIR")

pytestmark = pytest.mark.skipif(
    not HANDOFF or not Path(HANDOFF).is_dir(),
    reason="real-data handoff bundles not present; set SIDSIM_HANDOFF_DIR "
           "(see tools/run_handoff.py)",
)


@pytest.fixture(scope="module")
def env():
    root = Path(HANDOFF)
    dataset = dat.load_cache(root / "cache.npz")
    split = dat.UserSplit.load(root / "split.json")
    return {"root": root, "dataset": dataset, "split": split}


def _bundles(env, kind, window):
    found = {}
    for path in sorted((env["root"] / "bundles").glob(f"{kind}_u*.sidbundle")):
        bundle = read_bundle(path)
        if bundle.window == window:
            found[bundle.user_id] = bundle
    if not found:
        pytest.skip(f"no {kind} bundles at W={window} under {env['root']}")
    return found


def _accuracy(env, kind, window, alpha=None):
    bundles = _bundles(env, kind, window)
    users = sorted(bundles)
    split = env["split"]
    pairs = [(u, v) for u in users for v in split.all_users]
    assert len(pairs) >= 150, "need at least a 5-registered-user subset"
    report = evaluate_pairs(bundles, env["dataset"], split, window,
                            pairs=pairs, alpha=alpha)
    rates = report.rates()
    acc = rates["balanced_accuracy"]
    print(f"HANDOFF {kind} W={window}: balanced accuracy "
          f"{100 * acc:.2f}% (TNR {100 * rates['tnr']:.2f}%, "
          f"TPR {100 * rates['tpr']:.2f}%) over {len(pairs)} pairs")
    return acc


def test_idaas_mlp_accuracy(env):
    assert _accuracy(env, "mlp", 64) >= 0.93


def test_idaas_svm_accuracy(env):
    assert _accuracy(env, "svm", 64) >= 0.94


def test_lad_ped_vote_w64(env):
    assert _accuracy(env, "ped_lstm_vote", 64) >= 0.82


def test_lad_ped_vote_w200(env):
    assert _accuracy(env, "ped_lstm_vote", 200) >= 0.85


def test_ped_vote_beats_threshold_detector(env):
    vote = _accuracy(env, "ped_lstm_vote", 64)
    threshold = _accuracy(env, "lstm_th", 64)
    assert vote - threshold >= 0.08
