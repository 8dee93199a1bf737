import numpy as np
import pytest

import helpers
from sidsim import bundle as bnd
from sidsim import data as dat


@pytest.fixture(scope="session")
def synth_env(tmp_path_factory):
    """A miniature end-to-end environment: synthetic raw data for 6 users,
    cache + split (4 registered, 2 unregistered), and one PED-vote bundle
    per registered user at W=64."""
    root = tmp_path_factory.mktemp("pipeline")
    raw = root / "raw"
    dat.write_synthetic_hapt(raw, n_users=6, seed=3, walk_seconds=30.0)
    dataset = dat.load_hapt(raw)
    cache = root / "dataset.npz"
    split_path = root / "split.json"
    dat.save_cache(cache, dataset)
    split = dat.build_split(dataset, seed=0, n_registered=4, n_unregistered=2)
    split.save(split_path)

    bundles = root / "bundles"
    bundles.mkdir()
    for user in split.registered:
        b = helpers.lstm_vote_bundle(seed=100 + user, hidden=4, window=64,
                                     refs=3, user_id=user)
        bnd.write_bundle(b, bundles / f"ped_u{user:02d}.sidbundle")
        m = helpers.mlp_bundle(seed=200 + user, window=64, sizes=(8,), user_id=user)
        bnd.write_bundle(m, bundles / f"mlp_u{user:02d}.sidbundle")
    return {
        "root": root,
        "raw": raw,
        "cache": cache,
        "split_path": split_path,
        "split": split,
        "dataset": dataset,
        "bundles": bundles,
    }
