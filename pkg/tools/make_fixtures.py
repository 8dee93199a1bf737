#!/usr/bin/env python3
"""Regenerate the checked-in test fixture bundles.

Trains one small detector of every kind for the first registered user of a
deterministic synthetic dataset and writes the bundles to tests/fixtures/.
Everything is seeded, so reruns reproduce the same archives byte for byte.

Usage: python3 tools/make_fixtures.py [output_dir]
"""

import sys
import tempfile
from pathlib import Path

from sidsim import data as dat
from sidtrainer.config import TrainingConfig
from sidtrainer.dataio import Split, load_cache
from sidtrainer.train import train_model

DATASET_SEED = 42
SPLIT_SEED = 0
N_USERS = 6
REGISTERED = 4
WALK_SECONDS = 100.0
WINDOW = 64

FIXTURES = [
    ("ped_lstm_vote", dict(hidden=(16,), alpha=0.10, ped_references=20,
                           epochs=40, custom=True)),
    ("lstm_th", dict(hidden=(16,), epochs=40, custom=True)),
    ("mlp", dict(hidden=(16,), epochs=60, custom=True)),
    ("svm", dict()),
    ("ocsvm", dict()),
]


def synthesize(workdir: Path):
    raw = workdir / "raw"
    dat.write_synthetic_hapt(raw, n_users=N_USERS, seed=DATASET_SEED,
                             walk_seconds=WALK_SECONDS)
    dataset = dat.load_hapt(raw)
    split = dat.build_split(dataset, seed=SPLIT_SEED,
                            n_registered=REGISTERED,
                            n_unregistered=N_USERS - REGISTERED)
    dat.save_cache(workdir / "cache.npz", dataset)
    split.save(workdir / "split.json")
    return workdir / "cache.npz", workdir / "split.json", split


def main() -> int:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parents[1] / "tests" / "fixtures"
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        cache_path, split_path, split = synthesize(Path(tmp))
        dataset = load_cache(cache_path)
        tsplit = Split.load(split_path)
        user = split.registered[0]
        for kind, overrides in FIXTURES:
            config = TrainingConfig(model=kind, window=WINDOW, seed=7, **overrides)
            path = out_dir / f"{kind}_u{user:02d}.sidbundle"
            manifest = train_model(config, dataset, tsplit, user, path)
            print(f"wrote {path.name}  ({manifest['model_kind']}, "
                  f"{path.stat().st_size} bytes)")
    print(f"fixtures in {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
