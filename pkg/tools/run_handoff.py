#!/usr/bin/env python3
"""End-to-end handoff pipeline: raw recordings -> trained bundles -> report.

Given a directory with the raw HAPT layout (RawData/acc_expXX_userYY.txt,
gyro files, labels.txt), this prepares the cache and split, trains the
comparison detectors for a registered-user subset, and prints the
accuracy table. The output directory can then drive the handoff acceptance
tests via SIDSIM_HANDOFF_DIR.

    python3 tools/run_handoff.py --raw /path/to/HAPT --out handoff \
        --users 5 --hidden 200

With --synthetic N the raw data is generated (N users) instead, which keeps
the full pipeline demonstrable without the real recordings; accuracy bands
for the published numbers only apply to the real dataset.
"""

import argparse
import subprocess
import sys
from pathlib import Path

MODELS = [
    ("mlp", ["--hidden", "200,100", "--custom"]),
    ("svm", []),
    ("lstm_th", []),
    ("ped_lstm_vote", ["--alpha", "0.10"]),
]


def run(cmd):
    print("+", " ".join(str(c) for c in cmd))
    subprocess.run([str(c) for c in cmd], check=True)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--raw", help="raw dataset directory (HAPT layout)")
    parser.add_argument("--synthetic", type=int, default=None,
                        help="generate N synthetic users instead of --raw")
    parser.add_argument("--out", default="handoff")
    parser.add_argument("--users", type=int, default=5,
                        help="registered-user subset to train")
    parser.add_argument("--hidden", default="200")
    parser.add_argument("--window", type=int, default=64)
    parser.add_argument("--epochs", type=int, default=60)
    parser.add_argument("--custom", action="store_true",
                        help="allow hidden sizes outside the evaluated grid")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--registered", type=int, default=25)
    parser.add_argument("--unregistered", type=int, default=5)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    raw = args.raw
    if args.synthetic:
        from sidsim.data import write_synthetic_hapt

        raw = out / "raw"
        write_synthetic_hapt(raw, n_users=args.synthetic, seed=args.seed)
        args.registered = min(args.registered, args.synthetic - 1)
        args.unregistered = args.synthetic - args.registered
    if not raw:
        parser.error("need --raw or --synthetic")

    cache = out / "cache.npz"
    split = out / "split.json"
    run(["sidsim", "prepare", "--dataset", raw, "--out-cache", cache,
         "--out-split", split, "--seed", args.seed,
         "--registered", args.registered, "--unregistered", args.unregistered])

    bundles = out / "bundles"
    for model, extra in MODELS:
        hidden = args.hidden if model != "mlp" else None
        cmd = ["sidtrainer", "train-all", "--cache", cache, "--split", split,
               "--model", model, "--window", args.window,
               "--epochs", args.epochs, "--seed", args.seed,
               "--users", args.users, "--out", bundles]
        if hidden:
            cmd += ["--hidden", hidden]
        if args.custom and "--custom" not in extra:
            cmd += ["--custom"]
        cmd += extra
        run(cmd)

    for model, _ in MODELS:
        run(["sidsim", "evaluate", "--bundles", bundles, "--dataset", cache,
             "--split", split, "--window", args.window, "--model", model,
             "--mode", "reference", "--users", args.users])
    print(f"\ndone; export SIDSIM_HANDOFF_DIR={out.resolve()} to run "
          "tests/test_handoff.py")
    return 0


if __name__ == "__main__":
    sys.exit(main())
