"""Trainer command line.

  sidtrainer train     one user, one model kind -> one bundle
  sidtrainer train-all every registered user (or a subset) -> bundles plus
                       a set manifest listing them
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import TrainingConfig
from .dataio import Split, load_cache
from .train import train_model


def _hidden(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t)


def _config(args) -> TrainingConfig:
    return TrainingConfig(
        model=args.model, window=args.window, hidden=_hidden(args.hidden),
        alpha=args.alpha, seed=args.seed, epochs=args.epochs,
        batch_size=args.batch_size, learning_rate=args.lr,
        patience=args.patience, ped_references=args.refs, custom=args.custom,
    )


def _add_common(p):
    p.add_argument("--cache", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--model", required=True,
                   choices=("mlp", "svm", "ocsvm", "lstm_th", "ped_lstm_vote"))
    p.add_argument("--hidden", default="200")
    p.add_argument("--window", type=int, default=64)
    p.add_argument("--alpha", type=float, default=0.10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=3e-3)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--refs", type=int, default=20)
    p.add_argument("--custom", action="store_true",
                   help="allow hidden sizes outside the evaluated grid")
    p.add_argument("--out", default="bundles")


def cmd_train(args) -> int:
    dataset = load_cache(args.cache)
    split = Split.load(args.split)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{args.model}_u{args.user:02d}.sidbundle"
    train_model(_config(args), dataset, split, args.user, path)
    print(f"bundle={path}")
    return 0


def cmd_train_all(args) -> int:
    dataset = load_cache(args.cache)
    split = Split.load(args.split)
    users = split.registered[: args.users] if args.users else split.registered
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for user in users:
        path = out_dir / f"{args.model}_u{user:02d}.sidbundle"
        train_model(_config(args), dataset, split, user, path)
        written[user] = path.name
        print(f"user={user} bundle={path}")
    manifest = {
        "trainer": f"sidtrainer {__version__}",
        "model": args.model,
        "window": args.window,
        "seed": args.seed,
        "bundles": written,
    }
    manifest_path = out_dir / f"{args.model}_set.json"
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    print(f"set_manifest={manifest_path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sidtrainer", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one user")
    _add_common(p)
    p.add_argument("--user", type=int, required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train-all", help="train every registered user")
    _add_common(p)
    p.add_argument("--users", type=int, default=None,
                   help="train only the first N registered users")
    p.set_defaults(func=cmd_train_all)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
