"""Batch command-line front end.

Subcommands:
  prepare    raw dataset directory -> cached .npz + split JSON
  evaluate   run the pair protocol in reference or simulated mode
  bench      per-track-count cycle/latency table for one bundle
  compile    bundle -> binary program (+ symbol-map sidecar)
  asm        textual assembly -> binary program
  disasm     binary program -> canonical assembly

Exit codes: 0 success, 2 validation error, 3 capacity error, 4 dataset
error. Machine-readable output is line-oriented key=value records.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, data as dat
from .asm import assemble, disassemble
from .bundle import read_bundle
from .codegen import compile_bundle
from .errors import (
    CapacityExceededError,
    ClockMismatchError,
    InsufficientDataError,
    MalformedRowError,
    MissingBundleError,
    MissingFileError,
    SidError,
)
from .evaluation import SimulatedRunner, evaluate_pairs
from .isa import Program
from .simulator import MachineConfig

MAX_SENSOR_PERIOD_S = 0.020     # new readings arrive every 20 ms


def _machine_config(args) -> MachineConfig:
    return MachineConfig(n_tracks=args.tracks) if hasattr(args, "tracks") else MachineConfig()


def cmd_prepare(args) -> int:
    dataset = dat.load_hapt(args.dataset)
    split = dat.build_split(dataset, seed=args.seed,
                            n_registered=args.registered,
                            n_unregistered=args.unregistered)
    dat.save_cache(args.out_cache, dataset)
    split.save(args.out_split)
    users = sorted(dataset)
    print(f"users={len(users)}")
    print(f"registered={len(split.registered)}")
    print(f"unregistered={len(split.unregistered)}")
    print(f"cache={args.out_cache}")
    print(f"split={args.out_split}")
    return 0


def _discover_bundles(directory: Path, kind: str | None, window: int):
    found = {}
    kinds = set()
    for path in sorted(directory.glob("*.sidbundle")):
        bundle = read_bundle(path)
        kinds.add(bundle.model_kind)
        if kind is not None and bundle.model_kind != kind:
            continue
        if bundle.window != window:
            continue
        if bundle.user_id is None:
            raise MissingBundleError(f"{path.name} carries no user_id")
        found[bundle.user_id] = bundle
    if not found:
        raise MissingBundleError(
            f"no bundles for kind={kind or 'any'} window={window} in {directory} "
            f"(kinds present: {sorted(kinds) or 'none'})"
        )
    return found


def _parse_users(text: str, registered: list[int]) -> list[int]:
    """--users N means the first N registered users; --users 3,4,5 is an
    explicit id list."""
    if "," in text:
        return [int(t) for t in text.split(",") if t]
    return registered[: int(text)]


def cmd_evaluate(args) -> int:
    dataset = dat.load_cache(args.dataset)
    split = dat.UserSplit.load(args.split)
    bundles = _discover_bundles(Path(args.bundles), args.model, args.window)
    users = (_parse_users(args.users, split.registered)
             if args.users else split.registered)
    pairs = [(u, v) for u, v in split.pairs() if u in set(users)]
    missing = sorted({u for u, _ in pairs} - set(bundles))
    if missing:
        raise MissingBundleError(f"no bundles for registered users {missing}")
    if args.pairs is not None:
        rng = np.random.default_rng(args.seed)
        order = rng.permutation(len(pairs))
        pairs = [pairs[i] for i in order[: args.pairs]]
    report = evaluate_pairs(
        bundles, dataset, split, args.window,
        mode=args.mode, config=_machine_config(args), pairs=pairs,
        alpha=args.alpha, layout=args.layout, jobs=args.jobs,
    )
    lines = report.report_lines()
    text = "\n".join(lines)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    rates = report.rates()
    if rates["balanced_accuracy"] is not None:
        print(f"# balanced accuracy: {100 * rates['balanced_accuracy']:.2f}% "
              f"over {len(report.pairs)} pairs")
    return 0


def cmd_bench(args) -> int:
    bundle = read_bundle(args.bundle)
    window = bundle.window
    ok = True
    print(f"model={bundle.model_kind}")
    print(f"window={window}")
    for tracks in args.tracks:
        config = MachineConfig(n_tracks=tracks)
        layout = "streaming" if bundle.model_kind in ("lstm_th", "ped_lstm_vote") else "window"
        runner = SimulatedRunner(bundle, config, layout=layout)
        zeros = np.zeros((1 if layout == "streaming" else window, 6))
        verdict = runner.evaluate(zeros)
        wall = verdict.cycles / config.clock_hz
        ok = ok and wall < MAX_SENSOR_PERIOD_S
        print(f"tracks={tracks} layout={layout} cycles={verdict.cycles} "
              f"wall_time_ms={1000 * wall:.4f} "
              f"image_bytes={runner.compiled.image_bytes} "
              f"instruction_bytes={runner.compiled.instruction_bytes}")
    print(f"latency_under_20ms={'pass' if ok else 'FAIL'}")
    return 0 if ok else 2


def cmd_compile(args) -> int:
    bundle = read_bundle(args.bundle)
    compiled = compile_bundle(bundle, _machine_config(args), layout=args.layout)
    compiled.program.save(args.out)
    if args.symbols:
        Path(args.symbols).write_text(compiled.symbol_map_text())
    print(f"layout={compiled.layout}")
    print(f"instructions={len(compiled.program.instructions)}")
    print(f"instruction_bytes={compiled.instruction_bytes}")
    print(f"image_bytes={compiled.image_bytes}")
    print(f"workspace_top={compiled.workspace_top}")
    return 0


def cmd_asm(args) -> int:
    program, symbols = assemble(Path(args.source).read_text())
    program.save(args.out)
    print(f"instructions={len(program.instructions)}")
    print(f"data_bytes={len(program.data)}")
    if args.symbols:
        text = "".join(f"{name} {addr:#010x}\n" for name, addr in sorted(symbols.items()))
        Path(args.symbols).write_text(text)
    return 0


def cmd_disasm(args) -> int:
    program = Program.load(args.program)
    text = disassemble(program)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sidsim", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="ingest a raw dataset directory")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-cache", default="dataset.npz")
    p.add_argument("--out-split", default="split.json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--registered", type=int, default=25)
    p.add_argument("--unregistered", type=int, default=5)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("evaluate", help="run the pair protocol")
    p.add_argument("--bundles", required=True)
    p.add_argument("--dataset", required=True, help="cached .npz from prepare")
    p.add_argument("--split", required=True)
    p.add_argument("--window", type=int, choices=(64, 200), default=64)
    p.add_argument("--mode", choices=("reference", "simulated"), default="reference")
    p.add_argument("--model", default=None,
                   help="model kind when the bundle directory holds several")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--tracks", type=int, default=4)
    p.add_argument("--users", default=None,
                   help="registered-user subset: a count or a comma list of ids")
    p.add_argument("--pairs", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layout", choices=("window", "streaming", "auto"), default="window")
    p.add_argument("--jobs", type=int, default=1,
                   help="evaluate per-user pair groups on parallel processes")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="cycle counts and latency per track count")
    p.add_argument("--bundle", required=True)
    p.add_argument("--tracks", type=lambda s: [int(t) for t in s.split(",")],
                   default=[1, 2, 4, 8])
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compile", help="bundle -> binary program")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--symbols", default=None)
    p.add_argument("--layout", choices=("window", "streaming", "auto"), default="window")
    p.add_argument("--tracks", type=int, default=4)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("asm", help="assemble a textual program")
    p.add_argument("source")
    p.add_argument("out")
    p.add_argument("--symbols", default=None)
    p.set_defaults(func=cmd_asm)

    p = sub.add_parser("disasm", help="disassemble a binary program")
    p.add_argument("program")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_disasm)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CapacityExceededError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    except (MissingFileError, MalformedRowError, ClockMismatchError,
            InsufficientDataError) as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return 4
    except SidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
