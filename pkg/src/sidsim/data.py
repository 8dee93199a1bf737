"""HAPT-style dataset ingestion, windowing, and the user-split protocol.

Raw layout (the public UCI distribution): a directory of per-experiment
files `acc_expXX_userYY.txt` and `gyro_expXX_userYY.txt` (whitespace
separated, 3 columns each, 50 Hz) plus `labels.txt` whose rows are

    experiment_id  user_id  activity_id  start_row  end_row

with start/end inclusive 0-based row indices into that experiment's files.
Readings are the 6-vector (acc xyz, gyro xyz). Only intervals of the
requested activity (WALK = 1) are kept.

The cached dataset is a single .npz (little-endian float64 streams indexed
by member name `uNN_iKKK`); the split file is JSON holding the registered /
unregistered user assignment and the deterministic windowing parameters.

Partitions cut each user's timeline 70/15/15 (train/validation/test) at
reading granularity, so no test window can share a reading index range with
any training window. Training windows stride 32; validation and test
windows stride W (no overlap).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ClockMismatchError,
    InsufficientDataError,
    MalformedRowError,
    MissingFileError,
)

ACTIVITY_WALK = 1
SAMPLE_RATE_HZ = 50
TRAIN_STRIDE = 32
PARTS = ("train", "val", "test")
RATIOS = (0.70, 0.15, 0.15)

_RAW_NAME = re.compile(r"acc_exp(\d+)_user(\d+)\.txt$")


def _read_columns(path: Path, n_cols: int) -> np.ndarray:
    if not path.exists():
        raise MissingFileError(str(path))
    try:
        data = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError:
        # locate the offending token for a useful error
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                for col, tok in enumerate(line.split(), start=1):
                    try:
                        float(tok)
                    except ValueError:
                        raise MalformedRowError(
                            f"{path.name}: bad token {tok!r}", line=lineno, column=col
                        ) from None
        raise
    if data.size and data.shape[1] != n_cols:
        raise MalformedRowError(f"{path.name}: expected {n_cols} columns, got {data.shape[1]}")
    return data


def load_hapt(root, activity: int = ACTIVITY_WALK) -> dict[int, list[np.ndarray]]:
    """Per-user lists of contiguous 6-channel intervals of one activity."""
    root = Path(root)
    if (root / "RawData").is_dir():
        root = root / "RawData"
    labels_path = root / "labels.txt"
    if not labels_path.exists():
        raise MissingFileError(str(labels_path))
    labels = []
    with open(labels_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            toks = line.split()
            if not toks:
                continue
            if len(toks) != 5:
                raise MalformedRowError(
                    f"labels.txt: expected 5 fields, got {len(toks)}", line=lineno
                )
            try:
                labels.append(tuple(int(t) for t in toks))
            except ValueError:
                raise MalformedRowError(
                    f"labels.txt: non-integer field {line.strip()!r}", line=lineno
                ) from None

    streams: dict[int, list[np.ndarray]] = {}
    loaded: dict[tuple[int, int], np.ndarray] = {}
    for acc_path in sorted(root.glob("acc_exp*_user*.txt")):
        m = _RAW_NAME.search(acc_path.name)
        if not m:
            continue
        exp_id, user_id = int(m.group(1)), int(m.group(2))
        acc = _read_columns(acc_path, 3)
        gyro = _read_columns(root / acc_path.name.replace("acc_", "gyro_"), 3)
        if len(acc) != len(gyro):
            raise ClockMismatchError(
                f"exp {exp_id}: acc has {len(acc)} rows, gyro has {len(gyro)}"
            )
        loaded[(exp_id, user_id)] = np.hstack([acc, gyro])
        streams.setdefault(user_id, [])

    for exp_id, user_id, act, start, end in labels:
        if act != activity or (exp_id, user_id) not in loaded:
            continue
        readings = loaded[(exp_id, user_id)]
        interval = readings[start : end + 1]
        if len(interval):
            streams.setdefault(user_id, []).append(np.ascontiguousarray(interval))
    return streams


def make_windows(intervals: list[np.ndarray], w: int, stride: int) -> list[np.ndarray]:
    """Sliding windows that never cross an interval boundary."""
    if w < 2 or stride < 1:
        raise ValueError("need window >= 2 and stride >= 1")
    out = []
    for interval in intervals:
        for start in range(0, len(interval) - w + 1, stride):
            out.append(interval[start : start + w])
    return out


def partition_user(intervals: list[np.ndarray],
                   ratios=RATIOS) -> dict[str, list[np.ndarray]]:
    """Cut one user's timeline into train/val/test at reading granularity.

    Intervals straddling a cut are divided, which keeps every partition's
    reading ranges disjoint from the others.
    """
    total = sum(len(iv) for iv in intervals)
    cut1 = int(total * ratios[0])
    cut2 = int(total * (ratios[0] + ratios[1]))
    parts: dict[str, list[np.ndarray]] = {p: [] for p in PARTS}
    pos = 0
    for interval in intervals:
        for lo, hi, part in ((0, cut1, "train"), (cut1, cut2, "val"), (cut2, total, "test")):
            s = max(lo - pos, 0)
            e = min(hi - pos, len(interval))
            if e - s > 0:
                parts[part].append(interval[s:e])
        pos += len(interval)
    return parts


@dataclass
class UserSplit:
    seed: int
    registered: list[int]
    unregistered: list[int]
    ratios: tuple = RATIOS
    train_stride: int = TRAIN_STRIDE

    @property
    def all_users(self) -> list[int]:
        return self.registered + self.unregistered

    def pairs(self) -> list[tuple[int, int]]:
        """Every registered user against every user (themselves included)."""
        return [(u, v) for u in self.registered for v in self.all_users]

    def to_json(self) -> str:
        return json.dumps({
            "seed": self.seed,
            "registered": self.registered,
            "unregistered": self.unregistered,
            "ratios": list(self.ratios),
            "train_stride": self.train_stride,
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "UserSplit":
        d = json.loads(text)
        return cls(d["seed"], d["registered"], d["unregistered"],
                   tuple(d["ratios"]), d["train_stride"])

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())


def build_split(dataset: dict[int, list[np.ndarray]], seed: int,
                n_registered: int = 25, n_unregistered: int = 5) -> UserSplit:
    """Deterministic registered/unregistered assignment."""
    users = sorted(dataset)
    if len(users) < n_registered + n_unregistered:
        raise InsufficientDataError(
            f"need {n_registered + n_unregistered} users, dataset has {len(users)}"
        )
    rng = np.random.default_rng(seed)
    order = [users[i] for i in rng.permutation(len(users))]
    return UserSplit(
        seed=seed,
        registered=sorted(order[:n_registered]),
        unregistered=sorted(order[n_registered : n_registered + n_unregistered]),
    )


def partition_windows(dataset, user: int, part: str, w: int,
                      split: UserSplit) -> list[np.ndarray]:
    """Windows of one partition of one user, with the protocol strides."""
    if user not in dataset:
        raise InsufficientDataError(f"user {user} not in dataset")
    stride = split.train_stride if part == "train" else w
    parts = partition_user(dataset[user], split.ratios)
    windows = make_windows(parts[part], w, stride)
    if not windows:
        raise InsufficientDataError(
            f"user {user} has no {part} windows at W={w}"
        )
    return windows


# ---------------------------------------------------------------------------
# Dataset cache

def save_cache(path, dataset: dict[int, list[np.ndarray]]) -> None:
    arrays = {}
    for user, intervals in dataset.items():
        for k, interval in enumerate(intervals):
            arrays[f"u{user:02d}_i{k:03d}"] = np.asarray(interval, dtype="<f8")
    np.savez(path, **arrays)


def load_cache(path) -> dict[int, list[np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(str(path))
    dataset: dict[int, list[np.ndarray]] = {}
    with np.load(path) as npz:
        for name in sorted(npz.files):
            m = re.match(r"u(\d+)_i(\d+)$", name)
            if not m:
                continue
            dataset.setdefault(int(m.group(1)), []).append(npz[name])
    return dataset


# ---------------------------------------------------------------------------
# Synthetic raw data (testing / demos without the real recordings)

def write_synthetic_hapt(root, n_users: int = 30, seed: int = 0,
                         experiments_per_user: int = 2,
                         walk_seconds: float = 40.0) -> Path:
    """Write a miniature raw layout with per-user gait-like signals.

    Each user gets a stable stride frequency and per-channel harmonic
    signature, with slow tempo and amplitude drift so windows of one user
    vary the way real gait does. Intervals of a non-WALK activity pad each
    experiment to exercise label slicing.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    label_rows = []
    for user in range(1, n_users + 1):
        freq = rng.uniform(1.4, 2.2)
        amp = rng.uniform(0.3, 1.4, size=(6, 3))
        phase = rng.uniform(0, 2 * np.pi, size=(6, 3))
        drift = rng.uniform(-0.5, 0.5, size=6)
        for e in range(experiments_per_user):
            exp_id = (user - 1) * experiments_per_user + e + 1
            pad = int(rng.integers(40, 80))
            walk_len = int(walk_seconds * SAMPLE_RATE_HZ)
            total = pad + walk_len + pad

            def wander(depth, width):
                # stationary smoothed noise whose correlation time (width
                # samples) is much shorter than a decision window, so every
                # window samples the same variation and the prediction-error
                # distributions stay stable from window to window
                rough = rng.standard_normal(total)
                smooth = np.convolve(rough, np.ones(width) / width, mode="same")
                return 1.0 + depth * smooth / max(smooth.std(), 1e-9)

            tempo = wander(0.02, 25)
            stride_phase = 2 * np.pi * freq * np.cumsum(tempo) / SAMPLE_RATE_HZ
            envelope = wander(0.06, 12)
            channels = []
            for c in range(6):
                sig = drift[c] + 0.08 * rng.standard_normal(total)
                for k in range(3):
                    sig += amp[c, k] * envelope * np.sin((k + 1) * stride_phase + phase[c, k])
                channels.append(sig)
            readings = np.stack(channels, axis=1)
            # non-walk padding is low-amplitude noise
            readings[:pad] *= 0.05
            readings[pad + walk_len:] *= 0.05
            acc, gyro = readings[:, :3], readings[:, 3:]
            np.savetxt(root / f"acc_exp{exp_id:02d}_user{user:02d}.txt", acc, fmt="%.6f")
            np.savetxt(root / f"gyro_exp{exp_id:02d}_user{user:02d}.txt", gyro, fmt="%.6f")
            label_rows.append(f"{exp_id} {user} 5 0 {pad - 1}")
            label_rows.append(f"{exp_id} {user} {ACTIVITY_WALK} {pad} {pad + walk_len - 1}")
            label_rows.append(f"{exp_id} {user} 5 {pad + walk_len} {total - 1}")
    (root / "labels.txt").write_text("\n".join(label_rows) + "\n")
    return root
