"""Readers for the prepared-dataset interface files.

The cache is a .npz whose members `uNN_iKKK` are float64 (len, 6) intervals;
the split JSON carries the registered/unregistered assignment, the 70/15/15
partition ratios, and the training stride. Partitioning cuts each user's
concatenated timeline at reading granularity, dividing intervals that
straddle a cut, so partitions never share reading ranges.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class InsufficientDataError(Exception):
    pass


@dataclass
class Split:
    seed: int
    registered: list[int]
    unregistered: list[int]
    ratios: tuple
    train_stride: int

    @classmethod
    def load(cls, path) -> "Split":
        d = json.loads(Path(path).read_text())
        return cls(d["seed"], d["registered"], d["unregistered"],
                   tuple(d["ratios"]), d["train_stride"])


def load_cache(path) -> dict[int, list[np.ndarray]]:
    dataset: dict[int, list[np.ndarray]] = {}
    with np.load(path) as npz:
        for name in sorted(npz.files):
            m = re.match(r"u(\d+)_i(\d+)$", name)
            if m:
                dataset.setdefault(int(m.group(1)), []).append(npz[name])
    return dataset


def partition_user(intervals, ratios) -> dict[str, list[np.ndarray]]:
    total = sum(len(iv) for iv in intervals)
    cut1 = int(total * ratios[0])
    cut2 = int(total * (ratios[0] + ratios[1]))
    parts = {"train": [], "val": [], "test": []}
    pos = 0
    for interval in intervals:
        for lo, hi, part in ((0, cut1, "train"), (cut1, cut2, "val"), (cut2, total, "test")):
            s = max(lo - pos, 0)
            e = min(hi - pos, len(interval))
            if e - s > 0:
                parts[part].append(interval[s:e])
        pos += len(interval)
    return parts


def make_windows(intervals, w, stride):
    out = []
    for interval in intervals:
        for start in range(0, len(interval) - w + 1, stride):
            out.append(interval[start : start + w])
    return out


def user_windows(dataset, split: Split, user: int, part: str, w: int) -> list[np.ndarray]:
    if user not in dataset:
        raise InsufficientDataError(f"user {user} not in dataset")
    stride = split.train_stride if part == "train" else w
    parts = partition_user(dataset[user], split.ratios)
    windows = make_windows(parts[part], w, stride)
    if not windows:
        raise InsufficientDataError(f"user {user}: no {part} windows at W={w}")
    return windows


def normalization_stats(dataset, split: Split, user: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean/std over the user's training readings only."""
    train = partition_user(dataset[user], split.ratios)["train"]
    if not train:
        raise InsufficientDataError(f"user {user}: empty training partition")
    readings = np.concatenate(train, axis=0)
    mu = readings.mean(axis=0)
    sigma = readings.std(axis=0)
    sigma[sigma < 1e-6] = 1.0  # constant channels normalize to zero
    return mu, sigma
