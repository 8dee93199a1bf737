import numpy as np
import pytest

from sidsim import data as dat
from sidsim.errors import (
    ClockMismatchError,
    InsufficientDataError,
    MalformedRowError,
    MissingFileError,
)


@pytest.fixture(scope="module")
def raw_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("hapt")
    dat.write_synthetic_hapt(root, n_users=30, seed=1, walk_seconds=20.0)
    return root


@pytest.fixture(scope="module")
def dataset(raw_root):
    return dat.load_hapt(raw_root)


def test_loads_all_users(dataset):
    assert sorted(dataset) == list(range(1, 31))
    for user, intervals in dataset.items():
        assert intervals, f"user {user} has no WALK intervals"
        for iv in intervals:
            assert iv.shape[1] == 6
            assert np.all(np.isfinite(iv))


def test_walk_filter_drops_other_activities(raw_root, dataset):
    other = dat.load_hapt(raw_root, activity=5)
    # padding intervals are shorter than the walk block
    assert sum(len(iv) for iv in other[1]) < sum(len(iv) for iv in dataset[1])


def test_missing_labels_file(tmp_path):
    with pytest.raises(MissingFileError):
        dat.load_hapt(tmp_path)


def test_malformed_token_reported_with_position(tmp_path):
    dat.write_synthetic_hapt(tmp_path, n_users=1, seed=0, experiments_per_user=1,
                             walk_seconds=3.0)
    victim = next(tmp_path.glob("acc_*.txt"))
    lines = victim.read_text().splitlines()
    parts = lines[4].split()
    parts[1] = "oops"
    lines[4] = " ".join(parts)
    victim.write_text("\n".join(lines) + "\n")
    with pytest.raises(MalformedRowError) as err:
        dat.load_hapt(tmp_path)
    assert err.value.line == 5
    assert err.value.column == 2


def test_clock_mismatch(tmp_path):
    dat.write_synthetic_hapt(tmp_path, n_users=1, seed=0, experiments_per_user=1,
                             walk_seconds=3.0)
    victim = next(tmp_path.glob("gyro_*.txt"))
    lines = victim.read_text().splitlines()
    victim.write_text("\n".join(lines[:-5]) + "\n")
    with pytest.raises(ClockMismatchError):
        dat.load_hapt(tmp_path)


def test_user_with_empty_walk_is_present(tmp_path):
    dat.write_synthetic_hapt(tmp_path, n_users=2, seed=0, experiments_per_user=1,
                             walk_seconds=3.0)
    labels = (tmp_path / "labels.txt").read_text().splitlines()
    kept = [row for row in labels if not row.startswith("1 1 1 ")]
    (tmp_path / "labels.txt").write_text("\n".join(kept) + "\n")
    streams = dat.load_hapt(tmp_path)
    assert streams[1] == []  # present, zero streams
    assert streams[2]


def test_make_windows_counts():
    one = [np.zeros((64, 6))]
    assert len(dat.make_windows(one, 64, 64)) == 1
    assert len(dat.make_windows([np.zeros((63, 6))], 64, 64)) == 0
    assert len(dat.make_windows([np.zeros((200, 6))], 64, 64)) == 3
    # windows never straddle interval boundaries
    two = [np.zeros((100, 6)), np.zeros((100, 6))]
    assert len(dat.make_windows(two, 64, 32)) == 2 * 2


def test_window_duration_metadata():
    assert 64 / dat.SAMPLE_RATE_HZ == pytest.approx(1.28)
    assert 200 / dat.SAMPLE_RATE_HZ == pytest.approx(4.0)


def test_partition_disjoint_and_ordered(dataset):
    parts = dat.partition_user(dataset[3])
    total = sum(len(iv) for iv in dataset[3])
    sizes = {p: sum(len(iv) for iv in parts[p]) for p in dat.PARTS}
    assert sum(sizes.values()) == total
    assert sizes["train"] == int(total * 0.70)
    # reading ranges are disjoint by construction: partitions cover the
    # timeline in order, so train windows and test windows cannot overlap
    assert sizes["test"] > 0 and sizes["val"] > 0


def test_build_split_deterministic(dataset):
    s1 = dat.build_split(dataset, seed=42)
    s2 = dat.build_split(dataset, seed=42)
    assert s1 == s2
    s3 = dat.build_split(dataset, seed=43)
    assert s3 != s1
    assert len(s1.registered) == 25
    assert len(s1.unregistered) == 5
    assert not set(s1.registered) & set(s1.unregistered)
    assert sorted(s1.all_users) == sorted(dataset)


def test_pairs_count(dataset):
    split = dat.build_split(dataset, seed=0)
    pairs = split.pairs()
    assert len(pairs) == 25 * 30
    assert len(set(pairs)) == len(pairs)
    assert all(u in split.registered for u, _ in pairs)


def test_unregistered_never_train(dataset):
    split = dat.build_split(dataset, seed=0)
    # training partitions are only ever materialized for registered users;
    # the split itself keeps the sets disjoint
    for v in split.unregistered:
        assert v not in split.registered


def test_split_round_trip(tmp_path, dataset):
    split = dat.build_split(dataset, seed=9)
    path = tmp_path / "split.json"
    split.save(path)
    assert dat.UserSplit.load(path) == split


def test_insufficient_users():
    with pytest.raises(InsufficientDataError):
        dat.build_split({1: [np.zeros((10, 6))]}, seed=0)


def test_partition_windows_and_insufficient(dataset):
    split = dat.build_split(dataset, seed=0)
    user = split.registered[0]
    train = dat.partition_windows(dataset, user, "train", 64, split)
    test = dat.partition_windows(dataset, user, "test", 64, split)
    assert train and test
    with pytest.raises(InsufficientDataError):
        dat.partition_windows(dataset, user, "test", 4096, split)


def test_cache_round_trip(tmp_path, dataset):
    path = tmp_path / "cache.npz"
    dat.save_cache(path, dataset)
    back = dat.load_cache(path)
    assert sorted(back) == sorted(dataset)
    for user in dataset:
        assert len(back[user]) == len(dataset[user])
        for a, b in zip(back[user], dataset[user]):
            assert np.array_equal(a, b)


def test_cache_missing(tmp_path):
    with pytest.raises(MissingFileError):
        dat.load_cache(tmp_path / "nope.npz")
