"""Per-user training orchestration: splits in, one bundle archive out."""

from __future__ import annotations

import numpy as np

from . import bundles, dataio, models, peds
from .config import TrainingConfig
from .luts import default_luts


def _flatten(windows) -> np.ndarray:
    return np.stack([w.reshape(-1) for w in windows])


def _normalized(windows, mu, sigma) -> np.ndarray:
    return np.stack([(w - mu) / sigma for w in windows])


def _impostor_windows(dataset, split, user, part, w, rng, count):
    """Windows sampled evenly from the other registered users."""
    others = [u for u in split.registered if u != user]
    pool = []
    for other in others:
        pool.extend(dataio.user_windows(dataset, split, other, part, w))
    if not pool:
        raise dataio.InsufficientDataError("no impostor windows available")
    idx = rng.choice(len(pool), size=min(count, len(pool)), replace=False)
    return [pool[i] for i in idx]


def train_model(config: TrainingConfig, dataset, split: dataio.Split,
                user: int, out_path) -> dict:
    """Train one detector for one registered user and write its bundle.

    Returns the manifest that was written.
    """
    rng = np.random.default_rng(config.seed * 1009 + user)
    w = config.window
    mu, sigma = dataio.normalization_stats(dataset, split, user)
    train_w = _normalized(dataio.user_windows(dataset, split, user, "train", w), mu, sigma)
    val_w = _normalized(dataio.user_windows(dataset, split, user, "val", w), mu, sigma)

    manifest = bundles.base_manifest(config.model, w, user, dataset_seed=split.seed)
    manifest["alpha"] = config.alpha if config.model == "ped_lstm_vote" else None
    manifest["threshold"] = None
    arrays: dict[str, np.ndarray] = {"norm.mu": mu, "norm.sigma": sigma}

    if config.model in ("lstm_th", "ped_lstm_vote"):
        arrays.update(models.train_lstm(train_w, val_w, config))
        manifest["hidden_size"] = config.hidden[0]
        val_errors = [models.lstm_prediction_errors(arrays, win) for win in val_w]
        if config.model == "ped_lstm_vote":
            n = w - 1
            count = min(config.ped_references, len(val_errors))
            picks = rng.choice(len(val_errors), size=count, replace=len(val_errors) < count)
            thresholds = []
            for j, pick in enumerate(picks):
                arrays[f"ped.{j:02d}.boundaries"] = peds.ped_boundaries(val_errors[pick])
                arrays[f"ped.{j:02d}.cum"] = np.arange(1, n + 1, dtype=np.float64)
                thresholds.append(peds.scaled_threshold(config.alpha, n, n))
            manifest["ped"] = {"count": count, "n": n, "m": n, "thresholds": thresholds}
        else:
            manifest["threshold"] = float(
                np.percentile([float(np.mean(e)) for e in val_errors], 95)
            )
    elif config.model == "mlp":
        neg = _flatten(train_w)
        pos = _flatten(_normalized(
            _impostor_windows(dataset, split, user, "train", w, rng, len(train_w)),
            mu, sigma))
        vneg = _flatten(val_w)
        vpos = _flatten(_normalized(
            _impostor_windows(dataset, split, user, "val", w, rng, len(val_w)),
            mu, sigma))
        arrays.update(models.train_mlp(neg, pos, vneg, vpos, config))
        manifest["mlp_layers"] = len(config.hidden) + 1
    elif config.model in ("svm", "ocsvm"):
        if config.model == "svm":
            neg = _flatten(train_w)
            pos = _flatten(_normalized(
                _impostor_windows(dataset, split, user, "train", w, rng, len(train_w)),
                mu, sigma))
            vneg = _flatten(val_w)
            vpos = _flatten(_normalized(
                _impostor_windows(dataset, split, user, "val", w, rng, len(val_w)),
                mu, sigma))
            svm_arrays, intercept = models.train_svm(neg, pos, vneg, vpos, config)
        else:
            svm_arrays, intercept = models.train_ocsvm(_flatten(train_w), _flatten(val_w), config)
        arrays.update(svm_arrays)
        manifest["svm_gamma"] = config.gamma
        manifest["svm_bias"] = intercept
    else:  # pragma: no cover - config validates kinds
        raise ValueError(config.model)

    bundles.add_luts(manifest, arrays, default_luts())
    bundles.write_bundle(out_path, manifest, arrays)
    return manifest
