"""Model fitting: next-step LSTM, MLP classifier, Gaussian-kernel SVMs.

The LSTM trains to predict the next normalized reading; per-reading
prediction error is the squared L2 norm over the 6 channels, matching the
toolkit's error convention. Exported weights are per-gate matrices in the
candidate/forget/input/output naming of the bundle format.
"""

from __future__ import annotations

import math

import numpy as np
import torch
from sklearn.svm import SVC, OneClassSVM
from torch import nn

from .config import TrainingConfig


class ConvergenceFailure(Exception):
    """Loss never improved within the patience budget."""


def _seed_everything(seed: int) -> None:
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)
    torch.set_num_threads(1)


# ---------------------------------------------------------------------------
# LSTM next-step predictor

class _NextStepLstm(nn.Module):
    def __init__(self, hidden: int):
        super().__init__()
        self.lstm = nn.LSTM(6, hidden, batch_first=True)
        self.head = nn.Linear(hidden, 6)

    def forward(self, x):
        out, _ = self.lstm(x)
        return self.head(out)


def train_lstm(windows: np.ndarray, val_windows: np.ndarray,
               config: TrainingConfig) -> dict[str, np.ndarray]:
    """Fit the predictor and export per-gate numpy weights."""
    _seed_everything(config.seed)
    hidden = config.hidden[0]
    model = _NextStepLstm(hidden)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    x = torch.tensor(windows, dtype=torch.float32)
    xv = torch.tensor(val_windows, dtype=torch.float32)
    best = math.inf
    best_state = None
    stale = 0
    for _ in range(config.epochs):
        model.train()
        perm = torch.randperm(x.shape[0])
        for i in range(0, x.shape[0], config.batch_size):
            batch = x[perm[i : i + config.batch_size]]
            optimizer.zero_grad()
            pred = model(batch[:, :-1])
            loss = nn.functional.mse_loss(pred, batch[:, 1:])
            loss.backward()
            optimizer.step()
        model.eval()
        with torch.no_grad():
            val_loss = float(nn.functional.mse_loss(model(xv[:, :-1]), xv[:, 1:]))
        if val_loss < best - 1e-9:
            best, stale = val_loss, 0
            best_state = {k: v.clone() for k, v in model.state_dict().items()}
        else:
            stale += 1
            if stale > config.patience:
                break
    if best_state is None:
        raise ConvergenceFailure("validation loss never improved")
    model.load_state_dict(best_state)

    # torch gate order in weight_ih/weight_hh rows: input, forget, cand, output
    w_ih = model.lstm.weight_ih_l0.detach().numpy().astype(np.float64)
    w_hh = model.lstm.weight_hh_l0.detach().numpy().astype(np.float64)
    bias = (model.lstm.bias_ih_l0 + model.lstm.bias_hh_l0).detach().numpy().astype(np.float64)
    h = hidden
    rows = {"input": slice(0, h), "forget": slice(h, 2 * h),
            "cand": slice(2 * h, 3 * h), "output": slice(3 * h, 4 * h)}
    arrays = {}
    for gate, sl in rows.items():
        arrays[f"lstm.w_{gate}"] = w_ih[sl]
        arrays[f"lstm.u_{gate}"] = w_hh[sl]
        arrays[f"lstm.b_{gate}"] = bias[sl]
    arrays["lstm.proj"] = model.head.weight.detach().numpy().astype(np.float64)
    arrays["lstm.proj_bias"] = model.head.bias.detach().numpy().astype(np.float64)
    return arrays


def lstm_prediction_errors(arrays: dict[str, np.ndarray], window: np.ndarray) -> np.ndarray:
    """Squared next-step errors of the exported weights over one window,
    computed with plain numpy (the bundle consumer's semantics)."""
    sigmoid = lambda v: 1.0 / (1.0 + np.exp(-v))
    h = np.zeros(arrays["lstm.b_cand"].shape[0])
    c = np.zeros_like(h)
    errors = np.empty(window.shape[0] - 1)
    for t in range(window.shape[0] - 1):
        x = window[t]
        cand = np.tanh(arrays["lstm.w_cand"] @ x + arrays["lstm.u_cand"] @ h + arrays["lstm.b_cand"])
        f = sigmoid(arrays["lstm.w_forget"] @ x + arrays["lstm.u_forget"] @ h + arrays["lstm.b_forget"])
        i = sigmoid(arrays["lstm.w_input"] @ x + arrays["lstm.u_input"] @ h + arrays["lstm.b_input"])
        o = sigmoid(arrays["lstm.w_output"] @ x + arrays["lstm.u_output"] @ h + arrays["lstm.b_output"])
        c = f * c + i * cand
        h = o * np.tanh(c)
        pred = arrays["lstm.proj"] @ h + arrays["lstm.proj_bias"]
        delta = pred - window[t + 1]
        errors[t] = float(delta @ delta)
    return errors


# ---------------------------------------------------------------------------
# MLP classifier

class _Mlp(nn.Module):
    def __init__(self, sizes):
        super().__init__()
        self.layers = nn.ModuleList(
            nn.Linear(a, b) for a, b in zip(sizes, sizes[1:])
        )

    def forward(self, x):
        for layer in self.layers[:-1]:
            x = torch.sigmoid(layer(x))
        return self.layers[-1](x)


def train_mlp(neg: np.ndarray, pos: np.ndarray, val_neg, val_pos,
              config: TrainingConfig) -> dict[str, np.ndarray]:
    """Two-class training; class 1 is the impostor class."""
    _seed_everything(config.seed)
    d = neg.shape[1]
    sizes = [d, *config.hidden, 2]
    model = _Mlp(sizes)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    x = torch.tensor(np.vstack([neg, pos]), dtype=torch.float32)
    y = torch.tensor([0] * len(neg) + [1] * len(pos))
    xv = torch.tensor(np.vstack([val_neg, val_pos]), dtype=torch.float32)
    yv = torch.tensor([0] * len(val_neg) + [1] * len(val_pos))
    best = math.inf
    best_state = None
    stale = 0
    for _ in range(config.epochs):
        model.train()
        perm = torch.randperm(x.shape[0])
        for i in range(0, x.shape[0], config.batch_size):
            idx = perm[i : i + config.batch_size]
            optimizer.zero_grad()
            loss = nn.functional.cross_entropy(model(x[idx]), y[idx])
            loss.backward()
            optimizer.step()
        model.eval()
        with torch.no_grad():
            val_loss = float(nn.functional.cross_entropy(model(xv), yv))
        if val_loss < best - 1e-9:
            best, stale = val_loss, 0
            best_state = {k: v.clone() for k, v in model.state_dict().items()}
        else:
            stale += 1
            if stale > config.patience:
                break
    if best_state is None:
        raise ConvergenceFailure("validation loss never improved")
    model.load_state_dict(best_state)
    arrays = {}
    for i, layer in enumerate(model.layers):
        arrays[f"mlp.w{i}"] = layer.weight.detach().numpy().astype(np.float64)
        arrays[f"mlp.b{i}"] = layer.bias.detach().numpy().astype(np.float64)
    return arrays


# ---------------------------------------------------------------------------
# SVMs

def train_svm(neg, pos, val_neg, val_pos, config: TrainingConfig):
    """Two-class Gaussian SVM; C picked on validation accuracy."""
    x = np.vstack([neg, pos])
    y = np.array([0] * len(neg) + [1] * len(pos))
    best = None
    for c in config.svm_c_grid:
        clf = SVC(C=c, kernel="rbf", gamma=config.gamma)
        clf.fit(x, y)
        score = clf.score(np.vstack([val_neg, val_pos]),
                          [0] * len(val_neg) + [1] * len(val_pos))
        if best is None or score > best[0]:
            best = (score, clf)
    clf = best[1]
    return {
        "svm.support": clf.support_vectors_.astype(np.float64),
        "svm.duals": clf.dual_coef_[0].astype(np.float64),
    }, float(clf.intercept_[0])


def train_ocsvm(train, val, config: TrainingConfig):
    """One-class SVM on the owner's data only; nu picked for the tightest
    support that still accepts most validation windows."""
    best = None
    for nu in config.svm_nu_grid:
        clf = OneClassSVM(kernel="rbf", gamma=config.gamma, nu=nu)
        clf.fit(train)
        accept = float(np.mean(clf.predict(val) == 1))
        score = accept - nu  # favor acceptance, penalize loose supports
        if best is None or score > best[0]:
            best = (score, clf)
    clf = best[1]
    return {
        "svm.support": clf.support_vectors_.astype(np.float64),
        "svm.duals": clf.dual_coef_[0].astype(np.float64),
    }, float(clf.intercept_[0])
