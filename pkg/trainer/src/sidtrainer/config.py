"""Training configuration and the evaluated model grid."""

from __future__ import annotations

from dataclasses import dataclass

MODEL_KINDS = ("mlp", "svm", "ocsvm", "lstm_th", "ped_lstm_vote")

# hidden-size grids the experiments cover; anything else must be marked custom
LSTM_GRID = ((50,), (100,), (200,), (500,))
MLP_GRID = ((50,), (100,), (200,), (500,), (200, 100), (50, 25), (100, 50))

SUPPORTED_ALPHAS = (0.15, 0.10, 0.05, 0.025)


@dataclass
class TrainingConfig:
    model: str
    window: int = 64
    hidden: tuple[int, ...] = (200,)
    alpha: float = 0.10
    seed: int = 0
    epochs: int = 60
    batch_size: int = 32
    learning_rate: float = 3e-3
    patience: int = 10
    ped_references: int = 20
    svm_c_grid: tuple[float, ...] = (0.1, 1.0, 10.0)
    svm_nu_grid: tuple[float, ...] = (0.01, 0.02, 0.05, 0.1, 0.2)
    custom: bool = False

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.model!r}")
        if self.model == "ped_lstm_vote" and self.alpha not in SUPPORTED_ALPHAS:
            raise ValueError(f"alpha must be one of {SUPPORTED_ALPHAS}")
        grid = MLP_GRID if self.model == "mlp" else LSTM_GRID
        if self.model in ("mlp", "lstm_th", "ped_lstm_vote"):
            if tuple(self.hidden) not in grid and not self.custom:
                raise ValueError(
                    f"hidden={self.hidden} is outside the evaluated grid; "
                    "pass custom=True to use it anyway"
                )

    @property
    def gamma(self) -> float:
        return 1.0 / (6 * self.window)
