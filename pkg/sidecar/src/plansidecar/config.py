"""Sidecar configuration."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class VerifierTrainConfig:
    """Verifier training hyperparameters.

    Defaults: ten epochs with early stopping on validation accuracy, batch
    size 32, learning rate 1e-5. All values are plain configuration.
    """

    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-5
    validation_fraction: float = 0.1
    early_stopping_patience: int = 3
    hidden_dim: int = 64
    feature_dim: int = 2048
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not (0.0 < self.validation_fraction < 1.0):
            raise ValueError("validation_fraction must be in (0, 1)")


@dataclass(frozen=True)
class SidecarConfig:
    """Model identifiers, device, determinism, and bind address.

    Model identifiers are either ``builtin:<seed>`` (a seeded tiny model
    created on the fly) or a path to a saved artifact directory. The
    completion backend defaults to the student model. The determinism flag
    forces temperature-0 (greedy) behaviour regardless of request sampling
    parameters, making repeated identical requests byte-identical.
    """

    student: str = "builtin:0"
    verifier: str = "builtin:0"
    completion: str | None = None
    device: str = "cpu"
    deterministic: bool = False
    host: str = "127.0.0.1"
    port: int = 0
    train: VerifierTrainConfig = field(default_factory=VerifierTrainConfig)
