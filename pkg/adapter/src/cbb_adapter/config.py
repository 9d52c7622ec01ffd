"""Adapter configuration.

AdapterConfig names the model, the battery to run over, where masks go,
and how to export them; its fine-tune block carries the training
hyperparameters. Defaults are the adapter's reference recipe: AdamW at
learning rate 5e-5 with weight decay 0.01, cosine schedule with warmup
over the first 10% of steps, batch size 4, 15 epochs, and an equally
weighted cross-entropy + Dice loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

EXPORT_MODES = ("binary", "probability")
SCHEDULES = ("cosine", "constant")


@dataclass(frozen=True)
class FineTuneSettings:
    learning_rate: float = 5e-5
    schedule: str = "cosine"
    warmup_fraction: float = 0.10
    batch_size: int = 4
    weight_decay: float = 0.01
    epochs: int = 15
    ce_weight: float = 1.0
    dice_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.schedule not in SCHEDULES:
            raise ValueError(
                f"schedule must be one of {SCHEDULES}, got {self.schedule!r}"
            )
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError(
                f"warmup_fraction must be in [0, 1), got {self.warmup_fraction}"
            )
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be at least 1, got {self.epochs}")
        if self.ce_weight < 0 or self.dice_weight < 0:
            raise ValueError("loss weights must be non-negative")
        if self.ce_weight == 0 and self.dice_weight == 0:
            raise ValueError("at least one loss weight must be positive")


@dataclass(frozen=True)
class AdapterConfig:
    model: str
    battery_manifest: Path
    out_dir: Path
    device: str = "cpu"
    export: str = "binary"
    checkpoint: Path | None = None
    training_manifest: Path | None = None
    deterministic: bool = False
    finetune: FineTuneSettings = field(default_factory=FineTuneSettings)

    def __post_init__(self) -> None:
        object.__setattr__(self, "battery_manifest", Path(self.battery_manifest))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if self.checkpoint is not None:
            object.__setattr__(self, "checkpoint", Path(self.checkpoint))
        if self.training_manifest is not None:
            object.__setattr__(self, "training_manifest", Path(self.training_manifest))
        if self.export not in EXPORT_MODES:
            raise ValueError(
                f"export must be one of {EXPORT_MODES}, got {self.export!r}"
            )
