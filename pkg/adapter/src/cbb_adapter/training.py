"""Fine-tuning with per-epoch mask dumps.

fine_tune trains the configured model on a harness training set and,
after every epoch, saves a checkpoint and runs battery inference into
``epoch_<k>/`` under the output directory, so the harness dynamics command
can chart how sensitivity evolves over training. Optimization follows the
config's fine-tune block: AdamW, cosine schedule with linear warmup (the
warmup fraction is recorded in the metadata), and a weighted
cross-entropy + Dice loss.

Failure modes surface explicitly: a non-finite loss aborts with the epoch
index, and an allocator failure aborts with advice to lower the batch
size.
"""

from __future__ import annotations

import json
import math
from dataclasses import replace
from pathlib import Path

import torch
from torch.nn import functional as F

from .config import AdapterConfig
from .errors import AdapterError, TrainingDiverged
from .inference import (
    export_battery_masks,
    load_image,
    prepare_model,
    seed_everything,
    write_sidecar,
)
from .manifest import read_battery_manifest, read_training_manifest
from .models import state_hash

import numpy as np
from PIL import Image


def _load_mask(path: Path) -> torch.Tensor:
    """Ground-truth mask as a (H, W) long tensor of {0, 1} class ids."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return torch.from_numpy((arr > 127).astype(np.int64))


def _schedule_factor(step: int, warmup: int, total: int, kind: str) -> float:
    if kind == "constant":
        return 1.0
    if step < warmup:
        return (step + 1) / max(warmup, 1)
    progress = (step - warmup) / max(total - warmup, 1)
    return 0.5 * (1.0 + math.cos(math.pi * progress))


def _loss(logits: torch.Tensor, target: torch.Tensor, ce_w: float, dice_w: float):
    ce = F.cross_entropy(logits, target)
    probs = torch.softmax(logits, dim=1)[:, 1]
    t = target.float()
    overlap = (probs * t).sum()
    dice = (2.0 * overlap + 1.0) / (probs.sum() + t.sum() + 1.0)
    return ce_w * ce + dice_w * (1.0 - dice)


def fine_tune(config: AdapterConfig) -> tuple[Path, ...]:
    """Train on the configured training set; returns the per-epoch mask
    directories (``epoch_1`` .. ``epoch_<epochs>``), each written by a full
    battery inference pass with the epoch's weights."""
    if config.training_manifest is None:
        raise AdapterError("fine_tune needs config.training_manifest")
    seed_everything(config.deterministic)
    training = read_training_manifest(config.training_manifest)
    battery = read_battery_manifest(config.battery_manifest)
    model, _ = prepare_model(config)
    ft = config.finetune

    images = torch.stack([load_image(ex.image) for ex in training.examples])
    masks = torch.stack([_load_mask(ex.mask) for ex in training.examples])
    n = len(training.examples)
    steps_per_epoch = math.ceil(n / ft.batch_size)
    total_steps = ft.epochs * steps_per_epoch
    warmup_steps = int(round(ft.warmup_fraction * total_steps))

    optimizer = torch.optim.AdamW(
        model.parameters(), lr=ft.learning_rate, weight_decay=ft.weight_decay
    )
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer,
        lambda step: _schedule_factor(step, warmup_steps, total_steps, ft.schedule),
    )
    shuffler = torch.Generator()
    shuffler.manual_seed(0 if config.deterministic else torch.seed() % (2**63))

    out_root = Path(config.out_dir)
    ckpt_dir = out_root / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    epoch_dirs = []
    epoch_losses = []
    for epoch in range(1, ft.epochs + 1):
        model.train()
        order = torch.randperm(n, generator=shuffler)
        running = 0.0
        for start in range(0, n, ft.batch_size):
            idx = order[start : start + ft.batch_size]
            batch = images[idx].to(config.device)
            target = masks[idx].to(config.device)
            try:
                optimizer.zero_grad()
                loss = _loss(model(batch), target, ft.ce_weight, ft.dice_weight)
                if not torch.isfinite(loss):
                    raise TrainingDiverged(
                        f"loss became non-finite at epoch {epoch}"
                    )
                loss.backward()
                optimizer.step()
                scheduler.step()
            except RuntimeError as exc:
                if "out of memory" in str(exc).lower():
                    raise AdapterError(
                        f"allocator failure at batch size {ft.batch_size}; "
                        "reduce finetune.batch_size and rerun"
                    ) from None
                raise
            running += float(loss.detach())
        epoch_losses.append(running / steps_per_epoch)

        model.eval()
        torch.save(model.state_dict(), ckpt_dir / f"epoch_{epoch}.pt")
        epoch_dir = out_root / f"epoch_{epoch}"
        resize_record = export_battery_masks(model, battery, config, epoch_dir)
        write_sidecar(
            epoch_dir,
            replace(config, checkpoint=ckpt_dir / f"epoch_{epoch}.pt"),
            state_hash(model),
            resize_record,
            2 * len(battery.trials),
        )
        epoch_dirs.append(epoch_dir)

    metadata = {
        "model": config.model,
        "epochs": ft.epochs,
        "optimizer": "AdamW",
        "learning_rate": ft.learning_rate,
        "weight_decay": ft.weight_decay,
        "batch_size": ft.batch_size,
        "schedule": {
            "type": ft.schedule,
            "warmup_fraction": ft.warmup_fraction,
            "warmup_steps": warmup_steps,
            "total_steps": total_steps,
        },
        "loss_weights": {"cross_entropy": ft.ce_weight, "dice": ft.dice_weight},
        "training_examples": n,
        "epoch_mean_loss": epoch_losses,
        "deterministic": config.deterministic,
    }
    (out_root / "training_metadata.json").write_text(
        json.dumps(metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return tuple(epoch_dirs)
