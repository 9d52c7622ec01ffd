"""Battery inference and external-contract mask export.

run_inference loads the battery's rendered frames, pushes them through the
model in batches, and writes one mask file per frame using the harness's
external naming (``<trial_id>_init.png`` / ``<trial_id>_out.png``) into
the output directory, plus a ``metadata.json`` sidecar pinning the model
id, checkpoint hash, export mode, and any resize that was applied.

Export modes:
- binary: foreground iff the foreground softmax exceeds one half (the
  two-class argmax with ties to background), written as 8-bit {0, 255}.
- probability: the foreground softmax channel scaled to 16-bit grayscale.

If the model emits a different spatial size than the battery frame, the
output is resized to the frame: nearest-neighbor for binary masks,
bilinear for probability maps; the resize is recorded in the sidecar.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch.nn import functional as F

from .config import AdapterConfig
from .errors import ModelLoadError
from .manifest import BatteryIndex, read_battery_manifest
from .models import build_model, load_checkpoint, state_hash

_BATCH = 8


def seed_everything(on: bool) -> None:
    """Pin the torch RNG and refuse nondeterministic kernels."""
    if on:
        torch.manual_seed(0)
        torch.use_deterministic_algorithms(True)


def load_image(path: Path) -> torch.Tensor:
    """Rendered frame as a float (3, H, W) tensor in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1)


def write_binary_mask(path: Path, mask: np.ndarray) -> None:
    data = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path, format="PNG")


def write_probability_map(path: Path, probs: np.ndarray) -> None:
    data = np.round(np.clip(probs, 0.0, 1.0) * 65535.0).astype(np.uint16)
    Image.fromarray(data).save(path, format="PNG")


def prepare_model(config: AdapterConfig):
    """Build the configured model, load its checkpoint if any, and return
    (model in eval mode, checkpoint hash)."""
    model = build_model(config.model)
    if config.checkpoint is not None:
        ckpt_hash = load_checkpoint(model, config.checkpoint)
    else:
        ckpt_hash = state_hash(model)
    try:
        model = model.to(config.device)
    except (RuntimeError, ValueError) as exc:
        raise ModelLoadError(f"cannot move model to {config.device!r}: {exc}") from None
    model.eval()
    return model, ckpt_hash


def export_battery_masks(
    model, battery: BatteryIndex, config: AdapterConfig, out_dir: Path
) -> dict:
    """Run the model over every frame of the battery and write the mask
    directory; returns the resize record (None if sizes already matched)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = [
        (trial, role, path)
        for trial in battery.trials
        for role, path in (("init", trial.init_image), ("out", trial.out_image))
    ]
    size = battery.resolution
    resize_record = None
    with torch.no_grad():
        for start in range(0, len(frames), _BATCH):
            chunk = frames[start : start + _BATCH]
            batch = torch.stack([load_image(p) for _, _, p in chunk])
            batch = batch.to(config.device)
            logits = model(batch)
            probs = torch.softmax(logits, dim=1)[:, 1]
            if probs.shape[-2:] != (size, size):
                mode = "nearest" if config.export == "binary" else "bilinear"
                resize_record = {
                    "from": [int(probs.shape[-2]), int(probs.shape[-1])],
                    "to": [size, size],
                    "mode": mode,
                }
                if config.export == "binary":
                    hard = (probs > 0.5).float().unsqueeze(1)
                    probs = F.interpolate(hard, size=(size, size), mode="nearest")[:, 0]
                else:
                    probs = F.interpolate(
                        probs.unsqueeze(1),
                        size=(size, size),
                        mode="bilinear",
                        align_corners=False,
                    )[:, 0]
            arr = probs.cpu().numpy()
            for (trial, role, _), plane in zip(chunk, arr):
                target = out_dir / f"{trial.trial_id}_{role}.png"
                if config.export == "binary":
                    write_binary_mask(target, plane > 0.5)
                else:
                    write_probability_map(target, plane)
    return resize_record


def write_sidecar(
    out_dir: Path, config: AdapterConfig, ckpt_hash: str, resize_record, n_files: int
) -> None:
    payload = {
        "model": config.model,
        "checkpoint_sha256": ckpt_hash,
        "export": config.export,
        "device": config.device,
        "deterministic": config.deterministic,
        "resize": resize_record,
        "mask_files": n_files,
    }
    (out_dir / "metadata.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def run_inference(config: AdapterConfig) -> Path:
    """Segment every frame of the configured battery into the output mask
    directory; returns that directory."""
    seed_everything(config.deterministic)
    battery = read_battery_manifest(config.battery_manifest)
    model, ckpt_hash = prepare_model(config)
    out_dir = Path(config.out_dir)
    resize_record = export_battery_masks(model, battery, config, out_dir)
    write_sidecar(out_dir, config, ckpt_hash, resize_record, 2 * len(battery.trials))
    return out_dir
