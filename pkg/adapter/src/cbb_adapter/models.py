"""Two-class segmentation models, pluggable by identifier.

One small fully convolutional encoder-decoder in six widths. The presets
are a documented family, not a hard dependency: anything that maps an RGB
batch to two-channel logits at the same spatial size can stand in, and the
export path handles models whose output resolution differs from the
battery's.
"""

from __future__ import annotations

import hashlib
import io
from pathlib import Path

import torch
from torch import nn
from torch.nn import functional as F

from .errors import ModelLoadError

# width of the first encoder stage per preset; parameters grow roughly
# with the square of the width (t0 ~ 13k params, t5 ~ 460k)
PRESETS = {
    "unet-t0": 8,
    "unet-t1": 12,
    "unet-t2": 16,
    "unet-t3": 24,
    "unet-t4": 32,
    "unet-t5": 48,
}


def _block(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv2d(c_out, c_out, 3, padding=1),
        nn.ReLU(inplace=True),
    )


class TinyUNet(nn.Module):
    """Three-level U-shaped net: two downsamplings, skip connections, and a
    two-channel logit head at input resolution (input padded internally to
    a multiple of four)."""

    def __init__(self, width: int = 16):
        super().__init__()
        w = width
        self.enc1 = _block(3, w)
        self.enc2 = _block(w, 2 * w)
        self.mid = _block(2 * w, 4 * w)
        self.dec2 = _block(4 * w + 2 * w, 2 * w)
        self.dec1 = _block(2 * w + w, w)
        self.head = nn.Conv2d(w, 2, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        pad_h, pad_w = (-h) % 4, (-w) % 4
        if pad_h or pad_w:
            x = F.pad(x, (0, pad_w, 0, pad_h), mode="replicate")
        e1 = self.enc1(x)
        e2 = self.enc2(F.max_pool2d(e1, 2))
        m = self.mid(F.max_pool2d(e2, 2))
        up2 = F.interpolate(m, scale_factor=2, mode="nearest")
        d2 = self.dec2(torch.cat([up2, e2], dim=1))
        up1 = F.interpolate(d2, scale_factor=2, mode="nearest")
        d1 = self.dec1(torch.cat([up1, e1], dim=1))
        return self.head(d1)[..., :h, :w]


def build_model(identifier: str) -> TinyUNet:
    """Instantiate a preset by identifier (freshly initialized weights)."""
    if identifier not in PRESETS:
        raise ModelLoadError(
            f"unknown model identifier {identifier!r}; "
            f"presets: {', '.join(sorted(PRESETS))}"
        )
    return TinyUNet(PRESETS[identifier])


def load_checkpoint(model: nn.Module, path: str | Path) -> str:
    """Load a state-dict checkpoint into the model; returns the checkpoint
    file's SHA-256 for the metadata sidecar."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ModelLoadError(f"cannot read checkpoint: {exc}") from None
    try:
        state = torch.load(io.BytesIO(data), map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    except Exception as exc:
        raise ModelLoadError(f"{path}: checkpoint does not fit the model: {exc}") from None
    return hashlib.sha256(data).hexdigest()


def state_hash(model: nn.Module) -> str:
    """SHA-256 over the serialized current weights (used when no checkpoint
    file is involved, so the sidecar still pins what ran)."""
    buf = io.BytesIO()
    torch.save(model.state_dict(), buf)
    return hashlib.sha256(buf.getvalue()).hexdigest()
