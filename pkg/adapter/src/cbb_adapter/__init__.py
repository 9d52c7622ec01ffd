"""Neural segmentation adapter for the cbb change-detection harness.

Bridges real segmentation models into the harness through its file
contracts only: reads the JSONL battery/training manifests, runs battery
inference, exports mask directories in the external naming scheme, and
fine-tunes with per-epoch mask dumps for dynamics analysis. Scoring stays
in the harness; this package never computes ratios or decisions.
"""

from .config import AdapterConfig, FineTuneSettings
from .errors import AdapterError, ManifestError, ModelLoadError, TrainingDiverged
from .inference import run_inference
from .manifest import read_battery_manifest, read_training_manifest
from .models import PRESETS, TinyUNet, build_model
from .training import fine_tune

__all__ = [
    "AdapterConfig",
    "AdapterError",
    "FineTuneSettings",
    "ManifestError",
    "ModelLoadError",
    "PRESETS",
    "TinyUNet",
    "TrainingDiverged",
    "build_model",
    "fine_tune",
    "read_battery_manifest",
    "read_training_manifest",
    "run_inference",
]
