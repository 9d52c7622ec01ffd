"""Read-only view of the harness's JSONL manifests.

The adapter talks to the harness purely through files: it reads the
battery/training manifests the harness writes and later hands back a mask
directory. This module parses just the fields the adapter needs (image
paths, ids, resolution) and resolves file references against the
manifest's directory, per the manifest contract. It deliberately does not
import the harness package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError

SCHEMA = "cbb/1"


@dataclass(frozen=True)
class TrialImages:
    """The two rendered frames of one trial."""

    trial_id: str
    condition: str
    init_image: Path
    out_image: Path


@dataclass(frozen=True)
class BatteryIndex:
    root: Path
    resolution: int
    trials: tuple[TrialImages, ...]


@dataclass(frozen=True)
class TrainingItem:
    example_id: str
    image: Path
    mask: Path


@dataclass(frozen=True)
class TrainingIndex:
    root: Path
    resolution: int
    examples: tuple[TrainingItem, ...]


def _read_lines(path: Path) -> tuple[dict, list[dict]]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest: {exc}") from None
    if not lines:
        raise ManifestError(f"{path}: empty manifest")
    rows = []
    for lineno, line in enumerate(lines, start=1):
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: line {lineno}: {exc}") from None
    header, items = rows[0], rows[1:]
    if header.get("schema") != SCHEMA:
        raise ManifestError(
            f"{path}: unsupported schema {header.get('schema')!r} "
            f"(this adapter reads {SCHEMA})"
        )
    return header, items


def _resolve(path: Path, root: Path, name: str) -> Path:
    target = root / name
    if not target.is_file():
        raise ManifestError(f"{path}: referenced file missing: {target}")
    return target


def read_battery_manifest(path: str | Path) -> BatteryIndex:
    """Load the trial frames of a battery manifest."""
    path = Path(path)
    header, items = _read_lines(path)
    if header.get("kind") != "battery":
        raise ManifestError(
            f"{path}: expected a battery manifest, got kind "
            f"{header.get('kind')!r}"
        )
    root = path.parent
    trials = []
    for lineno, row in enumerate(items, start=2):
        try:
            trials.append(
                TrialImages(
                    trial_id=row["trial_id"],
                    condition=row["condition"],
                    init_image=_resolve(path, root, row["init_img"]),
                    out_image=_resolve(path, root, row["out_img"]),
                )
            )
        except KeyError as exc:
            raise ManifestError(f"{path}: line {lineno}: missing {exc}") from None
    if not trials:
        raise ManifestError(f"{path}: battery has no trials")
    return BatteryIndex(
        root=root, resolution=int(header["resolution"]), trials=tuple(trials)
    )


def read_training_manifest(path: str | Path) -> TrainingIndex:
    """Load the image/mask pairs of a training manifest."""
    path = Path(path)
    header, items = _read_lines(path)
    if header.get("kind") != "training":
        raise ManifestError(
            f"{path}: expected a training manifest, got kind "
            f"{header.get('kind')!r}"
        )
    root = path.parent
    examples = []
    for lineno, row in enumerate(items, start=2):
        try:
            examples.append(
                TrainingItem(
                    example_id=row["example_id"],
                    image=_resolve(path, root, row["img"]),
                    mask=_resolve(path, root, row["gt"]),
                )
            )
        except KeyError as exc:
            raise ManifestError(f"{path}: line {lineno}: missing {exc}") from None
    if not examples:
        raise ManifestError(f"{path}: training set has no examples")
    return TrainingIndex(
        root=root, resolution=int(header["resolution"]), examples=tuple(examples)
    )
