"""Trial batteries and training sets on disk.

A battery is a set of before/after stimulus pairs across the four change
conditions, materialized as PNGs plus a JSONL manifest that observers,
scoring, and external model adapters all read. A training set is a list of
single polygons with their ground-truth masks for fitting segmentation
models. Everything is derived deterministically from a master seed; battery
and training seeds live in disjoint spaces keyed by distinct tag constants,
so no stimulus can appear on both sides.

Manifest layout: the first line is a schema-versioned header with run-level
settings; each following line is one trial (or training example). File
references are bare names relative to the manifest's directory, so a built
tree can be moved or compared byte-for-byte across locations.

File naming: ``<trial_id>_{init|out}_{img|gt}.png`` with
``trial_id = <zero-padded index>_<condition>``; training files are
``<index>_{img|gt}.png``. External adapters may rely on these names.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    GenerationFailed,
    ManifestError,
    NoSuitableSite,
    VersionError,
)
from .geometry import RETRY_BUDGET, EditCondition, GenParams, generate_polygon, make_edit
from .raster import PALETTE, rasterize, render_image, write_image, write_mask

SCHEMA = "cbb/1"

# seed-space tags: battery trials and training examples never share a
# derived seed, keeping evaluation stimuli out of the training data
_TAG_BATTERY = 0x42415454
_TAG_TRAIN = 0x5452414E

# stimulus display schedule (seconds), recorded with each battery for
# provenance; scoring reads masks and ignores it
PRESENTATION = {"init_s": 1.0, "blank_s": 2.0, "out_s": 1.0}

_CONDITION_ORDER = tuple(c.name for c in EditCondition)


@dataclass(frozen=True)
class TrialPair:
    """One before/after pair, fully materialized on disk."""

    trial_id: str
    condition: str
    init_image_path: Path
    out_image_path: Path
    init_gtmask_path: Path
    out_gtmask_path: Path
    a_seg_gt: int
    color_index: int
    seed: int
    gen_params: GenParams

    def __post_init__(self) -> None:
        if self.condition not in _CONDITION_ORDER:
            raise ValueError(f"unknown condition {self.condition!r}")
        if (self.a_seg_gt > 0) != (self.condition != "NOCHANGE"):
            raise ValueError(
                f"{self.trial_id}: a_seg_gt {self.a_seg_gt} is inconsistent "
                f"with condition {self.condition}"
            )
        if not 0 <= self.color_index < len(PALETTE):
            raise ValueError(f"color_index out of range: {self.color_index}")

    @property
    def init_path(self) -> Path:
        """Mask handed to observers for the before frame."""
        return self.init_gtmask_path

    @property
    def out_path(self) -> Path:
        """Mask handed to observers for the after frame."""
        return self.out_gtmask_path


@dataclass(frozen=True)
class BatteryConfig:
    n_per_condition: int
    rel_area: float = 0.05
    resolution: int = 512
    include_nochange: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_per_condition < 1:
            raise ValueError("n_per_condition must be at least 1")
        if not 0.0 < self.rel_area <= 0.15:
            raise ValueError(f"rel_area must be in (0, 0.15], got {self.rel_area}")
        if self.resolution < 32:
            raise ValueError(f"resolution must be at least 32, got {self.resolution}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class DatasetConfig:
    n_images: int
    resolution: int = 512
    n_vertices: tuple[int, int] = (5, 12)
    n_concavities: tuple[int, int] = (0, 3)
    irregularity: tuple[float, float] = (0.0, 1.0)
    spikiness: tuple[float, float] = (0.0, 1.0)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_images < 1:
            raise ValueError("n_images must be at least 1")
        if self.resolution < 32:
            raise ValueError(f"resolution must be at least 32, got {self.resolution}")
        for name in ("n_vertices", "n_concavities", "irregularity", "spikiness"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is empty: ({lo}, {hi})")
        if not (5 <= self.n_vertices[0] and self.n_vertices[1] <= 12):
            raise ValueError("n_vertices range must stay within [5, 12]")
        if not (0 <= self.n_concavities[0] and self.n_concavities[1] <= 3):
            raise ValueError("n_concavities range must stay within [0, 3]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class Battery:
    root: Path
    size: int
    rel_area: float
    seed: int
    trials: tuple[TrialPair, ...]

    @property
    def battery_id(self) -> str:
        return self.root.name


@dataclass(frozen=True)
class TrainingExample:
    example_id: str
    image_path: Path
    mask_path: Path
    color_index: int
    seed: int
    gen_params: GenParams


@dataclass(frozen=True)
class TrainingSet:
    root: Path
    size: int
    seed: int
    examples: tuple[TrainingExample, ...]

    @property
    def dataset_id(self) -> str:
        return self.root.name


def _sample_battery_params(condition: str, rng, trial_seed: int) -> GenParams:
    """Draw shape parameters biased so the condition's site type exists.

    Deep (narrow-mouth) cavities only appear when at least two concavities
    are carved, and deep-plus-shallow mixtures need spare vertices, so the
    interior-fill condition draws more vertices and concavities than the
    others. A draw without a usable site is simply retried by the caller.
    """
    if condition == "CONCAVE":
        n = int(rng.integers(7, 13))
        k = int(rng.integers(2, min(3, n - 4) + 1))
    elif condition == "NOFILL":
        n = int(rng.integers(6, 13))
        k = int(rng.integers(1, min(3, n - 4) + 1))
    else:
        n = int(rng.integers(5, 13))
        k = int(rng.integers(0, min(3, n - 4) + 1))
    return GenParams(
        n_vertices=n,
        n_concavities=k,
        irregularity=float(rng.uniform(0.15, 0.85)),
        spikiness=float(rng.uniform(0.15, 0.85)),
        seed=trial_seed,
    )


def _materialize_trial(
    config: BatteryConfig, out_dir: Path, index: int, condition: str
) -> TrialPair:
    trial_id = f"{index:04d}_{condition}"
    for attempt in range(RETRY_BUDGET):
        ss = np.random.SeedSequence(
            entropy=config.seed, spawn_key=(_TAG_BATTERY, index, attempt)
        )
        trial_seed = int(ss.generate_state(1, np.uint64)[0])
        rng = np.random.default_rng(ss)
        params = _sample_battery_params(condition, rng, trial_seed)
        try:
            poly = generate_polygon(params)
        except GenerationFailed:
            continue
        if condition == "NOCHANGE":
            out_poly = poly
        else:
            try:
                out_poly, _ = make_edit(
                    poly, EditCondition[condition], config.rel_area, seed=trial_seed
                )
            except NoSuitableSite:
                continue
        size = config.resolution
        init_mask = rasterize(poly, size)
        out_mask = rasterize(out_poly, size)
        a_seg = int(out_mask.sum()) - int(init_mask.sum())
        if condition != "NOCHANGE" and a_seg <= 0:
            continue  # the piece vanished at this resolution; try again
        color = int(rng.integers(len(PALETTE)))
        paths = {
            kind: out_dir / f"{trial_id}_{kind}.png"
            for kind in ("init_img", "out_img", "init_gt", "out_gt")
        }
        write_image(paths["init_img"], render_image(poly, color, size))
        write_mask(paths["init_gt"], init_mask)
        if condition == "NOCHANGE":
            shutil.copyfile(paths["init_img"], paths["out_img"])
            shutil.copyfile(paths["init_gt"], paths["out_gt"])
        else:
            write_image(paths["out_img"], render_image(out_poly, color, size))
            write_mask(paths["out_gt"], out_mask)
        return TrialPair(
            trial_id=trial_id,
            condition=condition,
            init_image_path=paths["init_img"],
            out_image_path=paths["out_img"],
            init_gtmask_path=paths["init_gt"],
            out_gtmask_path=paths["out_gt"],
            a_seg_gt=a_seg,
            color_index=color,
            seed=trial_seed,
            gen_params=params,
        )
    raise GenerationFailed(
        f"trial {trial_id}: no polygon with a usable {condition} site "
        f"within {RETRY_BUDGET} attempts"
    )


def build_battery(config: BatteryConfig, out_dir: str | Path) -> Battery:
    """Materialize a full battery and its manifest under ``out_dir``."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    conditions = (
        _CONDITION_ORDER if config.include_nochange else _CONDITION_ORDER[:3]
    )
    trials = []
    for cond in conditions:
        for _ in range(config.n_per_condition):
            trials.append(_materialize_trial(config, root, len(trials), cond))
    battery = Battery(
        root=root,
        size=config.resolution,
        rel_area=config.rel_area,
        seed=config.seed,
        trials=tuple(trials),
    )
    write_manifest(root / "manifest.jsonl", battery)
    return battery


def _sample_training_params(config: DatasetConfig, rng, seed: int) -> GenParams:
    n = int(rng.integers(config.n_vertices[0], config.n_vertices[1] + 1))
    k_hi = min(config.n_concavities[1], n - 4)
    k_lo = min(config.n_concavities[0], k_hi)
    k = int(rng.integers(k_lo, k_hi + 1))
    return GenParams(
        n_vertices=n,
        n_concavities=k,
        irregularity=float(rng.uniform(*config.irregularity)),
        spikiness=float(rng.uniform(*config.spikiness)),
        seed=seed,
    )


def build_training_set(config: DatasetConfig, out_dir: str | Path) -> TrainingSet:
    """Materialize ``n_images`` single-polygon image/mask pairs plus manifest."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    examples = []
    for i in range(config.n_images):
        example_id = f"{i:05d}"
        for attempt in range(RETRY_BUDGET):
            ss = np.random.SeedSequence(
                entropy=config.seed, spawn_key=(_TAG_TRAIN, i, attempt)
            )
            seed = int(ss.generate_state(1, np.uint64)[0])
            rng = np.random.default_rng(ss)
            params = _sample_training_params(config, rng, seed)
            try:
                poly = generate_polygon(params)
            except GenerationFailed:
                continue
            color = int(rng.integers(len(PALETTE)))
            image_path = root / f"{example_id}_img.png"
            mask_path = root / f"{example_id}_gt.png"
            write_image(image_path, render_image(poly, color, config.resolution))
            write_mask(mask_path, rasterize(poly, config.resolution))
            examples.append(
                TrainingExample(
                    example_id=example_id,
                    image_path=image_path,
                    mask_path=mask_path,
                    color_index=color,
                    seed=seed,
                    gen_params=params,
                )
            )
            break
        else:
            raise GenerationFailed(
                f"training example {example_id}: generation kept failing "
                f"for {RETRY_BUDGET} derived seeds"
            )
    training = TrainingSet(
        root=root,
        size=config.resolution,
        seed=config.seed,
        examples=tuple(examples),
    )
    write_manifest(root / "manifest.jsonl", training)
    return training


def _params_to_json(params: GenParams) -> dict:
    return {
        "n_vertices": params.n_vertices,
        "n_concavities": params.n_concavities,
        "irregularity": params.irregularity,
        "spikiness": params.spikiness,
        "seed": params.seed,
    }


def _params_from_json(obj: dict) -> GenParams:
    return GenParams(
        n_vertices=obj["n_vertices"],
        n_concavities=obj["n_concavities"],
        irregularity=obj["irregularity"],
        spikiness=obj["spikiness"],
        seed=obj["seed"],
    )


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_manifest(path: str | Path, bundle: Battery | TrainingSet) -> None:
    """Write a battery or training set as header + one JSON row per item."""
    path = Path(path)
    lines = []
    if isinstance(bundle, Battery):
        lines.append(
            _dump(
                {
                    "schema": SCHEMA,
                    "kind": "battery",
                    "resolution": bundle.size,
                    "rel_area": bundle.rel_area,
                    "seed": bundle.seed,
                    "timing": PRESENTATION,
                }
            )
        )
        for t in bundle.trials:
            lines.append(
                _dump(
                    {
                        "trial_id": t.trial_id,
                        "condition": t.condition,
                        "init_img": t.init_image_path.name,
                        "out_img": t.out_image_path.name,
                        "init_gt": t.init_gtmask_path.name,
                        "out_gt": t.out_gtmask_path.name,
                        "a_seg_gt": t.a_seg_gt,
                        "color_index": t.color_index,
                        "seed": t.seed,
                        "gen_params": _params_to_json(t.gen_params),
                    }
                )
            )
    elif isinstance(bundle, TrainingSet):
        lines.append(
            _dump(
                {
                    "schema": SCHEMA,
                    "kind": "training",
                    "resolution": bundle.size,
                    "seed": bundle.seed,
                }
            )
        )
        for ex in bundle.examples:
            lines.append(
                _dump(
                    {
                        "example_id": ex.example_id,
                        "img": ex.image_path.name,
                        "gt": ex.mask_path.name,
                        "color_index": ex.color_index,
                        "seed": ex.seed,
                        "gen_params": _params_to_json(ex.gen_params),
                    }
                )
            )
    else:
        raise TypeError(f"cannot serialize {type(bundle).__name__}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path: str | Path) -> Battery | TrainingSet:
    """Load a manifest, resolving file references against its directory and
    checking that every referenced file exists."""
    path = Path(path)
    root = path.parent
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ManifestError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: unreadable header: {exc}") from None
    if header.get("schema") != SCHEMA:
        raise VersionError(
            f"{path}: schema {header.get('schema')!r} is not supported "
            f"(expected {SCHEMA})"
        )
    kind = header.get("kind")
    if kind == "battery":
        return _read_battery(path, root, header, lines[1:])
    if kind == "training":
        return _read_training(path, root, header, lines[1:])
    raise ManifestError(f"{path}: unknown manifest kind {kind!r}")


def _resolve(path: Path, root: Path, name: str) -> Path:
    target = root / name
    if not target.is_file():
        raise ManifestError(f"{path}: missing file {target}")
    return target


def _read_battery(path: Path, root: Path, header: dict, lines: list) -> Battery:
    trials = []
    for lineno, line in enumerate(lines, start=2):
        try:
            row = json.loads(line)
            trial = TrialPair(
                trial_id=row["trial_id"],
                condition=row["condition"],
                init_image_path=_resolve(path, root, row["init_img"]),
                out_image_path=_resolve(path, root, row["out_img"]),
                init_gtmask_path=_resolve(path, root, row["init_gt"]),
                out_gtmask_path=_resolve(path, root, row["out_gt"]),
                a_seg_gt=row["a_seg_gt"],
                color_index=row["color_index"],
                seed=row["seed"],
                gen_params=_params_from_json(row["gen_params"]),
            )
        except ManifestError:
            raise
        except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
            raise ManifestError(f"{path}: line {lineno}: {exc}") from None
        trials.append(trial)
    return Battery(
        root=root,
        size=header["resolution"],
        rel_area=header["rel_area"],
        seed=header["seed"],
        trials=tuple(trials),
    )


def _read_training(path: Path, root: Path, header: dict, lines: list) -> TrainingSet:
    examples = []
    for lineno, line in enumerate(lines, start=2):
        try:
            row = json.loads(line)
            example = TrainingExample(
                example_id=row["example_id"],
                image_path=_resolve(path, root, row["img"]),
                mask_path=_resolve(path, root, row["gt"]),
                color_index=row["color_index"],
                seed=row["seed"],
                gen_params=_params_from_json(row["gen_params"]),
            )
        except ManifestError:
            raise
        except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
            raise ManifestError(f"{path}: line {lineno}: {exc}") from None
        examples.append(example)
    return TrainingSet(
        root=root,
        size=header["resolution"],
        seed=header["seed"],
        examples=tuple(examples),
    )
