"""Battery and training-set materialization, pinned against the manifest
contract: counts, file naming, ground-truth pixel deltas, byte-identity of
no-change frames, replayability from recorded parameters, and seed-space
separation between training and evaluation.
"""

import json

import numpy as np
import pytest

from cbb.errors import GenerationFailed, ManifestError, VersionError
from cbb.geometry import EditCondition, find_concavities, generate_polygon, make_edit
from cbb.metrics import evaluate_battery
from cbb.observers import ExactObserver
from cbb.raster import PALETTE, rasterize, read_image, read_mask, render_image
from cbb.trials import (
    Battery,
    BatteryConfig,
    DatasetConfig,
    TrainingSet,
    build_battery,
    build_training_set,
    read_manifest,
)

CFG = BatteryConfig(
    n_per_condition=2, rel_area=0.05, resolution=128, include_nochange=True, seed=90
)


@pytest.fixture(scope="module")
def battery(tmp_path_factory):
    return build_battery(CFG, tmp_path_factory.mktemp("battery"))


@pytest.fixture(scope="module")
def training(tmp_path_factory):
    cfg = DatasetConfig(n_images=6, resolution=96, seed=91)
    return build_training_set(cfg, tmp_path_factory.mktemp("training"))


def test_counts_ids_and_distinct_seeds(battery):
    assert len(battery.trials) == 8
    assert [t.trial_id for t in battery.trials] == [
        "0000_CONCAVE", "0001_CONCAVE",
        "0002_NOFILL", "0003_NOFILL",
        "0004_CONVEX", "0005_CONVEX",
        "0006_NOCHANGE", "0007_NOCHANGE",
    ]
    assert len({t.seed for t in battery.trials}) == 8
    assert len({t.gen_params for t in battery.trials}) == 8
    assert battery.size == 128
    assert battery.rel_area == 0.05


def test_files_exist_with_contract_names(battery):
    for t in battery.trials:
        expected = {
            t.init_image_path: f"{t.trial_id}_init_img.png",
            t.out_image_path: f"{t.trial_id}_out_img.png",
            t.init_gtmask_path: f"{t.trial_id}_init_gt.png",
            t.out_gtmask_path: f"{t.trial_id}_out_gt.png",
        }
        for path, name in expected.items():
            assert path.name == name
            assert path.parent == battery.root
            assert path.is_file()


def test_gt_pixel_delta_matches_manifest(battery):
    for t in battery.trials:
        delta = int(read_mask(t.out_gtmask_path).sum()) - int(
            read_mask(t.init_gtmask_path).sum()
        )
        assert delta == t.a_seg_gt
        if t.condition == "NOCHANGE":
            assert t.a_seg_gt == 0
        else:
            assert t.a_seg_gt > 0


def test_nochange_out_files_byte_identical(battery):
    for t in battery.trials:
        if t.condition != "NOCHANGE":
            continue
        assert t.init_image_path.read_bytes() == t.out_image_path.read_bytes()
        assert t.init_gtmask_path.read_bytes() == t.out_gtmask_path.read_bytes()


def test_images_align_with_masks(battery):
    seen = set()
    for t in battery.trials:
        if t.condition in seen:
            continue
        seen.add(t.condition)
        for img_path, gt_path in (
            (t.init_image_path, t.init_gtmask_path),
            (t.out_image_path, t.out_gtmask_path),
        ):
            img = read_image(img_path)
            mask = read_mask(gt_path)
            assert np.array_equal(img.any(axis=2), mask)
            assert (img[mask] == np.array(PALETTE[t.color_index], np.uint8)).all()


def test_condition_sites_exist_on_replay(battery):
    for t in battery.trials:
        cavities = find_concavities(generate_polygon(t.gen_params))
        if t.condition == "CONCAVE":
            assert any(c.deep for c in cavities)
        elif t.condition == "NOFILL":
            assert any(not c.deep for c in cavities)


def test_piece_size_tracks_rel_area(battery):
    for t in battery.trials:
        if t.condition == "NOCHANGE":
            continue
        a_init = int(read_mask(t.init_gtmask_path).sum())
        ratio = t.a_seg_gt / a_init
        assert 0.5 * CFG.rel_area < ratio < 1.7 * CFG.rel_area


def test_replay_reproduces_stored_frames(battery):
    for t in (battery.trials[0], battery.trials[4]):  # one interior, one bump
        poly = generate_polygon(t.gen_params)
        out_poly, _ = make_edit(
            poly, EditCondition[t.condition], battery.rel_area, seed=t.seed
        )
        assert np.array_equal(
            rasterize(poly, battery.size), read_mask(t.init_gtmask_path)
        )
        assert np.array_equal(
            rasterize(out_poly, battery.size), read_mask(t.out_gtmask_path)
        )
        assert np.array_equal(
            render_image(out_poly, t.color_index, battery.size),
            read_image(t.out_image_path),
        )


def test_double_build_is_byte_identical(tmp_path):
    cfg = BatteryConfig(
        n_per_condition=1, rel_area=0.05, resolution=96,
        include_nochange=True, seed=77,
    )
    a = build_battery(cfg, tmp_path / "a")
    b = build_battery(cfg, tmp_path / "b")
    files_a = sorted(p.name for p in (tmp_path / "a").iterdir())
    files_b = sorted(p.name for p in (tmp_path / "b").iterdir())
    assert files_a == files_b
    for name in files_a:
        assert (tmp_path / "a" / name).read_bytes() == (
            tmp_path / "b" / name
        ).read_bytes()
    assert [t.trial_id for t in a.trials] == [t.trial_id for t in b.trials]


def test_manifest_roundtrip(battery):
    back = read_manifest(battery.root / "manifest.jsonl")
    assert isinstance(back, Battery)
    assert back == battery


def test_manifest_header_and_relative_paths(battery):
    lines = (battery.root / "manifest.jsonl").read_text().splitlines()
    header = json.loads(lines[0])
    assert header["schema"] == "cbb/1"
    assert header["kind"] == "battery"
    assert header["resolution"] == 128
    assert header["rel_area"] == 0.05
    assert header["seed"] == 90
    assert header["timing"] == {"init_s": 1.0, "blank_s": 2.0, "out_s": 1.0}
    assert len(lines) == 1 + 8
    for line in lines[1:]:
        row = json.loads(line)
        for key in ("init_img", "out_img", "init_gt", "out_gt"):
            assert "/" not in row[key]  # bare file names, portable across dirs


def test_unknown_schema_version(battery, tmp_path):
    lines = (battery.root / "manifest.jsonl").read_text().splitlines()
    header = json.loads(lines[0])
    header["schema"] = "cbb/99"
    doctored = tmp_path / "manifest.jsonl"
    doctored.write_text("\n".join([json.dumps(header)] + lines[1:]) + "\n")
    with pytest.raises(VersionError):
        read_manifest(doctored)


def test_missing_file_listed_in_error(tmp_path):
    cfg = BatteryConfig(
        n_per_condition=1, rel_area=0.05, resolution=96,
        include_nochange=False, seed=78,
    )
    built = build_battery(cfg, tmp_path)
    victim = built.trials[1].out_gtmask_path
    victim.unlink()
    with pytest.raises(ManifestError, match=victim.name):
        read_manifest(tmp_path / "manifest.jsonl")


def test_unsatisfiable_condition_exhausts_retries(tmp_path):
    # a 15% piece exceeds what any generated cavity can host, so the
    # interior-fill condition burns through its retry budget and reports
    # which trial could not be built
    cfg = BatteryConfig(
        n_per_condition=1, rel_area=0.15, resolution=96,
        include_nochange=False, seed=5,
    )
    with pytest.raises(GenerationFailed, match="0000_CONCAVE"):
        build_battery(cfg, tmp_path)


def test_config_validation():
    with pytest.raises(ValueError):
        BatteryConfig(n_per_condition=0, rel_area=0.05, resolution=128,
                      include_nochange=True, seed=1)
    with pytest.raises(ValueError):
        BatteryConfig(n_per_condition=1, rel_area=0.2, resolution=128,
                      include_nochange=True, seed=1)
    with pytest.raises(ValueError):
        BatteryConfig(n_per_condition=1, rel_area=0.05, resolution=16,
                      include_nochange=True, seed=1)
    with pytest.raises(ValueError):
        DatasetConfig(n_images=0, resolution=128, seed=1)


def test_exact_observer_scores_one_everywhere(battery):
    report = evaluate_battery(battery, ExactObserver())
    for rec in report.records:
        if rec.condition == "NOCHANGE":
            assert rec.rel_delta == 0.0
        else:
            assert rec.rac == 1.0
    assert set(report.mean_rac.values()) == {1.0}


def test_training_counts_and_names(training):
    assert isinstance(training, TrainingSet)
    assert len(training.examples) == 6
    for i, ex in enumerate(training.examples):
        assert ex.example_id == f"{i:05d}"
        assert ex.image_path.name == f"{ex.example_id}_img.png"
        assert ex.mask_path.name == f"{ex.example_id}_gt.png"
        assert ex.image_path.is_file() and ex.mask_path.is_file()


def test_training_params_within_ranges(training):
    for ex in training.examples:
        p = ex.gen_params
        assert 5 <= p.n_vertices <= 12
        assert 0 <= p.n_concavities <= 3
        assert p.n_concavities <= p.n_vertices - 4
        assert 0.0 <= p.irregularity <= 1.0
        assert 0.0 <= p.spikiness <= 1.0


def test_training_replay_and_alignment(training):
    ex = training.examples[3]
    poly = generate_polygon(ex.gen_params)
    assert np.array_equal(rasterize(poly, training.size), read_mask(ex.mask_path))
    img = read_image(ex.image_path)
    assert np.array_equal(
        img, render_image(poly, ex.color_index, training.size)
    )
    assert np.array_equal(img.any(axis=2), read_mask(ex.mask_path))


def test_training_manifest_roundtrip(training):
    back = read_manifest(training.root / "manifest.jsonl")
    assert isinstance(back, TrainingSet)
    assert back == training


def test_training_double_build_identical(tmp_path):
    cfg = DatasetConfig(n_images=3, resolution=96, seed=55)
    build_training_set(cfg, tmp_path / "a")
    build_training_set(cfg, tmp_path / "b")
    for p in sorted((tmp_path / "a").iterdir()):
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_training_and_battery_seed_spaces_disjoint(battery, tmp_path):
    cfg = DatasetConfig(n_images=8, resolution=96, seed=CFG.seed)
    training = build_training_set(cfg, tmp_path)
    battery_keys = {(t.gen_params, t.seed) for t in battery.trials}
    training_keys = {(ex.gen_params, ex.seed) for ex in training.examples}
    assert not battery_keys & training_keys
    assert not {t.seed for t in battery.trials} & {
        ex.seed for ex in training.examples
    }
