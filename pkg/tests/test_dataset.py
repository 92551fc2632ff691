import filecmp
import json

import numpy as np
import pytest
from scipy.ndimage import binary_dilation

import splatpix as sp
from splatpix.dataset import DatasetConfig, Intrinsics, camera_rig


def small_config(out_dir, **overrides):
    base = dict(
        out_dir=str(out_dir),
        n_subjects=3,
        cameras_per_subject=2,
        rig_size=6,
        image_width=64,
        image_height=86,
        seed=11,
    )
    base.update(overrides)
    return DatasetConfig(**base)


def assert_trees_identical(a, b):
    cmp = filecmp.dircmp(a, b)
    assert not cmp.left_only and not cmp.right_only
    match, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    assert not mismatch and not errors
    for sub in cmp.common_dirs:
        assert_trees_identical(f"{a}/{sub}", f"{b}/{sub}")


class TestSynthSubject:
    def test_deterministic(self):
        m1, c1 = sp.synth_subject(5)
        m2, c2 = sp.synth_subject(5)
        assert m1.template.tobytes() == m2.template.tobytes()
        assert m1.skin_weights.tobytes() == m2.skin_weights.tobytes()
        assert c1.colors.tobytes() == c2.colors.tobytes()

    def test_distinct_across_seeds(self):
        m1, _ = sp.synth_subject(1)
        m2, _ = sp.synth_subject(2)
        assert m1.template.tobytes() != m2.template.tobytes()

    def test_size_floor(self, capsule_subject):
        model, colored = capsule_subject
        assert model.num_vertices >= 600
        assert model.num_joints >= 8
        assert model.num_shape_dims >= 2
        assert len(colored) == model.num_vertices

    def test_weights_and_regressor_normalized(self, capsule_subject):
        model, _ = capsule_subject
        np.testing.assert_allclose(model.skin_weights.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(model.joint_regressor.sum(axis=1), 1.0, atol=1e-12)
        assert model.skin_weights.min() >= 0.0

    def test_every_edge_shared_by_two_faces(self, capsule_subject):
        model, _ = capsule_subject
        counts = {}
        for a, b, c in model.faces:
            for e in ((a, b), (b, c), (c, a)):
                counts[(min(e), max(e))] = counts.get((min(e), max(e)), 0) + 1
        assert set(counts.values()) == {2}

    def test_desk_scale(self, capsule_subject):
        model, _ = capsule_subject
        span = model.template[:, 1].max() - model.template[:, 1].min()
        assert 0.2 < span < 0.5

    def test_colors_valid(self, capsule_subject):
        _, colored = capsule_subject
        assert colored.colors.min() >= 0.0 and colored.colors.max() <= 1.0


class TestCameraRig:
    def _intr(self):
        return Intrinsics(fx=120.0, fy=120.0, cx=32.0, cy=32.0, width=64, height=64)

    def test_count_and_target_depth(self):
        target = (0.0, 0.16, 0.0)
        rig = camera_rig(8, 0.45, target, self._intr())
        assert len(rig) == 8
        for cam in rig:
            u, v, d = sp.project(target, cam)
            assert (u, v) == pytest.approx((32.0, 32.0), abs=1e-9)
            assert d == pytest.approx(0.45, abs=1e-9)

    def test_distinct_viewpoints(self):
        rig = camera_rig(12, 0.45, (0, 0.16, 0), self._intr())
        eyes = np.array([-(cam.R.T @ cam.t) for cam in rig])
        dists = np.linalg.norm(eyes[:, None] - eyes[None, :], axis=2)
        np.fill_diagonal(dists, np.inf)
        assert dists.min() > 0.05

    def test_invalid_arguments(self):
        with pytest.raises(sp.ParameterError):
            camera_rig(0, 0.45, (0, 0, 0), self._intr())
        with pytest.raises(sp.ParameterError):
            camera_rig(4, -1.0, (0, 0, 0), self._intr())


class TestBuildDataset:
    def test_bookkeeping(self, tmp_path):
        config = small_config(tmp_path / "ds")
        manifest = sp.build_dataset(config, threads=1)
        assert len(manifest["entries"]) == 6
        # load_manifest checks every referenced file exists
        loaded = sp.load_manifest(tmp_path / "ds" / "manifest.json")
        assert loaded == manifest
        assert manifest["depth_range"] == [0.1, 0.7]
        assert manifest["image_size"] == [64, 86]

    def test_split_partitions_subjects(self, tmp_path):
        config = small_config(tmp_path / "ds", n_subjects=5, train_fraction=0.8)
        manifest = sp.build_dataset(config, threads=1)
        split = manifest["split"]
        assert sorted(split) == [f"s{k:03d}" for k in range(5)]
        assert sum(v == "train" for v in split.values()) == 4
        assert sum(v == "test" for v in split.values()) == 1

    def test_byte_identical_across_runs_and_threads(self, tmp_path):
        sp.build_dataset(small_config(tmp_path / "a"), threads=1)
        sp.build_dataset(small_config(tmp_path / "b"), threads=1)
        sp.build_dataset(small_config(tmp_path / "c"), threads=3)
        assert_trees_identical(str(tmp_path / "a"), str(tmp_path / "b"))
        assert_trees_identical(str(tmp_path / "a"), str(tmp_path / "c"))

    def test_config_changes_output(self, tmp_path):
        m1 = sp.build_dataset(small_config(tmp_path / "a", seed=11), threads=1)
        m2 = sp.build_dataset(small_config(tmp_path / "b", seed=12), threads=1)
        p1 = sp.load_rgbd(tmp_path / "a" / m1["entries"][0]["projection_path"])
        p2 = sp.load_rgbd(tmp_path / "b" / m2["entries"][0]["projection_path"])
        assert p1.data.tobytes() != p2.data.tobytes()

    def test_pairs_are_geometrically_consistent(self, tmp_path):
        config = small_config(tmp_path / "ds", n_subjects=2, cameras_per_subject=1)
        manifest = sp.build_dataset(config, threads=1)
        for entry in manifest["entries"]:
            proj = sp.load_rgbd(tmp_path / "ds" / entry["projection_path"])
            gt = sp.load_png(tmp_path / "ds" / entry["ground_truth_path"])
            assert proj.depth_normalized
            splat_fg = ~proj.background_mask()
            # quantized white background: anything below 1.0 is foreground
            raster_fg = ~np.all(gt.data == 1.0, axis=2)
            # every splatted vertex must land on (or within one pixel of)
            # the rasterized silhouette of the same mesh
            grown = binary_dilation(raster_fg, iterations=1)
            stray = splat_fg & ~grown
            assert stray.sum() == 0

    def test_camera_files_reusable(self, tmp_path):
        config = small_config(tmp_path / "ds")
        manifest = sp.build_dataset(config, threads=1)
        entry = manifest["entries"][0]
        cam = sp.load_camera(tmp_path / "ds" / entry["camera_path"])
        assert (cam.width, cam.height) == (64, 86)

    def test_manifest_missing_file_detected(self, tmp_path):
        config = small_config(tmp_path / "ds")
        manifest = sp.build_dataset(config, threads=1)
        victim = tmp_path / "ds" / manifest["entries"][0]["projection_path"]
        victim.unlink()
        with pytest.raises(sp.ParameterError):
            sp.load_manifest(tmp_path / "ds" / "manifest.json")

    def test_bad_depth_range_rejected(self, tmp_path):
        config = small_config(tmp_path / "ds", depth_range=(0.7, 0.1))
        with pytest.raises(sp.ParameterError):
            sp.build_dataset(config, threads=1)


class TestDatasetConfig:
    def test_from_json_round_trip(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({
            "out_dir": "ds", "n_subjects": 2, "depth_range": [0.2, 0.6],
        }))
        config = DatasetConfig.from_json(path)
        assert config.n_subjects == 2
        assert config.depth_range == (0.2, 0.6)
        assert config.image_width == 308 and config.image_height == 410

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"out_dir": "ds", "bogus": 1}))
        with pytest.raises(sp.ParameterError):
            DatasetConfig.from_json(path)

    def test_default_focal(self):
        config = DatasetConfig(out_dir="ds")
        assert config.resolved_focal() == pytest.approx(1.2 * 410)
