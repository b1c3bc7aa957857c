import math

import numpy as np
import pytest

import mvfusion as mv

SMALL = mv.CameraIntrinsics(65.625, 65.625, 40.0, 30.0, 80, 60)
SMALL_TEXT = """
[camera]
fx = 65.625
fy = 65.625
cx = 40
cy = 30
width = 80
height = 60
[static]
r = 32
r_gpu = 16
"""


def test_render_plane_depth():
    scene = mv.Scene()
    scene.add_plane([0, 0, 2], [0, 0, -1])
    depth = mv.render_depth(scene, mv.Pose(), SMALL)
    assert depth.shape == (60, 80)
    assert np.all(depth == 2.0)


def test_pose_algebra():
    p = mv.Pose.from_axis_angle([0, 0, 1], math.pi / 2, [1, 2, 3])
    assert np.allclose(p.apply([1, 0, 0]), [1, 3, 3])
    assert np.allclose(p.matrix() @ p.inverse().matrix(), np.eye(4))
    assert (p * p.inverse()).rotation_angle() == pytest.approx(0.0, abs=1e-12)


def test_noise_is_seeded():
    depth = np.full((60, 80), 1.5)
    a = mv.add_noise(depth, mv.NoiseModel(sigma0=0.005, seed=1))
    b = mv.add_noise(depth, mv.NoiseModel(sigma0=0.005, seed=1))
    assert np.array_equal(a, b)
    assert 0.004 < np.std(a - depth) < 0.006


def test_pipeline_with_ground_truth_poses():
    pipe = mv.FusionPipeline(SMALL_TEXT + "[icp]\ntrack = false\n[input]\nuse_groundtruth = true\n")
    assert pipe.live_count == 8
    scene = mv.Scene.preset("sphere")
    for pose in mv.orbit_trajectory([0, 0, 0.8], 0.8, 4):
        report = pipe.process(mv.render_depth(scene, pose, SMALL), pose)
        assert report["uploads"] == report["downloads"] == 8
        assert report["resident_count"] <= 1
    assert pipe.raymap_depth().shape == (60, 80)
    vertices, normals = pipe.finish()
    assert vertices.shape[1] == 3 and len(vertices) == len(normals)
    stats = mv.cloud_to_surface_stats(vertices, scene)
    assert stats.mean < pipe.voxel_size


def test_run_and_ply_round_trip(tmp_path):
    first = mv.run(SMALL_TEXT + "[input]\nframes = 3\n", str(tmp_path / "a"))
    second = mv.run(SMALL_TEXT + "[input]\nframes = 3\n", str(tmp_path / "b"))
    assert open(first["ply"], "rb").read() == open(second["ply"], "rb").read()
    vertices, normals = mv.read_ply(first["ply"])
    assert len(vertices) == first["vertices"] > 0
    mv.write_ply(tmp_path / "copy.ply", vertices, normals)
    again, _ = mv.read_ply(tmp_path / "copy.ply")
    assert np.array_equal(again, vertices)


def test_depth_png_round_trip(tmp_path):
    depth = np.array([[0.0, 1.0], [1.23456, 13.0]])
    mv.write_depth_png(tmp_path / "d.png", depth)
    back = mv.read_depth_png(tmp_path / "d.png")
    assert np.abs(back - depth).max() <= 0.5 / 5000


def test_errors_map_to_exceptions():
    with pytest.raises(mv.ConfigError, match="choose exactly one"):
        mv.FusionPipeline("[mode]\nstatic_grid = true\ndynamic = true\n")
    with pytest.raises(mv.LoadError):
        mv.read_depth_png("/nonexistent.png")
    with pytest.raises(mv.EmptyInputError):
        mv.cloud_to_surface_stats(np.zeros((0, 3)), mv.Scene.preset("sphere"))


def test_fit_line():
    slope, intercept, r2 = mv.fit_line([1, 2, 4, 8], [0.5, 0.7, 1.1, 1.9])
    assert slope == pytest.approx(0.2)
    assert intercept == pytest.approx(0.3)
    assert r2 == pytest.approx(1.0)
