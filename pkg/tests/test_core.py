import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from skimage.color import rgb2lab

from foggen.core import (
    CameraRig,
    ScalarField,
    depth_to_disparity,
    depth_to_distance,
    disparity_to_depth,
    srgb_to_cielab,
)


def test_lab_black_and_white():
    assert np.allclose(srgb_to_cielab([0, 0, 0]), [0, 0, 0], atol=1e-12)
    assert np.allclose(srgb_to_cielab([1, 1, 1]), [100, 0, 0], atol=1e-9)


def test_lab_mid_gray_matches_reference():
    # reference value from skimage.color.rgb2lab
    lab = srgb_to_cielab([0.5, 0.5, 0.5])
    assert lab[0] == pytest.approx(53.38896474, abs=1e-6)
    assert np.allclose(lab[1:], 0, atol=1e-9)


def test_lab_against_skimage(rng):
    rgb = rng.random((500, 3))
    ours = srgb_to_cielab(rgb)
    ref = rgb2lab(rgb[None])[0]
    assert np.abs(ours - ref).max() < 1e-2


def test_lab_injective_on_grid():
    g = np.linspace(0, 1, 10)
    rgb = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    lab = srgb_to_cielab(rgb)
    d = np.linalg.norm(lab[:, None] - lab[None], axis=-1)
    np.fill_diagonal(d, np.inf)
    assert d.min() > 1e-9


def test_lab_shape_preserved(rng):
    img = rng.random((4, 5, 3))
    assert srgb_to_cielab(img).shape == (4, 5, 3)


@pytest.mark.parametrize(
    "fx, baseline, disp, depth", [(1000, 0.5, 100, 5.0), (2000, 0.2, 8, 50.0)]
)
def test_disparity_to_depth(fx, baseline, disp, depth):
    rig = CameraRig(fx, fx, 0, 0, baseline)
    out = disparity_to_depth(ScalarField(np.array([[disp]], float)), rig)
    assert out.values[0, 0] == pytest.approx(depth)
    assert out.valid.all()


def test_disparity_holes_propagate():
    rig = CameraRig(1000, 1000, 1, 1, 0.5)
    vals = np.array([[10.0, 0.0, -3.0], [5.0, 7.0, 2.0]])
    valid = np.array([[True, True, True], [False, True, True]])
    out = disparity_to_depth(ScalarField(vals, valid), rig)
    assert out.valid.tolist() == [[True, False, False], [False, True, True]]


def test_depth_disparity_round_trip(rng):
    rig = CameraRig(721.5, 721.5, 600, 180, 0.54)
    depth = ScalarField(rng.uniform(1, 300, size=(20, 30)))
    back = disparity_to_depth(depth_to_disparity(depth, rig), rig)
    assert np.all(np.abs(back.values - depth.values) / depth.values < 1e-12)


def test_distance_principal_point_and_sixty_degrees():
    rig = CameraRig(1000, 1000, 0, 0, 1.0)
    w = int(np.ceil(1000 * np.sqrt(3))) + 1
    depth = np.full((1, w), 10.0)
    dist = depth_to_distance(ScalarField(depth), rig).values
    assert dist[0, 0] == 10.0
    # a pixel exactly 1000*sqrt(3) right of the principal point is a 60 degree ray
    shifted = CameraRig(1000, 1000, w - 1 - 1000 * np.sqrt(3), 0, 1.0)
    d2 = depth_to_distance(ScalarField(depth), shifted).values
    assert d2[0, -1] == pytest.approx(20.0, rel=1e-12)


def test_distance_matches_backprojection(rng):
    rig = CameraRig(700.0, 650.0, 40.3, 25.7, 0.3)
    depth = rng.uniform(2, 80, size=(50, 80))
    dist = depth_to_distance(ScalarField(depth), rig).values
    for _ in range(50):
        v, u = rng.integers(0, 50), rng.integers(0, 80)
        d = depth[v, u]
        point = np.array([(u - rig.cx) * d / rig.fx, (v - rig.cy) * d / rig.fy, d])
        assert dist[v, u] == pytest.approx(np.linalg.norm(point), rel=1e-12)


def test_distance_monotone_in_radius():
    rig = CameraRig(500, 500, 50, 50, 1.0)
    dist = depth_to_distance(ScalarField(np.ones((101, 101))), rig).values
    assert dist[50, 50] == 1.0
    assert np.all(dist >= 1.0)
    row = dist[50, 50:]
    assert np.all(np.diff(row) > 0)


def test_distance_requires_complete_depth():
    rig = CameraRig(500, 500, 1, 1, 1.0)
    with pytest.raises(ValueError, match="invalid pixels"):
        depth_to_distance(ScalarField(np.ones((3, 3)), np.eye(3, dtype=bool)), rig)


def test_camera_validation(tmp_path):
    with pytest.raises(ValueError):
        CameraRig(0, 1, 0, 0, 1)
    with pytest.raises(ValueError):
        CameraRig(1, 1, 0, 0, -1)
    rig = CameraRig(1, 2, 3, 4, 5)
    p = tmp_path / "cam.json"
    import json

    p.write_text(json.dumps(rig.to_dict()))
    assert CameraRig.load(p) == rig
    with pytest.raises(ValueError, match="outside"):
        rig.check_bounds(3, 10)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.5, 500), st.floats(0.5, 2000), st.floats(0.05, 1.0))
def test_depth_formula_property(d, fx, baseline):
    rig = CameraRig(fx, fx, 0, 0, baseline)
    disp = depth_to_disparity(ScalarField(np.array([[d]])), rig)
    back = disparity_to_depth(disp, rig).values[0, 0]
    assert abs(back - d) / d < 1e-12
