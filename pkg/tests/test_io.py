import numpy as np
import pytest

from foggen import io
from foggen.core import ScalarField


def test_image_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (9, 11, 3)) / 255.0
    io.write_image(tmp_path / "a" / "x.png", img)
    assert np.array_equal(io.read_image(tmp_path / "a" / "x.png"), img)


def test_disparity_round_trip(tmp_path, rng):
    values = rng.integers(0, 200 * 256, (6, 7)) / 256.0
    valid = rng.random((6, 7)) > 0.3
    io.write_disparity(tmp_path / "d.png", ScalarField(values, valid))
    back = io.read_disparity(tmp_path / "d.png")
    assert np.array_equal(back.valid, valid)
    assert np.array_equal(back.values[valid], values[valid])


def test_metric_and_transmission_encoding(tmp_path):
    io.write_metric(tmp_path / "m.png", np.array([[0.0, 1.5, 200.25, 1e6]]))
    # 16-bit fixed point saturates just below 256 m
    assert io.read_metric(tmp_path / "m.png").tolist() == [[0.0, 1.5, 200.25, 65535 / 256]]
    assert io.encode_transmission(np.array([0.0, 0.5, 1.0])).tolist() == [0, 32768, 65535]


def test_labels_round_trip(tmp_path):
    labels = np.array([[0, 18, 255], [26001, 3, 7]])
    io.write_labels(tmp_path / "l.png", labels)
    assert np.array_equal(io.read_labels(tmp_path / "l.png"), labels)
    with pytest.raises(ValueError):
        io.write_labels(tmp_path / "bad.png", np.array([[-1]]))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.png"):
        io.read_png(tmp_path / "nope.png")


def test_atomic_write_leaves_no_temp(tmp_path):
    io.write_json(tmp_path / "o.json", {"a": 1})
    assert [p.name for p in tmp_path.iterdir()] == ["o.json"]
