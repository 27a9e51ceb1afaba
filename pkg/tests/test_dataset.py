import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from foggen.classes import CLASS_NAMES, SKY, VOID
from foggen.dataset import (
    build_dataset,
    build_ssl_manifest,
    dataset_stats,
    instances_to_bboxes,
    pseudo_epoch_order,
    sky_criterion,
)
from foggen.fog import AtmosphericLight
from foggen.params import PipelineParams
from foggen.synthetic import write_scene_tree

SMALL = PipelineParams(k_hat=64)
ROAD, BUILDING, CAR = (CLASS_NAMES.index(n) for n in ("road", "building", "car"))


def _tree_digest(root):
    h = hashlib.sha256()
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


# ---------------------------------------------------------------- sky criterion

def test_sky_criterion():
    labels = np.full((10, 10), BUILDING)
    labels[:3] = SKY
    assert sky_criterion(AtmosphericLight((1, 1, 1), (4, 1)), labels)
    assert not sky_criterion(AtmosphericLight((1, 1, 1), (4, 6)), labels)
    no_sky = np.full((10, 10), ROAD)
    assert not any(sky_criterion((u, v), no_sky) for u in range(10) for v in range(10))
    with pytest.raises(ValueError):
        sky_criterion((10, 0), labels)


# ---------------------------------------------------------------- boxes

def test_single_car_box():
    inst = np.zeros((30, 30), int)
    inst[5:15, 5:15] = 26001
    (box,) = instances_to_bboxes(inst)
    assert (box.x_min, box.y_min, box.x_max, box.y_max) == (5, 5, 14, 14)
    assert box.class_id == CAR and box.to_dict()["class"] == "car"
    assert instances_to_bboxes(np.zeros((5, 5), int)) == []


def test_boxes_brute_force(rng):
    inst = np.zeros((40, 60), int)
    classes = {}
    for k in range(1, 9):
        h, w = rng.integers(1, 10, 2)
        y, x = rng.integers(0, 40 - h), rng.integers(0, 60 - w)
        inst[y : y + h, x : x + w] = k
        classes[k] = int(rng.choice([11, 12, 13, 14, 15, 16, 17, 18]))
    boxes = instances_to_bboxes(inst, classes)
    present = sorted(set(np.unique(inst).tolist()) - {0})
    assert [b.instance_id for b in boxes] == present
    for b in boxes:
        ys, xs = [], []
        for v in range(40):
            for u in range(60):
                if inst[v, u] == b.instance_id:
                    ys.append(v)
                    xs.append(u)
        assert (b.x_min, b.y_min, b.x_max, b.y_max) == (min(xs), min(ys), max(xs), max(ys))
        assert b.class_id == classes[b.instance_id]


def test_boxes_reject_stuff_class():
    with pytest.raises(ValueError):
        instances_to_bboxes(np.full((3, 3), 7001))


# ---------------------------------------------------------------- stats

def test_stats_all_road():
    s = dataset_stats([np.full((8, 8), ROAD)])
    assert s["pixels"]["road"] == 64
    assert sum(s["pixels"].values()) == 64 and s["void_pixels"] == 0


def test_stats_void_and_instances():
    labels = np.full((4, 4), VOID)
    labels[0] = ROAD
    inst = np.zeros((4, 4), int)
    inst[1, 1] = 26001
    inst[3, 3] = 26002
    s = dataset_stats([labels], [inst])
    assert s["void_pixels"] == 12 and s["total_pixels"] == 16
    assert s["instances"]["car"] == 2 and s["instances"]["person"] == 0


# ---------------------------------------------------------------- SSL manifest

def test_manifest_small():
    man = build_ssl_manifest([f"l{i}" for i in range(2)], [f"p{i}" for i in range(10)], w=5)
    assert len(man.entries) == 12
    assert man.header["n_human"] == 2 and man.header["n_transferred"] == 10
    assert man.lam == pytest.approx(1.0)
    lines = man.to_ndjson().splitlines()
    assert json.loads(lines[0])["header"]["lambda"] == pytest.approx(1.0)
    assert len(lines) == 13


def test_manifest_balanced_alternation():
    man = build_ssl_manifest([f"l{i}" for i in range(6)], [f"p{i}" for i in range(6)], w=1)
    sources = [e["source"] for e in man.entries]
    assert sources == ["human", "transferred"] * 6
    assert man.lam == 1.0
    assert len({e["foggy_image_path"] for e in man.entries}) == 12


@pytest.mark.parametrize("seed", range(10))
def test_manifest_ratio(seed):
    rng = np.random.default_rng(seed)
    l, u = int(rng.integers(1, 60)), int(rng.integers(1, 200))
    w = float(rng.uniform(0.2, 8))
    man = build_ssl_manifest([f"l{i}" for i in range(l)], [f"p{i}" for i in range(u)], w=w, seed=seed)
    n_h, n_t = man.header["n_human"], man.header["n_transferred"]
    assert n_h == l
    assert abs(n_t / n_h - w) <= 1 / l
    assert man.lam == pytest.approx(l * w / u)


def test_manifest_epochs_and_errors():
    assert not np.array_equal(pseudo_epoch_order(50, 1, 0), pseudo_epoch_order(50, 1, 1))
    # a pool smaller than l*w is cycled through whole epochs
    man = build_ssl_manifest(["a", "b"], ["x", "y", "z"], w=3)
    pseudo = [e["foggy_image_path"] for e in man.entries if e["source"] == "transferred"]
    assert sorted(pseudo[:3]) == sorted(pseudo[3:]) == ["x", "y", "z"]
    with pytest.raises(ValueError):
        build_ssl_manifest([], ["x"])
    with pytest.raises(ValueError):
        build_ssl_manifest(["a"], ["x"], w=0)


def test_manifest_write(tmp_path):
    man = build_ssl_manifest([("f.png", "g.png")], ["x"], w=1)
    man.write(tmp_path / "m.ndjson")
    rows = [json.loads(x) for x in (tmp_path / "m.ndjson").read_text().splitlines()]
    assert rows[1] == {"foggy_image_path": "f.png", "label_path": "g.png", "source": "human"}


# ---------------------------------------------------------------- dataset build

BETAS = (0.005, 0.01, 0.02, 0.03, 0.06)


@pytest.fixture(scope="module")
def input_tree(tmp_path_factory):
    root = tmp_path_factory.mktemp("in")
    return write_scene_tree(root, ["aachen_0", "bonn_1"], 128, 64)


def test_build_counts_and_inheritance(input_tree, tmp_path):
    report = build_dataset(input_tree, tmp_path, BETAS, SMALL)
    assert report.ok and not report.rejects
    foggy = sorted(tmp_path.glob("beta_*/foggy/*.png"))
    meta = sorted(tmp_path.glob("beta_*/meta/*.json"))
    assert len(foggy) == len(meta) == 10
    for p in tmp_path.glob("beta_*/gtFine/*"):
        assert p.read_bytes() == (input_tree / "gtFine" / p.name).read_bytes()
    side = json.loads((tmp_path / "beta_0.01" / "meta" / "aachen_0.json").read_text())
    assert side["beta"] == 0.01 and side["mor_m"] == pytest.approx(299.6)
    assert side["params_sha256"] == SMALL.sha256()
    boxes = json.loads((tmp_path / "beta_0.02" / "bboxes" / "bonn_1.json").read_text())
    assert [b["class"] for b in boxes] == ["car"]
    stats = json.loads((tmp_path / "stats.json").read_text())
    assert stats["pixels"]["sky"] > 0


def test_build_deterministic(input_tree, tmp_path):
    build_dataset(input_tree, tmp_path / "a", BETAS[:2], SMALL, seed=9, threads=1)
    build_dataset(input_tree, tmp_path / "b", BETAS[:2], SMALL, seed=9, threads=3)
    assert _tree_digest(tmp_path / "a") == _tree_digest(tmp_path / "b")


def test_build_rejects_and_errors(tmp_path):
    root = write_scene_tree(tmp_path / "in", ["cloudy"], 128, 64, sky=False)
    write_scene_tree(root, ["good"], 128, 64, seed=4)
    (root / "camera" / "good.json").unlink()
    report = build_dataset(root, tmp_path / "out", (0.01,), SMALL, allowlist={"cloudy"})
    assert [r[0] for r in report.rejects] == ["cloudy"]
    assert [e[0] for e in report.errors] == ["good"]
    assert "camera" in report.errors[0][1]
    assert "cloudy" in (tmp_path / "out" / "rejects.txt").read_text()
    assert (tmp_path / "out" / "beta_0.01" / "foggy" / "cloudy.png").is_file()
