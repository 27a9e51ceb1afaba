"""Synthetic stereo scenes with known depth, for testing and demos.

The scene has three affine depth planes (a far band on top, a near region at
the bottom left and a mid-range region at the bottom right), each with its
own color and a mild texture. Depth grows left to right inside every row, so
the left-to-right correspondence is injective and the right image can be
produced by forward warping without occlusion conflicts: every pixel whose
correspondence stays inside the frame passes the photo-consistency check
exactly.
"""
from dataclasses import dataclass

import numpy as np

from .classes import CLASS_NAMES, SKY, VOID
from .core import CameraRig, ScalarField

REGION_COLORS = np.array([[0.78, 0.82, 0.88], [0.62, 0.30, 0.25], [0.30, 0.55, 0.32]])
REGION_CLASSES = (SKY, CLASS_NAMES.index("building"), CLASS_NAMES.index("road"))


@dataclass(eq=False)
class SyntheticScene:
    left: np.ndarray
    right: np.ndarray
    disparity: ScalarField  # with holes and outliers applied
    rig: CameraRig
    depth: np.ndarray  # ground truth
    region: np.ndarray  # 0, 1, 2 per pixel
    planes: np.ndarray  # (3, 3) ground-truth (a, b, c) per region
    holes: np.ndarray
    outliers: np.ndarray

    @property
    def labels(self):
        return np.asarray(REGION_CLASSES)[self.region]


def scene_planes(width, height):
    """Ground-truth planes in pixel units for an image of the given size."""
    su, sv = 512.0 / width, 256.0 / height
    base = np.array([[0.05, 0.02, 60.0], [0.02, 0.01, 5.0], [0.03, -0.01, 20.0]])
    return base * np.array([su, sv, 1.0])


def make_scene(width=512, height=256, hole_fraction=0.3, outlier_fraction=0.05, seed=0):
    rng = np.random.default_rng(seed)
    h, w = height, width
    vv, uu = np.indices((h, w)).astype(np.float64)
    region = np.where(vv < 0.3125 * h, 0, np.where(uu < 0.39 * w, 1, 2))
    planes = scene_planes(w, h)
    coef = planes[region]
    depth = coef[..., 0] * uu + coef[..., 1] * vv + coef[..., 2]

    fx = 500.0 * w / 512.0
    rig = CameraRig(fx=fx, fy=fx, cx=(w - 1) / 2, cy=(h - 1) / 2, baseline=0.5)
    disp = rig.fx * rig.baseline / depth

    texture = 0.04 * np.sin(2 * np.pi * uu / 23.0) * np.cos(2 * np.pi * vv / 17.0)
    left = REGION_COLORS[region] + texture[..., None]
    left += rng.uniform(-0.01, 0.01, size=left.shape)
    left = np.clip(left, 0.0, 1.0)

    right = np.zeros_like(left)
    filled = np.zeros((h, w), dtype=bool)
    cols = np.floor(uu - disp + 0.5).astype(int)
    inside = cols >= 0
    right[vv[inside].astype(int), cols[inside]] = left[inside]
    filled[vv[inside].astype(int), cols[inside]] = True
    for v in range(h):
        idx = np.flatnonzero(filled[v])
        if idx.size == 0:
            right[v] = left[v]
            continue
        nearest = idx[np.clip(np.searchsorted(idx, np.arange(w)), 0, idx.size - 1)]
        right[v] = right[v, nearest]

    holes = np.zeros((h, w), dtype=bool)
    target = hole_fraction * h * w
    while holes.sum() < target:
        rh = int(rng.integers(max(2, h // 40), max(3, h // 6)))
        rw = int(rng.integers(max(2, w // 40), max(3, w // 6)))
        y0 = int(rng.integers(0, h - rh + 1))
        x0 = int(rng.integers(0, w - rw + 1))
        holes[y0 : y0 + rh, x0 : x0 + rw] = True

    free = np.flatnonzero(~holes.ravel())
    n_out = int(round(outlier_fraction * h * w))
    picks = rng.choice(free, size=min(n_out, free.size), replace=False)
    outliers = np.zeros(h * w, dtype=bool)
    outliers[picks] = True
    outliers = outliers.reshape(h, w)

    measured = disp.copy()
    offset = rng.uniform(60.0, 150.0, size=int(outliers.sum()))
    measured[outliers] = rig.fx * rig.baseline / (depth[outliers] + offset)
    measured[holes] = 0.0
    return SyntheticScene(
        left=left,
        right=right,
        disparity=ScalarField(measured, ~holes),
        rig=rig,
        depth=depth,
        region=region,
        planes=planes,
        holes=holes,
        outliers=outliers,
    )


def scene_label_map(scene, void_border=0):
    labels = scene.labels.copy()
    if void_border:
        labels[-void_border:] = VOID
    return labels


def scene_instances(scene):
    """Cityscapes-encoded instance raster with one car box in the near region."""
    h, w = scene.region.shape
    inst = np.zeros((h, w), dtype=np.int64)
    y0, x0 = int(0.6 * h), int(0.1 * w)
    inst[y0 : y0 + h // 8, x0 : x0 + w // 10] = 26 * 1000
    return inst


def write_scene_tree(root, names, width=512, height=256, seed=0, sky=True):
    """Write synthetic scenes as a dataset input tree (see :mod:`foggen.dataset`).

    With ``sky=False`` the label maps mark the sky band as building, so the
    images fail the sky criterion.
    """
    from pathlib import Path

    from . import io
    from .dataset import INSTANCE_SUFFIX, LABEL_SUFFIX

    root = Path(root)
    for k, name in enumerate(names):
        scene = make_scene(width, height, seed=seed + k)
        io.write_image(root / "leftImg" / f"{name}.png", scene.left)
        io.write_image(root / "rightImg" / f"{name}.png", scene.right)
        io.write_disparity(root / "disparity" / f"{name}.png", scene.disparity)
        io.write_json(root / "camera" / f"{name}.json", scene.rig.to_dict())
        labels = scene.labels
        if not sky:
            labels = np.where(labels == SKY, CLASS_NAMES.index("building"), labels)
        io.write_labels(root / "gtFine" / f"{name}{LABEL_SUFFIX}", labels)
        io.write_labels(root / "gtFine" / f"{name}{INSTANCE_SUFFIX}", scene_instances(scene))
    return root
