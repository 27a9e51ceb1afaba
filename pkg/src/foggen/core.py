"""Raster containers, color conversion and stereo geometry.

Images are float64 arrays of shape (H, W, 3) holding sRGB-encoded values in
[0, 1]. Single-channel rasters travel as :class:`ScalarField`, a value array
paired with a boolean validity mask. Pixel coordinates are ``u`` = column and
``v`` = row, with pixel centers on integer positions.
"""
from dataclasses import dataclass, field
import json
from pathlib import Path

import numpy as np

from ._validation import check_field, check_positive

# D65 reference white for the sRGB primaries below, so that RGB (1, 1, 1)
# lands on L* = 100, a* = b* = 0 without rounding drift.
_SRGB_TO_XYZ = np.array(
    [
        [0.412453, 0.357580, 0.180423],
        [0.212671, 0.715160, 0.072169],
        [0.019334, 0.119193, 0.950227],
    ]
)
_WHITE_D65 = _SRGB_TO_XYZ.sum(axis=1)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Single-channel raster with a per-pixel validity mask."""

    values: np.ndarray
    valid: np.ndarray = field(default=None)

    def __post_init__(self):
        values = check_field(self.values, "values")
        if self.valid is None:
            valid = np.isfinite(values)
        else:
            valid = np.asarray(self.valid, dtype=bool)
            if valid.shape != values.shape:
                raise ValueError(
                    f"valid mask shape {valid.shape} != values shape {values.shape}"
                )
        if not np.all(np.isfinite(values[valid])):
            raise ValueError("values at valid pixels must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self):
        return self.values.shape

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def complete(self):
        return bool(self.valid.all())


@dataclass(frozen=True)
class CameraRig:
    """Pinhole intrinsics (pixels) of the left camera and the stereo baseline (meters)."""

    fx: float
    fy: float
    cx: float
    cy: float
    baseline: float

    def __post_init__(self):
        check_positive(self.fx, "fx")
        check_positive(self.fy, "fy")
        check_positive(self.baseline, "baseline")
        for name in ("cx", "cy"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def check_bounds(self, width, height):
        if not (0 <= self.cx < width and 0 <= self.cy < height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside {width}x{height} image"
            )

    def to_dict(self):
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "baseline": self.baseline,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(*(float(d[k]) for k in ("fx", "fy", "cx", "cy", "baseline")))
        except KeyError as exc:
            raise ValueError(f"camera description lacks key {exc}") from None

    @classmethod
    def load(cls, path):
        with open(Path(path)) as fh:
            return cls.from_dict(json.load(fh))


def srgb_to_linear(c):
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def srgb_to_cielab(rgb):
    """Convert sRGB values in [0, 1] (last axis of size 3) to CIELAB under D65.

    Accepts a single triple or any array with a trailing channel axis and
    returns an array of the same shape holding (L*, a*, b*).
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.shape[-1] != 3:
        raise ValueError("last axis must hold 3 color channels")
    xyz = srgb_to_linear(rgb) @ _SRGB_TO_XYZ.T
    t = xyz / _WHITE_D65
    delta = 6.0 / 29.0
    f = np.where(t > delta**3, np.cbrt(t), t / (3 * delta**2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def disparity_to_depth(disparity, rig):
    """Metric depth ``fx * baseline / D``; invalid or non-positive disparities become holes."""
    if not isinstance(disparity, ScalarField):
        disparity = ScalarField(disparity)
    D = disparity.values
    valid = disparity.valid & (D > 0)
    depth = np.zeros_like(D)
    depth[valid] = rig.fx * rig.baseline / D[valid]
    return ScalarField(depth, valid)


def depth_to_disparity(depth, rig):
    if not isinstance(depth, ScalarField):
        depth = ScalarField(depth)
    d = depth.values
    valid = depth.valid & (d > 0)
    disp = np.zeros_like(d)
    disp[valid] = rig.fx * rig.baseline / d[valid]
    return ScalarField(disp, valid)


def ray_length_factor(shape, rig):
    """Per-pixel ratio between distance along the viewing ray and depth."""
    h, w = shape
    u = (np.arange(w, dtype=np.float64) - rig.cx) / rig.fx
    v = (np.arange(h, dtype=np.float64) - rig.cy) / rig.fy
    return np.sqrt(u[None, :] ** 2 + v[:, None] ** 2 + 1.0)


def depth_to_distance(depth, rig):
    """Distance from the camera center to the scene point seen at each pixel."""
    if not isinstance(depth, ScalarField):
        depth = ScalarField(depth)
    if not depth.complete:
        raise ValueError("depth map has invalid pixels; run depth completion first")
    return ScalarField(depth.values * ray_length_factor(depth.shape, rig))
