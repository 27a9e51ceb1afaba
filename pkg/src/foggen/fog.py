"""Fog compositing with the homogeneous daytime scattering model.

``I = R * t + L * (1 - t)`` with ``t = exp(-beta * distance)``. All color
math runs directly on sRGB-encoded values in [0, 1] (gamma taken as 1).
"""
from dataclasses import dataclass
import warnings

import numpy as np
from scipy import ndimage

from ._validation import check_image, check_same_shape
from .core import ScalarField, depth_to_distance
from .depth import DepthResult, denoise_and_complete
from .guided import guided_filter
from .params import FOG_BETA_MIN, MOR_CONTRAST, PipelineParams

DARK_CHANNEL_PATCH = 15
BRIGHTEST_FRACTION = 0.001
TRANSMISSION_FLOOR = 1e-6
INVERSION_FLOOR = 0.01


class FogBoundWarning(UserWarning):
    """The attenuation coefficient is too small for the medium to count as fog."""


@dataclass(frozen=True)
class AtmosphericLight:
    color: tuple  # (r, g, b) in [0, 1]
    pixel: tuple  # (u, v)

    def to_dict(self):
        return {"rgb": [float(c) for c in self.color], "pixel": [int(p) for p in self.pixel]}


def check_beta(beta, warn=True):
    """Validate ``beta``; returns True when it satisfies the fog visibility bound."""
    beta = float(beta)
    if not np.isfinite(beta) or beta < 0:
        raise ValueError(f"beta must be finite and >= 0, got {beta}")
    is_fog = beta >= FOG_BETA_MIN
    if warn and not is_fog:
        warnings.warn(
            f"beta={beta:g} is below fog bound 2.996e-3 1/m (visibility above 1 km)",
            FogBoundWarning,
            stacklevel=2,
        )
    return is_fog


def mor_from_beta(beta):
    """Meteorological optical range: distance at which transmission drops to 5%."""
    beta = float(beta)
    if not beta > 0:
        raise ValueError("beta must be > 0")
    return MOR_CONTRAST / beta


def dark_channel(image, patch=DARK_CHANNEL_PATCH):
    return ndimage.minimum_filter(np.asarray(image).min(axis=2), size=patch, mode="nearest")


def estimate_atmospheric_light(image, patch=DARK_CHANNEL_PATCH, fraction=BRIGHTEST_FRACTION):
    """Pick the atmospheric light pixel.

    Among the top ``fraction`` of pixels by dark-channel value, take the one
    with the largest R+G+B; ties go to the lowest raster index.
    """
    R = check_image(image)
    h, w = R.shape[:2]
    dark = dark_channel(R, patch).ravel()
    n_top = max(1, int(np.ceil(fraction * dark.size)))
    order = np.lexsort((np.arange(dark.size), -dark))
    candidates = order[:n_top]
    brightness = R.reshape(-1, 3)[candidates].sum(axis=1)
    best = brightness.max()
    idx = int(candidates[brightness == best].min())
    v, u = divmod(idx, w)
    return AtmosphericLight(tuple(float(c) for c in R[v, u]), (u, v))


def transmission_from_distance(distance, beta):
    check_beta(beta, warn=False)
    values = distance.values if isinstance(distance, ScalarField) else np.asarray(distance, float)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ValueError("distance must be complete and non-negative")
    return np.exp(-float(beta) * values)


def refine_transmission(t_init, guide, radius=20, mu=1e-3):
    """Guided-filter the initial transmission and clamp it into (0, 1]."""
    t_init = np.asarray(t_init, dtype=np.float64)
    if t_init.size and t_init.min() == t_init.max():
        # exact fixpoint of the filter; skip the roundoff
        check_same_shape(("transmission", t_init), ("guide", guide))
        return np.clip(t_init, TRANSMISSION_FLOOR, 1.0)
    return np.clip(guided_filter(t_init, guide, radius, mu), TRANSMISSION_FLOOR, 1.0)


def _light_array(light):
    color = light.color if isinstance(light, AtmosphericLight) else light
    return np.asarray(color, dtype=np.float64).reshape(3)


def composite_fog(clear, transmission, light):
    """Blend the clear image toward the atmospheric light by ``1 - t``."""
    R = check_image(clear, "clear")
    t = np.asarray(transmission, dtype=np.float64)
    check_same_shape(("clear", R), ("transmission", t))
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("transmission must lie in [0, 1]")
    L = _light_array(light)
    t3 = t[..., None]
    return np.clip(R * t3 + L * (1.0 - t3), 0.0, 1.0)


def invert_fog(foggy, transmission, light, floor=INVERSION_FLOOR):
    """Exact algebraic inverse of :func:`composite_fog`.

    Returns ``(clear, invertible)``; pixels with ``t < floor`` are NaN in the
    output and False in ``invertible``.
    """
    I = check_image(foggy, "foggy")
    t = np.asarray(transmission, dtype=np.float64)
    check_same_shape(("foggy", I), ("transmission", t))
    L = _light_array(light)
    invertible = t >= floor
    t_safe = np.where(invertible, t, 1.0)[..., None]
    R = np.clip((I - L * (1.0 - t_safe)) / t_safe, 0.0, 1.0)
    R[~invertible] = np.nan
    return R, invertible


@dataclass(eq=False)
class FogResult:
    foggy: np.ndarray
    transmission: np.ndarray  # refined t
    transmission_init: np.ndarray
    depth: ScalarField  # completed d'
    distance: ScalarField
    light: AtmosphericLight
    beta: float
    depth_result: DepthResult = None


def fog_from_depth(clear, depth_result, rig, beta, params=None, light=None):
    """Run the transmission and compositing stages on an already completed depth map."""
    params = params or PipelineParams()
    check_beta(beta)
    R = check_image(clear, "clear")
    distance = depth_to_distance(depth_result.depth, rig)
    t_init = transmission_from_distance(distance, beta)
    t = refine_transmission(t_init, R, params.radius, params.mu)
    light = light or estimate_atmospheric_light(R)
    foggy = composite_fog(R, t, light)
    return FogResult(
        foggy=foggy,
        transmission=t,
        transmission_init=t_init,
        depth=depth_result.depth,
        distance=distance,
        light=light,
        beta=float(beta),
        depth_result=depth_result,
    )


def simulate_fog(left, right, disparity, rig, beta, params=None, seed=0):
    """Full pipeline from a clear stereo pair and raw disparity to a foggy image."""
    params = params or PipelineParams()
    depth_result = denoise_and_complete(left, right, disparity, rig, params, seed)
    return fog_from_depth(left, depth_result, rig, beta, params)
