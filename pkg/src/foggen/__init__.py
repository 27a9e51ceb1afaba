"""foggen: physically-based fog synthesis on clear-weather stereo imagery."""
from .core import CameraRig, ScalarField, depth_to_distance, disparity_to_depth, srgb_to_cielab
from .depth import (
    Plane,
    classify_superpixels,
    complete_depth,
    denoise_and_complete,
    fit_plane_ransac,
    match_superpixels,
    matching_cost,
    matching_cost_cosine,
    photo_consistency_check,
)
from .estimators import DepthCompleter, FogSimulator, GuidedFilter, PlaneRANSAC, SlicSegmenter, StereoFrame
from .fog import (
    AtmosphericLight,
    composite_fog,
    estimate_atmospheric_light,
    invert_fog,
    mor_from_beta,
    refine_transmission,
    simulate_fog,
    transmission_from_distance,
)
from .guided import guided_filter
from .params import PipelineParams
from .superpixel import slic_segment

__version__ = "0.1.0"
