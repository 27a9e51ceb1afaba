"""scikit-learn style wrappers around the functional pipeline.

The estimators hold hyper-parameters only (``get_params``/``set_params``,
``clone`` and pipelines work as usual); all heavy lifting is delegated to
the functions in :mod:`foggen.depth`, :mod:`foggen.fog` and friends.
"""
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, check_array

from . import io
from ._validation import check_image
from .core import CameraRig, ScalarField
from .depth import denoise_and_complete, fit_plane_ransac
from .fog import check_beta, fog_from_depth
from .guided import guided_filter
from .params import PipelineParams
from .superpixel import N_ITER, slic_segment


@dataclass(eq=False)
class StereoFrame:
    left: np.ndarray
    right: np.ndarray
    disparity: ScalarField
    rig: CameraRig

    @classmethod
    def load(cls, left, right, disparity, camera):
        return cls(
            io.read_image(left),
            io.read_image(right),
            io.read_disparity(disparity),
            CameraRig.load(camera),
        )


def _frames(X):
    if isinstance(X, StereoFrame):
        return [X], True
    frames = list(X)
    if not all(isinstance(f, StereoFrame) for f in frames):
        raise TypeError("expected a StereoFrame or a sequence of StereoFrames")
    return frames, False


class SlicSegmenter(ClusterMixin, BaseEstimator):
    """SLIC superpixels; ``fit(image)`` sets ``labels_`` and ``segmentation_``."""

    def __init__(self, n_segments=2048, compactness=10.0, n_iter=N_ITER):
        self.n_segments = n_segments
        self.compactness = compactness
        self.n_iter = n_iter

    def fit(self, X, y=None):
        self.segmentation_ = slic_segment(
            check_image(X), self.n_segments, self.compactness, self.n_iter
        )
        self.labels_ = self.segmentation_.labels
        self.n_segments_ = self.segmentation_.n_segments
        return self


class PlaneRANSAC(RegressorMixin, BaseEstimator):
    """Adaptive RANSAC fit of ``d = a*u + b*v + c`` to pixel samples.

    ``X`` holds (u, v) pixel coordinates, ``y`` the depth values.
    """

    def __init__(self, max_trials=2000, stop_probability=0.99, threshold_factor=0.01,
                 random_state=0):
        self.max_trials = max_trials
        self.stop_probability = stop_probability
        self.threshold_factor = threshold_factor
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        if X.shape[1] != 2:
            raise ValueError("X must have two columns (u, v)")
        plane, inliers = fit_plane_ransac(
            X[:, 0], X[:, 1], y,
            seed=self.random_state,
            max_iters=self.max_trials,
            p=self.stop_probability,
            theta_factor=self.threshold_factor,
        )
        self.plane_ = plane
        self.coef_ = np.array([plane.a, plane.b])
        self.intercept_ = plane.c
        self.inlier_mask_ = inliers
        self.threshold_ = self.threshold_factor * float(np.median(y))
        return self

    def predict(self, X):
        check_is_fitted(self, "plane_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_


class GuidedFilter(BaseEstimator):
    """``fit(guide)`` stores the guidance image; ``transform(p)`` filters ``p``."""

    def __init__(self, radius=20, mu=1e-3):
        self.radius = radius
        self.mu = mu

    def fit(self, X, y=None):
        self.guide_ = check_image(X, "guide")
        return self

    def transform(self, X):
        check_is_fitted(self, "guide_")
        return guided_filter(X, self.guide_, self.radius, self.mu)


class DepthCompleter(BaseEstimator):
    """Stateless transformer from stereo frames to completed depth maps."""

    def __init__(self, epsilon=12 / 255, k_hat=2048, m=10.0, P=20, lambda_=0.6,
                 ransac_max_iters=2000, ransac_p=0.99, theta_factor=0.01,
                 theta_hat=50.0, depth_floor=0.1, random_state=0):
        self.epsilon = epsilon
        self.k_hat = k_hat
        self.m = m
        self.P = P
        self.lambda_ = lambda_
        self.ransac_max_iters = ransac_max_iters
        self.ransac_p = ransac_p
        self.theta_factor = theta_factor
        self.theta_hat = theta_hat
        self.depth_floor = depth_floor
        self.random_state = random_state

    def pipeline_params(self):
        names = PipelineParams.__dataclass_fields__
        return PipelineParams(**{k: v for k, v in self.get_params().items() if k in names})

    def fit(self, X=None, y=None):
        self.params_ = self.pipeline_params()
        return self

    def _params(self):
        return getattr(self, "params_", None) or self.pipeline_params()

    def complete(self, frame):
        """Full :class:`~foggen.depth.DepthResult` for one frame."""
        return denoise_and_complete(
            frame.left, frame.right, frame.disparity, frame.rig,
            self._params(), self.random_state,
        )

    def transform(self, X):
        frames, single = _frames(X)
        out = [self.complete(f).depth.values for f in frames]
        return out[0] if single else out

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)


class FogSimulator(DepthCompleter):
    """Stateless transformer from stereo frames to foggy images."""

    def __init__(self, beta=0.01, epsilon=12 / 255, k_hat=2048, m=10.0, P=20,
                 lambda_=0.6, ransac_max_iters=2000, ransac_p=0.99, theta_factor=0.01,
                 theta_hat=50.0, depth_floor=0.1, radius=20, mu=1e-3, random_state=0):
        super().__init__(
            epsilon=epsilon, k_hat=k_hat, m=m, P=P, lambda_=lambda_,
            ransac_max_iters=ransac_max_iters, ransac_p=ransac_p,
            theta_factor=theta_factor, theta_hat=theta_hat, depth_floor=depth_floor,
            random_state=random_state,
        )
        self.beta = beta
        self.radius = radius
        self.mu = mu

    def fit(self, X=None, y=None):
        check_beta(self.beta)
        return super().fit(X, y)

    def simulate(self, frame):
        """Full :class:`~foggen.fog.FogResult` for one frame."""
        depth = self.complete(frame)
        return fog_from_depth(frame.left, depth, frame.rig, self.beta, self._params())

    def transform(self, X):
        frames, single = _frames(X)
        out = [self.simulate(f).foggy for f in frames]
        return out[0] if single else out
