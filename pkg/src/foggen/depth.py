"""Superpixel-level denoising and completion of stereo depth.

The pipeline invalidates photo-inconsistent disparities, segments the clear
image with SLIC, fits an affine depth plane ``d = a*u + b*v + c`` to every
superpixel with enough valid depth, hands planes to the remaining superpixels
by greedy matching on color and position, and finally imputes holes and gross
outliers from the planes.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from ._validation import check_image, check_same_shape
from .core import ScalarField, disparity_to_depth
from .params import PipelineParams
from .superpixel import SuperpixelSegmentation, slic_segment

DEGENERATE_AREA = 1e-9
MAX_DEGENERATE_DRAWS = 100


class UnfittableError(ValueError):
    """Raised when no plane can be fitted to a pixel set."""


@dataclass(frozen=True)
class Plane:
    a: float
    b: float
    c: float

    def __call__(self, u, v):
        return self.a * np.asarray(u) + self.b * np.asarray(v) + self.c

    def as_array(self):
        return np.array([self.a, self.b, self.c])


@dataclass
class MatchAssignment:
    pairs: list = field(default_factory=list)  # (unreliable_id, source_id, cost)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def photo_consistency_check(left, right, disparity, epsilon=12 / 255):
    """Validity mask after dropping disparities whose left/right colors disagree.

    Pixel (u, v) is matched to column ``round(u - D)`` of the right image;
    correspondences outside the image or with an RGB (Euclidean) color
    difference above ``epsilon`` are invalidated.
    """
    R = check_image(left, "left")
    Q = check_image(right, "right")
    if not isinstance(disparity, ScalarField):
        disparity = ScalarField(disparity)
    check_same_shape(("left", R), ("right", Q), ("disparity", disparity.values))
    h, w = disparity.shape
    valid = disparity.valid.copy()
    vv, uu = np.nonzero(valid)
    cols = np.floor(uu - disparity.values[vv, uu] + 0.5).astype(np.int64)
    inside = (cols >= 0) & (cols < w)
    ok = np.zeros(len(vv), dtype=bool)
    diff = R[vv[inside], uu[inside]] - Q[vv[inside], cols[inside]]
    ok[inside] = np.sqrt((diff**2).sum(axis=1)) <= epsilon
    valid[vv[~ok], uu[~ok]] = False
    return valid


def classify_superpixels(labels, valid, P=20, lambda_=0.6):
    """Reliability flag per superpixel: ``#valid >= max(P, lambda_ * #pixels)``."""
    labels = np.asarray(labels)
    valid = np.asarray(valid, dtype=bool)
    check_same_shape(("labels", labels), ("valid", valid))
    k = int(labels.max()) + 1
    card = np.bincount(labels.ravel(), minlength=k)
    n_valid = np.bincount(labels.ravel(), weights=valid.ravel(), minlength=k)
    return n_valid >= np.maximum(P, lambda_ * card)


def _adaptive_trials(inlier_ratio, p, cap):
    good = inlier_ratio**3
    if good >= 1.0:
        return 0
    if good <= 0.0:
        return cap
    return min(cap, math.ceil(math.log(1.0 - p) / math.log(1.0 - good)))


def fit_plane_ransac(u, v, d, seed=0, max_iters=2000, p=0.99, theta_factor=0.01):
    """Robustly fit ``d = a*u + b*v + c`` with adaptive RANSAC.

    The inlier threshold scales with the data: ``theta_factor * median(d)``.
    The trial budget shrinks as ``log(1-p) / log(1-w^3)`` with ``w`` the best
    inlier ratio so far, capped at ``max_iters``. The returned plane is the
    least-squares refit on the best inlier set.

    Returns ``(plane, inlier_mask)``. Raises :class:`UnfittableError` for
    fewer than three points or collinear pixel positions.
    """
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    d = np.asarray(d, dtype=np.float64).ravel()
    n = len(d)
    if n < 3:
        raise UnfittableError(f"need at least 3 points, got {n}")
    A = np.column_stack([u, v, np.ones(n)])
    if np.linalg.matrix_rank(A) < 3:
        raise UnfittableError("pixel positions are collinear")
    theta = theta_factor * float(np.median(d))
    rng = np.random.default_rng(seed)

    best_inliers = None
    best_count = -1
    budget = max_iters
    trials = 0
    degenerate = 0
    while trials < budget:
        idx = rng.choice(n, 3, replace=False)
        (u0, u1, u2), (v0, v1, v2) = u[idx], v[idx]
        area = 0.5 * abs((u1 - u0) * (v2 - v0) - (u2 - u0) * (v1 - v0))
        if area < DEGENERATE_AREA:
            degenerate += 1
            if degenerate >= MAX_DEGENERATE_DRAWS:
                break
            continue
        degenerate = 0
        trials += 1
        coef = np.linalg.solve(A[idx], d[idx])
        inliers = np.abs(A @ coef - d) <= theta
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers
            budget = _adaptive_trials(count / n, p, max_iters)
    if best_inliers is None:
        raise UnfittableError("all samples degenerate")
    coef, *_ = np.linalg.lstsq(A[best_inliers], d[best_inliers], rcond=None)
    return Plane(*(float(x) for x in coef)), best_inliers


def _pair_costs(lab_a, xy_a, lab_b, xy_b, alpha):
    color = ((lab_a - lab_b) ** 2).sum(axis=-1)
    space = ((xy_a - xy_b) ** 2).sum(axis=-1)
    return color + alpha * space


def matching_cost(s, t, alpha):
    """Squared CIELAB color distance plus ``alpha`` times squared centroid distance."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    return float(
        _pair_costs(
            np.asarray(s.mean_lab, float),
            np.asarray(s.centroid, float),
            np.asarray(t.mean_lab, float),
            np.asarray(t.centroid, float),
            alpha,
        )
    )


def matching_cost_cosine(color_s, color_t):
    """Cosine-dissimilarity color cost, ``1 - cos(C_s, C_t)``.

    Kept for comparison only: it cannot tell dark gray from light gray.
    """
    a = np.asarray(getattr(color_s, "mean_lab", color_s), dtype=np.float64)
    b = np.asarray(getattr(color_t, "mean_lab", color_t), dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine cost undefined for a zero color vector")
    return float(1.0 - np.dot(a / na, b / nb))


def match_superpixels(mean_lab, centroid, reliable, alpha):
    """Greedily hand planes from reliable superpixels to unreliable ones.

    At each step the globally cheapest (unreliable, source) pair is taken,
    ties going to the lowest (unreliable_id, source_id); the newly assigned
    superpixel then joins the source pool, so planes can chain outward.
    """
    mean_lab = np.asarray(mean_lab, dtype=np.float64)
    centroid = np.asarray(centroid, dtype=np.float64)
    reliable = np.asarray(reliable, dtype=bool)
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    sources = np.flatnonzero(reliable)
    if len(sources) == 0:
        raise ValueError("no depth anchors: no reliable superpixel with a plane")
    pending = np.flatnonzero(~reliable)
    assignment = MatchAssignment()
    if len(pending) == 0:
        return assignment

    costs = _pair_costs(
        mean_lab[pending][:, None, :],
        centroid[pending][:, None, :],
        mean_lab[sources][None, :, :],
        centroid[sources][None, :, :],
        alpha,
    )
    best = costs.argmin(axis=1)
    best_cost = costs[np.arange(len(pending)), best]
    best_src = sources[best]
    active = np.ones(len(pending), dtype=bool)
    for _ in range(len(pending)):
        i = int(np.argmin(np.where(active, best_cost, np.inf)))
        new_source = int(pending[i])
        assignment.pairs.append((new_source, int(best_src[i]), float(best_cost[i])))
        active[i] = False
        c = _pair_costs(
            mean_lab[pending], centroid[pending], mean_lab[new_source], centroid[new_source], alpha
        )
        update = active & ((c < best_cost) | ((c == best_cost) & (new_source < best_src)))
        best_cost[update] = c[update]
        best_src[update] = new_source
    return assignment


def assign_planes(planes, assignment):
    """Copy source planes onto matched superpixels, in assignment order."""
    planes = np.array(planes, dtype=np.float64, copy=True)
    for target, source, _ in assignment:
        planes[target] = planes[source]
    return planes


def plane_depth(labels, planes):
    h, w = labels.shape
    coef = np.asarray(planes)[labels]
    u = np.arange(w, dtype=np.float64)[None, :]
    v = np.arange(h, dtype=np.float64)[:, None]
    return coef[..., 0] * u + coef[..., 1] * v + coef[..., 2]


def complete_depth(depth, labels, planes, theta_hat=50.0, floor=0.1):
    """Fill holes and replace gross outliers with plane predictions.

    Returns ``(completed_field, replaced_mask)`` where ``replaced_mask`` marks
    valid pixels overwritten because they deviated from their plane by more
    than ``theta_hat`` meters.
    """
    if not isinstance(depth, ScalarField):
        depth = ScalarField(depth)
    labels = np.asarray(labels)
    planes = np.asarray(planes, dtype=np.float64)
    check_same_shape(("depth", depth.values), ("labels", labels))
    if planes.shape != (int(labels.max()) + 1, 3) or not np.all(np.isfinite(planes)):
        raise ValueError("every superpixel needs a plane before completion")
    predicted = plane_depth(labels, planes)
    replaced = depth.valid & (np.abs(depth.values - predicted) > theta_hat)
    out = np.where(depth.valid & ~replaced, depth.values, predicted)
    out = np.maximum(out, floor)
    return ScalarField(out, np.ones(out.shape, dtype=bool)), replaced


def superpixel_seed(global_seed, index):
    return np.random.SeedSequence([int(global_seed), int(index)])


def fit_superpixel_planes(depth, valid, labels, reliable, seed, params):
    """Fit a plane per reliable superpixel; failures are demoted to unreliable."""
    k = len(reliable)
    planes = np.full((k, 3), np.nan)
    fitted = np.zeros(k, dtype=bool)
    idx = np.flatnonzero(valid.ravel())
    lbl = labels.ravel()[idx]
    order = np.argsort(lbl, kind="stable")
    idx, lbl = idx[order], lbl[order]
    bounds = np.searchsorted(lbl, np.arange(k + 1))
    w = labels.shape[1]
    d = depth.ravel()
    for i in np.flatnonzero(reliable):
        pix = idx[bounds[i] : bounds[i + 1]]
        try:
            plane, _ = fit_plane_ransac(
                pix % w,
                pix // w,
                d[pix],
                seed=superpixel_seed(seed, i),
                max_iters=params.ransac_max_iters,
                p=params.ransac_p,
                theta_factor=params.theta_factor,
            )
        except UnfittableError:
            continue
        planes[i] = plane.as_array()
        fitted[i] = True
    return planes, fitted


@dataclass(eq=False)
class DepthResult:
    depth: ScalarField  # completed d'
    raw_depth: ScalarField  # d, holes as given by the disparity
    valid: np.ndarray  # complement of the hole set after photo-consistency
    segmentation: SuperpixelSegmentation
    criterion_reliable: np.ndarray  # reliability count criterion alone
    reliable: np.ndarray  # after demoting superpixels whose fit failed
    planes: np.ndarray  # (K, 3) rows of (a, b, c)
    assignment: MatchAssignment
    replaced: np.ndarray  # valid pixels replaced as outliers


def denoise_and_complete(left, right, disparity, rig, params=None, seed=0):
    """Turn a raw disparity map into a complete, denoised metric depth map."""
    params = params or PipelineParams()
    R = check_image(left, "left")
    if not isinstance(disparity, ScalarField):
        disparity = ScalarField(disparity)
    raw = disparity_to_depth(disparity, rig)
    valid = photo_consistency_check(R, right, disparity, params.epsilon) & raw.valid
    seg = slic_segment(R, params.k_hat, params.m)
    criterion = classify_superpixels(seg.labels, valid, params.P, params.lambda_)
    if not criterion.any():
        raise ValueError("no depth anchors: no superpixel has enough valid depth")
    planes, fitted = fit_superpixel_planes(
        raw.values, valid, seg.labels, criterion, seed, params
    )
    assignment = match_superpixels(seg.mean_lab, seg.centroid, fitted, seg.alpha)
    planes = assign_planes(planes, assignment)
    completed, replaced = complete_depth(
        ScalarField(raw.values, valid),
        seg.labels,
        planes,
        params.theta_hat,
        params.depth_floor,
    )
    return DepthResult(
        depth=completed,
        raw_depth=raw,
        valid=valid,
        segmentation=seg,
        criterion_reliable=criterion,
        reliable=fitted,
        planes=planes,
        assignment=assignment,
        replaced=replaced,
    )
