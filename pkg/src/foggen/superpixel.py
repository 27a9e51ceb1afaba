"""SLIC superpixels in CIELAB-xy space with deterministic connectivity enforcement."""
from dataclasses import dataclass
import math

import numpy as np
from scipy import ndimage

from ._validation import check_image, check_positive
from .core import srgb_to_cielab

N_ITER = 10


@dataclass(frozen=True)
class SuperpixelRecord:
    index: int
    pixel_count: int
    mean_lab: np.ndarray
    centroid: np.ndarray  # (x, y) in pixels


@dataclass(frozen=True, eq=False)
class SuperpixelSegmentation:
    """Label raster plus per-superpixel statistics (struct of arrays).

    ``centroid[i]`` is the (x, y) mean pixel position of superpixel ``i``;
    ``mean_lab[i]`` its mean CIELAB color.
    """

    labels: np.ndarray
    pixel_count: np.ndarray
    mean_lab: np.ndarray
    centroid: np.ndarray
    compactness: float
    n_segments_requested: int

    @property
    def n_segments(self):
        return len(self.pixel_count)

    @property
    def grid_interval(self):
        """Grid interval implied by the final superpixel count."""
        return math.sqrt(self.labels.size / self.n_segments)

    @property
    def alpha(self):
        """Spatial weight of the superpixel matching cost: m^2 / S^2."""
        return self.compactness**2 / self.grid_interval**2

    def record(self, i):
        return SuperpixelRecord(
            int(i), int(self.pixel_count[i]), self.mean_lab[i], self.centroid[i]
        )

    @property
    def records(self):
        return [self.record(i) for i in range(self.n_segments)]


def superpixel_statistics(labels, lab):
    """Pixel counts, mean colors and centroids for a label raster with ids 0..K-1."""
    labels = np.asarray(labels)
    k = int(labels.max()) + 1
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=k)
    if np.any(counts == 0):
        raise ValueError("label raster ids must be contiguous from 0")
    lab = np.asarray(lab, dtype=np.float64).reshape(-1, 3)
    mean_lab = np.stack(
        [np.bincount(flat, weights=lab[:, c], minlength=k) for c in range(3)], axis=1
    ) / counts[:, None]
    vv, uu = np.indices(labels.shape)
    centroid = np.stack(
        [
            np.bincount(flat, weights=uu.ravel().astype(np.float64), minlength=k),
            np.bincount(flat, weights=vv.ravel().astype(np.float64), minlength=k),
        ],
        axis=1,
    ) / counts[:, None]
    return counts, mean_lab, centroid


def _seed_grid(h, w, n_segments):
    nx = int(np.clip(math.ceil(math.sqrt(n_segments * w / h) - 1e-9), 1, w))
    ny = int(np.clip(math.floor(n_segments / nx + 0.5), 1, h))
    cw, ch = w / nx, h / ny
    xs = (np.arange(nx) + 0.5) * cw - 0.5
    ys = (np.arange(ny) + 0.5) * ch - 0.5
    gx, gy = np.meshgrid(xs, ys)
    return gx.ravel(), gy.ravel(), nx, ny, cw, ch


def _lab_gradient(lab):
    p = np.pad(lab, ((1, 1), (1, 1), (0, 0)), mode="edge")
    dx = p[1:-1, 2:] - p[1:-1, :-2]
    dy = p[2:, 1:-1] - p[:-2, 1:-1]
    return (dx**2).sum(-1) + (dy**2).sum(-1)


def _perturb_seeds(xs, ys, grad):
    """Move each seed to the lowest-gradient pixel of its 3x3 neighborhood.

    A seed only moves if some neighbor is strictly lower than the pixel it
    sits on; otherwise its (possibly sub-pixel) grid position is kept.
    """
    h, w = grad.shape
    xs, ys = xs.copy(), ys.copy()
    for k in range(len(xs)):
        px = min(max(int(math.floor(xs[k] + 0.5)), 0), w - 1)
        py = min(max(int(math.floor(ys[k] + 0.5)), 0), h - 1)
        y0, y1 = max(py - 1, 0), min(py + 2, h)
        x0, x1 = max(px - 1, 0), min(px + 2, w)
        win = grad[y0:y1, x0:x1]
        j = int(np.argmin(win))
        if win.flat[j] < grad[py, px]:
            ys[k] = y0 + j // win.shape[1]
            xs[k] = x0 + j % win.shape[1]
    return xs, ys


def _connected_components(labels):
    """4-connected components of equal-label regions, numbered in raster order."""
    comp = np.zeros(labels.shape, dtype=np.int64)
    offset = 0
    for i, sl in enumerate(ndimage.find_objects(labels + 1)):
        if sl is None:
            continue
        mask = labels[sl] == i
        sub, n = ndimage.label(mask)
        comp[sl][mask] = sub[mask] + offset - 1
        offset += n
    _, first = np.unique(comp.ravel(), return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    return remap[comp], len(order)


def _adjacency(comp, n):
    a = np.concatenate([comp[:, :-1].ravel(), comp[:-1, :].ravel()])
    b = np.concatenate([comp[:, 1:].ravel(), comp[1:, :].ravel()])
    diff = a != b
    keys = np.unique(np.concatenate([a[diff] * n + b[diff], b[diff] * n + a[diff]]))
    adj = [set() for _ in range(n)]
    for i, j in zip((keys // n).tolist(), (keys % n).tolist()):
        adj[i].add(j)
    return adj


def enforce_connectivity(labels, min_size):
    """Split labels into 4-connected components and absorb the small ones.

    Components smaller than ``min_size`` are visited in raster order of their
    first pixel and merged into the largest adjacent region (ties go to the
    smallest region id). Returns a raster with ids 0..K-1 in raster order.
    """
    comp, n = _connected_components(labels)
    size = np.bincount(comp.ravel(), minlength=n).tolist()
    adj = _adjacency(comp, n)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for c in range(n):
        r = find(c)
        if r != c or size[r] >= min_size or not adj[r]:
            continue
        target = min(adj[r], key=lambda j: (-size[j], j))
        parent[r] = target
        size[target] += size[r]
        adj[target] |= adj[r]
        adj[target].discard(target)
        adj[target].discard(r)
        for j in adj[r]:
            if j != target:
                adj[j].discard(r)
                adj[j].add(target)
        adj[r] = set()

    roots = np.asarray(parent)
    while True:
        nxt = roots[roots]
        if np.array_equal(nxt, roots):
            break
        roots = nxt
    merged = roots[comp]
    _, first, inverse = np.unique(merged.ravel(), return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return rank[inverse].reshape(labels.shape)


def slic_segment(image, n_segments=2048, compactness=10.0, n_iter=N_ITER):
    """Segment an sRGB image into roughly ``n_segments`` SLIC superpixels.

    Clustering runs in CIELAB-xy space with distance ``d_lab + (m / S) d_xy``
    where ``S = sqrt(N / n_segments)``. The final count may differ from the
    request after connectivity enforcement.
    """
    img = check_image(image)
    check_positive(compactness, "compactness")
    h, w = img.shape[:2]
    n_pix = h * w
    n_segments = int(n_segments)
    if n_segments < 1 or n_segments > n_pix:
        raise ValueError(
            f"image too small for requested K̂ ({n_segments} superpixels, {n_pix} pixels)"
        )
    lab = srgb_to_cielab(img)
    S = math.sqrt(n_pix / n_segments)
    xs, ys, nx, ny, cw, ch = _seed_grid(h, w, n_segments)
    xs, ys = _perturb_seeds(xs, ys, _lab_gradient(lab))
    px = np.clip(np.floor(xs + 0.5).astype(int), 0, w - 1)
    py = np.clip(np.floor(ys + 0.5).astype(int), 0, h - 1)
    colors = lab[py, px].copy()

    uu = np.arange(w)
    vv = np.arange(h)
    labels = (
        np.minimum((vv / ch).astype(int), ny - 1)[:, None] * nx
        + np.minimum((uu / cw).astype(int), nx - 1)[None, :]
    )
    radius = max(S, cw, ch)
    spatial_weight = compactness / S
    dist = np.empty((h, w))
    flat_lab = lab.reshape(-1, 3)
    vgrid, ugrid = np.indices((h, w))
    for _ in range(n_iter):
        dist.fill(np.inf)
        for k in range(len(xs)):
            x0 = max(int(math.floor(xs[k] - radius)), 0)
            x1 = min(int(math.ceil(xs[k] + radius)) + 1, w)
            y0 = max(int(math.floor(ys[k] - radius)), 0)
            y1 = min(int(math.ceil(ys[k] + radius)) + 1, h)
            if x0 >= x1 or y0 >= y1:
                continue
            d_lab = np.sqrt(((lab[y0:y1, x0:x1] - colors[k]) ** 2).sum(-1))
            d_xy = np.sqrt(
                (vv[y0:y1, None] - ys[k]) ** 2 + (uu[None, x0:x1] - xs[k]) ** 2
            )
            d = d_lab + spatial_weight * d_xy
            region = dist[y0:y1, x0:x1]
            better = d < region
            region[better] = d[better]
            labels[y0:y1, x0:x1][better] = k

        flat = labels.ravel()
        k_total = len(xs)
        counts = np.bincount(flat, minlength=k_total)
        nonempty = counts > 0
        for c in range(3):
            s = np.bincount(flat, weights=flat_lab[:, c], minlength=k_total)
            colors[nonempty, c] = s[nonempty] / counts[nonempty]
        sx = np.bincount(flat, weights=ugrid.ravel().astype(np.float64), minlength=k_total)
        sy = np.bincount(flat, weights=vgrid.ravel().astype(np.float64), minlength=k_total)
        xs[nonempty] = sx[nonempty] / counts[nonempty]
        ys[nonempty] = sy[nonempty] / counts[nonempty]

    final = enforce_connectivity(labels, S * S / 4.0)
    counts, mean_lab, centroid = superpixel_statistics(final, lab)
    return SuperpixelSegmentation(
        labels=final,
        pixel_count=counts,
        mean_lab=mean_lab,
        centroid=centroid,
        compactness=float(compactness),
        n_segments_requested=n_segments,
    )
