"""Color-guided edge-preserving filter with truncated border windows."""
import numpy as np

from ._validation import check_field, check_image, check_same_shape


def box_sum(x, radius):
    """Sum over the (2r+1)^2 window around each pixel, clipped at the borders.

    Works on arrays of shape (H, W, ...) through integral images.
    """
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape[:2]
    pad = [(1, 0), (1, 0)] + [(0, 0)] * (x.ndim - 2)
    ii = np.pad(x, pad).cumsum(axis=0).cumsum(axis=1)
    y0 = np.clip(np.arange(h) - radius, 0, h)
    y1 = np.clip(np.arange(h) + radius + 1, 0, h)
    x0 = np.clip(np.arange(w) - radius, 0, w)
    x1 = np.clip(np.arange(w) + radius + 1, 0, w)
    return (
        ii[y1][:, x1] - ii[y0][:, x1] - ii[y1][:, x0] + ii[y0][:, x0]
    )


def window_counts(shape, radius):
    h, w = shape
    ys = np.minimum(np.arange(h) + radius + 1, h) - np.maximum(np.arange(h) - radius, 0)
    xs = np.minimum(np.arange(w) + radius + 1, w) - np.maximum(np.arange(w) - radius, 0)
    return np.outer(ys, xs).astype(np.float64)


def _solve_sym3(s, rhs):
    """Solve per-pixel symmetric 3x3 systems given as the 6 unique entries."""
    xx, xy, xz, yy, yz, zz = s
    c00 = yy * zz - yz * yz
    c01 = xz * yz - xy * zz
    c02 = xy * yz - xz * yy
    c11 = xx * zz - xz * xz
    c12 = xy * xz - xx * yz
    c22 = xx * yy - xy * xy
    det = xx * c00 + xy * c01 + xz * c02
    r0, r1, r2 = rhs[..., 0], rhs[..., 1], rhs[..., 2]
    return np.stack(
        [
            (c00 * r0 + c01 * r1 + c02 * r2) / det,
            (c01 * r0 + c11 * r1 + c12 * r2) / det,
            (c02 * r0 + c12 * r1 + c22 * r2) / det,
        ],
        axis=-1,
    )


def guided_filter(p, guide, radius=20, mu=1e-3):
    """Filter ``p`` with the locally linear model ``q = a . I + b`` of the guide ``I``.

    Per window ``a = (Sigma + mu*Id)^-1 cov(I, p)`` and
    ``b = mean(p) - a . mean(I)``; coefficients are averaged over all windows
    covering a pixel. Windows are truncated at the image border.
    """
    if int(radius) < 1 or mu <= 0:
        raise ValueError("guided filter needs radius >= 1 and mu > 0")
    radius = int(radius)
    p = check_field(p, "p")
    I = check_image(guide, "guide")
    check_same_shape(("p", p), ("guide", I))
    if not np.all(np.isfinite(p)):
        raise ValueError("p must be complete (finite everywhere)")

    n = window_counts(p.shape, radius)
    n3 = n[..., None]
    mean_I = box_sum(I, radius) / n3
    mean_p = box_sum(p, radius) / n
    cov_Ip = box_sum(I * p[..., None], radius) / n3 - mean_I * mean_p[..., None]

    pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
    prods = np.stack([I[..., i] * I[..., j] for i, j in pairs], axis=-1)
    mean_prods = box_sum(prods, radius) / n3
    sigma = []
    for k, (i, j) in enumerate(pairs):
        entry = mean_prods[..., k] - mean_I[..., i] * mean_I[..., j]
        if i == j:
            entry = entry + mu
        sigma.append(entry)

    a = _solve_sym3(sigma, cov_Ip)
    b = mean_p - (a * mean_I).sum(axis=-1)
    mean_a = box_sum(a, radius) / n3
    mean_b = box_sum(b, radius) / n
    return (mean_a * I).sum(axis=-1) + mean_b
