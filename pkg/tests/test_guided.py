import numpy as np
import pytest

from foggen.guided import box_sum, guided_filter


def naive_guided_filter(p, I, r, mu):
    """Per-window loop straight from the definition (truncated windows)."""
    h, w = p.shape
    a = np.zeros((h, w, 3))
    b = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            win = (slice(max(0, y - r), y + r + 1), slice(max(0, x - r), x + r + 1))
            Iw = I[win].reshape(-1, 3)
            pw = p[win].ravel()
            mI, mp = Iw.mean(axis=0), pw.mean()
            cov = (Iw * pw[:, None]).mean(axis=0) - mI * mp
            sigma = Iw.T @ Iw / len(pw) - np.outer(mI, mI)
            a[y, x] = np.linalg.solve(sigma + mu * np.eye(3), cov)
            b[y, x] = mp - a[y, x] @ mI
    q = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            win = (slice(max(0, y - r), y + r + 1), slice(max(0, x - r), x + r + 1))
            q[y, x] = a[win].reshape(-1, 3).mean(axis=0) @ I[y, x] + b[win].mean()
    return q


def test_box_sum_matches_loops(rng):
    x = rng.random((7, 9))
    got = box_sum(x, 2)
    for y in range(7):
        for c in range(9):
            assert got[y, c] == pytest.approx(x[max(0, y - 2) : y + 3, max(0, c - 2) : c + 3].sum())


@pytest.mark.parametrize("r, mu", [(1, 1e-3), (2, 1e-2), (3, 1e-4)])
def test_matches_naive_oracle(rng, r, mu):
    I, p = rng.random((11, 13, 3)), rng.random((11, 13))
    assert np.allclose(guided_filter(p, I, r, mu), naive_guided_filter(p, I, r, mu), atol=1e-10)


def test_constant_fixpoint(rng):
    I = rng.random((40, 50, 3))
    out = guided_filter(np.full((40, 50), 0.37), I, 20, 1e-3)
    assert np.max(np.abs(out - 0.37)) < 1e-9


def test_linearity(rng):
    I, p = rng.random((40, 50, 3)), rng.random((40, 50))
    lhs = guided_filter(2.5 * p + 0.3, I, 5, 1e-3)
    rhs = 2.5 * guided_filter(p, I, 5, 1e-3) + 0.3
    assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_step_edge_preserved(rng):
    h, w, edge = 64, 128, 60
    I = np.full((h, w, 3), 0.1)
    I[:, edge:] = 0.9
    clean = np.where(np.arange(w) < edge, 0.2, 0.8)[None, :].repeat(h, 0)
    p = clean + rng.normal(0, 0.05, (h, w))
    q = guided_filter(p, I, 20, 1e-3)
    # step location: the largest horizontal jump of every row stays at the edge
    jumps = np.argmax(np.abs(np.diff(q, axis=1)), axis=1) + 1
    assert np.all(np.abs(jumps - edge) <= 1)
    for side in (slice(0, edge), slice(edge, w)):
        assert np.var(q[:, side] - clean[:, side]) * 10 <= np.var(p[:, side] - clean[:, side])
    span = p.max() - p.min()
    assert q.min() >= p.min() - 0.05 * span and q.max() <= p.max() + 0.05 * span


def test_errors(rng):
    with pytest.raises(ValueError, match="dimension mismatch"):
        guided_filter(rng.random((4, 4)), rng.random((4, 5, 3)), 1)
    with pytest.raises(ValueError):
        guided_filter(rng.random((4, 4)), rng.random((4, 4, 3)), 0)
    p = rng.random((4, 4))
    p[0, 0] = np.nan
    with pytest.raises(ValueError):
        guided_filter(p, rng.random((4, 4, 3)), 1)
