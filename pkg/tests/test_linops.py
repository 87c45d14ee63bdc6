import numpy as np
import pytest

from splitbreg.linops import (
    BlockRow,
    DenseMatrix,
    Grad2D,
    PartialDCT,
    ScaledIdentity,
    SparseOperator,
    ZeroOperator,
    build_parallel_projector,
    dct_row,
    operator_norm,
)


def _check_adjoint(op, rng, trials=10):
    m, n = op.shape
    for _ in range(trials):
        x = rng.standard_normal(n)
        y = rng.standard_normal(m)
        lhs = np.dot(op.apply(x), y)
        rhs = np.dot(x, op.apply_adjoint(y))
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_dense_matrix_basics():
    a = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    op = DenseMatrix(a)
    assert op.shape == (3, 2)
    np.testing.assert_allclose(op.apply(np.array([1.0, 1.0])), [3.0, 7.0, 11.0])
    np.testing.assert_allclose(op.row(1), [3.0, 4.0])
    np.testing.assert_allclose(op.to_dense(), a)
    _check_adjoint(op, np.random.default_rng(0))
    with pytest.raises(ValueError):
        DenseMatrix(np.zeros(3))


def test_operator_norm_diagonal():
    op = DenseMatrix(np.diag([3.0, 1.0]))
    assert op.norm_estimate() == pytest.approx(3.0, rel=1e-6)


def test_operator_norm_matches_svd():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((7, 5))
    op = DenseMatrix(a)
    want = np.linalg.svd(a, compute_uv=False)[0]
    assert op.norm_estimate() == pytest.approx(want, rel=1e-4)


def test_operator_norm_cached():
    op = DenseMatrix(np.eye(3))
    first = op.norm_estimate()
    assert op.norm_estimate() is first or op.norm_estimate() == first
    assert op._norm is not None


def test_operator_norm_warns_on_cap():
    op = DenseMatrix(np.diag([2.0, 1.0]))
    with pytest.warns(UserWarning):
        operator_norm(op, tol=1e-16, max_iter=1)


def test_scaled_identity_and_zero():
    s = ScaledIdentity(3, -2.0)
    np.testing.assert_allclose(s.apply(np.array([1.0, 2.0, 3.0])), [-2.0, -4.0, -6.0])
    np.testing.assert_allclose(s.row(1), [0.0, -2.0, 0.0])
    assert s.norm_estimate() == 2.0
    z = ZeroOperator(2, 4)
    np.testing.assert_allclose(z.apply(np.ones(4)), np.zeros(2))
    np.testing.assert_allclose(z.apply_adjoint(np.ones(2)), np.zeros(4))
    assert z.norm_estimate() == 0.0
    _check_adjoint(s, np.random.default_rng(2))
    _check_adjoint(z, np.random.default_rng(3))


def test_sparse_operator_roundtrip(tmp_path):
    rng = np.random.default_rng(4)
    a = rng.standard_normal((4, 6))
    a[a < 0.5] = 0.0
    op = SparseOperator(a)
    path = tmp_path / "op.mtx"
    op.save(path)
    back = SparseOperator.load(path)
    np.testing.assert_allclose(back.to_dense(), a)
    np.testing.assert_allclose(op.row(2), a[2])
    _check_adjoint(op, rng)


def test_block_row_sum():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    c = np.array([[10.0], [20.0]])
    op = BlockRow([DenseMatrix(a), DenseMatrix(c)], combine="sum")
    assert op.shape == (2, 3)
    np.testing.assert_allclose(op.to_dense(), np.hstack([a, c]))
    np.testing.assert_allclose(op.row(0), [1.0, 2.0, 10.0])
    _check_adjoint(op, np.random.default_rng(5))


def test_block_row_stack():
    a = np.array([[1.0, 2.0]])
    c = np.array([[5.0], [6.0]])
    op = BlockRow([DenseMatrix(a), DenseMatrix(c)], combine="stack")
    assert op.shape == (3, 3)
    want = np.zeros((3, 3))
    want[0, :2] = [1.0, 2.0]
    want[1:, 2] = [5.0, 6.0]
    np.testing.assert_allclose(op.to_dense(), want)
    np.testing.assert_allclose(op.row(1), [0.0, 0.0, 5.0])
    _check_adjoint(op, np.random.default_rng(6))


def test_block_row_validation():
    with pytest.raises(ValueError):
        BlockRow([], combine="sum")
    with pytest.raises(ValueError):
        BlockRow([DenseMatrix(np.eye(2))], combine="glue")
    with pytest.raises(ValueError):
        BlockRow([DenseMatrix(np.eye(2)), DenseMatrix(np.eye(3))], combine="sum")


def test_grad2d_constant_image():
    g = Grad2D(4, 5)
    np.testing.assert_allclose(g.apply(np.full(20, 3.7)), np.zeros(40))


def test_grad2d_matches_dense_and_adjoint():
    g = Grad2D(3, 4)
    dense = g.to_dense()
    rng = np.random.default_rng(7)
    x = rng.standard_normal(12)
    np.testing.assert_allclose(g.apply(x), dense @ x)
    _check_adjoint(g, rng)


def test_grad2d_norm_bound():
    g = Grad2D(6, 7)
    dense = g.to_dense()
    top = np.linalg.svd(dense, compute_uv=False)[0]
    assert g.norm_estimate() == pytest.approx(top, rel=1e-4)
    assert top <= np.sqrt(8.0)


def test_grad2d_pair_groups():
    g = Grad2D(2, 3)
    groups = g.pair_groups()
    assert len(groups) == 6
    np.testing.assert_array_equal(groups[0], [0, 6])
    np.testing.assert_array_equal(groups[5], [5, 11])


def test_grad2d_known_values():
    # 2x2 image [[0, 1], [2, 4]]: x-differences then y-differences
    g = Grad2D(2, 2)
    out = g.apply(np.array([0.0, 1.0, 2.0, 4.0]))
    np.testing.assert_allclose(out, [1.0, 0.0, 2.0, 0.0, 2.0, 3.0, 0.0, 0.0])


def test_dct_rows_orthonormal():
    n = 16
    full = np.stack([dct_row(n, j) for j in range(n)])
    np.testing.assert_allclose(full @ full.T, np.eye(n), atol=1e-12)
    with pytest.raises(ValueError):
        dct_row(4, 4)


def test_partial_dct():
    op = PartialDCT(16, np.array([0, 3, 7]))
    assert op.shape == (3, 16)
    np.testing.assert_allclose(op.to_dense() @ op.to_dense().T, np.eye(3), atol=1e-12)
    assert op.norm_estimate() == 1.0
    with pytest.raises(ValueError):
        PartialDCT(16, np.array([1, 1]))
    _check_adjoint(op, np.random.default_rng(8))


# ---------------------------------------------------------------------------
# parallel-beam projector
# ---------------------------------------------------------------------------


def _sampled_chord(height, width, ang_deg, offset, step=1e-3):
    """Chord length of the ray through the image rectangle, by point sampling."""
    theta = np.deg2rad(ang_deg)
    dx, dy = np.cos(theta), np.sin(theta)
    cx, cy = width / 2.0, height / 2.0
    p0x, p0y = cx - offset * dy, cy + offset * dx
    span = float(np.hypot(height, width))
    ss = np.arange(-span, span, step)
    xs = p0x + ss * dx
    ys = p0y + ss * dy
    inside = (xs >= 0) & (xs <= width) & (ys >= 0) & (ys <= height)
    return float(inside.sum() * step)


def test_projector_axis_aligned_rows():
    # angle 0 with unit-spaced offsets: each ray integrates one pixel row
    proj = build_parallel_projector(4, 4, [0.0], offsets=np.array([-1.5, -0.5, 0.5, 1.5]))
    assert proj.shape == (4, 16)
    img = np.arange(16.0)
    sums = img.reshape(4, 4).sum(axis=1)
    np.testing.assert_allclose(np.sort(proj.apply(img)), np.sort(sums))
    np.testing.assert_allclose(proj.apply(np.ones(16)), np.full(4, 4.0))


def test_projector_diagonal_unit_pixel():
    proj = build_parallel_projector(1, 1, [45.0], offsets=np.array([0.0]))
    np.testing.assert_allclose(proj.apply(np.ones(1)), [np.sqrt(2.0)], atol=1e-12)


def test_projector_chord_lengths():
    rng = np.random.default_rng(9)
    h, w = 5, 7
    angles = [0.0, 30.0, 45.0, 90.0, 137.0]
    proj = build_parallel_projector(h, w, angles, rays_per_angle=9)
    lengths = proj.apply(np.ones(h * w))
    diag = float(np.hypot(h, w))
    offsets = np.linspace(-diag / 2.0, diag / 2.0, 9)
    k = 0
    for a_idx, ang in enumerate(angles):
        for t in offsets:
            want = _sampled_chord(h, w, ang, t)
            if want == 0.0:
                continue  # dropped row
            assert proj.row_angle[k] == a_idx
            assert lengths[k] == pytest.approx(want, abs=5e-3)
            k += 1
    assert k == proj.shape[0]


def test_projector_drops_missing_rays():
    # offsets beyond the diagonal never intersect
    proj = build_parallel_projector(2, 2, [10.0], offsets=np.array([0.0, 50.0]))
    assert proj.shape[0] == 1
    with pytest.raises(ValueError):
        build_parallel_projector(2, 2, [0.0], offsets=np.array([50.0]))


def test_projector_spacing_recorded():
    proj = build_parallel_projector(4, 4, [0.0, 90.0], rays_per_angle=5)
    diag = float(np.hypot(4, 4))
    assert proj.ray_spacing == pytest.approx(diag / 4.0)
    np.testing.assert_allclose(proj.angles_deg, [0.0, 90.0])
