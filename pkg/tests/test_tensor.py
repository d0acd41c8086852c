import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from salbench import reference
from salbench import tensor as T
from salbench.errors import ContractError, ShapeError
from salbench.tensor import ConvParams


def same(w, b=None):
    return ConvParams.same(np.asarray(w, dtype=np.float64), b)


# -- conv2d ----------------------------------------------------------------------------------------


def test_conv_all_ones_counts_padding(backend):
    y = T.conv2d(np.ones((1, 1, 3, 3)), same(np.ones((1, 1, 3, 3))))
    assert y[0, 0, 1, 1] == 9.0
    assert y[0, 0, 0, 0] == y[0, 0, 0, 2] == y[0, 0, 2, 0] == y[0, 0, 2, 2] == 4.0


def test_conv_pointwise_affine(backend, rng):
    x = rng.uniform(-1, 1, (2, 1, 4, 5))
    y = T.conv2d(x, ConvParams(np.full((1, 1, 1, 1), 2.0), np.ones(1)))
    np.testing.assert_array_equal(y, 2 * x + 1)


def test_conv_matches_loop_reference(backend, rng):
    x = rng.uniform(-1, 1, (1, 2, 4, 4))
    p = ConvParams(rng.uniform(-1, 1, (3, 2, 3, 3)), rng.uniform(-1, 1, 3), 1, 1)
    want = reference.conv2d(x, p.weight, p.bias, 1, 1)
    assert np.max(np.abs(T.conv2d(x, p) - want)) <= 1e-12 * np.max(np.abs(want))


@pytest.mark.parametrize("stride,pad", [(1, 0), (2, 0), (2, 1), (3, 2)])
def test_conv_output_dims(stride, pad):
    p = ConvParams(np.zeros((4, 2, 3, 3)), np.zeros(4), stride, pad)
    y = T.conv2d(np.zeros((2, 2, 7, 8)), p)
    assert y.shape == (2, 4, (7 + 2 * pad - 3) // stride + 1, (8 + 2 * pad - 3) // stride + 1)


def test_conv_shape_errors():
    p = ConvParams(np.zeros((1, 2, 3, 3)), np.zeros(1))
    with pytest.raises(ShapeError):
        T.conv2d(np.zeros((1, 3, 5, 5)), p)
    with pytest.raises(ShapeError):
        T.conv2d(np.zeros((1, 2, 2, 2)), p)
    with pytest.raises(ShapeError):
        T.conv2d_grad(np.zeros((1, 2, 5, 5)), p, np.zeros((1, 1, 2, 2)))
    with pytest.raises(ShapeError):
        ConvParams.same(np.zeros((1, 1, 2, 2)))
    with pytest.raises(ShapeError):
        ConvParams(np.zeros((2, 1, 3, 3)), np.zeros(3))


def test_conv_grad_zero_dy(backend, rng):
    x = rng.uniform(-1, 1, (1, 2, 4, 4))
    p = same(rng.uniform(-1, 1, (3, 2, 3, 3)))
    for g in T.conv2d_grad(x, p, np.zeros((1, 3, 4, 4))):
        assert not np.any(g)


def test_conv_grad_pointwise_chain_rule(backend, rng):
    x = rng.uniform(-1, 1, (2, 1, 3, 4))
    dy = rng.uniform(-1, 1, (2, 1, 3, 4))
    p = ConvParams(np.full((1, 1, 1, 1), -1.5), np.zeros(1))
    dx, dw, db = T.conv2d_grad(x, p, dy)
    np.testing.assert_allclose(dx, -1.5 * dy, rtol=0, atol=1e-15)
    assert dw[0, 0, 0, 0] == pytest.approx(float(np.sum(x * dy)), rel=1e-13)
    assert db[0] == pytest.approx(float(np.sum(dy)), rel=1e-13)


def test_conv_grad_finite_differences(backend, rng):
    x = rng.uniform(-1, 1, (1, 2, 5, 5))
    p = ConvParams(rng.uniform(-1, 1, (2, 2, 3, 3)), rng.uniform(-1, 1, 2), 2, 1)
    dy = rng.uniform(-1, 1, T.conv2d(x, p).shape)

    def f(x, w, b):
        q = ConvParams(w, b, 2, 1)
        return float(np.sum(dy * T.conv2d(x, q))), T.conv2d_grad(x, q, dy)

    assert T.grad_check(f, [x, p.weight, p.bias], 1e-5) < 1e-6


# -- pooling ---------------------------------------------------------------------------------------


def test_maxpool_window_and_argmax(backend):
    y, am = T.maxpool2(np.array([[[[1.0, 2.0], [3.0, 4.0]]]]))
    assert y[0, 0, 0, 0] == 4.0
    assert am[0, 0, 0, 0] == 3  # row 1, col 1 of a 2-wide plane


def test_maxpool_ties_go_to_top_left(backend):
    y, am = T.maxpool2(np.full((1, 2, 4, 6), 0.7))
    assert np.all(y == 0.7)
    oy, ox = np.meshgrid(np.arange(2), np.arange(3), indexing="ij")
    for ch in range(2):
        np.testing.assert_array_equal(am[0, ch], (2 * oy) * 6 + 2 * ox)


def test_maxpool_matches_window_scan(backend, rng):
    x = rng.uniform(-1, 1, (1, 1, 6, 6))
    np.testing.assert_array_equal(T.maxpool2(x)[0], reference.maxpool2(x))


def test_maxpool_odd_dims():
    with pytest.raises(ShapeError):
        T.maxpool2(np.zeros((1, 1, 3, 4)))


def test_avgpool_identity_constant_and_blocks(rng):
    x = rng.uniform(-1, 1, (1, 2, 4, 4))
    np.testing.assert_array_equal(T.avgpool(x, 1), x)
    np.testing.assert_allclose(T.avgpool(np.full((1, 1, 8, 8), 0.3), 4), 0.3, rtol=1e-15)
    ramp = np.arange(1.0, 17.0).reshape(1, 1, 4, 4)
    np.testing.assert_array_equal(T.avgpool(ramp, 2)[0, 0], [[3.5, 5.5], [11.5, 13.5]])
    with pytest.raises(ShapeError):
        T.avgpool(np.zeros((1, 1, 6, 6)), 4)


@given(hnp.arrays(np.float64, (1, 2, 8, 8), elements=st.integers(-1000, 1000).map(float)), st.sampled_from([1, 2, 4, 8]))
def test_avgpool_times_area_is_window_sum(x, rate):
    sums = x.reshape(1, 2, 8 // rate, rate, 8 // rate, rate).sum(axis=(3, 5))
    np.testing.assert_array_equal(T.avgpool(x, rate) * rate * rate, sums)


def test_adaptive_avgpool_cases(rng):
    x = rng.uniform(-1, 1, (1, 2, 6, 6))
    np.testing.assert_array_equal(T.adaptive_avgpool(x, 6, 6), x)
    np.testing.assert_allclose(T.adaptive_avgpool(x, 1, 1)[..., 0, 0], x.mean(axis=(2, 3)), rtol=1e-14)
    np.testing.assert_allclose(T.adaptive_avgpool(x, 3, 3), T.avgpool(x, 2), rtol=1e-14)
    with pytest.raises(ShapeError):
        T.adaptive_avgpool(x, 7, 3)


def test_adaptive_bins_cover_input():
    assert T.adaptive_bins(5, 3) == [(0, 2), (1, 4), (3, 5)]
    assert T.adaptive_bins(8, 5)[0][0] == 0 and T.adaptive_bins(8, 5)[-1][1] == 8


# -- resampling ------------------------------------------------------------------------------------


def test_upsample_constant_and_identity(backend, rng):
    np.testing.assert_allclose(T.upsample_bilinear(np.full((1, 2, 3, 5), -0.25), 7, 11), -0.25, rtol=1e-15)
    x = rng.uniform(-1, 1, (1, 1, 3, 4))
    np.testing.assert_array_equal(T.upsample_bilinear(x, 3, 4), x)


def test_upsample_half_pixel_sites(backend):
    x = np.array([[[[0.0, 1.0], [2.0, 3.0]]]])
    y = T.upsample_bilinear(x, 4, 4)[0, 0]
    for oy in range(4):
        for ox in range(4):
            sy = min(max((oy + 0.5) * 0.5 - 0.5, 0.0), 1.0)
            sx = min(max((ox + 0.5) * 0.5 - 0.5, 0.0), 1.0)
            # the map is affine in (row, col): value = 2*row + col
            assert y[oy, ox] == pytest.approx(2 * sy + sx, abs=1e-15)


def test_upsample_rejects_shrinking():
    with pytest.raises(ShapeError):
        T.upsample_bilinear(np.zeros((1, 1, 4, 4)), 3, 4)


# -- pointwise and structural ops -----------------------------------------------------------------------


def test_activation_values():
    z = np.zeros((1, 1, 1, 1))
    assert T.activation(z, "sigmoid")[0, 0, 0, 0] == 0.5
    assert T.activation(z, "tanh")[0, 0, 0, 0] == 0.0
    assert T.activation(-np.full((1, 1, 1, 1), 2.0), "relu")[0, 0, 0, 0] == 0.0
    assert T.activation(np.ones((1, 1, 1, 1)), "sigmoid")[0, 0, 0, 0] == pytest.approx(0.7310585786, abs=1e-10)
    with pytest.raises(ValueError):
        T.activation(z, "gelu")


@given(st.lists(st.floats(-1e300, 1e300), min_size=2, max_size=20))
def test_sigmoid_open_interval_and_monotone(vals):
    x = np.sort(np.asarray(vals))
    y = T.sigmoid(x)
    assert np.all((y > 0) & (y < 1))
    assert np.all(np.diff(y) >= 0)
    # strictly increasing wherever float64 can still resolve the difference
    mid = (np.abs(x[:-1]) < 30) & (np.abs(x[1:]) < 30) & (np.diff(x) > 1e-9)
    assert np.all(np.diff(y)[mid] > 0)


def test_eltwise_broadcasting(rng):
    a = rng.uniform(-1, 1, (2, 3, 4, 5))
    np.testing.assert_array_equal(T.eltwise(a, np.zeros_like(a), "add"), a)
    np.testing.assert_array_equal(T.eltwise(a, np.full((2, 3, 1, 1), 0.5), "mul"), a * 0.5)
    b = rng.uniform(-1, 1, (2, 1, 4, 5))
    got = T.eltwise(a, b, "mul")
    for idx in np.ndindex(a.shape):
        assert got[idx] == a[idx] * b[idx[0], 0, idx[2], idx[3]]
    with pytest.raises(ShapeError):
        T.eltwise(a, np.zeros((2, 3, 4, 1)), "add")


def test_concat_channels(rng):
    parts = [rng.uniform(size=(1, c, 2, 3)) for c in (1, 2, 3)]
    out = T.concat_channels(parts)
    assert out.shape == (1, 6, 2, 3)
    np.testing.assert_array_equal(out[:, 1:3], parts[1])
    np.testing.assert_array_equal(T.concat_channels(parts[:1]), parts[0])
    two = T.concat_channels([np.full((1, 1, 2, 2), 3.0), np.full((1, 1, 2, 2), 4.0)])
    assert np.all(two[:, 0] == 3.0) and np.all(two[:, 1] == 4.0)
    with pytest.raises(ShapeError):
        T.concat_channels([np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2, 3))])


# -- grad_check -----------------------------------------------------------------------------------------


def test_grad_check_sum_is_exact(rng):
    x = rng.uniform(-1, 1, (1, 2, 3, 3))
    assert T.grad_check(lambda v: (float(v.sum()), [np.ones_like(v)]), [x]) < 1e-9


def test_grad_check_sigmoid_derivative():
    x = np.full((1, 1, 1, 1), 0.5)
    s = 1.0 / (1.0 + math.exp(-0.5))
    assert s * (1 - s) == pytest.approx(0.2350037122, abs=1e-10)
    g = T.activation_grad(x, np.ones_like(x), "sigmoid")
    assert g[0, 0, 0, 0] == pytest.approx(0.2350037122, abs=1e-10)
    err = T.grad_check(lambda v: (float(T.sigmoid(v).sum()), [T.activation_grad(v, np.ones_like(v), "sigmoid")]), [x])
    assert err < 1e-9


def test_grad_check_conv_sum(backend, rng):
    x = rng.uniform(-1, 1, (1, 2, 5, 5))
    p = same(rng.uniform(-1, 1, (2, 2, 3, 3)), rng.uniform(-1, 1, 2))
    ones = np.ones((1, 2, 5, 5))
    assert T.grad_check(lambda v: (float(T.conv2d(v, p).sum()), [T.conv2d_grad(v, p, ones)[0]]), [x]) < 1e-6


def test_grad_check_contracts():
    x = np.zeros((1, 1, 2, 2))
    with pytest.raises(ContractError):
        T.grad_check(lambda v: (v, [v]), [x])
    with pytest.raises(ContractError):
        T.grad_check(lambda v: (0.0, [v]), [x], h=1e-2)


def test_grad_check_detects_wrong_gradient(rng):
    x = rng.uniform(-1, 1, (1, 1, 3, 3))
    assert T.grad_check(lambda v: (float((v**2).sum()), [v]), [x]) > 0.1


# -- purity ---------------------------------------------------------------------------------------------


def test_operations_are_pure(backend, rng):
    x = rng.uniform(-1, 1, (2, 2, 8, 8))
    p = same(rng.uniform(-1, 1, (3, 2, 3, 3)))
    before = x.copy()
    a = (T.conv2d(x, p), T.maxpool2(x)[0], T.upsample_bilinear(x, 12, 16), T.adaptive_avgpool(x, 3, 5))
    b = (T.conv2d(x, p), T.maxpool2(x)[0], T.upsample_bilinear(x, 12, 16), T.adaptive_avgpool(x, 3, 5))
    np.testing.assert_array_equal(x, before)
    for u, v in zip(a, b):
        assert u.tobytes() == v.tobytes()
