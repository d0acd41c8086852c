import dataclasses

import numpy as np
import pytest

from salbench import losses
from salbench import network as N
from salbench import tensor as T
from salbench.errors import ConfigError, ContractError, ShapeError

SMALL = N.NetConfig(channels=(4, 4, 4, 4, 4), r=2, k=3, decoder=4)


@pytest.fixture(scope="module")
def small_net():
    return N.adfnet_init(SMALL, seed=3)


def inputs(rng, n=1, size=64):
    return rng.uniform(0, 1, (n, 3, size, size)), rng.uniform(0, 1, (n, 1, size, size))


def test_output_shape_and_range(small_net, rng):
    rgb, t = inputs(rng, 2)
    y = N.adfnet_forward(small_net, rgb, t)
    assert y.shape == (2, 1, 64, 64)
    assert np.all((y > 0) & (y < 1))


def test_forward_bitwise_reproducible(rng):
    net = N.adfnet_init(N.NetConfig(), 0)
    rgb, t = inputs(rng)
    a = N.adfnet_forward(net, rgb, t)
    b = N.adfnet_forward(N.adfnet_init(N.NetConfig(), 0), rgb.copy(), t.copy())
    assert a.tobytes() == b.tobytes()


def test_batch_packing_invariance(small_net, rng):
    rgb, t = inputs(rng, 2)
    both = N.adfnet_forward(small_net, rgb, t)
    for i in range(2):
        one = N.adfnet_forward(small_net, rgb[i : i + 1], t[i : i + 1])
        np.testing.assert_allclose(both[i : i + 1], one, rtol=0, atol=1e-12)


def test_stream_symmetry(small_net, rng):
    # give the rgb stream the thermal weights on channel 0 and zeros elsewhere
    first_t = small_net.t_blocks[0][0]
    w = np.zeros((first_t.out_c, 3, 3, 3))
    w[:, :1] = first_t.weight
    rgb_blocks = ((first_t.replace(weight=w), small_net.t_blocks[0][1]),) + small_net.t_blocks[1:]
    net = dataclasses.replace(small_net, rgb_blocks=rgb_blocks, cbam_rgb=small_net.cbam_t)
    a, b = rng.uniform(0, 1, (2, 1, 1, 64, 64))
    junk = rng.uniform(0, 1, (2, 1, 2, 64, 64))
    y1 = N.adfnet_forward(net, np.concatenate([a, junk[0]], axis=1), b)
    y2 = N.adfnet_forward(net, np.concatenate([b, junk[1]], axis=1), a)
    np.testing.assert_allclose(y1, y2, rtol=0, atol=1e-12)


def test_input_validation(small_net):
    with pytest.raises(ShapeError):
        N.adfnet_forward(small_net, np.zeros((1, 3, 32, 32)), np.zeros((1, 1, 32, 32)))
    with pytest.raises(ShapeError):
        N.adfnet_forward(small_net, np.zeros((1, 3, 64, 64)), np.zeros((1, 3, 64, 64)))
    with pytest.raises(ShapeError):
        N.adfnet_forward(small_net, np.zeros((1, 3, 64, 128)), np.zeros((1, 1, 64, 128)))


def test_config_validation():
    for bad in (dict(channels=(8, 16)), dict(r=3), dict(k=4), dict(channels=(4, 4, 4, 4, 6), r=2), dict(decoder=0)):
        with pytest.raises(ConfigError):
            N.NetConfig(**bad)
    with pytest.raises(ConfigError):
        N.adfnet_init("default")


def test_init_determinism_and_bounds():
    a, b, c = N.adfnet_init(seed=1), N.adfnet_init(seed=1), N.adfnet_init(seed=2)
    pairs = list(zip(N.named_arrays(a), N.named_arrays(b), N.named_arrays(c)))
    assert all(x[1].tobytes() == y[1].tobytes() for x, y, _ in pairs)
    assert any(not np.array_equal(x[1], z[1]) for x, _, z in pairs)
    for name, arr in N.named_arrays(a):
        if arr.ndim == 1:
            assert not arr.any(), name
        else:
            assert np.max(np.abs(arr)) <= N.xavier_bound(arr.shape), name


def test_named_arrays_order_and_count():
    net = N.adfnet_init(SMALL, 0)
    names = [n for n, _ in N.named_arrays(net)]
    assert len(names) == len(set(names))
    assert names[0] == "rgb_blocks.0.0.weight" and names[-1] == "head.bias"
    assert N.parameter_count(net) == sum(a.size for _, a in N.named_arrays(net))


def test_train_step_lr_zero_and_contracts(small_net, rng):
    rgb, t = inputs(rng)
    gt = (rng.uniform(size=(1, 1, 64, 64)) < 0.3).astype(float)
    same, value = N.train_step(small_net, rgb, t, gt, 0.0)
    assert same is small_net and value.total > 0
    with pytest.raises(ContractError):
        N.train_step(small_net, rgb, t, gt, -0.1)
    with pytest.raises(ContractError):
        N.train_step(small_net, rgb, t, gt * 0.5, 0.1)


def test_train_step_descends(small_net, rng):
    rgb, t = inputs(rng, 2)
    gt = np.zeros((2, 1, 64, 64))
    gt[:, :, 16:40, 20:44] = 1.0
    net, first = N.train_step(small_net, rgb, t, gt, 0.02)
    for _ in range(4):
        net, value = N.train_step(net, rgb, t, gt, 0.02)
    assert value.total < first.total


def test_network_gradient_matches_finite_differences():
    """Vector-Jacobian check of the full backward pass over every parameter array.

    The scalar is ``sum(dy * forward)`` for a fixed random ``dy``; the loss
    terms have their own checks, and their |tanh| kink at a zero Laplacian
    would make central differences through the whole network unreliable.
    Three sampled coordinates per array keep the run short. Biases start at
    zero, which puts some pre-activations exactly on the relu hinge (an
    all-zero window plus a zero bias), so they are replaced by small random
    values first.
    """
    rng = np.random.default_rng(9)
    net = N.tree_map(lambda a: a if a.ndim > 1 else rng.uniform(-0.1, 0.1, a.shape), N.adfnet_init(SMALL, seed=5))
    rgb, t = inputs(rng)
    dy = rng.uniform(-1, 1, (1, 1, 64, 64))
    flat = [a for _, a in N.named_arrays(net)]

    def rebuild(arrs):
        it = iter(arrs)
        return N.tree_map(lambda _: next(it), net)

    def value(*arrs):
        return float(np.sum(dy * N.adfnet_forward(rebuild(arrs), rgb, t)))

    def f(*arrs):
        y, cache = N._forward(rebuild(arrs), rgb, t)
        g = N._backward(cache, dy)
        return float(np.sum(dy * y)), [a for _, a in N.named_arrays(g)]

    coords = [rng.choice(a.size, size=min(3, a.size), replace=False).tolist() for a in flat]
    assert T.grad_check(f, flat, h=1e-6, coords=coords, value_fn=value) < 1e-5


def test_loss_and_grad_composes_loss_gradient(small_net, rng):
    rgb, t = inputs(rng)
    gt = (rng.uniform(size=(1, 1, 64, 64)) < 0.3).astype(float)
    value, grads = N.loss_and_grad(small_net, rgb, t, gt)
    pred, cache = N._forward(small_net, rgb, t)
    v2, dpred = losses.total_loss_grad(pred, gt)
    assert value == v2
    for (_, a), (_, b) in zip(N.named_arrays(grads), N.named_arrays(N._backward(cache, dpred))):
        assert a.tobytes() == b.tobytes()
