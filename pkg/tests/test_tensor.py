"""Tensor-engine oracle tests: every layer against an independent
nested-loop implementation, every gradient against central differences."""

import numpy as np
import pytest

from gcml.nn import (BnStats, batchnorm, conv2d, cross_entropy, global_avgpool,
                     l2_normalize, linear, maxpool2d)
from gcml.optim import Sgd
from gcml.tensor import Tensor, no_grad, relu, sigmoid


# -- independent loop oracles -------------------------------------------------

def conv2d_loops(x, w, bias, stride, pad):
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    out = np.zeros((n, o, ho, wo), dtype=x.dtype)
    for b in range(n):
        for oc in range(o):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0 if bias is None else bias[oc]
                    for ic in range(c):
                        for u in range(k):
                            for v in range(k):
                                y = i * stride + u - pad
                                z = j * stride + v - pad
                                if 0 <= y < h and 0 <= z < wd:
                                    acc += x[b, ic, y, z] * w[oc, ic, u, v]
                    out[b, oc, i, j] = acc
    return out


def maxpool_loops(x, window):
    n, c, h, w = x.shape
    out = np.zeros((n, c, h // window, w // window), dtype=x.dtype)
    for b in range(n):
        for ch in range(c):
            for i in range(h // window):
                for j in range(w // window):
                    out[b, ch, i, j] = x[b, ch,
                                         i * window:(i + 1) * window,
                                         j * window:(j + 1) * window].max()
    return out


def linear_loops(x, w, bias):
    n, din = x.shape
    dout = w.shape[0]
    out = np.zeros((n, dout), dtype=x.dtype)
    for i in range(n):
        for o in range(dout):
            acc = bias[o]
            for j in range(din):
                acc += x[i, j] * w[o, j]
            out[i, o] = acc
    return out


def batchnorm_loops(x, gamma, beta, eps):
    """Two-pass mean/variance, normalizing over all axes but channel."""
    out = np.zeros_like(x)
    c = x.shape[1]
    for ch in range(c):
        vals = x[:, ch]
        mu = vals.mean()
        var = ((vals - mu) ** 2).mean()
        out[:, ch] = gamma[ch] * (vals - mu) / np.sqrt(var + eps) + beta[ch]
    return out


def central_diff(make_loss, tensor, h=1e-4):
    flat = tensor.data.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = make_loss().item()
        flat[i] = orig - h
        dn = make_loss().item()
        flat[i] = orig
        grad[i] = (up - dn) / (2 * h)
    return grad.reshape(tensor.data.shape)


def check_grads(make_loss, tensors, tol=1e-6):
    for t in tensors:
        t.grad = None
    loss = make_loss()
    loss.backward()
    for t in tensors:
        fd = central_diff(make_loss, t)
        denom = max(np.abs(t.grad).max(), 1e-6)
        assert np.abs(fd - t.grad).max() / denom < tol


# -- conv2d -------------------------------------------------------------------

def test_conv2d_constant_counting():
    x = Tensor(np.ones((1, 1, 3, 3)))
    w = Tensor(np.ones((1, 1, 3, 3)))
    out = conv2d(x, w, stride=1, pad=1).data[0, 0]
    assert out[1, 1] == 9
    assert out[0, 0] == 4 and out[0, 2] == 4 and out[2, 0] == 4 and out[2, 2] == 4


def test_conv2d_identity_kernel():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((1, 1, 5, 5)).astype(np.float32)
    w = Tensor(np.ones((1, 1, 1, 1), dtype=np.float32))
    out = conv2d(Tensor(x), w, stride=1, pad=0)
    assert np.array_equal(out.data, x)


def test_conv2d_matches_loop_oracle():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((1, 2, 4, 4))
    w = rng.standard_normal((3, 2, 3, 3))
    b = rng.standard_normal(3)
    for stride, pad in [(1, 1), (1, 0), (1, 2)]:
        got = conv2d(Tensor(x), Tensor(w), Tensor(b), stride, pad).data
        want = conv2d_loops(x, w, b, stride, pad)
        assert np.abs(got - want).max() / np.abs(want).max() < 1e-12


def test_conv2d_stride_two_matches_oracle():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((2, 3, 9, 9))
    w = rng.standard_normal((4, 3, 3, 3))
    got = conv2d(Tensor(x), Tensor(w), None, 2, 1).data
    want = conv2d_loops(x, w, None, 2, 1)
    assert np.abs(got - want).max() / np.abs(want).max() < 1e-12


def test_conv2d_errors():
    x = Tensor(np.zeros((1, 2, 4, 4)))
    with pytest.raises(ValueError):
        conv2d(x, Tensor(np.zeros((1, 3, 3, 3))))  # channel mismatch
    with pytest.raises(ValueError):
        conv2d(x, Tensor(np.zeros((1, 2, 2, 2))))  # even kernel
    with pytest.raises(ValueError):
        conv2d(x, Tensor(np.zeros((1, 2, 3, 3))), stride=2, pad=0)  # non-integral


def test_conv2d_gradients():
    rng = np.random.default_rng(3)
    x = Tensor(rng.standard_normal((1, 2, 4, 4)), requires_grad=True)
    w = Tensor(rng.standard_normal((2, 2, 3, 3)), requires_grad=True)
    b = Tensor(rng.standard_normal(2), requires_grad=True)
    t = rng.standard_normal((1, 2, 4, 4))

    def loss():
        d = conv2d(x, w, b, 1, 1) - Tensor(t)
        return (d * d).mean()

    check_grads(loss, [x, w, b])


# -- maxpool / avgpool --------------------------------------------------------

def test_maxpool_basic():
    out = maxpool2d(Tensor(np.array([[[[1., 2.], [3., 4.]]]])), 2)
    assert out.data.reshape(()) == 4.0
    const = maxpool2d(Tensor(np.full((1, 2, 4, 4), 3.5)), 2)
    assert np.all(const.data == 3.5) and const.shape == (1, 2, 2, 2)


def test_maxpool_matches_loop_oracle():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((1, 1, 8, 8))
    got = maxpool2d(Tensor(x), 2).data
    assert np.array_equal(got, maxpool_loops(x, 2))


def test_maxpool_tie_routes_to_first_row_major():
    x = Tensor(np.array([[[[2., 2.], [2., 2.]]]]), requires_grad=True)
    out = maxpool2d(x, 2)
    out.sum().backward()
    assert np.array_equal(x.grad, np.array([[[[1., 0.], [0., 0.]]]]))


def test_maxpool_divisibility_error():
    with pytest.raises(ValueError):
        maxpool2d(Tensor(np.zeros((1, 1, 5, 4))), 2)


def test_maxpool_gradient():
    rng = np.random.default_rng(6)
    x = Tensor(rng.standard_normal((1, 2, 4, 4)), requires_grad=True)
    check_grads(lambda: (maxpool2d(x, 2) * maxpool2d(x, 2)).mean(), [x])


def test_global_avgpool_values():
    assert np.allclose(global_avgpool(Tensor(np.ones((1, 3, 4, 4)))).data, 1.0)
    x = np.zeros((1, 1, 2, 2))
    x[0, 0] = [[1, 2], [3, 4]]
    assert global_avgpool(Tensor(x)).data[0, 0] == 2.5
    rng = np.random.default_rng(2)
    y = rng.standard_normal((2, 3, 5, 5))
    want = np.array([[y[b, c].sum() / 25 for c in range(3)] for b in range(2)])
    got = global_avgpool(Tensor(y)).data
    assert np.abs(got - want).max() / np.abs(want).max() < 1e-6


# -- linear -------------------------------------------------------------------

def test_linear_identity_and_bias():
    eye = Tensor(np.eye(3))
    x = Tensor(np.arange(6.0).reshape(2, 3))
    out = linear(x, eye, Tensor(np.zeros(3)))
    assert np.array_equal(out.data, x.data)
    zb = linear(x, Tensor(np.zeros((4, 3))), Tensor(np.array([1., 2, 3, 4])))
    assert np.array_equal(zb.data, np.tile([1, 2, 3, 4], (2, 1)))


def test_linear_matches_loop_oracle():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((2, 3))
    w = rng.standard_normal((4, 3))
    b = rng.standard_normal(4)
    got = linear(Tensor(x), Tensor(w), Tensor(b)).data
    want = linear_loops(x, w, b)
    assert np.abs(got - want).max() / np.abs(want).max() < 1e-12


def test_linear_gradients():
    rng = np.random.default_rng(9)
    x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    w = Tensor(rng.standard_normal((2, 4)), requires_grad=True)
    b = Tensor(rng.standard_normal(2), requires_grad=True)
    check_grads(lambda: (linear(x, w, b) * linear(x, w, b)).mean(), [x, w, b])


# -- activations --------------------------------------------------------------

def test_relu_sigmoid_values():
    assert np.array_equal(relu(Tensor(np.array([-1., 0., 2.]))).data, [0, 0, 2])
    assert sigmoid(Tensor(np.array(0.0))).data == 0.5
    # closed form: sigmoid(ln 3) = 3/4
    assert abs(sigmoid(Tensor(np.array(np.log(3.0)))).data - 0.75) < 1e-12


def test_sigmoid_extreme_inputs_stable():
    out = sigmoid(Tensor(np.array([800.0, -800.0])))
    assert np.all(np.isfinite(out.data))
    assert abs(out.data[0] - 1.0) < 1e-12 and out.data[1] < 1e-300 or out.data[1] == 0


def test_relu_gradient_zero_at_zero():
    x = Tensor(np.array([0.0, 1.0, -1.0]), requires_grad=True)
    relu(x).sum().backward()
    assert np.array_equal(x.grad, [0, 1, 0])


# -- batchnorm ----------------------------------------------------------------

def test_batchnorm_normalizes():
    rng = np.random.default_rng(10)
    x = (rng.standard_normal((8, 3, 4, 4)) * 2.0 + 5.0)
    stats = BnStats(3, np.float64)
    out = batchnorm(Tensor(x), Tensor(np.ones(3)), Tensor(np.zeros(3)),
                    stats, eps=0.0).data
    for c in range(3):
        assert abs(out[:, c].mean()) < 1e-10
        assert abs(out[:, c].var() - 1.0) < 1e-10


def test_batchnorm_gamma_beta_shift():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((16, 2, 3, 3))
    stats = BnStats(2, np.float64)
    out = batchnorm(Tensor(x), Tensor(np.full(2, 2.0)), Tensor(np.full(2, 3.0)),
                    stats, eps=0.0).data
    for c in range(2):
        assert abs(out[:, c].mean() - 3.0) < 1e-10
        assert abs(out[:, c].std() - 2.0) < 1e-10


def test_batchnorm_matches_two_pass_oracle():
    rng = np.random.default_rng(12)
    x = rng.standard_normal((4, 3, 5, 5))
    gamma = 1.0 + 0.1 * rng.standard_normal(3)
    beta = rng.standard_normal(3)
    stats = BnStats(3, np.float64)
    got = batchnorm(Tensor(x), Tensor(gamma), Tensor(beta), stats, eps=1e-5).data
    want = batchnorm_loops(x, gamma, beta, 1e-5)
    assert np.abs(got - want).max() < 1e-5


def test_batchnorm_eval_before_train_errors():
    stats = BnStats(2)
    with pytest.raises(RuntimeError):
        batchnorm(Tensor(np.zeros((1, 2, 2, 2))), Tensor(np.ones(2)),
                  Tensor(np.zeros(2)), stats, training=False)


def test_batchnorm_running_stats_feed_eval():
    rng = np.random.default_rng(13)
    stats = BnStats(2, np.float64)
    gamma, beta = Tensor(np.ones(2)), Tensor(np.zeros(2))
    for _ in range(200):
        x = rng.standard_normal((16, 2, 3, 3)) + np.array([1.0, -2.0]).reshape(1, 2, 1, 1)
        batchnorm(Tensor(x), gamma, beta, stats, momentum=0.1)
    assert np.abs(stats.mean - [1.0, -2.0]).max() < 0.2
    xe = np.tile(np.array([1.0, -2.0]).reshape(1, 2, 1, 1), (1, 1, 2, 2))
    out = batchnorm(Tensor(xe), gamma, beta, stats, training=False).data
    assert np.abs(out).max() < 0.2


def test_batchnorm_gradient():
    rng = np.random.default_rng(14)
    x = Tensor(rng.standard_normal((4, 2, 3, 3)), requires_grad=True)
    g = Tensor(1.0 + 0.2 * rng.standard_normal(2), requires_grad=True)
    b = Tensor(0.1 * rng.standard_normal(2), requires_grad=True)
    t = rng.standard_normal((4, 2, 3, 3))

    def loss():
        st = BnStats(2, np.float64)
        d = batchnorm(x, g, b, st) - Tensor(t)
        return (d * d).mean()

    check_grads(loss, [x, g, b])


# -- cross entropy ------------------------------------------------------------

def test_cross_entropy_uniform_and_stability():
    out = cross_entropy(Tensor(np.array([[0.0, 0.0]])), np.array([0]))
    assert abs(out.item() - np.log(2)) < 1e-12
    big = cross_entropy(Tensor(np.array([[1000.0, -1000.0]])), np.array([0]))
    assert np.isfinite(big.item()) and big.item() < 1e-9


def test_cross_entropy_matches_direct_formula():
    rng = np.random.default_rng(15)
    logits = rng.standard_normal((4, 10))
    labels = rng.integers(0, 10, 4)
    got = cross_entropy(Tensor(logits), labels).item()
    want = 0.0
    for i in range(4):
        p = np.exp(logits[i]) / np.exp(logits[i]).sum()
        want -= np.log(p[labels[i]])
    want /= 4
    assert abs(got - want) < 1e-10


def test_cross_entropy_label_range_error():
    with pytest.raises(ValueError):
        cross_entropy(Tensor(np.zeros((2, 3))), np.array([0, 3]))


def test_cross_entropy_gradient():
    rng = np.random.default_rng(16)
    logits = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    labels = np.array([0, 2, 1])
    check_grads(lambda: cross_entropy(logits, labels), [logits])


# -- autodiff mechanics -------------------------------------------------------

def test_backward_sum_and_square():
    x = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    x.sum().backward()
    assert np.array_equal(x.grad, [1, 1, 1])
    y = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    (y * y).sum().backward()
    assert np.array_equal(y.grad, [2, 4])


def test_backward_accumulates_over_multiple_uses():
    x = Tensor(np.array([3.0]), requires_grad=True)
    (x + x + x).sum().backward()
    assert x.grad[0] == 3.0


def test_backward_requires_scalar():
    x = Tensor(np.zeros(3), requires_grad=True)
    with pytest.raises(ValueError):
        (x * 2).backward()


def test_broadcast_add_mul_gradients():
    rng = np.random.default_rng(17)
    a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    b = Tensor(rng.standard_normal((1, 4)), requires_grad=True)
    c = Tensor(rng.standard_normal(()), requires_grad=True)
    check_grads(lambda: ((a + b) * c).sum() * 0.1, [a, b, c])


def test_index_select_accumulates_repeats():
    x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]), requires_grad=True)
    out = x.index_select(np.array([0, 0, 1]))
    out.sum().backward()
    assert np.array_equal(x.grad, [[2, 2], [1, 1]])


def test_max_axis_first_tie_and_gradient():
    x = Tensor(np.array([[1.0, 5.0, 5.0]]), requires_grad=True)
    m = x.max(axis=1)
    assert m.data[0] == 5.0
    m.sum().backward()
    assert np.array_equal(x.grad, [[0, 1, 0]])


def test_no_grad_blocks_graph():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = x * 2
    assert not y.requires_grad


def test_l2_normalize_rows_and_zero_guard():
    rng = np.random.default_rng(18)
    x = rng.standard_normal((4, 8))
    x[2] = 0.0
    out = l2_normalize(Tensor(x)).data
    norms = np.linalg.norm(out, axis=1)
    assert np.abs(norms[[0, 1, 3]] - 1.0).max() < 1e-6
    assert norms[2] == 0.0


def test_l2_normalize_gradient():
    rng = np.random.default_rng(19)
    x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    t = rng.standard_normal((3, 4))
    check_grads(lambda: ((l2_normalize(x) - Tensor(t)) * (l2_normalize(x) - Tensor(t))).mean(), [x])


# -- optimizer ----------------------------------------------------------------

def test_sgd_plain_step():
    p = Tensor(np.array([1.0]), requires_grad=True)
    p.grad = np.array([1.0])
    Sgd({"p": p}, 0.1, 0.0).step()
    assert abs(p.data[0] - 0.9) < 1e-12
    assert p.grad is None


def test_sgd_momentum_two_steps():
    # v1 = 1, p1 = -1; v2 = 0.9 + 1 = 1.9, p2 = -2.9
    p = Tensor(np.array([0.0]), requires_grad=True)
    opt = Sgd({"p": p}, 1.0, 0.9)
    p.grad = np.array([1.0])
    opt.step()
    p.grad = np.array([1.0])
    opt.step()
    assert abs(p.data[0] + 2.9) < 1e-12


def test_sgd_zero_grad_no_motion():
    p = Tensor(np.array([2.0]), requires_grad=True)
    opt = Sgd({"p": p}, 0.5, 0.9)
    p.grad = np.array([0.0])
    opt.step()
    assert p.data[0] == 2.0


def test_sgd_missing_gradient_errors():
    p = Tensor(np.array([1.0]), requires_grad=True)
    with pytest.raises(ValueError):
        Sgd({"p": p}, 0.1).step()
