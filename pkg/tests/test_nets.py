"""Network forward/backward oracles, Huber loss, and the optimizer."""
import time

import numpy as np
import pytest

from skillarena.errors import NumericalError, UsageError
from skillarena.nets import Adam, Mlp, he_init, huber, huber_grad


def reference_forward(params, sizes, x):
    """Independent loop-based reimplementation of the forward arithmetic."""
    h = np.array(x, dtype=np.float64)
    n_layers = len(sizes) - 1
    for layer in range(n_layers):
        w, b = params[2 * layer], params[2 * layer + 1]
        out = np.zeros((h.shape[0], w.shape[1]))
        for i in range(h.shape[0]):
            for j in range(w.shape[1]):
                acc = b[j]
                for k in range(w.shape[0]):
                    acc += h[i, k] * w[k, j]
                out[i, j] = acc
        if layer < n_layers - 1:
            out = np.where(out > 0.0, out, 0.0)
        h = out
    return h


def batch_loss(net, x, actions, targets):
    q = net.forward(x)
    residual = q[np.arange(len(actions)), actions] - targets
    return float(huber(residual).mean())


def analytic_grads(net, x, actions, targets):
    q, acts = net._forward_cached(x)
    residual = q[np.arange(len(actions)), actions] - targets
    dout = np.zeros_like(q)
    dout[np.arange(len(actions)), actions] = huber_grad(residual) / len(actions)
    return net.backward(acts, dout)


def numeric_grads(net, x, actions, targets, eps=1e-5):
    grads = []
    for p in net.params:
        g = np.zeros_like(p)
        flat = p.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + eps
            up = batch_loss(net, x, actions, targets)
            flat[i] = saved - eps
            down = batch_loss(net, x, actions, targets)
            flat[i] = saved
            gflat[i] = (up - down) / (2.0 * eps)
        grads.append(g)
    return grads


def test_zero_network_outputs_zero():
    net = Mlp([4, 8, 3])  # no rng: all parameters start at zero
    out = net.forward(np.ones((5, 4)))
    np.testing.assert_array_equal(out, np.zeros((5, 3)))


def test_one_by_one_identity_net():
    net = Mlp([1, 1])
    net.params[0][0, 0] = 1.0
    assert net.forward(np.array([3.0]))[0, 0] == 3.0


def test_forward_matches_independent_reimplementation():
    rng = np.random.default_rng(5)
    for sizes in ([7, 5], [7, 16, 3], [11, 64, 64, 3]):
        net = Mlp(sizes, rng)
        x = rng.normal(size=(6, sizes[0]))
        ours = net.forward(x)
        theirs = reference_forward(net.params, sizes, x)
        np.testing.assert_allclose(ours, theirs, rtol=0, atol=1e-12)


def test_gradients_match_finite_differences():
    """Central differences over ten random nets, well under the time box."""
    start = time.monotonic()
    rng = np.random.default_rng(11)
    layouts = [[7, 16, 3]] + [
        [int(rng.integers(2, 9)), int(rng.integers(4, 17)), int(rng.integers(2, 6))]
        for _ in range(9)
    ]
    worst = 0.0
    for sizes in layouts:
        net = Mlp(sizes, rng)
        x = rng.normal(size=(8, sizes[0]))
        actions = rng.integers(sizes[-1], size=8)
        targets = rng.normal(size=8)
        analytic = analytic_grads(net, x, actions, targets)
        numeric = numeric_grads(net, x, actions, targets)
        for a, n in zip(analytic, numeric):
            # the floor keeps central-difference noise on exactly-zero
            # gradients (dead rectifier paths) from reading as error
            denom = np.maximum(np.abs(a) + np.abs(n), 1e-6)
            worst = max(worst, float((np.abs(a - n) / denom).max()))
    assert worst < 1e-4
    assert time.monotonic() - start < 10.0


def test_zero_loss_batch_gives_zero_gradients():
    rng = np.random.default_rng(2)
    net = Mlp([5, 8, 3], rng)
    x = rng.normal(size=(4, 5))
    actions = np.array([0, 1, 2, 1])
    targets = net.forward(x)[np.arange(4), actions]  # predictions as targets
    for g in analytic_grads(net, x, actions, targets):
        np.testing.assert_array_equal(g, np.zeros_like(g))


def test_gradient_linearity_inside_quadratic_region():
    rng = np.random.default_rng(3)
    net = Mlp([5, 8, 3], rng)
    x = rng.normal(size=(4, 5))
    actions = np.array([2, 0, 1, 2])
    q = net.forward(x)[np.arange(4), actions]
    small = rng.uniform(0.05, 0.3, size=4)  # residuals stay under delta
    single = analytic_grads(net, x, actions, q - small)
    double = analytic_grads(net, x, actions, q - 2.0 * small)
    for g1, g2 in zip(single, double):
        np.testing.assert_allclose(g2, 2.0 * g1, rtol=1e-12, atol=1e-14)


def test_huber_values_and_clipped_gradient():
    r = np.array([0.0, 0.5, 1.0, 2.0, -3.0])
    np.testing.assert_allclose(huber(r), [0.0, 0.125, 0.5, 1.5, 2.5], atol=1e-12)
    np.testing.assert_allclose(huber_grad(r), [0.0, 0.5, 1.0, 1.0, -1.0], atol=1e-12)


def test_adam_monotone_on_convex_quadratic():
    rng = np.random.default_rng(4)
    target = rng.normal(size=10)
    p = np.zeros(10)
    opt = Adam([p], lr=3e-4)
    losses = []
    for _ in range(1100):
        grad = 2.0 * (p - target)
        losses.append(float(((p - target) ** 2).sum()))
        opt.step([p], [grad])
    for before, after in zip(losses[100:-1], losses[101:]):
        assert after <= before + 1e-12
    assert losses[-1] < losses[0]


def test_adam_bias_correction_first_step():
    p = np.array([0.0])
    opt = Adam([p], lr=0.1)
    opt.step([p], [np.array([1.0])])
    # with bias correction the very first step moves by almost exactly lr
    assert p[0] == pytest.approx(-0.1, rel=1e-6)


def test_he_init_shapes():
    rng = np.random.default_rng(0)
    params = he_init([7, 16, 3], rng)
    assert [p.shape for p in params] == [(7, 16), (16,), (16, 3), (3,)]
    np.testing.assert_array_equal(params[1], np.zeros(16))


def test_clone_and_copy_from():
    rng = np.random.default_rng(1)
    net = Mlp([3, 4, 2], rng)
    twin = net.clone()
    x = rng.normal(size=(2, 3))
    np.testing.assert_array_equal(net.forward(x), twin.forward(x))
    twin.params[0][0, 0] += 1.0
    assert net.params[0][0, 0] != twin.params[0][0, 0]
    with pytest.raises(UsageError):
        Mlp([3, 2]).copy_from(net)


def test_validation_and_finite_guard():
    with pytest.raises(UsageError):
        Mlp([5])
    with pytest.raises(UsageError):
        Mlp([5, 0, 2])
    net = Mlp([2, 2], np.random.default_rng(0))
    with pytest.raises(UsageError):
        net.backward([np.zeros((1, 2)), np.zeros((1, 2))], np.zeros((2, 2)))
    net.params[0][0, 0] = np.nan
    with pytest.raises(NumericalError):
        net.assert_finite()


def test_optimizer_state_mismatch():
    p = [np.zeros(3)]
    opt = Adam(p)
    with pytest.raises(UsageError):
        opt.step([np.zeros(3), np.zeros(2)], [np.zeros(3), np.zeros(2)])
