import numpy as np
import pytest

from bfssl.errors import ArchitectureMismatch
from bfssl.nn import Adam, Mlp, Sgd, make_optimizer
from fdcheck import numeric_grad, randomize_biases, rel_error


@pytest.mark.parametrize("acts", [None, ["tanh", "tanh", "linear"], ["relu", "tanh", "tanh"]])
def test_parameter_gradients(acts):
    rng = np.random.default_rng(0)
    net = Mlp([4, 7, 5, 3], activations=acts, rng=rng)
    randomize_biases(net, rng)
    x = rng.normal(size=(6, 4))
    target = rng.normal(size=(6, 3))

    def loss():
        return 0.5 * np.sum((net(x) - target) ** 2)

    y, grads, dx = net.forward_backward(x, net(x) - target)
    for p, g in zip(net.params, grads):
        assert rel_error(g, numeric_grad(loss, p)) < 1e-5
    assert rel_error(dx, numeric_grad(loss, x)) < 1e-5


def test_init_and_shapes():
    net = Mlp([3, 8, 2], rng=np.random.default_rng(1), out_scale=1e-3)
    assert [p.shape for p in net.params] == [(3, 8), (8,), (8, 2), (2,)]
    assert np.max(np.abs(net.weights[-1])) <= 1e-3
    assert all(np.all(b == 0) for b in net.biases)
    assert net.n_params == 3 * 8 + 8 + 8 * 2 + 2


def test_flat_roundtrip_and_copy():
    net = Mlp([3, 4, 2], rng=np.random.default_rng(2))
    vec = np.arange(net.n_params, dtype=float)
    net.set_flat(vec)
    assert np.array_equal(net.get_flat(), vec)
    dup = net.copy()
    dup.weights[0][0, 0] = -1.0
    assert net.weights[0][0, 0] == 0.0
    assert dup.same_architecture(net)
    with pytest.raises(ArchitectureMismatch):
        net.set_flat(vec[:-1])


def test_input_validation():
    net = Mlp([3, 2])
    with pytest.raises(ArchitectureMismatch):
        net.forward(np.zeros(3))
    with pytest.raises(ArchitectureMismatch):
        net.forward(np.zeros((1, 4)))
    with pytest.raises(ValueError):
        Mlp([3])
    with pytest.raises(ValueError):
        Mlp([3, 2], activations=["sigmoid"])


def test_sgd_momentum_step():
    p = [np.array([1.0, 2.0])]
    opt = Sgd(0.1, momentum=0.9)
    opt.step(p, [np.array([1.0, 1.0])])
    assert np.allclose(p[0], [0.9, 1.9])
    opt.step(p, [np.array([1.0, 1.0])])
    # velocity 0.9 * 1 + 1 = 1.9
    assert np.allclose(p[0], [0.9 - 0.19, 1.9 - 0.19])


def test_adam_first_step_is_lr_sized():
    p = [np.array([0.0, 0.0])]
    Adam(0.01).step(p, [np.array([5.0, -1e-3])])
    assert np.allclose(p[0], [-0.01, 0.01], rtol=1e-4)


def test_make_optimizer():
    assert isinstance(make_optimizer("sgd", 0.1), Sgd)
    assert isinstance(make_optimizer("adam", 0.1), Adam)
    with pytest.raises(ValueError):
        make_optimizer("rmsprop", 0.1)


def test_regression_fit():
    rng = np.random.default_rng(3)
    net = Mlp([1, 32, 1], activations=["tanh", "linear"], rng=rng)
    x = np.linspace(-2, 2, 64)[:, None]
    y = np.sin(x)
    opt = Adam(1e-2)
    for _ in range(1500):
        out, grads, _ = net.forward_backward(x, 2 * (net(x) - y) / len(x))
        opt.step(net.params, grads)
    assert np.mean((net(x) - y) ** 2) < 1e-3
