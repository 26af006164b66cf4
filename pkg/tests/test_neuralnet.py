import numpy as np
import pytest

from skynoma import backend, neuralnet
from skynoma.neuralnet import AdamState, QNetwork, copy_params, forward, train_step

BACKENDS = backend.available_backends()


@pytest.fixture(params=BACKENDS)
def kernels(request):
    return backend.get_kernels(request.param)


def test_forward_zero_parameters_zero_output(kernels):
    net = QNetwork(4, 3, seed=0, hidden=5)
    net.w1[:] = 0.0
    net.w2[:] = 0.0
    assert np.all(forward(net, np.ones(4), kernels) == 0.0)


def test_forward_identity_like_layer(kernels):
    net = QNetwork(3, 3, seed=0, hidden=3)
    net.w1[:] = np.eye(3)
    net.b1[:] = 0.0
    net.w2[:] = np.eye(3)
    net.b2[:] = 0.0
    x = np.array([0.5, 1.5, 0.25])  # positive, so ReLU passes it through
    assert np.allclose(forward(net, x, kernels), x, atol=0)


def test_forward_matches_matrix_oracle(kernels):
    rng = np.random.default_rng(7)
    net = QNetwork(6, 4, seed=1, hidden=9)
    x = rng.normal(size=(5, 6))
    want = np.maximum(x @ net.w1 + net.b1, 0.0) @ net.w2 + net.b2
    got = forward(net, x, kernels)
    assert np.allclose(got, want, rtol=1e-10, atol=1e-12)


def test_forward_rejects_length_mismatch(kernels):
    net = QNetwork(4, 2, seed=0)
    with pytest.raises(ValueError):
        forward(net, np.ones(5), kernels)


def test_train_step_zero_error_keeps_parameters(kernels):
    net = QNetwork(4, 3, seed=2, hidden=6)
    opt = AdamState().bind(net)
    x = np.abs(np.random.default_rng(0).normal(size=(4, 4))) + 0.1
    actions = np.array([0, 1, 2, 0])
    targets = forward(net, x, kernels)[np.arange(4), actions]
    before = [p.copy() for p in net.params]
    loss = train_step(net, opt, x, actions, targets, kernels)
    assert loss == pytest.approx(0.0, abs=1e-20)
    for p, b in zip(net.params, before):
        assert np.array_equal(p, b)


def test_single_sample_loss_is_squared_error(kernels):
    net = QNetwork(3, 2, seed=3, hidden=4)
    opt = AdamState().bind(net)
    x = np.array([[0.3, -0.2, 0.8]])
    q = forward(net, x[0], kernels)
    target = np.array([q[1] + 2.0])
    loss = train_step(net, opt, x, np.array([1]), target, kernels)
    assert loss == pytest.approx(4.0, rel=1e-9)


def test_gradients_match_finite_differences():
    from skynoma.verification import check_gradients

    res = check_gradients()
    assert res.passed, res.detail


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend unavailable")
def test_backends_agree():
    rng = np.random.default_rng(11)
    net_a = QNetwork(7, 5, seed=4, hidden=8)
    net_b = QNetwork(7, 5, seed=4, hidden=8)
    x = rng.normal(size=(16, 7))
    actions = rng.integers(0, 5, size=16)
    targets = rng.normal(size=16)
    ka, kb = (backend.get_kernels(n) for n in BACKENDS)
    qa, qb = ka.qvalues(x, *net_a.params), kb.qvalues(x, *net_b.params)
    assert np.allclose(qa, qb, rtol=1e-12, atol=1e-14)
    la, *ga = ka.loss_and_grads(x, actions, targets, *net_a.params)
    lb, *gb = kb.loss_and_grads(x, actions, targets, *net_b.params)
    assert la == pytest.approx(lb, rel=1e-12)
    for a, b in zip(ga, gb):
        assert np.allclose(a, b, rtol=1e-10, atol=1e-14)
    oa, ob = AdamState().bind(net_a), AdamState().bind(net_b)
    for _ in range(3):
        train_step(net_a, oa, x, actions, targets, ka)
        train_step(net_b, ob, x, actions, targets, kb)
    for a, b in zip(net_a.params, net_b.params):
        assert np.allclose(a, b, rtol=1e-9, atol=1e-12)


def test_repeated_training_reduces_loss(kernels):
    rng = np.random.default_rng(5)
    net = QNetwork(5, 4, seed=6, hidden=10)
    opt = AdamState(learning_rate=1e-3).bind(net)
    x = rng.normal(size=(8, 5))
    actions = rng.integers(0, 4, size=8)
    targets = rng.normal(size=8)
    losses = [train_step(net, opt, x, actions, targets, kernels) for _ in range(21)]
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_train_step_rejects_bad_batches(kernels):
    net = QNetwork(3, 2, seed=0)
    opt = AdamState().bind(net)
    with pytest.raises(ValueError):
        train_step(net, opt, np.zeros((0, 3)), np.array([]), np.array([]), kernels)
    with pytest.raises(ValueError):
        train_step(net, opt, np.zeros((1, 3)), np.array([0]), np.array([np.nan]), kernels)


def test_copy_params_semantics():
    src = QNetwork(4, 3, seed=8)
    dst = QNetwork(4, 3, seed=9)
    copy_params(src, dst)
    x = np.random.default_rng(1).normal(size=(6, 4))
    assert np.array_equal(forward(src, x), forward(dst, x))
    copy_params(src, dst)  # idempotent
    assert np.array_equal(forward(src, x), forward(dst, x))
    opt = AdamState().bind(src)
    train_step(src, opt, x, np.zeros(6, dtype=int), np.ones(6))
    assert not np.array_equal(src.w1, dst.w1)  # deep copy: dst unchanged


def test_copy_params_rejects_topology_mismatch():
    with pytest.raises(ValueError):
        copy_params(QNetwork(4, 3, seed=0), QNetwork(4, 4, seed=0))


def test_checkpoint_roundtrip(tmp_path):
    net = QNetwork(5, 7, seed=10)
    path = tmp_path / "net.npz"
    neuralnet.save_checkpoint(net, path)
    loaded = neuralnet.load_checkpoint(path)
    x = np.random.default_rng(2).normal(size=(3, 5))
    assert np.array_equal(forward(net, x), forward(loaded, x))


def test_checkpoint_version_guard(tmp_path):
    net = QNetwork(2, 2, seed=0)
    path = tmp_path / "net.npz"
    np.savez(path, version=99, n_inputs=2, n_actions=2, hidden=3,
             w1=net.w1, b1=net.b1, w2=net.w2, b2=net.b2)
    with pytest.raises(ValueError):
        neuralnet.load_checkpoint(path)
