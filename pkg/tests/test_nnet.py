"""Network forward/backward/Adam checks, with finite differences as the oracle."""
import numpy as np
import pytest

from amdnlab import nnet
from amdnlab.nnet import AdamState, NetworkSpec


def random_net(rng, max_width=5):
    spec = NetworkSpec(
        input_dim=int(rng.integers(1, 5)),
        hidden_layers=int(rng.integers(1, 4)),
        hidden_width=int(rng.integers(2, max_width + 1)),
        head_outputs=int(rng.integers(1, 5)),
    )
    params = nnet.init_network(spec, int(rng.integers(0, 2 ** 31)))
    params.flat[...] = rng.normal(0.0, 0.5, size=params.flat.shape)
    return spec, params


def fd_gradient(loss_fn, params, h=1e-5):
    """Central finite differences of a scalar loss over every parameter."""
    grad = np.zeros_like(params.flat)
    for i in range(len(params.flat)):
        p = params.copy()
        p.flat[i] += h
        up = loss_fn(p)
        p.flat[i] -= 2 * h
        down = loss_fn(p)
        grad[i] = (up - down) / (2 * h)
    return grad


def safe_from_kinks(params, x, margin=1e-4):
    """FD is only a valid oracle away from the relu kink."""
    trace = nnet.forward(params, x)
    return all(np.abs(z).min() > margin for z in trace.pre_activations[:-1])


def test_init_deterministic():
    spec = NetworkSpec(3, 3, 50, 4)
    a = nnet.init_network(spec, 1234)
    b = nnet.init_network(spec, 1234)
    assert a.flat.tobytes() == b.flat.tobytes()
    c = nnet.init_network(spec, 1235)
    assert not np.array_equal(a.flat, c.flat)


def test_init_biases_zero_weights_bounded():
    spec = NetworkSpec(3, 3, 50, 4)
    params = nnet.init_network(spec, 7)
    for b in params.biases:
        assert np.all(b == 0.0)
    for w in params.weights:
        bound = np.sqrt(6.0 / (w.shape[0] + w.shape[1]))
        assert np.all(np.abs(w) <= bound)


def test_shapes_from_spec():
    params = nnet.init_network(NetworkSpec(3, 3, 50, 4), 0)
    assert [w.shape for w in params.weights] == [(3, 50), (50, 50), (50, 50), (50, 4)]
    assert [b.shape for b in params.biases] == [(50,), (50,), (50,), (4,)]


def test_spec_rejects_nonpositive_counts():
    with pytest.raises(ValueError):
        NetworkSpec(0, 3, 50, 4)
    with pytest.raises(ValueError):
        NetworkSpec(3, 3, 50, 0)


def test_activations_closed_forms():
    assert nnet.activate("relu", -2.5) == 0.0
    assert nnet.activate("relu", 1.5) == 1.5
    assert nnet.activate("tanh", 0.0) == 0.0
    assert nnet.activate("nnelu", 0.0) == 1.0
    assert nnet.activate("nnelu", -20.0) == pytest.approx(np.exp(-20.0), rel=1e-12)
    with pytest.raises(ValueError):
        nnet.activate("sigmoid", 0.0)


def test_nnelu_positive_and_monotone():
    xs = np.linspace(-60.0, 60.0, 5001)
    ys = nnet.nnelu(xs)
    assert np.all(ys > 0.0)
    assert np.all(np.diff(ys) >= 0.0)


def test_forward_zero_params():
    spec = NetworkSpec(3, 2, 4, 4)
    params = nnet.NetworkParams(spec, np.zeros(spec.n_params()))
    trace = nnet.forward(params, [0.3, -0.2, 0.9])
    assert np.all(trace.head_raw == 0.0)


def test_forward_hand_case():
    # 2-2-2 net with hand-set weights; one relu gate closed.
    spec = NetworkSpec(2, 1, 2, 2)
    params = nnet.NetworkParams(spec, np.zeros(spec.n_params()))
    params.weights[0][...] = np.eye(2)
    params.biases[0][...] = [0.5, -0.5]
    params.weights[1][...] = [[2.0, 0.0], [0.0, 3.0]]
    params.biases[1][...] = [0.1, 0.2]
    trace = nnet.forward(params, [0.3, -0.7])
    # z1 = (0.8, -1.2) -> h1 = (0.8, 0) -> heads = (1.7, 0.2)
    assert trace.head_raw == pytest.approx([1.7, 0.2], abs=1e-15)


def test_forward_pure_and_rejects_bad_dim():
    rng = np.random.default_rng(5)
    _, params = random_net(rng)
    x = rng.normal(size=params.spec.input_dim)
    a = nnet.forward(params, x)
    b = nnet.forward(params, x)
    assert np.array_equal(a.head_raw, b.head_raw)
    with pytest.raises(ValueError):
        nnet.forward(params, np.zeros(params.spec.input_dim + 1))


def test_forward_batch_matches_single():
    rng = np.random.default_rng(11)
    _, params = random_net(rng)
    xs = rng.normal(size=(6, params.spec.input_dim))
    batch = nnet.forward(params, xs)
    singles = np.stack([nnet.forward(params, x).head_raw for x in xs])
    assert np.allclose(batch.head_raw, singles, atol=1e-15)


def test_backward_zero_head_grads():
    rng = np.random.default_rng(2)
    _, params = random_net(rng)
    trace = nnet.forward(params, rng.normal(size=params.spec.input_dim))
    grads = nnet.backward(params, trace, np.zeros(params.spec.head_outputs))
    assert np.all(grads.flat == 0.0)


def test_backward_linear_in_head_grads():
    rng = np.random.default_rng(3)
    _, params = random_net(rng)
    trace = nnet.forward(params, rng.normal(size=params.spec.input_dim))
    g = rng.normal(size=params.spec.head_outputs)
    one = nnet.backward(params, trace, g)
    two = nnet.backward(params, trace, 2.0 * g)
    assert np.allclose(two.flat, 2.0 * one.flat, rtol=1e-13, atol=0.0)


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(42)
    checked = 0
    while checked < 100:
        _, params = random_net(rng)
        x = rng.normal(size=params.spec.input_dim)
        if not safe_from_kinks(params, x):
            continue
        head_grads = rng.normal(size=params.spec.head_outputs)
        trace = nnet.forward(params, x)
        analytic = nnet.backward(params, trace, head_grads).flat
        fd = fd_gradient(lambda p: float(np.dot(nnet.forward(p, x).head_raw, head_grads)), params)
        assert np.allclose(analytic, fd, rtol=1e-4, atol=1e-7), f"triple {checked} disagrees"
        checked += 1


def test_backward_batch_sums_samples():
    rng = np.random.default_rng(13)
    _, params = random_net(rng)
    xs = rng.normal(size=(4, params.spec.input_dim))
    gs = rng.normal(size=(4, params.spec.head_outputs))
    batch = nnet.backward(params, nnet.forward(params, xs), gs)
    summed = np.zeros_like(params.flat)
    for x, g in zip(xs, gs):
        summed += nnet.backward(params, nnet.forward(params, x), g).flat
    assert np.allclose(batch.flat, summed, rtol=1e-12, atol=1e-12)


def test_adam_zero_grad_keeps_params():
    rng = np.random.default_rng(4)
    spec, params = random_net(rng)
    grads = nnet.NetworkParams(spec, np.zeros_like(params.flat))
    new, state = nnet.adam_step(params, grads, nnet.init_adam(spec), lr=0.1)
    assert np.array_equal(new.flat, params.flat)
    assert state.t == 1


def test_adam_first_step_hand_formula():
    spec = NetworkSpec(1, 1, 1, 1)
    params = nnet.NetworkParams(spec, np.zeros(spec.n_params()))
    grads = nnet.NetworkParams(spec, np.full(spec.n_params(), 0.5))
    new, state = nnet.adam_step(params, grads, nnet.init_adam(spec), lr=0.1)
    # m_hat = 0.5, v_hat = 0.25, delta = -0.1 * 0.5 / (sqrt(0.25) + 1e-8)
    expected = -0.1 * 0.5 / (np.sqrt(0.25) + 1e-8)
    assert np.allclose(new.flat, expected, rtol=1e-12, atol=0.0)
    assert state.t == 1


def test_adam_counter_monotone():
    rng = np.random.default_rng(6)
    spec, params = random_net(rng)
    grads = nnet.NetworkParams(spec, rng.normal(size=params.flat.shape))
    p1, s1 = nnet.adam_step(params, grads, nnet.init_adam(spec), lr=0.01)
    p2, s2 = nnet.adam_step(p1, grads, s1, lr=0.01)
    assert (s1.t, s2.t) == (1, 2)


def test_adam_lr_zero_bitwise_noop():
    rng = np.random.default_rng(8)
    spec, params = random_net(rng)
    state = AdamState(m=rng.normal(size=params.flat.shape),
                      v=np.abs(rng.normal(size=params.flat.shape)), t=3)
    grads = nnet.NetworkParams(spec, rng.normal(size=params.flat.shape))
    new, _ = nnet.adam_step(params, grads, state, lr=0.0)
    assert new.flat.tobytes() == params.flat.tobytes()


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    _, params = random_net(rng)
    path = tmp_path / "net.json"
    meta = {"seed": 9, "steps": 123}
    nnet.save_checkpoint(path, params, "mdn", meta)
    loaded, variant, got_meta = nnet.load_checkpoint(path)
    assert variant == "mdn"
    assert got_meta == meta
    assert loaded.spec == params.spec
    assert loaded.flat.tobytes() == params.flat.tobytes()
