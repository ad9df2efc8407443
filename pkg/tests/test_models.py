"""Dense model tests: forward/backward correctness and serialization."""

import numpy as np
import pytest

from apmetric.models import (
    Adam,
    Model,
    Sgd,
    backward,
    clone_weights,
    forward,
    init_model,
    l2_penalty,
    load_model,
    make_optimizer,
    model_from_json,
    model_to_json,
    parse_architecture,
    predict,
    save_model,
)
from apmetric.oracles import finite_diff_grad

FD_TOL = 1e-6


def test_parse_architecture():
    assert parse_architecture("linear", 3) == (3, 1)
    assert parse_architecture("mlp:4", 2) == (2, 4, 1)
    assert parse_architecture("mlp:100,100", 7) == (7, 100, 100, 1)
    for bad in ("mlp:", "mlp:0", "mlp:a,b", "conv", ""):
        with pytest.raises(ValueError):
            parse_architecture(bad, 3)


def test_linear_forward_hand_example():
    model = init_model((2, 1), seed=0)
    model.weights[0] = (np.array([[2.0], [3.0]]), np.array([0.0]))
    out = forward(model, np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))
    np.testing.assert_allclose(out, [2.0, 3.0, 5.0])


def test_zero_weights_return_bias():
    model = init_model((3, 1), seed=0)
    model.weights[0] = (np.zeros((3, 1)), np.array([0.25]))
    out = forward(model, np.zeros((4, 3)))
    np.testing.assert_allclose(out, np.full(4, 0.25))


def test_relu_hidden_layer():
    model = init_model((1, 2, 1), seed=0)
    model.weights[0] = (np.array([[1.0, -1.0]]), np.zeros(2))
    model.weights[1] = (np.array([[1.0], [1.0]]), np.zeros(1))
    # x > 0 activates only the first unit, x < 0 only the second.
    np.testing.assert_allclose(forward(model, np.array([[2.0]])), [2.0])
    np.testing.assert_allclose(forward(model, np.array([[-3.0]])), [3.0])


def test_predict_threshold_and_tie():
    model = init_model((1, 1), seed=0)
    model.weights[0] = (np.array([[1.0]]), np.array([0.0]))
    yhat = predict(model, np.array([[-0.5], [0.0], [0.5]]))
    np.testing.assert_array_equal(yhat, [0.0, 1.0, 1.0])  # tie goes positive


def test_init_is_seeded_and_bounded():
    m1 = init_model((4, 8, 1), seed=11)
    m2 = init_model((4, 8, 1), seed=11)
    m3 = init_model((4, 8, 1), seed=12)
    for (w1, b1), (w2, b2) in zip(m1.weights, m2.weights):
        np.testing.assert_array_equal(w1, w2)
        np.testing.assert_array_equal(b1, b2)
    assert any(
        not np.array_equal(w1, w3)
        for (w1, _), (w3, _) in zip(m1.weights, m3.weights)
    )
    for (w, b), (fan_in, fan_out) in zip(
        m1.weights, zip(m1.architecture[:-1], m1.architecture[1:])
    ):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        assert np.max(np.abs(w)) <= bound
        assert not b.any()


@pytest.mark.parametrize("arch", [(3, 1), (3, 7, 1), (3, 5, 4, 1)])
def test_backward_matches_finite_differences(arch, rng):
    model = init_model(arch, seed=5)
    x = rng.normal(size=(6, 3))
    dpsi = rng.normal(size=6)
    l2 = 0.01

    grads = backward(model, x, dpsi, l2=l2)

    def loss_at(flat):
        probe = init_model(arch, seed=5)
        pos = 0
        for idx, (w, b) in enumerate(probe.weights):
            nw, nb = w.size, b.size
            probe.weights[idx] = (
                flat[pos : pos + nw].reshape(w.shape),
                flat[pos + nw : pos + nw + nb],
            )
            pos += nw + nb
        return float(forward(probe, x) @ dpsi) + l2_penalty(probe, l2)

    flat0 = np.concatenate(
        [np.concatenate([w.ravel(), b]) for w, b in model.weights]
    )
    fd = finite_diff_grad(loss_at, flat0, h=1e-6)
    got = np.concatenate(
        [np.concatenate([dw.ravel(), db]) for dw, db in grads]
    )
    denom = max(1.0, float(np.linalg.norm(fd)))
    assert np.linalg.norm(got - fd) / denom < FD_TOL


def test_sgd_step_formula():
    model = init_model((2, 1), seed=0)
    model.weights[0] = (np.array([[1.0], [2.0]]), np.array([0.5]))
    g = [(np.array([[0.2], [-0.4]]), np.array([0.1]))]
    Sgd(lr=0.5).step(model, g)
    np.testing.assert_allclose(model.weights[0][0], [[0.9], [2.2]])
    np.testing.assert_allclose(model.weights[0][1], [0.45])


def test_adam_first_step_is_signed_lr():
    model = init_model((2, 1), seed=0)
    w0 = model.weights[0][0].copy()
    g = [(np.array([[0.3], [-0.7]]), np.array([0.0]))]
    Adam(lr=0.01).step(model, g)
    step = model.weights[0][0] - w0
    # After bias correction the first update is -lr * sign(g) within eps.
    np.testing.assert_allclose(step, [[-0.01], [0.01]], atol=1e-6)


def test_make_optimizer_names():
    assert isinstance(make_optimizer("sgd", 0.1), Sgd)
    assert isinstance(make_optimizer("adam", 0.1), Adam)
    with pytest.raises(ValueError):
        make_optimizer("rmsprop", 0.1)


def test_json_round_trip_exact(tmp_path):
    model = init_model((3, 4, 1), seed=9)
    model.metric_name = "f1"
    model.mean = np.array([0.1, -0.2, 3.0])
    model.std = np.array([1.0, 2.0, 0.5])
    model.columns = ("a", "b", "c")
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    assert back.architecture == model.architecture
    assert back.metric_name == "f1"
    assert back.columns == ("a", "b", "c")
    for (w1, b1), (w2, b2) in zip(model.weights, back.weights):
        np.testing.assert_array_equal(w1, w2)
        np.testing.assert_array_equal(b1, b2)
    np.testing.assert_array_equal(back.mean, model.mean)
    np.testing.assert_array_equal(back.std, model.std)


def test_json_shape_validation():
    model = init_model((2, 1), seed=0)
    doc = model_to_json(model)
    broken = doc.replace('"architecture": [\n    2,', '"architecture": [\n    3,')
    with pytest.raises(ValueError):
        model_from_json(broken)


def test_clone_weights_detached():
    model = init_model((2, 1), seed=0)
    snap = clone_weights(model)
    model.weights[0][0][0, 0] += 1.0
    assert snap[0][0][0, 0] != model.weights[0][0][0, 0]


def test_forward_validates_shapes():
    model = init_model((3, 1), seed=0)
    with pytest.raises(ValueError):
        forward(model, np.zeros((2, 4)))


def test_l2_penalty_excludes_nothing_when_zero():
    model = init_model((2, 3, 1), seed=1)
    assert l2_penalty(model, 0.0) == 0.0
    assert l2_penalty(model, 0.5) > 0.0
