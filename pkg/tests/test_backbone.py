import numpy as np
import pytest

from config import BackboneConfig
from src.core import backbone
from src.core.backbone import BackboneGrads, BackboneParams
from src.errors import InvalidConfigError, NonFiniteGradientError, ShapeMismatchError
from src.utils.gradcheck import numerical_gradient, relative_error


def test_init_shapes_and_bounds():
    params = backbone.init(BackboneConfig(input_dim=5, hidden_dims=[16, 8], output_dim=4, seed=3))
    assert [w.shape for w in params.weights] == [(5, 16), (16, 8), (8, 4)]
    assert [b.shape for b in params.biases] == [(16,), (8,), (4,)]
    for w in params.weights:
        assert np.all(np.abs(w) <= 1.0 / np.sqrt(w.shape[0]))
    assert all(np.all(b == 0.0) for b in params.biases)


def test_init_is_seeded():
    a = backbone.init(BackboneConfig(seed=7))
    b = backbone.init(BackboneConfig(seed=7))
    c = backbone.init(BackboneConfig(seed=8))
    assert all(np.array_equal(x, y) for x, y in zip(a.arrays(), b.arrays()))
    assert not np.array_equal(a.weights[0], c.weights[0])


def test_init_rejects_bad_config():
    with pytest.raises(InvalidConfigError):
        backbone.init(BackboneConfig(hidden_dims=[0]))
    with pytest.raises(InvalidConfigError):
        backbone.init(BackboneConfig(activation="sigmoid"))


def test_single_layer_is_affine(rng):
    params = backbone.init(BackboneConfig(input_dim=3, hidden_dims=[], output_dim=2))
    params.biases[0] = np.array([0.5, -1.0])
    x = rng.normal(size=(4, 3))
    features, _ = backbone.forward(x, params)
    assert features == pytest.approx(x @ params.weights[0] + params.biases[0])


def test_hidden_layers_apply_activation(rng):
    params = backbone.init(BackboneConfig(input_dim=2, hidden_dims=[3], output_dim=1, activation="relu"))
    x = rng.normal(size=(6, 2))
    features, cache = backbone.forward(x, params)
    hidden = np.maximum(x @ params.weights[0] + params.biases[0], 0.0)
    assert features == pytest.approx(hidden @ params.weights[1] + params.biases[1])
    assert cache.batch_size == 6


def test_forward_rejects_wrong_input_dimension():
    params = backbone.init(BackboneConfig(input_dim=3))
    with pytest.raises(ShapeMismatchError):
        backbone.forward(np.zeros((2, 4)), params)


def test_backward_rejects_stale_cache(rng):
    params = backbone.init(BackboneConfig(input_dim=3, hidden_dims=[4], output_dim=2))
    _, cache = backbone.forward(rng.normal(size=(5, 3)), params)
    with pytest.raises(ShapeMismatchError):
        backbone.backward(np.ones((4, 2)), cache, params)


@pytest.mark.parametrize("activation", ["tanh", "relu"])
def test_backward_matches_finite_differences(activation):
    rng = np.random.default_rng(21)
    params = backbone.init(BackboneConfig(input_dim=4, hidden_dims=[6, 5], output_dim=3,
                                          activation=activation, seed=2))
    # keep relu pre-activations off the kink
    for b in params.biases:
        b += 0.05
    x = rng.normal(size=(3, 4))
    weights = rng.normal(size=(3, 3))

    def objective():
        features, _ = backbone.forward(x, params)
        return float(np.sum(features * weights))

    _, cache = backbone.forward(x, params)
    grads = backbone.backward(weights, cache, params)
    for analytic, array in zip(grads.arrays(), params.arrays()):
        assert relative_error(analytic, numerical_gradient(objective, array)) <= 1e-6


def test_sgd_step_is_ascent():
    params = BackboneParams([np.ones((2, 2))], [np.zeros(2)])
    grads = BackboneGrads([np.full((2, 2), 2.0)], [np.array([1.0, -1.0])])
    updated = backbone.sgd_step(params, grads, 0.5)
    assert np.all(updated.weights[0] == 2.0)
    assert updated.biases[0] == pytest.approx([0.5, -0.5])
    # the input parameters are left alone
    assert np.all(params.weights[0] == 1.0)


def test_sgd_step_rejects_non_finite_gradient():
    params = BackboneParams([np.ones((2, 2))], [np.zeros(2)])
    grads = BackboneGrads([np.array([[np.nan, 0.0], [0.0, 0.0]])], [np.zeros(2)])
    with pytest.raises(NonFiniteGradientError):
        backbone.sgd_step(params, grads, 0.1)


def test_sgd_step_rejects_shape_mismatch():
    params = BackboneParams([np.ones((2, 2))], [np.zeros(2)])
    grads = BackboneGrads([np.ones((2, 3))], [np.zeros(2)])
    with pytest.raises(ShapeMismatchError):
        backbone.sgd_step(params, grads, 0.1)


def test_params_dict_round_trip_is_exact():
    params = backbone.init(BackboneConfig(input_dim=3, hidden_dims=[5], output_dim=4, seed=9))
    restored = BackboneParams.from_dict(params.to_dict())
    assert restored.activation == params.activation
    assert all(np.array_equal(a, b) for a, b in zip(params.arrays(), restored.arrays()))
