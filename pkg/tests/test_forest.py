import math

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.stats import norm

from src.core.forest import (
    ForestModel, LeafParams, LeafResponsibilityWarning, Tree, TreeTopology,
    forest_density, forest_log_density, grad_wrt_features, leaf_responsibilities,
    likelihoods, log_likelihood, predict_mean, route, split_probs, tree_density, update_leaves,
)
from src.errors import EmptySelectionError, NonFiniteInputError, ShapeMismatchError
from src.utils.gradcheck import numerical_gradient, relative_error


def make_model(seed, tree_count=2, depth=2, feature_dim=4):
    """Random model with leaf means in [-2, 2] and variances in [0.25, 2]"""
    rng = np.random.default_rng(seed)
    model = ForestModel.build(tree_count, depth, feature_dim, rng.normal(size=50), rng)
    for tree in model.trees:
        tree.mu = rng.uniform(-2.0, 2.0, size=tree.topology.leaf_count)
        tree.sigma2 = rng.uniform(0.25, 2.0, size=tree.topology.leaf_count)
    return model


def stump(mu, sigma2, phi=0):
    topology = TreeTopology(1)
    return Tree(topology, np.array([phi]), np.asarray(mu, dtype=float), np.asarray(sigma2, dtype=float))


# ===== TOPOLOGY AND ROUTING =====

def test_topology_counts_and_paths():
    topology = TreeTopology(3)
    assert topology.split_count == 7
    assert topology.leaf_count == topology.split_count + 1
    assert topology.leaf_path(0) == [(1, True), (2, True), (4, True)]
    assert topology.leaf_path(7) == [(1, False), (3, False), (7, False)]
    # every leaf sits below exactly one side of the root
    assert np.all(topology.left_mask[0] + topology.right_mask[0] == 1.0)


def test_topology_rejects_zero_depth():
    with pytest.raises(ShapeMismatchError):
        TreeTopology(0)


def test_split_probs_examples():
    tree = Tree(TreeTopology(2), np.array([0, 1, 2]), np.zeros(4), np.ones(4))
    probs = split_probs(np.array([0.0, math.log(3.0), 40.0]), tree)
    assert probs[0] == 0.5
    assert probs[1] == pytest.approx(0.75, abs=1e-12)
    assert probs[2] == pytest.approx(1.0, abs=1e-12)


def test_split_probs_rejects_non_finite():
    tree = stump([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(NonFiniteInputError):
        split_probs(np.array([np.nan]), tree)


def test_route_examples():
    assert route(np.array([0.5]), TreeTopology(1)) == pytest.approx([0.5, 0.5])
    assert route(np.array([1.0 - 1e-12]), TreeTopology(1)) == pytest.approx([1.0, 0.0], abs=1e-11)
    assert route(np.array([0.5, 0.5, 0.5]), TreeTopology(2)) == pytest.approx([0.25] * 4)


def test_route_matches_path_products(rng):
    topology = TreeTopology(3)
    probs = rng.uniform(size=topology.split_count)
    omega = route(probs, topology)
    for leaf in range(topology.leaf_count):
        expected = np.prod([probs[n - 1] if left else 1.0 - probs[n - 1]
                            for n, left in topology.leaf_path(leaf)])
        assert omega[leaf] == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("depth", [1, 2, 4, 6])
def test_route_is_a_distribution(depth, rng):
    topology = TreeTopology(depth)
    omega = route(rng.uniform(size=(20, topology.split_count)), topology)
    assert np.all(omega >= 0.0)
    assert np.allclose(omega.sum(axis=1), 1.0, atol=1e-9)


def test_route_rejects_wrong_length():
    with pytest.raises(ShapeMismatchError):
        route(np.array([0.5, 0.5]), TreeTopology(2))


# ===== DENSITIES =====

def test_tree_density_examples():
    assert tree_density(30.0, np.array([1.0]), [LeafParams(30.0, 1.0)]) == pytest.approx(1.0 / math.sqrt(2 * math.pi))

    leaves = [LeafParams(0.0, 1.0), LeafParams(10.0, 1.0)]
    assert tree_density(3.0, np.array([1.0, 0.0]), leaves) == pytest.approx(norm.pdf(3.0))
    expected = 0.5 * norm.pdf(5.0, 0.0, 1.0) + 0.5 * norm.pdf(5.0, 10.0, 1.0)
    assert tree_density(5.0, np.array([0.5, 0.5]), leaves) == pytest.approx(expected)


def test_forest_density_is_mean_of_tree_densities(rng):
    model = make_model(3, tree_count=3)
    f = rng.normal(size=model.feature_dim)
    per_tree = [tree_density(0.7, route(split_probs(f, tree), tree.topology), tree) for tree in model.trees]
    assert forest_density(0.7, f, model) == pytest.approx(np.mean(per_tree), rel=1e-12)


def test_identical_trees_equal_single_tree(rng):
    tree = make_model(5, tree_count=1).trees[0]
    single = ForestModel([tree], feature_dim=4)
    triple = ForestModel([tree.copy(), tree.copy(), tree.copy()], feature_dim=4)
    f = rng.normal(size=4)
    assert forest_density(0.2, f, triple) == pytest.approx(forest_density(0.2, f, single), rel=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_density_integrates_to_one_and_mean_matches(seed):
    model = make_model(seed, tree_count=1 + seed % 3, depth=1 + seed % 3)
    f = np.random.default_rng(seed + 100).normal(size=model.feature_dim)
    mu = np.concatenate([tree.mu for tree in model.trees])
    sigma_max = math.sqrt(max(tree.sigma2.max() for tree in model.trees))
    grid = np.linspace(mu.min() - 8 * sigma_max, mu.max() + 8 * sigma_max, 20001)

    density = forest_density(grid, np.tile(f, (grid.size, 1)), model)
    assert trapezoid(density, grid) == pytest.approx(1.0, abs=1e-3)
    assert predict_mean(f, model) == pytest.approx(trapezoid(grid * density, grid), abs=1e-3)


def test_log_likelihood_is_floored_but_likelihood_is_not():
    model = ForestModel([stump([0.0, 0.0], [1e-4, 1e-4])], feature_dim=1)
    p, log_p = likelihoods(np.array([1e3]), np.array([[0.0]]), model)
    assert p[0] == 0.0
    assert log_p[0] == pytest.approx(math.log(1e-300))
    assert log_likelihood(1e3, np.array([0.0]), model) == pytest.approx(math.log(1e-300))
    assert forest_log_density(1e3, np.array([0.0]), model) < math.log(1e-300)


def test_density_rejects_mismatched_features():
    model = make_model(0)
    with pytest.raises(ShapeMismatchError):
        forest_density(0.0, np.zeros(model.feature_dim + 1), model)


# ===== PREDICTION =====

def test_predict_mean_examples():
    one_hot = ForestModel([stump([30.0, 50.0], [1.0, 1.0])], feature_dim=1)
    assert predict_mean(np.array([50.0]), one_hot) == pytest.approx(30.0, abs=1e-9)

    balanced = ForestModel([stump([20.0, 40.0], [1.0, 1.0])], feature_dim=1)
    assert predict_mean(np.array([0.0]), balanced) == pytest.approx(30.0)

    two_trees = ForestModel([stump([25.0, 25.0], [1.0, 1.0]), stump([35.0, 35.0], [1.0, 1.0])], feature_dim=1)
    assert predict_mean(np.array([0.3]), two_trees) == pytest.approx(30.0)


def test_predict_mean_batches(rng):
    model = make_model(7)
    features = rng.normal(size=(5, model.feature_dim))
    batch = predict_mean(features, model)
    assert batch.shape == (5,)
    assert batch[2] == pytest.approx(predict_mean(features[2], model))


# ===== RESPONSIBILITIES AND LEAF UPDATES =====

def test_leaf_responsibility_examples():
    leaves = [LeafParams(0.0, 1.0), LeafParams(10.0, 1.0)]
    assert leaf_responsibilities(3.0, np.array([1.0, 0.0]), leaves) == pytest.approx([1.0, 0.0])
    assert leaf_responsibilities(5.0, np.array([0.5, 0.5]), leaves) == pytest.approx([0.5, 0.5])

    weights = np.array([norm.pdf(4.0, 0.0, 1.0), norm.pdf(4.0, 10.0, 1.0)])
    assert leaf_responsibilities(4.0, np.array([0.5, 0.5]), leaves) == pytest.approx(weights / weights.sum())


def test_leaf_responsibilities_fall_back_to_uniform():
    leaves = [LeafParams(0.0, 1.0), LeafParams(10.0, 1.0)]
    with pytest.warns(LeafResponsibilityWarning):
        xi = leaf_responsibilities(4.0, np.array([0.0, 0.0]), leaves)
    assert xi == pytest.approx([0.5, 0.5])


def test_update_leaves_constant_targets(rng):
    model = make_model(11)
    features = np.zeros((30, model.feature_dim))
    targets = np.full(30, 0.3)
    updated = update_leaves(targets, np.ones(30, dtype=bool), features, model)
    for tree in updated.trees:
        assert tree.mu == pytest.approx(np.full(tree.mu.shape, 0.3), abs=1e-9)
        assert tree.sigma2 == pytest.approx(np.full(tree.sigma2.shape, model.sigma2_floor))


def test_update_leaves_one_hot_routing_gives_sample_moments(rng):
    model = ForestModel([stump([5.0, 50.0], [1.0, 1.0])], feature_dim=1)
    targets = rng.normal(2.0, 1.5, size=40)
    features = np.full((40, 1), 50.0)
    updated = update_leaves(targets, np.ones(40, dtype=bool), features, model, iterations=1)
    leaf = updated.trees[0]
    assert leaf.mu[0] == pytest.approx(targets.mean(), rel=1e-9)
    assert leaf.sigma2[0] == pytest.approx(targets.var(), rel=1e-9)
    # leaf 1 is never reached, so it keeps its parameters
    assert leaf.mu[1] == 50.0
    assert leaf.sigma2[1] == 1.0


def test_update_leaves_ignores_unselected_samples(rng):
    model = ForestModel([stump([0.0, 0.0], [1.0, 1.0])], feature_dim=1)
    targets = np.array([1.0, 2.0, 3.0, 1000.0])
    features = np.zeros((4, 1))
    selected = np.array([True, True, True, False])
    updated = update_leaves(targets, selected, features, model, iterations=1)
    assert updated.trees[0].mu == pytest.approx([2.0, 2.0])


@pytest.mark.parametrize("seed", range(5))
def test_update_leaves_single_tree_matches_per_tree_responsibilities(seed):
    rng = np.random.default_rng(seed)
    model = make_model(seed, tree_count=1, depth=3, feature_dim=5)
    features = rng.normal(size=(30, 5))
    targets = rng.normal(size=30)
    selected = rng.uniform(size=30) < 0.8

    tree = model.trees[0]
    xi = np.stack([
        leaf_responsibilities(targets[i], route(split_probs(features[i], tree), tree.topology), tree.leaves)
        for i in np.flatnonzero(selected)
    ])
    t = targets[selected]
    mass = xi.sum(axis=0)
    mu = xi.T @ t / mass
    sigma2 = np.maximum(model.sigma2_floor, np.sum(xi * (t[:, None] - mu[None, :]) ** 2, axis=0) / mass)

    updated = update_leaves(targets, selected, features, model, iterations=1)
    assert updated.trees[0].mu == pytest.approx(mu, rel=1e-8, abs=1e-10)
    assert updated.trees[0].sigma2 == pytest.approx(sigma2, rel=1e-8, abs=1e-10)


def test_update_leaves_returns_a_copy():
    model = make_model(2)
    before = [tree.mu.copy() for tree in model.trees]
    update_leaves(np.array([0.1, 0.4]), np.array([True, True]), np.zeros((2, model.feature_dim)), model)
    for tree, mu in zip(model.trees, before):
        assert np.array_equal(tree.mu, mu)


def test_update_leaves_empty_selection():
    model = make_model(0)
    with pytest.raises(EmptySelectionError):
        update_leaves(np.array([1.0, 2.0]), np.array([False, False]), np.zeros((2, model.feature_dim)), model)


@pytest.mark.parametrize("seed", range(10))
def test_update_leaves_never_decreases_log_likelihood(seed):
    rng = np.random.default_rng(seed)
    model = make_model(seed, tree_count=3, depth=3, feature_dim=6)
    features = rng.normal(size=(60, 6))
    targets = rng.normal(size=60)
    selected = rng.uniform(size=60) < 0.7

    def selected_log_likelihood(m):
        return float(np.sum(forest_log_density(targets[selected], features[selected], m)))

    previous = selected_log_likelihood(model)
    for _ in range(8):
        model = update_leaves(targets, selected, features, model, iterations=1)
        current = selected_log_likelihood(model)
        assert current - previous >= -1e-8
        previous = current


# ===== GRADIENTS =====

def test_gradient_symmetric_split_is_zero():
    model = ForestModel([stump([1.0, 1.0], [0.5, 0.5])], feature_dim=2)
    grad = grad_wrt_features(0.3, np.array([0.0, 0.7]), model)
    assert grad[0] == 0.0


def test_gradient_unused_feature_is_zero(rng):
    model = make_model(4, tree_count=2, depth=3, feature_dim=6)
    for tree in model.trees:
        tree.phi = rng.integers(0, 3, size=tree.topology.split_count)
    grad = grad_wrt_features(0.5, rng.normal(size=6), model)
    assert np.all(grad[3:] == 0.0)


@pytest.mark.parametrize("seed", range(25))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    feature_dim = int(rng.integers(1, 17))
    model = make_model(seed, tree_count=int(rng.integers(1, 4)), depth=int(rng.integers(1, 4)),
                       feature_dim=feature_dim)
    f = rng.normal(size=feature_dim)
    t = float(rng.normal())

    analytic = grad_wrt_features(t, f, model)
    numeric = numerical_gradient(lambda: forest_log_density(t, f, model), f)
    assert relative_error(analytic, numeric) <= 1e-4


def test_gradient_batch_matches_single_rows(rng):
    model = make_model(9)
    features = rng.normal(size=(4, model.feature_dim))
    targets = rng.normal(size=4)
    batch = grad_wrt_features(targets, features, model)
    assert batch[1] == pytest.approx(grad_wrt_features(targets[1], features[1], model))


# ===== SERIALIZATION =====

def test_forest_dict_round_trip_is_exact():
    model = make_model(13, tree_count=3, depth=3)
    restored = ForestModel.from_dict(model.to_dict())
    for a, b in zip(model.trees, restored.trees):
        assert np.array_equal(a.phi, b.phi)
        assert np.array_equal(a.mu, b.mu)
        assert np.array_equal(a.sigma2, b.sigma2)


def test_forest_rejects_out_of_range_phi():
    with pytest.raises(ShapeMismatchError):
        ForestModel([stump([0.0, 0.0], [1.0, 1.0], phi=3)], feature_dim=2)
