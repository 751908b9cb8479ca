"""
Forest Core Module
Soft-routing regression trees with Gaussian leaves: routing, mixture
densities, prediction, EM leaf updates and analytic feature gradients
"""

import copy
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit, log_expit, logsumexp
from scipy.stats import norm

from src.errors import NonFiniteInputError, ShapeMismatchError, EmptySelectionError

DENSITY_FLOOR = 1e-300
LOG_DENSITY_FLOOR = float(np.log(DENSITY_FLOOR))
DEFAULT_SIGMA2_FLOOR = 1e-4
MIN_RESPONSIBILITY_MASS = 1e-12

# Routing weights over the leaves of one tree; rows sum to 1
RoutingResult = np.ndarray


class LeafResponsibilityWarning(RuntimeWarning):
    """Issued when leaf responsibilities fall back to uniform"""
    pass


@dataclass(frozen=True)
class TreeTopology:
    """Complete binary tree; split nodes 1..split_count breadth-first, leaves 0..leaf_count-1"""
    depth: int

    def __post_init__(self):
        if int(self.depth) < 1:
            raise ShapeMismatchError(f"Tree depth must be a positive integer: {self.depth}")

    @property
    def split_count(self) -> int:
        return 2 ** self.depth - 1

    @property
    def leaf_count(self) -> int:
        return 2 ** self.depth

    def leaf_path(self, leaf: int) -> List[Tuple[int, bool]]:
        """Root-to-leaf path as (split node index, goes_left) pairs"""
        if not 0 <= leaf < self.leaf_count:
            raise ShapeMismatchError(f"Leaf {leaf} outside 0..{self.leaf_count - 1}")
        path = []
        node = self.leaf_count + leaf
        while node > 1:
            path.append((node // 2, node % 2 == 0))
            node //= 2
        return path[::-1]

    @cached_property
    def left_mask(self) -> np.ndarray:
        """(split_count, leaf_count) mask: leaf lies in the left subtree of the split"""
        return self._subtree_masks()[0]

    @cached_property
    def right_mask(self) -> np.ndarray:
        """(split_count, leaf_count) mask: leaf lies in the right subtree of the split"""
        return self._subtree_masks()[1]

    def _subtree_masks(self) -> Tuple[np.ndarray, np.ndarray]:
        left = np.zeros((self.split_count, self.leaf_count))
        right = np.zeros((self.split_count, self.leaf_count))
        for leaf in range(self.leaf_count):
            for node, goes_left in self.leaf_path(leaf):
                if goes_left:
                    left[node - 1, leaf] = 1.0
                else:
                    right[node - 1, leaf] = 1.0
        return left, right


@dataclass
class LeafParams:
    """Gaussian predictive distribution held by one leaf"""
    mu: float
    sigma2: float


@dataclass
class Tree:
    """One regression tree: topology, split-to-feature map phi and leaf Gaussians"""
    topology: TreeTopology
    phi: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray

    @property
    def leaves(self) -> List[LeafParams]:
        return [LeafParams(float(m), float(s)) for m, s in zip(self.mu, self.sigma2)]

    def copy(self) -> 'Tree':
        return Tree(self.topology, self.phi.copy(), self.mu.copy(), self.sigma2.copy())


@dataclass
class ForestModel:
    """K trees sharing one backbone feature vector"""
    trees: List[Tree]
    feature_dim: int
    sigma2_floor: float = DEFAULT_SIGMA2_FLOOR

    def __post_init__(self):
        if not self.trees:
            raise ShapeMismatchError("A forest needs at least one tree")
        for tree in self.trees:
            if tree.phi.shape != (tree.topology.split_count,):
                raise ShapeMismatchError("phi must map every split node to a feature")
            if np.any(tree.phi < 0) or np.any(tree.phi >= self.feature_dim):
                raise ShapeMismatchError(f"phi values must index features 0..{self.feature_dim - 1}")
            if tree.mu.shape != (tree.topology.leaf_count,) or tree.sigma2.shape != tree.mu.shape:
                raise ShapeMismatchError("Leaf parameter arrays must have one entry per leaf")

    @property
    def tree_count(self) -> int:
        return len(self.trees)

    @property
    def depth(self) -> int:
        return self.trees[0].topology.depth

    @classmethod
    def build(cls, tree_count: int, depth: int, feature_dim: int, targets: np.ndarray,
              rng: np.random.Generator, sigma2_floor: float = DEFAULT_SIGMA2_FLOOR) -> 'ForestModel':
        """Random fixed phi; leaf means spread over the target range, variances at the target variance"""
        targets = np.asarray(targets, dtype=np.float64)
        if targets.size == 0:
            raise EmptySelectionError("Cannot initialize leaves without targets")
        topology = TreeTopology(depth)
        low, high = float(targets.min()), float(targets.max())
        variance = max(float(np.var(targets)), sigma2_floor)

        trees = []
        for _ in range(tree_count):
            phi = rng.integers(0, feature_dim, size=topology.split_count)
            mu = rng.uniform(low, high, size=topology.leaf_count)
            sigma2 = np.full(topology.leaf_count, variance)
            trees.append(Tree(topology, phi, mu, sigma2))
        return cls(trees=trees, feature_dim=feature_dim, sigma2_floor=sigma2_floor)

    def copy(self) -> 'ForestModel':
        return ForestModel([tree.copy() for tree in self.trees], self.feature_dim, self.sigma2_floor)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'depth': self.depth,
            'feature_dim': self.feature_dim,
            'sigma2_floor': self.sigma2_floor,
            'trees': [
                {
                    'phi': [int(v) for v in tree.phi],
                    'mu': [float(v) for v in tree.mu],
                    'sigma2': [float(v) for v in tree.sigma2],
                }
                for tree in self.trees
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ForestModel':
        topology = TreeTopology(int(data['depth']))
        trees = [
            Tree(
                topology,
                np.asarray(entry['phi'], dtype=np.int64),
                np.asarray(entry['mu'], dtype=np.float64),
                np.asarray(entry['sigma2'], dtype=np.float64),
            )
            for entry in data['trees']
        ]
        return cls(trees=trees, feature_dim=int(data['feature_dim']),
                   sigma2_floor=float(data['sigma2_floor']))


# ===== INPUT HANDLING =====

def _check_features(features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if not np.all(np.isfinite(features)):
        raise NonFiniteInputError("Feature vector contains NaN or infinite values")
    return features


def _as_batch(t, features: np.ndarray, model: ForestModel) -> Tuple[np.ndarray, np.ndarray, bool]:
    """Promote a single (t, features) pair or a batch to (B,), (B, F) arrays"""
    features = _check_features(features)
    single = features.ndim == 1
    features = np.atleast_2d(features)
    if features.ndim != 2 or features.shape[1] != model.feature_dim:
        raise ShapeMismatchError(
            f"Expected features of dimension {model.feature_dim}, got shape {features.shape}"
        )
    if t is None:
        return None, features, single
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if t.shape != (features.shape[0],):
        raise ShapeMismatchError(f"Got {t.shape[0]} targets for {features.shape[0]} feature rows")
    if not np.all(np.isfinite(t)):
        raise NonFiniteInputError("Targets contain NaN or infinite values")
    return t, features, single


def _leaf_arrays(leaves: Union[Tree, Sequence[LeafParams]]) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(leaves, Tree):
        return leaves.mu, leaves.sigma2
    mu = np.array([leaf.mu for leaf in leaves], dtype=np.float64)
    sigma2 = np.array([leaf.sigma2 for leaf in leaves], dtype=np.float64)
    return mu, sigma2


# ===== ROUTING =====

def split_probs(features: np.ndarray, tree: Tree) -> np.ndarray:
    """Sigmoid split probabilities s_n = sigmoid(features[phi(n)])"""
    features = _check_features(features)
    return expit(features[..., tree.phi])


def route(probs: np.ndarray, topology: TreeTopology) -> RoutingResult:
    """Probability of reaching each leaf: product of s_n (left) or 1 - s_n (right) along the path"""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape[-1] != topology.split_count:
        raise ShapeMismatchError(
            f"Depth-{topology.depth} tree has {topology.split_count} splits, got {probs.shape[-1]} probabilities"
        )
    omega = np.ones(probs.shape[:-1] + (1,))
    for level in range(topology.depth):
        level_probs = probs[..., 2 ** level - 1:2 ** (level + 1) - 1]
        children = np.stack([omega * level_probs, omega * (1.0 - level_probs)], axis=-1)
        omega = children.reshape(probs.shape[:-1] + (2 ** (level + 1),))
    return omega


def _log_routing(features: np.ndarray, tree: Tree) -> np.ndarray:
    """log omega for a (B, F) batch, summed along paths in log space"""
    logits = features[:, tree.phi]
    topology = tree.topology
    return log_expit(logits) @ topology.left_mask + log_expit(-logits) @ topology.right_mask


def _log_leaf_terms(t: np.ndarray, features: np.ndarray, tree: Tree) -> np.ndarray:
    """log(omega_l * N(t; mu_l, sigma2_l)) for a batch, shape (B, L)"""
    log_gauss = norm.logpdf(t[:, None], loc=tree.mu[None, :], scale=np.sqrt(tree.sigma2)[None, :])
    return _log_routing(features, tree) + log_gauss


def _forest_log_terms(t: np.ndarray, features: np.ndarray, model: ForestModel) -> np.ndarray:
    """Joint log terms log(omega_kl * N_kl / K), shape (B, K, L)"""
    terms = np.stack([_log_leaf_terms(t, features, tree) for tree in model.trees], axis=1)
    return terms - np.log(model.tree_count)


# ===== DENSITIES =====

def tree_density(t, omega: RoutingResult, leaves: Union[Tree, Sequence[LeafParams]]):
    """Per-tree predictive density: sum_l omega_l * N(t; mu_l, sigma2_l)"""
    mu, sigma2 = _leaf_arrays(leaves)
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape[-1] != mu.shape[0]:
        raise ShapeMismatchError(f"Routing has {omega.shape[-1]} entries for {mu.shape[0]} leaves")
    t = np.asarray(t, dtype=np.float64)
    gauss = norm.pdf(t[..., None], loc=mu, scale=np.sqrt(sigma2))
    density = np.sum(omega * gauss, axis=-1)
    return float(density) if density.ndim == 0 else density


def forest_log_density(t, features: np.ndarray, model: ForestModel):
    """Unfloored log p_F(t | features); may be -inf when the density underflows"""
    t, features, single = _as_batch(t, features, model)
    log_p = logsumexp(_forest_log_terms(t, features, model), axis=(1, 2))
    return float(log_p[0]) if single else log_p


def forest_density(t, features: np.ndarray, model: ForestModel):
    """Forest-average density (1/K) sum_k p_Tk(t | features)"""
    with np.errstate(under='ignore'):
        return np.exp(forest_log_density(t, features, model))


def log_likelihood(t, features: np.ndarray, model: ForestModel):
    """log max(p_F, DENSITY_FLOOR); always finite"""
    return np.maximum(forest_log_density(t, features, model), LOG_DENSITY_FLOOR)


def likelihoods(t, features: np.ndarray, model: ForestModel) -> Tuple[np.ndarray, np.ndarray]:
    """(unfloored likelihoods, floored log-likelihoods) for a batch"""
    log_p = np.atleast_1d(forest_log_density(t, features, model))
    with np.errstate(under='ignore'):
        p = np.exp(log_p)
    return p, np.maximum(log_p, LOG_DENSITY_FLOOR)


def predict_mean(features: np.ndarray, model: ForestModel):
    """Analytic mean of the forest mixture: (1/K) sum_k sum_l omega_kl * mu_kl"""
    _, features, single = _as_batch(None, features, model)
    total = np.zeros(features.shape[0])
    for tree in model.trees:
        omega = route(split_probs(features, tree), tree.topology)
        total += omega @ tree.mu
    prediction = total / model.tree_count
    return float(prediction[0]) if single else prediction


# ===== LEAF UPDATES =====

def leaf_responsibilities(t: float, omega: RoutingResult,
                          leaves: Union[Tree, Sequence[LeafParams]]) -> np.ndarray:
    """Posterior leaf weights xi_l proportional to omega_l * N(t; mu_l, sigma2_l)"""
    mu, sigma2 = _leaf_arrays(leaves)
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape != mu.shape:
        raise ShapeMismatchError(f"Routing has {omega.shape[0]} entries for {mu.shape[0]} leaves")
    with np.errstate(divide='ignore'):
        log_terms = np.log(omega) + norm.logpdf(t, loc=mu, scale=np.sqrt(sigma2))
        normalizer = logsumexp(log_terms)
    if not np.isfinite(normalizer):
        warnings.warn("All leaf responsibilities vanished; using uniform weights",
                      LeafResponsibilityWarning)
        return np.full(mu.shape, 1.0 / mu.shape[0])
    return np.exp(log_terms - normalizer)


def update_leaves(targets: np.ndarray, selected: np.ndarray, features: np.ndarray,
                  model: ForestModel, iterations: int = 2) -> ForestModel:
    """EM fixed-point update of all leaf Gaussians over the selected samples.

    Responsibilities are taken over the joint forest mixture (tree k, leaf l)
    so each iteration cannot decrease the selected-sample forest log-likelihood.
    Routing is held fixed; leaves with responsibility mass below
    MIN_RESPONSIBILITY_MASS keep their parameters for that iteration.
    Returns an updated copy; the input model is not modified.
    """
    mask = np.asarray(selected, dtype=bool)
    targets = np.asarray(targets, dtype=np.float64)
    if mask.shape != targets.shape:
        raise ShapeMismatchError(f"Selection has {mask.shape} entries for {targets.shape} targets")
    if not mask.any():
        raise EmptySelectionError("No selected samples to update the leaves with")

    t, features, _ = _as_batch(targets[mask], np.atleast_2d(features)[mask], model)
    updated = model.copy()
    log_routing = np.stack([_log_routing(features, tree) for tree in updated.trees], axis=1)
    log_k = np.log(updated.tree_count)

    for _ in range(iterations):
        mu = np.stack([tree.mu for tree in updated.trees])
        sigma2 = np.stack([tree.sigma2 for tree in updated.trees])
        log_terms = log_routing - log_k + norm.logpdf(t[:, None, None], loc=mu, scale=np.sqrt(sigma2))
        with np.errstate(under='ignore'):
            resp = np.exp(log_terms - logsumexp(log_terms, axis=(1, 2), keepdims=True))

        mass = resp.sum(axis=0)
        active = mass >= MIN_RESPONSIBILITY_MASS
        safe_mass = np.where(active, mass, 1.0)
        mu_new = np.where(active, np.einsum('bkl,b->kl', resp, t) / safe_mass, mu)
        spread = np.einsum('bkl,bkl->kl', resp, (t[:, None, None] - mu_new[None]) ** 2) / safe_mass
        sigma2_new = np.where(active, np.maximum(updated.sigma2_floor, spread), sigma2)

        for k, tree in enumerate(updated.trees):
            tree.mu = mu_new[k]
            tree.sigma2 = sigma2_new[k]

    return updated


# ===== GRADIENTS =====

def grad_wrt_features(t, features: np.ndarray, model: ForestModel) -> np.ndarray:
    """Analytic d log p_F(t | f) / d f.

    Per tree and split n: dp_T/df_phi(n) = (1 - s_n) * sum_{l in left(n)} omega_l N_l
    - s_n * sum_{l in right(n)} omega_l N_l. Dividing by K * p_F turns the omega_l N_l
    terms into joint responsibilities, which keeps the computation in log space.
    Splits sharing a feature accumulate.
    """
    t, features, single = _as_batch(t, features, model)
    log_terms = _forest_log_terms(t, features, model)
    with np.errstate(under='ignore'):
        resp = np.exp(log_terms - logsumexp(log_terms, axis=(1, 2), keepdims=True))

    grad = np.zeros_like(features)
    for k, tree in enumerate(model.trees):
        s = expit(features[:, tree.phi])
        left = resp[:, k, :] @ tree.topology.left_mask.T
        right = resp[:, k, :] @ tree.topology.right_mask.T
        contribution = (1.0 - s) * left - s * right
        np.add.at(grad.T, tree.phi, contribution.T)
    return grad[0] if single else grad
