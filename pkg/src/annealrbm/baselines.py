"""Classical classifiers on the same feature bits the RBM sees.

Both models score a labelled row (class bit last) from its feature bits and
predict class 1 when the score is positive.
"""
import logging
import time
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.special import expit, log_expit
from sklearn.tree import DecisionTreeRegressor

from .config import GbtConfig, LogRegConfig
from .metrics import EpochMetrics

logger = logging.getLogger(__name__)

PROBABILITY_FLOOR = 1e-6


def split_rows(rows) -> Tuple[np.ndarray, np.ndarray]:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[0] == 0 or rows.size == 0:
        raise ValueError("Baselines need at least one labelled row")
    if rows.shape[1] < 2:
        raise ValueError("Labelled rows need at least one feature bit plus the class bit")
    return rows[:, :-1], rows[:, -1]


class LogRegModel:
    def __init__(self, weights: np.ndarray, bias: float = 0.0):
        self.weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        self.bias = float(bias)
        if not (np.all(np.isfinite(self.weights)) and np.isfinite(self.bias)):
            raise ValueError("Logistic regression parameters must be finite")

    @classmethod
    def zeros(cls, n_features: int) -> "LogRegModel":
        return cls(np.zeros(n_features), 0.0)

    def score(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) @ self.weights + self.bias

    def to_dict(self):
        return {"weights": self.weights.tolist(), "bias": self.bias}


def logistic_loss(model: LogRegModel, features: np.ndarray, labels: np.ndarray, l2: float = 0.0) -> float:
    score = model.score(features)
    loss = -np.mean(labels * log_expit(score) + (1.0 - labels) * log_expit(-score))
    return float(loss + 0.5 * l2 * model.weights @ model.weights)


def logistic_gradient(
    model: LogRegModel, features: np.ndarray, labels: np.ndarray, l2: float = 0.0
) -> Tuple[np.ndarray, float]:
    residual = expit(model.score(features)) - labels
    return features.T @ residual / len(labels) + l2 * model.weights, float(residual.mean())


class GbtModel:
    """initial_score + learning_rate · Σ tree outputs, each output a Newton-step leaf value."""

    def __init__(self, initial_score: float, learning_rate: float, max_depth: int):
        self.initial_score = float(initial_score)
        self.learning_rate = float(learning_rate)
        self.max_depth = max_depth
        self.trees: List[Tuple[DecisionTreeRegressor, np.ndarray]] = []

    def add_tree(self, tree: DecisionTreeRegressor, leaf_values: np.ndarray) -> None:
        if tree.get_depth() > self.max_depth:
            raise ValueError(f"Tree of depth {tree.get_depth()} exceeds max_depth={self.max_depth}")
        self.trees.append((tree, np.asarray(leaf_values, dtype=np.float64)))

    def tree_output(self, index: int, features: np.ndarray) -> np.ndarray:
        tree, leaf_values = self.trees[index]
        return leaf_values[tree.apply(np.asarray(features, dtype=np.float32))]

    def score(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        total = np.full(features.shape[0], self.initial_score)
        for index in range(len(self.trees)):
            total += self.learning_rate * self.tree_output(index, features)
        return total


Model = Union[LogRegModel, GbtModel]


def evaluate(model: Model, rows) -> float:
    """Fraction of rows whose predicted class (score > 0 means class 1) matches the label."""
    features, labels = split_rows(rows)
    predicted = (model.score(features) > 0).astype(np.float64)
    return float(np.mean(predicted == labels))


def logreg_train(
    train_rows,
    config: LogRegConfig,
    test_rows=None,
) -> Tuple[LogRegModel, List[EpochMetrics]]:
    """Minibatch SGD on the mean logistic loss, one metrics record per epoch."""
    features, labels = split_rows(train_rows)
    rng = np.random.default_rng(config.rng_seed)
    model = LogRegModel.zeros(features.shape[1])
    history: List[EpochMetrics] = []
    for epoch in range(config.n_epochs):
        started = time.perf_counter()
        order = rng.permutation(len(labels))
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            d_weights, d_bias = logistic_gradient(model, features[batch], labels[batch], config.l2)
            model = LogRegModel(
                model.weights - config.learning_rate * d_weights,
                model.bias - config.learning_rate * d_bias,
            )
        history.append(
            EpochMetrics(
                epoch=epoch,
                algorithm="logreg",
                train_accuracy=evaluate(model, train_rows),
                test_accuracy=None if test_rows is None else evaluate(model, test_rows),
                wall_time=time.perf_counter() - started,
            )
        )
    if history:
        logger.info(f"Logistic regression: final train accuracy {history[-1].train_accuracy:.4f}")
    return model, history


def newton_leaf_values(
    tree: DecisionTreeRegressor, features: np.ndarray, residual: np.ndarray, probability: np.ndarray
) -> np.ndarray:
    """Σ residual / Σ p(1-p) per leaf; zero where the curvature vanishes."""
    leaves = tree.apply(np.asarray(features, dtype=np.float32))
    n_nodes = tree.tree_.node_count
    numerator = np.bincount(leaves, weights=residual, minlength=n_nodes)
    denominator = np.bincount(leaves, weights=probability * (1.0 - probability), minlength=n_nodes)
    values = np.zeros(n_nodes)
    np.divide(numerator, denominator, out=values, where=denominator > 1e-12)
    return values


def gbt_train(
    train_rows,
    config: GbtConfig,
    test_rows=None,
) -> Tuple[GbtModel, List[EpochMetrics]]:
    """Gradient boosting on the logistic loss; record ``epoch`` i is taken after tree i+1."""
    features, labels = split_rows(train_rows)
    base_rate = float(np.clip(labels.mean(), PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR))
    model = GbtModel(np.log(base_rate / (1.0 - base_rate)), config.learning_rate, config.max_depth)
    score = np.full(len(labels), model.initial_score)
    history: List[EpochMetrics] = []
    for epoch in range(config.n_trees):
        started = time.perf_counter()
        probability = expit(score)
        residual = labels - probability
        tree = DecisionTreeRegressor(max_depth=config.max_depth, random_state=config.rng_seed)
        tree.fit(features, residual)
        leaf_values = newton_leaf_values(tree, features, residual, probability)
        model.add_tree(tree, leaf_values)
        score = score + config.learning_rate * model.tree_output(epoch, features)
        history.append(
            EpochMetrics(
                epoch=epoch,
                algorithm="gbt",
                train_accuracy=float(np.mean((score > 0) == (labels == 1))),
                test_accuracy=None if test_rows is None else evaluate(model, test_rows),
                wall_time=time.perf_counter() - started,
            )
        )
    if history:
        logger.info(f"Gradient boosting: {len(model.trees)} trees, final train accuracy {history[-1].train_accuracy:.4f}")
    return model, history
