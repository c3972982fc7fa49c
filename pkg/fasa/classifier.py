"""Classifieur softmax linéaire entraîné par SGD."""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import log_softmax

from .exceptions import DimensionMismatchError, EmptyBatchError, LabelOutOfRangeError


@dataclass
class Gradients:
    weights: np.ndarray
    biases: np.ndarray


class SoftmaxClassifier:
    """Couche de classification : logits = W x + b"""

    def __init__(self, num_classes: int, dim: int, learning_rate: float = 0.1, weight_decay: float = 5e-4):
        if learning_rate <= 0:
            raise ValueError("Le taux d'apprentissage doit être positif")
        if weight_decay < 0:
            raise ValueError("La pénalité L2 ne peut pas être négative")
        self.num_classes = num_classes
        self.dim = dim
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.weights = np.zeros((num_classes, dim))
        self.biases = np.zeros(num_classes)

    def logits(self, features: np.ndarray) -> np.ndarray:
        return features @ self.weights.T + self.biases

    def log_probabilities(self, features: np.ndarray) -> np.ndarray:
        return log_softmax(self.logits(features), axis=1)

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(features), axis=1)

    def weight_norms(self) -> np.ndarray:
        """Norme L2 de chaque ligne W_c"""
        return np.linalg.norm(self.weights, axis=1)

    def step(self, gradients: Gradients, learning_rate: float) -> None:
        self.weights -= learning_rate * gradients.weights
        self.biases -= learning_rate * gradients.biases


def forward_and_loss(clf: SoftmaxClassifier, features: np.ndarray, labels: np.ndarray) -> Tuple[float, Gradients]:
    """
    Entropie croisée moyenne + (weight_decay / 2) * ||W||^2 et ses gradients exacts

    Raises:
        EmptyBatchError: Si le batch est vide
        DimensionMismatchError: Si les features n'ont pas la dimension du classifieur
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise EmptyBatchError("forward_and_loss")
    if features.ndim != 2 or features.shape != (labels.size, clf.dim):
        raise DimensionMismatchError("features", (labels.size, clf.dim), features.shape)
    if labels.min() < 0 or labels.max() >= clf.num_classes:
        raise LabelOutOfRangeError(int(labels[(labels < 0) | (labels >= clf.num_classes)][0]), clf.num_classes)

    n = labels.size
    log_probs = clf.log_probabilities(features)
    rows = np.arange(n)
    loss = -log_probs[rows, labels].mean() + 0.5 * clf.weight_decay * np.sum(clf.weights ** 2)

    residual = np.exp(log_probs)
    residual[rows, labels] -= 1.0
    residual /= n
    return float(loss), Gradients(
        weights=residual.T @ features + clf.weight_decay * clf.weights,
        biases=residual.sum(axis=0),
    )


def per_sample_losses(clf: SoftmaxClassifier, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Entropie croisée de chaque échantillon, sans pénalité"""
    log_probs = clf.log_probabilities(features)
    return -log_probs[np.arange(labels.size), labels]
