"""Regroupement des classes en super-groupes par DBSCAN sur la distance de Fisher."""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.cluster import DBSCAN

from .exceptions import DimensionMismatchError, UninitializedClassError
from .statistics import ClassStatistics

logger = logging.getLogger(__name__)

DEFAULT_FISHER_EPS = 1e-8
# Rayon minimal accepté par DBSCAN quand toutes les distances sont nulles
_MIN_EPSILON = 1e-12


@dataclass(frozen=True)
class ClassGrouping:
    """Partition des classes ; les groupes sont ordonnés par leur plus petit identifiant"""
    groups: Tuple[Tuple[int, ...], ...]
    epsilon: float
    min_pts: int

    def group_of(self) -> Dict[int, int]:
        return {c: g for g, members in enumerate(self.groups) for c in members}


def singleton_grouping(num_classes: int) -> ClassGrouping:
    return ClassGrouping(groups=tuple((c,) for c in range(num_classes)), epsilon=0.0, min_pts=1)


def fisher_distance(a: ClassStatistics, b: ClassStatistics, eps: float = DEFAULT_FISHER_EPS) -> float:
    """
    Distance de Fisher : somme_k (mu_a - mu_b)^2 / (sigma_a^2 + sigma_b^2 + eps)

    Raises:
        UninitializedClassError: Si une des deux classes n'a pas de statistiques
        DimensionMismatchError: Si les dimensions diffèrent
    """
    for stats in (a, b):
        if not stats.initialized:
            raise UninitializedClassError(stats.class_id)
    if a.mean.shape != b.mean.shape:
        raise DimensionMismatchError("statistiques", a.mean.shape, b.mean.shape)
    diff = a.mean - b.mean
    return float(np.sum(diff * diff / (a.std ** 2 + b.std ** 2 + eps)))


def pairwise_fisher_distances(means: np.ndarray, stds: np.ndarray, eps: float = DEFAULT_FISHER_EPS) -> np.ndarray:
    """Matrice symétrique des distances de Fisher entre lignes"""
    diff = means[:, None, :] - means[None, :, :]
    variance = stds[:, None, :] ** 2 + stds[None, :, :] ** 2 + eps
    return np.sum(diff * diff / variance, axis=-1)


def default_epsilon(distances: np.ndarray) -> float:
    """Moitié de la médiane des distances entre paires distinctes"""
    n = distances.shape[0]
    if n < 2:
        return _MIN_EPSILON
    upper = distances[np.triu_indices(n, k=1)]
    return max(0.5 * float(np.median(upper)), _MIN_EPSILON)


def dbscan_labels(distances: np.ndarray, epsilon: float, min_pts: int) -> np.ndarray:
    """Étiquettes DBSCAN (-1 pour le bruit) sur une matrice de distances"""
    model = DBSCAN(eps=epsilon, min_samples=min_pts, metric="precomputed")
    return model.fit_predict(distances)


def cluster_classes(
    statistics: Sequence[ClassStatistics],
    epsilon: Optional[float] = None,
    min_pts: int = 2,
    fisher_eps: float = DEFAULT_FISHER_EPS,
) -> ClassGrouping:
    """
    Regroupe les classes initialisées par DBSCAN ; bruit et classes non initialisées
    deviennent des groupes singletons
    """
    if min_pts < 1:
        raise ValueError("min_pts doit être au moins 1")
    if epsilon is not None and epsilon <= 0:
        raise ValueError("Le rayon epsilon doit être strictement positif")

    ready = [s for s in sorted(statistics, key=lambda s: s.class_id) if s.initialized]
    pending = [s.class_id for s in statistics if not s.initialized]
    groups: List[Tuple[int, ...]] = [(c,) for c in pending]

    if ready:
        means = np.stack([s.mean for s in ready])
        stds = np.stack([s.std for s in ready])
        distances = pairwise_fisher_distances(means, stds, fisher_eps)
        if epsilon is None:
            epsilon = default_epsilon(distances)
        labels = dbscan_labels(distances, epsilon, min_pts)

        ids = np.array([s.class_id for s in ready])
        for label in sorted(set(labels.tolist()) - {-1}):
            groups.append(tuple(int(c) for c in ids[labels == label]))
        groups.extend((int(c),) for c in ids[labels == -1])

    return ClassGrouping(
        groups=tuple(sorted(groups, key=min)),
        epsilon=float(epsilon) if epsilon is not None else 0.0,
        min_pts=min_pts,
    )
