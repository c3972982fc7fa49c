"""Génération de features virtuelles par classe.

Augmentation gaussienne (x_virt = mu_c + sigma_c * bruit, coordonnées indépendantes) et
interpolation SMOTE entre voisins cosinus, utilisée comme méthode de comparaison.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from sklearn.neighbors import NearestNeighbors

from .exceptions import DimensionMismatchError, InsufficientSamplesError, UninitializedClassError
from .sampling import SamplingState
from .statistics import ClassStatistics, StatisticsBank

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VirtualFeature:
    class_id: int
    values: np.ndarray


class AugmentationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    virt_per_success: int = Field(1, ge=1, description="Features émises par tirage réussi")
    max_virtual_per_iter: int = Field(..., ge=1, description="Plafond de features virtuelles par itération")
    rng_seed: int = Field(0, ge=0, description="Graine du flux de tirage des features virtuelles")

    @model_validator(mode='after')
    def validate_budget(self):
        if self.max_virtual_per_iter < self.virt_per_success:
            raise ValueError("Le plafond par itération doit être au moins égal à virt_per_success")
        return self

    @classmethod
    def for_classes(cls, num_classes: int, virt_per_success: int = 1,
                    max_virtual_per_iter: Optional[int] = None, rng_seed: int = 0) -> "AugmentationConfig":
        """Plafond par défaut : 4 features par classe"""
        return cls(
            virt_per_success=virt_per_success,
            max_virtual_per_iter=max_virtual_per_iter or 4 * num_classes,
            rng_seed=rng_seed
        )

    def make_rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed)


def generate_virtual(stats: ClassStatistics, noise: np.ndarray) -> VirtualFeature:
    """
    Génère une feature virtuelle mu + sigma * bruit

    Raises:
        UninitializedClassError: Si la classe n'a pas encore de statistiques
        DimensionMismatchError: Si le bruit n'a pas la dimension d
    """
    if not stats.initialized:
        raise UninitializedClassError(stats.class_id)
    noise = np.asarray(noise, dtype=float)
    if noise.shape != stats.mean.shape:
        raise DimensionMismatchError("bruit", stats.mean.shape, noise.shape)
    return VirtualFeature(stats.class_id, stats.mean + stats.std * noise)


def _successful_classes(sampling: SamplingState, eligible: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # un tirage par classe, éligible ou non, pour garder le flux aléatoire stable
    draws = rng.random(sampling.num_classes) < sampling.probs
    return np.flatnonzero(draws & eligible)


def draw_virtual_batch(
    bank: StatisticsBank,
    sampling: SamplingState,
    config: AugmentationConfig,
    rng: np.random.Generator,
) -> List[VirtualFeature]:
    """
    Tire un Bernoulli(p_c) par classe initialisée et émet virt_per_success features par succès

    Le lot est tronqué au plafond par identifiant de classe croissant.
    """
    if sampling.num_classes != bank.num_classes:
        raise DimensionMismatchError("probabilités", bank.num_classes, sampling.num_classes)
    batch: List[VirtualFeature] = []
    for class_id in _successful_classes(sampling, bank.initialized, rng):
        stats = bank.get_statistics(int(class_id))
        for noise in rng.standard_normal((config.virt_per_success, bank.dim)):
            if len(batch) >= config.max_virtual_per_iter:
                return batch
            batch.append(generate_virtual(stats, noise))
    return batch


def stack_virtual(batch: List[VirtualFeature], dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Convertit un lot virtuel en tableaux (features, étiquettes)"""
    if not batch:
        return np.empty((0, dim)), np.empty(0, dtype=np.int64)
    return (
        np.stack([feature.values for feature in batch]),
        np.array([feature.class_id for feature in batch], dtype=np.int64),
    )


def _draw_lambda(rng: np.random.Generator) -> float:
    # uniforme sur (0, 1]
    return 1.0 - rng.random()


def _neighbor_table(pool: np.ndarray, k: int) -> np.ndarray:
    """Indices des k plus proches voisins cosinus de chaque point, lui-même exclu"""
    n_neighbors = min(k + 1, pool.shape[0])
    neigh = NearestNeighbors(n_neighbors=n_neighbors, metric="cosine", algorithm="brute")
    neigh.fit(pool)
    candidates = neigh.kneighbors(pool, return_distance=False)
    table = []
    for anchor, row in enumerate(candidates):
        others = [int(j) for j in row if j != anchor]
        table.append(others[: n_neighbors - 1])
    return np.array(table, dtype=np.int64)


def _interpolate(pool: np.ndarray, neighbors: np.ndarray, class_id: int,
                 rng: np.random.Generator, lam: Optional[float]) -> VirtualFeature:
    anchor = int(rng.integers(pool.shape[0]))
    partner = int(rng.choice(neighbors[anchor]))
    lam = _draw_lambda(rng) if lam is None else lam
    return VirtualFeature(class_id, lam * pool[anchor] + (1.0 - lam) * pool[partner])


def smote_generate(
    real_features: np.ndarray,
    class_id: int,
    k: int,
    rng: np.random.Generator,
    lam: Optional[float] = None,
) -> VirtualFeature:
    """
    Interpole entre une ancre aléatoire et l'un de ses k plus proches voisins cosinus

    Raises:
        InsufficientSamplesError: Si la classe a moins de 2 features réelles
    """
    pool = np.asarray(real_features, dtype=float)
    if pool.ndim != 2 or pool.shape[0] < 2:
        raise InsufficientSamplesError(class_id, 0 if pool.ndim != 2 else pool.shape[0], 2)
    if lam is not None and not 0 < lam <= 1:
        raise ValueError("lambda doit appartenir à l'intervalle (0, 1]")
    return _interpolate(pool, _neighbor_table(pool, k), class_id, rng, lam)


class SmoteSampler:
    """SMOTE par classe avec tables de voisins calculées une seule fois"""

    def __init__(self, k_neighbors: int = 5):
        if k_neighbors < 1:
            raise ValueError("k_neighbors doit être au moins 1")
        self.k_neighbors = k_neighbors
        self._pools: Dict[int, np.ndarray] = {}
        self._tables: Dict[int, np.ndarray] = {}
        self.num_classes = 0
        self.dim = 0

    def fit(self, features: np.ndarray, labels: np.ndarray, num_classes: int) -> "SmoteSampler":
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels, dtype=np.int64)
        self.num_classes = num_classes
        self.dim = features.shape[1]
        for class_id in range(num_classes):
            pool = features[labels == class_id]
            if pool.shape[0] >= 2:
                self._pools[class_id] = pool
                self._tables[class_id] = _neighbor_table(pool, self.k_neighbors)
        logger.debug("SMOTE : %d classes sur %d interpolables", len(self._pools), num_classes)
        return self

    @property
    def eligible(self) -> np.ndarray:
        mask = np.zeros(self.num_classes, dtype=bool)
        mask[list(self._pools)] = True
        return mask

    def generate(self, class_id: int, rng: np.random.Generator) -> VirtualFeature:
        if class_id not in self._pools:
            raise InsufficientSamplesError(class_id, 1, 2)
        return _interpolate(self._pools[class_id], self._tables[class_id], class_id, rng, None)

    def draw_batch(self, sampling: SamplingState, config: AugmentationConfig,
                   rng: np.random.Generator) -> List[VirtualFeature]:
        """Même tirage de Bernoulli que l'augmentation gaussienne, avec interpolation SMOTE"""
        batch: List[VirtualFeature] = []
        for class_id in _successful_classes(sampling, self.eligible, rng):
            for _ in range(config.virt_per_success):
                if len(batch) >= config.max_virtual_per_iter:
                    return batch
                batch.append(self.generate(int(class_id), rng))
        return batch
