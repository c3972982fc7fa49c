"""Statistiques de features par classe, mises à jour en ligne par moyenne mobile.

Chaque classe c conserve une moyenne mu_c et un écart-type sigma_c (diagonal) estimés à
partir des features réelles vues pendant l'entraînement :

    mu_c    <- (1 - m) * mu_c    + m * mu_c^t
    sigma_c <- (1 - m) * sigma_c + m * sigma_c^t

où mu_c^t et sigma_c^t sont la moyenne et l'écart-type (population) de la classe dans le batch.
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .exceptions import ClassOutOfRangeError, DimensionMismatchError, LabelOutOfRangeError, NonFiniteFeatureError

logger = logging.getLogger(__name__)

SNAPSHOT_VERSION = 1

# Une FeatureVector est un tableau numpy 1-d de longueur d
FeatureVector = np.ndarray


@dataclass(frozen=True)
class ClassStatistics:
    """Vue en lecture seule des statistiques d'une classe"""
    class_id: int
    mean: np.ndarray
    std: np.ndarray
    observation_count: int
    initialized: bool


class ClassStatisticsRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int = Field(..., ge=0)
    mean: List[float]
    std: List[float]
    count: int = Field(..., ge=0)
    initialized: bool


class BankSnapshot(BaseModel):
    """Enregistrement sérialisable de toutes les statistiques d'une banque"""
    model_config = ConfigDict(extra="forbid")

    version: int = SNAPSHOT_VERSION
    num_classes: int = Field(..., gt=0)
    dim: int = Field(..., gt=0)
    momentum: float = Field(..., gt=0, le=1)
    classes: List[ClassStatisticsRecord]


class StatisticsBank:
    """Banque de statistiques par classe (un seul écrivain par exécution)"""

    def __init__(self, num_classes: int, dim: int, momentum: float = 0.1):
        if num_classes <= 0:
            raise ValueError("Le nombre de classes doit être un entier positif")
        if dim <= 0:
            raise ValueError("La dimension des features doit être un entier positif")
        if not 0 < momentum <= 1:
            raise ValueError("Le momentum doit appartenir à l'intervalle (0, 1]")

        self.num_classes = num_classes
        self.dim = dim
        self.momentum = momentum
        self._mean = np.zeros((num_classes, dim))
        self._std = np.zeros((num_classes, dim))
        self._count = np.zeros(num_classes, dtype=np.int64)
        self._initialized = np.zeros(num_classes, dtype=bool)

    @property
    def initialized(self) -> np.ndarray:
        return self._initialized.copy()

    @property
    def means(self) -> np.ndarray:
        return self._mean.copy()

    @property
    def stds(self) -> np.ndarray:
        return self._std.copy()

    def _validate_batch(self, features: np.ndarray, labels: np.ndarray) -> None:
        if features.ndim != 2 or features.shape[1] != self.dim:
            raise DimensionMismatchError("features", f"(n, {self.dim})", tuple(features.shape))
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise DimensionMismatchError("labels", features.shape[0], tuple(labels.shape))
        finite = np.isfinite(features).all(axis=1)
        if not finite.all():
            raise NonFiniteFeatureError("features", int(np.flatnonzero(~finite)[0]))
        out_of_range = (labels < 0) | (labels >= self.num_classes)
        if out_of_range.any():
            raise LabelOutOfRangeError(int(labels[out_of_range][0]), self.num_classes)

    def observe_batch(self, features: Sequence[FeatureVector], labels: Sequence[int]) -> "StatisticsBank":
        """
        Met à jour les statistiques des classes présentes dans un batch de features réelles

        Un seul pas de momentum par classe et par appel, quel que soit le nombre d'échantillons.
        L'écart-type n'est mis à jour que pour les classes ayant au moins 2 échantillons.

        Raises:
            DimensionMismatchError: Si les features n'ont pas la dimension d
            LabelOutOfRangeError: Si une étiquette sort de [0, C)
            NonFiniteFeatureError: Si une feature contient NaN ou une valeur infinie
        """
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        if labels.size == 0:
            return self
        try:
            features = np.asarray(features, dtype=float)
        except ValueError:
            raise DimensionMismatchError("features", f"(n, {self.dim})", "lignes de longueurs différentes")
        if features.ndim == 1:
            features = features.reshape(1, -1)
        self._validate_batch(features, labels)

        counts = np.bincount(labels, minlength=self.num_classes)
        present = np.flatnonzero(counts)

        sums = np.zeros((self.num_classes, self.dim))
        np.add.at(sums, labels, features)
        batch_mean = sums[present] / counts[present, None]

        full_mean = np.zeros((self.num_classes, self.dim))
        full_mean[present] = batch_mean
        centered = features - full_mean[labels]
        squares = np.zeros((self.num_classes, self.dim))
        np.add.at(squares, labels, centered * centered)
        batch_std = np.sqrt(squares[present] / counts[present, None])

        m = self.momentum
        fresh = ~self._initialized[present]
        new_ids = present[fresh]
        self._mean[new_ids] = batch_mean[fresh]
        self._std[new_ids] = batch_std[fresh]
        self._initialized[new_ids] = True

        known = ~fresh
        known_ids = present[known]
        self._mean[known_ids] = (1 - m) * self._mean[known_ids] + m * batch_mean[known]
        spread = known & (counts[present] >= 2)
        spread_ids = present[spread]
        self._std[spread_ids] = (1 - m) * self._std[spread_ids] + m * batch_std[spread]

        self._count[present] += counts[present]
        return self

    def get_statistics(self, class_id: int) -> ClassStatistics:
        """Retourne une copie en lecture seule des statistiques d'une classe"""
        if not 0 <= class_id < self.num_classes:
            raise ClassOutOfRangeError(class_id, self.num_classes)
        mean = self._mean[class_id].copy()
        std = self._std[class_id].copy()
        mean.flags.writeable = False
        std.flags.writeable = False
        return ClassStatistics(
            class_id=class_id,
            mean=mean,
            std=std,
            observation_count=int(self._count[class_id]),
            initialized=bool(self._initialized[class_id])
        )

    def all_statistics(self) -> List[ClassStatistics]:
        return [self.get_statistics(c) for c in range(self.num_classes)]

    def snapshot(self) -> BankSnapshot:
        """Capture l'état complet de la banque"""
        return BankSnapshot(
            num_classes=self.num_classes,
            dim=self.dim,
            momentum=self.momentum,
            classes=[
                ClassStatisticsRecord(
                    id=c,
                    mean=[float(v) for v in self._mean[c]],
                    std=[float(v) for v in self._std[c]],
                    count=int(self._count[c]),
                    initialized=bool(self._initialized[c])
                )
                for c in range(self.num_classes)
            ]
        )

    def snapshot_json(self) -> str:
        return self.snapshot().model_dump_json()

    @classmethod
    def from_snapshot(cls, snapshot: Union[BankSnapshot, str, bytes]) -> "StatisticsBank":
        """Reconstruit une banque à partir d'une capture (ou de son JSON)"""
        if isinstance(snapshot, (str, bytes)):
            snapshot = BankSnapshot.model_validate_json(snapshot)
        bank = cls(snapshot.num_classes, snapshot.dim, snapshot.momentum)
        if len(snapshot.classes) != snapshot.num_classes:
            raise DimensionMismatchError("classes", snapshot.num_classes, len(snapshot.classes))
        for record in snapshot.classes:
            if not record.id < snapshot.num_classes:
                raise ClassOutOfRangeError(record.id, snapshot.num_classes)
            if len(record.mean) != snapshot.dim or len(record.std) != snapshot.dim:
                raise DimensionMismatchError(f"classe {record.id}", snapshot.dim, len(record.mean))
            bank._mean[record.id] = record.mean
            bank._std[record.id] = record.std
            bank._count[record.id] = record.count
            bank._initialized[record.id] = record.initialized
        return bank
