"""Jeux de données synthétiques à longue traîne (mélange de gaussiennes)."""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .exceptions import DimensionMismatchError, InvalidClassCountError

logger = logging.getLogger(__name__)

BIN_NAMES = ["tail", "mid", "head"]


class ValidationProfile(str, Enum):
    BALANCED = "balanced"
    IMBALANCED = "imbalanced"


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(np.asarray(values, dtype=float) + 0.5).astype(np.int64)


def long_tail_counts(num_classes: int, head_count: int, imbalance_ratio: float) -> np.ndarray:
    """Effectifs N_c = round(N_max * rho^(-c / (C - 1)))"""
    if num_classes == 1:
        return np.array([head_count], dtype=np.int64)
    exponents = np.arange(num_classes) / (num_classes - 1)
    return _round_half_up(head_count * imbalance_ratio ** (-exponents))


class SyntheticDataSpec(BaseModel):
    """Description d'un mélange de gaussiennes à longue traîne"""
    model_config = ConfigDict(extra="forbid")

    num_classes: int = Field(30, ge=2, description="Nombre de classes C")
    dim: int = Field(16, ge=1, description="Dimension d des features")
    head_count: int = Field(500, ge=1, description="Effectif de la classe la plus fréquente")
    imbalance_ratio: float = Field(100.0, ge=1, description="Ratio rho = max N / min N")
    center_radius: float = Field(4.0, gt=0, description="Rayon R de la sphère des centres")
    within_class_std: float = Field(1.0, gt=0, description="Écart-type intra-classe")
    val_per_class: int = Field(20, ge=1)
    test_per_class: int = Field(20, ge=1)
    group_thresholds: List[int] = Field(default_factory=lambda: [10, 100])
    validation_profile: ValidationProfile = ValidationProfile.BALANCED
    seed: int = 0

    @field_validator('group_thresholds')
    def validate_thresholds(cls, v):
        if len(v) != len(BIN_NAMES) - 1:
            raise ValueError("Exactement deux seuils sont attendus (tail/mid/head)")
        if any(b <= a for a, b in zip(v, v[1:])) or v[0] < 1:
            raise ValueError("Les seuils doivent être positifs et strictement croissants")
        return v

    @model_validator(mode='after')
    def validate_counts(self):
        """Valide que la classe la plus rare garde au moins un échantillon"""
        counts = long_tail_counts(self.num_classes, self.head_count, self.imbalance_ratio)
        if counts.min() < 1:
            raise ValueError(
                f"L'effectif de la classe la plus rare est nul (N_max={self.head_count}, "
                f"rho={self.imbalance_ratio})"
            )
        return self

    def train_counts(self) -> np.ndarray:
        return long_tail_counts(self.num_classes, self.head_count, self.imbalance_ratio)


class DatasetRecord(BaseModel):
    """Format d'échange texte d'un jeu de données"""
    model_config = ConfigDict(extra="forbid")

    version: int = 1
    num_classes: int
    dim: int
    features: List[List[float]]
    labels: List[int]
    class_counts: List[int]
    group_thresholds: List[int]


@dataclass
class LongTailDataset:
    """Features étiquetées avec leurs effectifs par classe"""
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    group_thresholds: Tuple[int, ...] = (10, 100)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise DimensionMismatchError("jeu de données", self.labels.shape[0], self.features.shape)
        self.group_thresholds = tuple(self.group_thresholds)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def class_bins(self) -> np.ndarray:
        """Groupe d'effectifs (tail/mid/head) de chaque classe"""
        return np.array(BIN_NAMES)[np.searchsorted(self.group_thresholds, self.class_counts, side="right")]

    def to_json(self) -> str:
        return DatasetRecord(
            num_classes=self.num_classes,
            dim=self.dim,
            features=self.features.tolist(),
            labels=self.labels.tolist(),
            class_counts=self.class_counts.tolist(),
            group_thresholds=list(self.group_thresholds),
        ).model_dump_json()

    @classmethod
    def from_json(cls, text: str) -> "LongTailDataset":
        record = DatasetRecord.model_validate_json(text)
        dataset = cls(
            features=np.array(record.features, dtype=float).reshape(-1, record.dim),
            labels=np.array(record.labels, dtype=np.int64),
            num_classes=record.num_classes,
            group_thresholds=tuple(record.group_thresholds),
        )
        if dataset.class_counts.tolist() != record.class_counts:
            raise ValueError("Les effectifs déclarés ne correspondent pas aux étiquettes")
        return dataset


def _sample_classes(centers: np.ndarray, counts: Sequence[int], std: float,
                    rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    labels = np.repeat(np.arange(centers.shape[0]), counts)
    features = centers[labels] + std * rng.standard_normal((labels.size, centers.shape[1]))
    return features, labels


def generate_dataset(spec: SyntheticDataSpec) -> Tuple[LongTailDataset, LongTailDataset, LongTailDataset]:
    """
    Génère les ensembles d'entraînement (longue traîne), de validation et de test

    Raises:
        InvalidClassCountError: Si un effectif d'entraînement calculé est nul
    """
    train_counts = spec.train_counts()
    for class_id, count in enumerate(train_counts):
        if count < 1:
            raise InvalidClassCountError(class_id, int(count))

    center_seq, train_seq, val_seq, test_seq = np.random.SeedSequence(spec.seed).spawn(4)
    directions = np.random.default_rng(center_seq).standard_normal((spec.num_classes, spec.dim))
    centers = spec.center_radius * directions / np.linalg.norm(directions, axis=1, keepdims=True)

    if spec.validation_profile is ValidationProfile.IMBALANCED:
        val_counts = long_tail_counts(spec.num_classes, spec.val_per_class, spec.imbalance_ratio)
    else:
        val_counts = np.full(spec.num_classes, spec.val_per_class)
    test_counts = np.full(spec.num_classes, spec.test_per_class)

    thresholds = tuple(spec.group_thresholds)
    splits: Dict[str, LongTailDataset] = {}
    for name, counts, seq in (("train", train_counts, train_seq),
                              ("val", val_counts, val_seq),
                              ("test", test_counts, test_seq)):
        features, labels = _sample_classes(centers, counts, spec.within_class_std, np.random.default_rng(seq))
        splits[name] = LongTailDataset(features, labels, spec.num_classes, thresholds)

    logger.debug(
        "Jeu synthétique : C=%d, d=%d, %d exemples d'entraînement (N_max=%d, N_min=%d)",
        spec.num_classes, spec.dim, len(splits["train"]), train_counts.max(), train_counts.min(),
    )
    return splits["train"], splits["val"], splits["test"]
