"""Banc d'essai : boucle d'entraînement réel + virtuel, évaluation par groupe d'effectifs."""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .augmentation import AugmentationConfig, SmoteSampler, draw_virtual_batch, stack_virtual
from .classifier import SoftmaxClassifier, forward_and_loss, per_sample_losses
from .dataset import BIN_NAMES, LongTailDataset, generate_dataset
from .models import AugmentationMode, ExperimentConfig, ValidationResampling
from .sampling import (
    AdjustmentRecord,
    FeatureSamplingController,
    RepeatFactorConfig,
    SamplingState,
    SignalMode,
    bin_mean_probabilities,
    init_probabilities,
    repeat_factor_resample,
)
from .statistics import StatisticsBank

logger = logging.getLogger(__name__)


@dataclass
class TrainingStreams:
    """Flux aléatoires indépendants d'une exécution"""
    shuffle: np.random.Generator
    augment: np.random.Generator
    validation: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int, aug_config: Optional[AugmentationConfig] = None) -> "TrainingStreams":
        """Le flux d'augmentation suit aug_config.rng_seed quand une configuration est fournie"""
        shuffle, augment, validation = np.random.SeedSequence(seed).spawn(3)
        return cls(
            shuffle=np.random.default_rng(shuffle),
            augment=aug_config.make_rng() if aug_config is not None else np.random.default_rng(augment),
            validation=np.random.default_rng(validation),
        )


@dataclass
class EpochMetrics:
    epoch: int
    overall_acc: float
    bin_acc: Dict[str, Optional[float]]
    mean_val_loss: Optional[float]
    weight_norms: np.ndarray


@dataclass
class Evaluation:
    metrics: EpochMetrics
    class_loss: Dict[int, Optional[float]]
    class_accuracy: Dict[int, Optional[float]]

    def signal(self, mode: SignalMode) -> Dict[int, Optional[float]]:
        if SignalMode(mode) is SignalMode.VALIDATION_LOSS:
            return self.class_loss
        return self.class_accuracy


@dataclass
class EpochLog:
    """Journal d'une époque : perte moyenne et features virtuelles par itération et par classe"""
    mean_loss: float
    virtual_counts: np.ndarray


def train_epoch(
    clf: SoftmaxClassifier,
    train: LongTailDataset,
    bank: Optional[StatisticsBank],
    sampling: Optional[SamplingState],
    aug_config: Optional[AugmentationConfig],
    streams: TrainingStreams,
    batch_size: int = 64,
    learning_rate: Optional[float] = None,
    smote: Optional[SmoteSampler] = None,
) -> EpochLog:
    """
    Une époque de SGD sur des mini-batchs réels mélangés, complétés de features virtuelles

    Par itération : mise à jour des statistiques à partir des features réelles, tirage du lot
    virtuel (gaussien, ou SMOTE si `smote` est fourni), puis un pas de SGD sur la concaténation.
    Sans `sampling`, l'époque n'utilise que les features réelles.
    """
    learning_rate = learning_rate or clf.learning_rate
    order = streams.shuffle.permutation(len(train))
    losses: List[float] = []
    virtual_counts: List[np.ndarray] = []

    for start in range(0, len(train), batch_size):
        index = order[start:start + batch_size]
        features, labels = train.features[index], train.labels[index]
        if bank is not None:
            bank.observe_batch(features, labels)

        if sampling is not None:
            if smote is not None:
                batch = smote.draw_batch(sampling, aug_config, streams.augment)
            else:
                batch = draw_virtual_batch(bank, sampling, aug_config, streams.augment)
            virtual_x, virtual_y = stack_virtual(batch, train.dim)
            virtual_counts.append(np.bincount(virtual_y, minlength=train.num_classes))
            if virtual_y.size:
                features = np.concatenate([features, virtual_x])
                labels = np.concatenate([labels, virtual_y])

        loss, gradients = forward_and_loss(clf, features, labels)
        clf.step(gradients, learning_rate)
        losses.append(loss)

    counts = np.stack(virtual_counts) if virtual_counts else np.zeros((0, train.num_classes), dtype=np.int64)
    return EpochLog(mean_loss=float(np.mean(losses)), virtual_counts=counts)


def evaluate(
    clf: SoftmaxClassifier,
    dataset: LongTailDataset,
    class_bins: np.ndarray,
    rfs: Optional[RepeatFactorConfig] = None,
    rng: Optional[np.random.Generator] = None,
    epoch: int = 0,
) -> Evaluation:
    """
    Précision globale et par groupe d'effectifs, perte et précision moyennes par classe

    Avec une configuration RFS, l'évaluation porte sur le multi-ensemble rééchantillonné.
    Une classe absente de l'ensemble a une perte absente.
    """
    if rfs is not None and len(dataset):
        index = repeat_factor_resample(dataset.labels, rfs, rng if rng is not None else np.random.default_rng(epoch))
    else:
        index = np.arange(len(dataset))
    features, labels = dataset.features[index], dataset.labels[index]

    class_loss: Dict[int, Optional[float]] = {c: None for c in range(clf.num_classes)}
    class_accuracy: Dict[int, Optional[float]] = {c: None for c in range(clf.num_classes)}
    bin_acc: Dict[str, Optional[float]] = {name: None for name in BIN_NAMES}
    overall = 0.0

    if labels.size:
        correct = clf.predict(features) == labels
        losses = per_sample_losses(clf, features, labels)
        overall = float(correct.mean())
        for c in np.unique(labels):
            mask = labels == c
            class_loss[int(c)] = float(losses[mask].mean())
            class_accuracy[int(c)] = float(correct[mask].mean())
        sample_bins = np.asarray(class_bins)[labels]
        for name in BIN_NAMES:
            mask = sample_bins == name
            if mask.any():
                bin_acc[name] = float(correct[mask].mean())

    present = [v for v in class_loss.values() if v is not None]
    metrics = EpochMetrics(
        epoch=epoch,
        overall_acc=overall,
        bin_acc=bin_acc,
        mean_val_loss=float(np.mean(present)) if present else None,
        weight_norms=clf.weight_norms(),
    )
    return Evaluation(metrics=metrics, class_loss=class_loss, class_accuracy=class_accuracy)


def weight_norm_ratio(norms: np.ndarray) -> float:
    """max_c ||W_c|| / min_c ||W_c||"""
    smallest = float(norms.min())
    return float(norms.max()) / smallest if smallest > 0 else float("inf")


@dataclass
class RunResult:
    """Résultats d'une exécution (un mode, une graine)"""
    mode: AugmentationMode
    seed: int
    class_bins: np.ndarray
    epochs: List[EpochMetrics] = field(default_factory=list)
    trajectory: List[AdjustmentRecord] = field(default_factory=list)
    bin_trajectory: List[Tuple[int, Dict[str, Optional[float]]]] = field(default_factory=list)
    test: Optional[EpochMetrics] = None
    wall_clock: float = 0.0

    @property
    def run_id(self) -> str:
        return f"{self.mode.value}_seed{self.seed}"

    @property
    def has_sampling(self) -> bool:
        return self.mode is not AugmentationMode.NONE

    @property
    def weight_norm_ratio(self) -> float:
        return weight_norm_ratio(self.test.weight_norms)


def build_controller(config: ExperimentConfig, train: LongTailDataset) -> FeatureSamplingController:
    settings = config.controller
    state = init_probabilities(
        train.class_counts.tolist(),
        init_scale=settings.effective_scale,
        mode=settings.init_mode,
        alpha=settings.alpha,
        beta=settings.beta,
        adaptation_mode=settings.adaptation_mode,
        signal=settings.signal,
    )
    return FeatureSamplingController(
        state,
        adaptive=settings.adapts,
        recluster_every=settings.recluster_every,
        cluster_epsilon=settings.cluster_epsilon,
        cluster_min_pts=settings.cluster_min_pts,
        fisher_eps=settings.fisher_eps,
    )


def run_training(config: ExperimentConfig, seed: int, mode: AugmentationMode) -> RunResult:
    """
    Exécution complète : époques d'entraînement, validation, ajustement des p_c, test final

    Fonction pure de (config, seed, mode).
    """
    started = time.perf_counter()
    mode = AugmentationMode(mode)
    data_spec = config.data.model_copy(update={"seed": config.data.seed + seed})
    train, val, test = generate_dataset(data_spec)
    class_bins = train.class_bins()

    clf = SoftmaxClassifier(
        data_spec.num_classes,
        data_spec.dim,
        learning_rate=config.training.learning_rate,
        weight_decay=config.training.weight_decay,
    )
    result = RunResult(mode=mode, seed=seed, class_bins=class_bins)

    bank = controller = smote = aug_config = None
    if mode is not AugmentationMode.NONE:
        bank = StatisticsBank(data_spec.num_classes, data_spec.dim, config.controller.momentum)
        controller = build_controller(config, train)
        aug_config = AugmentationConfig(
            virt_per_success=config.augmentation.virt_per_success,
            max_virtual_per_iter=config.max_virtual_per_iter(),
            rng_seed=seed,
        )
        if mode is AugmentationMode.SMOTE:
            smote = SmoteSampler(config.augmentation.smote_k).fit(train.features, train.labels, data_spec.num_classes)

    streams = TrainingStreams.from_seed(seed, aug_config)

    rfs = None
    if config.controller.validation_resampling is ValidationResampling.RFS:
        rfs = RepeatFactorConfig(threshold=config.controller.rfs_threshold)

    logger.info("Exécution %s : %d exemples d'entraînement", result.run_id, len(train))
    for epoch in range(config.training.epochs):
        sampling = controller.epoch_view() if controller is not None else None
        log = train_epoch(
            clf, train, bank, sampling, aug_config, streams,
            batch_size=config.training.batch_size,
            learning_rate=config.training.learning_rate_at(epoch),
            smote=smote,
        )
        evaluation = evaluate(clf, val, class_bins, rfs, streams.validation, epoch=epoch + 1)
        result.epochs.append(evaluation.metrics)

        groups = data_spec.num_classes
        if controller is not None:
            record = controller.update(epoch + 1, evaluation.signal(config.controller.signal), bank)
            result.trajectory.append(record)
            result.bin_trajectory.append((epoch + 1, bin_mean_probabilities(record.probs, class_bins, BIN_NAMES)))
            groups = len(record.grouping.groups)

        logger.info(
            "%s époque %d : perte %.4f, précision %.4f (tail %s), perte val %s, %d virtuelles, %d groupes",
            result.run_id, epoch + 1, log.mean_loss, evaluation.metrics.overall_acc,
            evaluation.metrics.bin_acc["tail"], evaluation.metrics.mean_val_loss,
            int(log.virtual_counts.sum()), groups,
        )

    result.test = evaluate(clf, test, class_bins, epoch=config.training.epochs).metrics
    result.wall_clock = time.perf_counter() - started
    logger.info(
        "Exécution %s terminée en %.2fs : précision test %.4f",
        result.run_id, result.wall_clock, result.test.overall_acc,
    )
    return result
