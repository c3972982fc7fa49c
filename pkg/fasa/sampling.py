"""Probabilités d'échantillonnage des features virtuelles par classe.

Initialisation par fréquence inverse (ou uniforme), puis ajustement multiplicatif une fois
par époque : p_c <- min(1, p_c * alpha) si le signal de validation du groupe s'améliore,
p_c <- max(0, p_c * beta) sinon.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .clustering import ClassGrouping, cluster_classes, singleton_grouping
from .exceptions import InvalidClassCountError
from .statistics import StatisticsBank

logger = logging.getLogger(__name__)

# Un facteur de répétition à moins de cette tolérance d'un entier est ramené à l'entier
_INTEGER_SNAP = 1e-9


class InitMode(str, Enum):
    INVERSE_FREQUENCY = "inverse_frequency"
    UNIFORM = "uniform"


class AdaptationMode(str, Enum):
    GROUP_WISE = "group_wise"
    CLASS_WISE = "class_wise"


class SignalMode(str, Enum):
    VALIDATION_LOSS = "validation_loss"
    VALIDATION_ACCURACY = "validation_accuracy"

    def improved(self, previous: float, current: float) -> bool:
        """Une égalité compte comme une absence d'amélioration"""
        if self is SignalMode.VALIDATION_LOSS:
            return current < previous
        return current > previous


@dataclass
class SamplingState:
    """État du contrôleur : p_c par classe et dernier signal observé par classe"""
    probs: np.ndarray
    init_scale: float = 1.0
    alpha: float = 1.1
    beta: float = 0.9
    adaptation_mode: AdaptationMode = AdaptationMode.GROUP_WISE
    signal: SignalMode = SignalMode.VALIDATION_LOSS
    prev_signal: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.alpha <= 1:
            raise ValueError("alpha doit être strictement supérieur à 1")
        if not 0 < self.beta < 1:
            raise ValueError("beta doit appartenir à l'intervalle (0, 1)")
        if self.init_scale <= 0:
            raise ValueError("Le facteur d'échelle initial doit être positif")
        if ((self.probs < 0) | (self.probs > 1)).any():
            raise ValueError("Toutes les probabilités doivent appartenir à [0, 1]")

    @property
    def num_classes(self) -> int:
        return int(self.probs.shape[0])

    def frozen(self) -> "SamplingState":
        """Copie figée utilisée pendant une époque"""
        return replace(self, probs=self.probs.copy(), prev_signal=dict(self.prev_signal))


class RepeatFactorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    threshold: float = Field(1e-3, gt=0, lt=1, description="Seuil t du facteur de répétition")


def init_probabilities(
    class_counts: Union[Mapping[int, int], Sequence[int]],
    init_scale: float = 1.0,
    mode: InitMode = InitMode.INVERSE_FREQUENCY,
    **state_options,
) -> SamplingState:
    """
    Initialise p_c par fréquence inverse ou uniformément, puis borne dans [0, 1]

    Raises:
        InvalidClassCountError: Si une classe n'a aucun échantillon d'entraînement
    """
    if isinstance(class_counts, Mapping):
        counts = np.array([class_counts[c] for c in sorted(class_counts)], dtype=float)
    else:
        counts = np.asarray(class_counts, dtype=float)
    for class_id, count in enumerate(counts):
        if count < 1:
            raise InvalidClassCountError(class_id, int(count))

    if InitMode(mode) is InitMode.UNIFORM:
        raw = np.full(counts.shape[0], init_scale / counts.shape[0])
    else:
        inverse = 1.0 / counts
        raw = init_scale * inverse / inverse.sum()
    return SamplingState(probs=np.clip(raw, 0.0, 1.0), init_scale=init_scale, **state_options)


def repeat_factors(labels: Sequence[int], config: RepeatFactorConfig) -> Dict[int, float]:
    """Facteur r_c = max(1, sqrt(t / f_c)) pour chaque classe présente"""
    labels = np.asarray(labels, dtype=np.int64)
    classes, counts = np.unique(labels, return_counts=True)
    frequencies = counts / labels.size
    factors = {}
    for class_id, frequency in zip(classes, frequencies):
        factor = max(1.0, math.sqrt(config.threshold / frequency))
        nearest = round(factor)
        if abs(factor - nearest) < _INTEGER_SNAP:
            factor = float(nearest)
        factors[int(class_id)] = factor
    return factors


def repeat_factor_resample(
    labels: Sequence[int],
    config: RepeatFactorConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Rééchantillonne un ensemble par facteur de répétition

    Chaque échantillon de la classe c apparaît floor(r_c) fois, plus une fois avec la
    probabilité frac(r_c). L'ordre des indices d'entrée est conservé.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("L'ensemble à rééchantillonner ne peut pas être vide")
    factors = repeat_factors(labels, config)
    per_sample = np.array([factors[int(label)] for label in labels])
    whole = np.floor(per_sample)
    extra = rng.random(labels.size) < (per_sample - whole)
    repeats = whole.astype(np.int64) + extra
    return np.repeat(np.arange(labels.size), repeats)


def group_signal(
    per_class_signal: Mapping[int, Optional[float]],
    grouping: ClassGrouping,
) -> Dict[int, Optional[float]]:
    """Moyenne du signal sur les classes de chaque groupe qui en possèdent un"""
    result: Dict[int, Optional[float]] = {}
    for group_id, members in enumerate(grouping.groups):
        values = [per_class_signal[c] for c in members if per_class_signal.get(c) is not None]
        result[group_id] = float(np.mean(values)) if values else None
    return result


def adjust_probabilities(
    state: SamplingState,
    grouping: ClassGrouping,
    current: Mapping[int, Optional[float]],
) -> SamplingState:
    """
    Ajuste p_c par groupe à partir des signaux de validation par classe

    Le signal courant et le signal précédent sont agrégés sur le même regroupement ; un groupe
    n'est ajusté que si les deux agrégats existent. L'agrégat courant d'un groupe devient ensuite
    le signal précédent de tous ses membres. En mode class_wise chaque classe forme son propre
    groupe.
    """
    if AdaptationMode(state.adaptation_mode) is AdaptationMode.CLASS_WISE:
        grouping = singleton_grouping(state.num_classes)

    current_by_group = group_signal(current, grouping)
    previous_by_group = group_signal(state.prev_signal, grouping)

    probs = state.probs.copy()
    for group_id, members in enumerate(grouping.groups):
        now, before = current_by_group[group_id], previous_by_group[group_id]
        if now is None or before is None:
            continue
        members = list(members)
        if SignalMode(state.signal).improved(before, now):
            probs[members] = np.minimum(1.0, probs[members] * state.alpha)
            decision = "hausse"
        else:
            probs[members] = np.maximum(0.0, probs[members] * state.beta)
            decision = "baisse"
        logger.debug("Groupe %d %s : %s -> %.6g (%.6g)", group_id, members, decision, now, before)

    # chaque membre d'un groupe mesuré reçoit l'agrégat du groupe, y compris une classe sans signal
    prev_signal = dict(state.prev_signal)
    for group_id, members in enumerate(grouping.groups):
        if current_by_group[group_id] is not None:
            prev_signal.update({c: current_by_group[group_id] for c in members})
    return replace(state, probs=probs, prev_signal=prev_signal)


@dataclass
class AdjustmentRecord:
    """Ligne de trajectoire d'une époque : groupes, p_c et signal de groupe"""
    epoch: int
    grouping: ClassGrouping
    probs: np.ndarray
    group_signal: Dict[int, Optional[float]]


class FeatureSamplingController:
    """Possède l'état d'échantillonnage et le regroupement des classes au fil des époques"""

    def __init__(
        self,
        state: SamplingState,
        adaptive: bool = True,
        recluster_every: int = 1,
        cluster_epsilon: Optional[float] = None,
        cluster_min_pts: int = 2,
        fisher_eps: float = 1e-8,
    ):
        if recluster_every < 1:
            raise ValueError("La cadence de regroupement doit être au moins 1")
        self.state = state
        self.adaptive = adaptive
        self.recluster_every = recluster_every
        self.cluster_epsilon = cluster_epsilon
        self.cluster_min_pts = cluster_min_pts
        self.fisher_eps = fisher_eps
        self.grouping = singleton_grouping(state.num_classes)
        self._steps = 0

    def _uses_groups(self) -> bool:
        return self.adaptive and AdaptationMode(self.state.adaptation_mode) is AdaptationMode.GROUP_WISE

    def epoch_view(self) -> SamplingState:
        return self.state.frozen()

    def update(
        self,
        epoch: int,
        per_class_signal: Mapping[int, Optional[float]],
        bank: StatisticsBank,
    ) -> AdjustmentRecord:
        """Regroupe si nécessaire puis ajuste les probabilités (fin d'époque)"""
        if self._uses_groups() and self._steps % self.recluster_every == 0:
            self.grouping = cluster_classes(
                bank.all_statistics(),
                epsilon=self.cluster_epsilon,
                min_pts=self.cluster_min_pts,
                fisher_eps=self.fisher_eps,
            )
            logger.debug(
                "Époque %d : %d groupes (epsilon=%.6g)",
                epoch, len(self.grouping.groups), self.grouping.epsilon,
            )
        if self.adaptive:
            self.state = adjust_probabilities(self.state, self.grouping, per_class_signal)
        self._steps += 1
        return AdjustmentRecord(
            epoch=epoch,
            grouping=self.grouping,
            probs=self.state.probs.copy(),
            group_signal=group_signal(per_class_signal, self.grouping),
        )


def bin_mean_probabilities(probs: np.ndarray, bins: Sequence[str], bin_names: List[str]) -> Dict[str, Optional[float]]:
    """p_c moyen par groupe d'effectifs (tail/mid/head)"""
    bins = np.asarray(bins)
    return {
        name: (float(probs[bins == name].mean()) if (bins == name).any() else None)
        for name in bin_names
    }
