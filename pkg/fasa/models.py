import json
from enum import Enum
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .config import settings
from .dataset import SyntheticDataSpec
from .exceptions import ConfigError
from .sampling import AdaptationMode, InitMode, SignalMode

CONFIG_VERSION = 1


class AugmentationMode(str, Enum):
    NONE = "none"
    FASA = "fasa"
    SMOTE = "smote"


class ValidationResampling(str, Enum):
    NONE = "none"
    RFS = "rfs"


class TrainingSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(40, ge=1, description="Nombre d'époques")
    batch_size: int = Field(64, ge=1, description="Taille des mini-batchs réels")
    learning_rate: float = Field(0.1, gt=0, description="Taux d'apprentissage SGD")
    weight_decay: float = Field(5e-4, ge=0, description="Pénalité L2 sur les poids")
    lr_decay_at: float = Field(0.8, gt=0, le=1, description="Fraction des époques avant la décroissance")
    lr_decay_factor: float = Field(0.1, gt=0, le=1, description="Facteur appliqué au taux après la décroissance")

    def learning_rate_at(self, epoch: int) -> float:
        """Taux d'apprentissage de l'époque (indice à partir de 0)"""
        if epoch >= int(self.lr_decay_at * self.epochs):
            return self.learning_rate * self.lr_decay_factor
        return self.learning_rate


class AugmentationSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    virt_per_success: int = Field(1, ge=1)
    max_virtual_per_iter: Optional[int] = Field(None, ge=1, description="Plafond par itération (défaut 4·C)")
    smote_k: int = Field(5, ge=1, description="Nombre de voisins cosinus pour SMOTE")

    @model_validator(mode='after')
    def validate_budget(self):
        if self.max_virtual_per_iter is not None and self.max_virtual_per_iter < self.virt_per_success:
            raise ValueError("max_virtual_per_iter doit être au moins égal à virt_per_success")
        return self


class ControllerSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    adaptive_sampling: bool = Field(True, description="Active l'ajustement des p_c (FS)")
    adaptation_mode: AdaptationMode = AdaptationMode.GROUP_WISE
    init_mode: InitMode = InitMode.INVERSE_FREQUENCY
    signal: SignalMode = SignalMode.VALIDATION_LOSS
    init_scale: float = Field(1.0, gt=0)
    static_scale: Optional[float] = Field(None, gt=0, description="s fixe : p_c jamais ajustés")
    alpha: float = Field(1.1, gt=1)
    beta: float = Field(0.9, gt=0, lt=1)
    momentum: float = Field(0.1, gt=0, le=1)
    recluster_every: int = Field(1, ge=1)
    cluster_epsilon: Optional[float] = Field(None, gt=0)
    cluster_min_pts: int = Field(2, ge=1)
    fisher_eps: float = Field(1e-8, gt=0)
    validation_resampling: ValidationResampling = ValidationResampling.RFS
    rfs_threshold: float = Field(1e-3, gt=0, lt=1)

    @property
    def adapts(self) -> bool:
        return self.adaptive_sampling and self.static_scale is None

    @property
    def effective_scale(self) -> float:
        return self.static_scale if self.static_scale is not None else self.init_scale


class ExperimentConfig(BaseModel):
    """Configuration complète d'une campagne d'expériences"""
    model_config = ConfigDict(extra="forbid")

    version: Literal[1]
    data: SyntheticDataSpec = Field(default_factory=SyntheticDataSpec)
    training: TrainingSettings = Field(default_factory=TrainingSettings)
    augmentation: AugmentationSettings = Field(default_factory=AugmentationSettings)
    controller: ControllerSettings = Field(default_factory=ControllerSettings)
    modes: List[AugmentationMode] = Field(
        default_factory=lambda: [AugmentationMode.NONE, AugmentationMode.FASA]
    )
    seeds: List[int] = Field(default_factory=lambda: [0])
    output_dir: str = Field(default_factory=lambda: settings.OUTPUT_DIR)

    @field_validator('seeds')
    def validate_seeds(cls, v):
        if not v:
            raise ValueError("Au moins une graine est requise")
        if len(set(v)) != len(v):
            raise ValueError("Les graines doivent être distinctes")
        return v

    @field_validator('modes')
    def validate_modes(cls, v):
        if not v:
            raise ValueError("Au moins un mode est requis")
        if len(set(v)) != len(v):
            raise ValueError("Les modes doivent être distincts")
        return v

    def max_virtual_per_iter(self) -> int:
        return self.augmentation.max_virtual_per_iter or 4 * self.data.num_classes


def _format_errors(exc: ValidationError) -> List[dict]:
    return [
        {"loc": ".".join(str(part) for part in error["loc"]) or "<racine>", "msg": error["msg"]}
        for error in exc.errors()
    ]


def parse_config(source: Union[str, Path]) -> ExperimentConfig:
    """
    Lit et valide une configuration d'expérience (chemin ou texte JSON)

    Raises:
        ConfigError: Si le texte est mal formé, si une valeur est invalide ou si une clé est inconnue
    """
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"Le fichier de configuration '{path}' n'existe pas")
        text = path.read_text(encoding="utf-8")
    else:
        text = source

    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON mal formé (ligne {e.lineno}, colonne {e.colno})")
    if not isinstance(payload, dict):
        raise ConfigError("La configuration doit être un objet JSON")
    if "version" not in payload:
        raise ConfigError("Clé 'version' manquante", [{"loc": "version", "msg": "Field required"}])

    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as e:
        raise ConfigError("Configuration invalide", _format_errors(e))


def serialize_config(config: ExperimentConfig) -> str:
    """JSON canonique ; parse_config(serialize_config(c)) == c"""
    return config.model_dump_json(indent=2) + "\n"
