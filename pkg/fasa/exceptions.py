from typing import Any, Dict, List, Optional, Sequence


class FasaError(Exception):
    """Exception de base pour la bibliothèque FASA"""

    exit_code: int = 2

    def __init__(
        self,
        detail: str,
        error_code: str,
        additional_info: Optional[Dict[str, Any]] = None
    ):
        super().__init__(detail)
        self.detail = detail
        self.error_code = error_code
        self.additional_info = additional_info or {}

    def to_payload(self) -> Dict[str, Any]:
        """Représentation structurée affichée par la CLI"""
        return {
            "error": self.error_code,
            "message": self.detail,
            "details": self.additional_info
        }


class DimensionMismatchError(FasaError, ValueError):
    """Exception levée quand une dimension ne correspond pas à celle attendue"""
    def __init__(self, what: str, expected: Any, actual: Any):
        super().__init__(
            error_code="DIMENSION_MISMATCH",
            detail=f"Dimension invalide pour {what} : attendu {expected}, obtenu {actual}",
            additional_info={"what": what, "expected": expected, "actual": actual}
        )


class LabelOutOfRangeError(FasaError, ValueError):
    """Exception levée quand une étiquette sort de l'intervalle [0, C)"""
    def __init__(self, label: int, num_classes: int):
        super().__init__(
            error_code="LABEL_OUT_OF_RANGE",
            detail=f"L'étiquette {label} est hors de l'intervalle [0, {num_classes})",
            additional_info={"label": label, "num_classes": num_classes}
        )


class ClassOutOfRangeError(FasaError, ValueError):
    """Exception levée quand un identifiant de classe n'existe pas"""
    def __init__(self, class_id: int, num_classes: int):
        super().__init__(
            error_code="CLASS_OUT_OF_RANGE",
            detail=f"La classe {class_id} n'existe pas (C = {num_classes})",
            additional_info={"class_id": class_id, "num_classes": num_classes}
        )


class UninitializedClassError(FasaError, ValueError):
    """Exception levée quand une classe n'a encore observé aucune feature réelle"""
    def __init__(self, class_id: int):
        super().__init__(
            error_code="UNINITIALIZED_CLASS",
            detail=f"Les statistiques de la classe {class_id} ne sont pas initialisées",
            additional_info={
                "class_id": class_id,
                "suggestion": "Observez au moins un batch contenant cette classe"
            }
        )


class InsufficientSamplesError(FasaError, ValueError):
    """Exception levée quand une classe n'a pas assez d'échantillons réels"""
    def __init__(self, class_id: int, available: int, required: int):
        super().__init__(
            error_code="INSUFFICIENT_SAMPLES",
            detail=(
                f"La classe {class_id} n'a que {available} échantillon(s), "
                f"au moins {required} requis"
            ),
            additional_info={"class_id": class_id, "available": available, "required": required}
        )


class InvalidClassCountError(FasaError, ValueError):
    """Exception levée quand un effectif de classe est nul"""
    def __init__(self, class_id: int, count: int):
        super().__init__(
            error_code="INVALID_CLASS_COUNT",
            detail=f"La classe {class_id} doit avoir au moins 1 échantillon (effectif : {count})",
            additional_info={"class_id": class_id, "count": count}
        )


class EmptyBatchError(FasaError, ValueError):
    """Exception levée quand un calcul exige un batch non vide"""
    def __init__(self, what: str):
        super().__init__(
            error_code="EMPTY_BATCH",
            detail=f"Le batch fourni à {what} est vide",
            additional_info={"what": what}
        )


class ConfigError(FasaError):
    """Exception levée quand un fichier d'expérience est invalide"""

    exit_code = 1

    def __init__(self, detail: str, errors: Optional[List[Dict[str, Any]]] = None):
        errors = errors or []
        paths = ", ".join(error["loc"] for error in errors)
        super().__init__(
            error_code="CONFIG_ERROR",
            detail=f"{detail} : {paths}" if paths else detail,
            additional_info={"errors": errors}
        )
        self.errors = errors


class BinMismatchError(FasaError):
    """Exception levée quand deux rapports n'utilisent pas les mêmes groupes d'effectifs"""

    exit_code = 1

    def __init__(self, bins_a: Sequence[Any], bins_b: Sequence[Any]):
        super().__init__(
            error_code="BIN_MISMATCH",
            detail=f"Les définitions de groupes diffèrent : {list(bins_a)} contre {list(bins_b)}",
            additional_info={"bins_a": list(bins_a), "bins_b": list(bins_b)}
        )


class ReportNotFoundError(FasaError):
    """Exception levée quand un répertoire ne contient pas de rapport de campagne"""

    exit_code = 1

    def __init__(self, path: str, missing: str):
        super().__init__(
            error_code="REPORT_NOT_FOUND",
            detail=f"Aucun rapport exploitable dans '{path}' ({missing} manquant)",
            additional_info={"path": path, "missing": missing}
        )


class ComparisonError(FasaError):
    """Exception levée quand une comparaison est ambiguë ou impossible"""

    exit_code = 1

    def __init__(self, detail: str, additional_info: Optional[Dict[str, Any]] = None):
        super().__init__(
            error_code="COMPARISON_ERROR",
            detail=detail,
            additional_info=additional_info
        )


class RunFailureError(FasaError):
    """Exception levée quand une exécution de la campagne échoue"""

    exit_code = 2

    def __init__(self, run_id: str, cause: str, manifest_path: Optional[str] = None):
        super().__init__(
            error_code="RUN_FAILURE",
            detail=f"L'exécution {run_id} a échoué : {cause}",
            additional_info={
                "run_id": run_id,
                "cause": cause,
                "manifest": manifest_path,
                "suggestion": "Les résultats partiels sont listés dans le manifeste"
            }
        )


class NonFiniteFeatureError(FasaError, ValueError):
    """Exception levée quand une feature contient NaN ou une valeur infinie"""
    def __init__(self, what: str, row: int):
        super().__init__(
            error_code="NON_FINITE_FEATURE",
            detail=f"{what} : la ligne {row} contient une valeur non finie",
            additional_info={"what": what, "row": row}
        )
