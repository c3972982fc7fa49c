import csv
import io
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Iterable, List, Optional, Sequence

from .config import settings
from .dataset import BIN_NAMES

if TYPE_CHECKING:
    from .harness import RunResult
    from .suite import Comparison

SCHEMA_VERSION = 1

CSV_SCHEMAS: Dict[str, Sequence[str]] = {
    "metrics.csv": ("epoch", "overall_acc", "tail_acc", "mid_acc", "head_acc", "mean_val_loss"),
    "trajectory.csv": ("epoch", "class_id", "group_id", "p_c", "group_signal"),
    "group_trajectory.csv": ("epoch", "bin", "mean_p"),
    "weight_norms.csv": ("epoch", "class_id", "norm"),
    "test.csv": ("seed", "mode", "overall_acc", "tail_acc", "mid_acc", "head_acc", "weight_norm_ratio"),
    "summary.csv": ("mode", "metric", "median", "q25", "q75", "iqr", "mean", "n_seeds"),
}

SUMMARY_METRICS = ("overall_acc", "tail_acc", "mid_acc", "head_acc", "weight_norm_ratio")


class FormatType(str, Enum):
    TEXT = "text"
    JSON = "json"


class ReportFormatter:
    """Classe pour écrire les rapports CSV et formater les comparaisons"""

    def __init__(self, float_format: Optional[str] = None):
        self.float_format = float_format or settings.FLOAT_FORMAT

    def format_value(self, value: Any) -> str:
        """Formate une cellule ; une valeur absente devient une cellule vide"""
        if value is None:
            return ""
        if isinstance(value, Enum):
            return str(value.value)
        if isinstance(value, (bool, str)):
            return str(value)
        if isinstance(value, int) or (hasattr(value, "dtype") and value.dtype.kind in "iu"):
            return str(int(value))
        return format(float(value), self.float_format)

    @staticmethod
    def format_percentage(value: Optional[float]) -> str:
        """Formate une précision en pourcentage"""
        return "-" if value is None else f"{100 * value:.1f}%"

    @staticmethod
    def format_delta(value: Optional[float]) -> str:
        return "-" if value is None else f"{100 * value:+.1f}"

    def render_csv(self, name: str, rows: Iterable[Sequence[Any]]) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_SCHEMAS[name])
        for row in rows:
            writer.writerow([self.format_value(cell) for cell in row])
        return buffer.getvalue()

    def write_csv(self, directory: Path, name: str, rows: Iterable[Sequence[Any]]) -> Path:
        path = Path(directory) / name
        path.write_text(self.render_csv(name, rows), encoding="utf-8")
        return path

    def metrics_rows(self, result: "RunResult") -> List[List[Any]]:
        return [
            [m.epoch, m.overall_acc, *(m.bin_acc[name] for name in BIN_NAMES), m.mean_val_loss]
            for m in result.epochs
        ]

    def weight_norm_rows(self, result: "RunResult") -> List[List[Any]]:
        return [
            [m.epoch, class_id, norm]
            for m in result.epochs
            for class_id, norm in enumerate(m.weight_norms)
        ]

    def trajectory_rows(self, result: "RunResult") -> List[List[Any]]:
        rows = []
        for record in result.trajectory:
            group_of = record.grouping.group_of()
            for class_id, p in enumerate(record.probs):
                group_id = group_of[class_id]
                rows.append([record.epoch, class_id, group_id, p, record.group_signal.get(group_id)])
        return rows

    def group_trajectory_rows(self, result: "RunResult") -> List[List[Any]]:
        return [
            [epoch, name, means[name]]
            for epoch, means in result.bin_trajectory
            for name in BIN_NAMES
        ]

    def test_rows(self, result: "RunResult") -> List[List[Any]]:
        test = result.test
        return [[
            result.seed, result.mode, test.overall_acc,
            *(test.bin_acc[name] for name in BIN_NAMES), result.weight_norm_ratio,
        ]]

    def write_run(self, result: "RunResult", directory: Path) -> List[str]:
        """Écrit les fichiers d'une exécution et retourne leurs noms"""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = [
            self.write_csv(directory, "metrics.csv", self.metrics_rows(result)),
            self.write_csv(directory, "weight_norms.csv", self.weight_norm_rows(result)),
            self.write_csv(directory, "test.csv", self.test_rows(result)),
        ]
        if result.has_sampling:
            written.append(self.write_csv(directory, "trajectory.csv", self.trajectory_rows(result)))
            written.append(self.write_csv(directory, "group_trajectory.csv", self.group_trajectory_rows(result)))
        return [path.name for path in written]

    def format_text(self, comparison: "Comparison") -> str:
        """Formate une comparaison en tableau texte"""
        lines = [
            f"A : {comparison.dir_a} [{comparison.mode_a}]",
            f"B : {comparison.dir_b} [{comparison.mode_b}]",
            f"Graines communes : {', '.join(str(s) for s in comparison.seeds)}",
            "┌──────────┬──────────┬──────────┬──────────┬──────────────┐",
            "│ Groupe   │ A        │ B        │ Δ (B−A)  │ + / − / =    │",
            "├──────────┼──────────┼──────────┼──────────┼──────────────┤",
        ]
        for delta in comparison.deltas:
            signs = f"{delta.wins} / {delta.losses} / {delta.ties}"
            lines.append(
                f"│ {delta.bin:<8} │ {self.format_percentage(delta.mean_a):<8} │ "
                f"{self.format_percentage(delta.mean_b):<8} │ {self.format_delta(delta.delta):<8} │ {signs:<12} │"
            )
        lines.append("└──────────┴──────────┴──────────┴──────────┴──────────────┘")
        return "\n".join(lines)

    def format_json(self, comparison: "Comparison") -> Dict[str, Any]:
        """Formate une comparaison en JSON"""
        return {
            "a": {"path": str(comparison.dir_a), "mode": comparison.mode_a},
            "b": {"path": str(comparison.dir_b), "mode": comparison.mode_b},
            "seeds": list(comparison.seeds),
            "bins": [
                {
                    "bin": delta.bin,
                    "mean_a": delta.mean_a,
                    "mean_b": delta.mean_b,
                    "delta": delta.delta,
                    "median_delta": delta.median_delta,
                    "wins": delta.wins,
                    "losses": delta.losses,
                    "ties": delta.ties,
                }
                for delta in comparison.deltas
            ],
        }

    def format_comparison(self, comparison: "Comparison", format_type: FormatType = FormatType.TEXT) -> Any:
        """
        Formate une comparaison selon le format spécifié

        Args:
            comparison: La comparaison à formater
            format_type: Le type de format souhaité (text, json)

        Returns:
            La comparaison formatée dans le format demandé
        """
        format_methods = {
            FormatType.TEXT: self.format_text,
            FormatType.JSON: self.format_json,
        }

        formatter = format_methods.get(FormatType(format_type))
        if not formatter:
            raise ValueError(f"Format non supporté : {format_type}")

        return formatter(comparison)
