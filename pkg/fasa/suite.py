"""Campagnes d'expériences (graines × modes), résumé et comparaison de rapports."""
import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from .dataset import BIN_NAMES
from .exceptions import BinMismatchError, ComparisonError, ReportNotFoundError, RunFailureError
from .formatter import SCHEMA_VERSION, SUMMARY_METRICS, ReportFormatter
from .harness import RunResult, run_training
from .models import AugmentationMode, ExperimentConfig, parse_config, serialize_config

logger = logging.getLogger(__name__)

COMPARED_BINS = ("overall", *BIN_NAMES)


def run_directory(output_dir: Path, mode: AugmentationMode, seed: int) -> Path:
    return Path(output_dir) / f"{AugmentationMode(mode).value}_seed{seed}"


@dataclass
class RunOutcome:
    mode: AugmentationMode
    seed: int
    files: List[str] = field(default_factory=list)
    error: Optional[str] = None
    result: Optional[RunResult] = None

    @property
    def run_id(self) -> str:
        return f"{self.mode.value}_seed{self.seed}"

    def manifest_entry(self) -> Dict:
        entry = {"run_id": self.run_id, "mode": self.mode.value, "seed": self.seed,
                 "status": "failed" if self.error else "ok", "files": self.files}
        if self.error:
            entry["error"] = self.error
        return entry


@dataclass
class ExperimentReport:
    """Rapport d'une campagne : exécutions, résumé et durée de chaque exécution"""
    config: ExperimentConfig
    output_dir: Path
    runs: List[RunResult]
    summary: List[List]
    wall_clock: Dict[str, float]


def _execute_run(config: ExperimentConfig, seed: int, mode: AugmentationMode, output_dir: Path) -> RunOutcome:
    outcome = RunOutcome(mode=AugmentationMode(mode), seed=seed)
    try:
        result = run_training(config, seed, mode)
        outcome.files = ReportFormatter().write_run(result, run_directory(output_dir, mode, seed))
        outcome.result = result
    except Exception as e:
        outcome.error = f"{type(e).__name__}: {e}"
    return outcome


def summarize(results: List[RunResult], modes: List[AugmentationMode]) -> List[List]:
    """Médiane, quartiles et moyenne par mode et par métrique sur les graines"""
    rows = []
    for mode in modes:
        runs = [r for r in results if r.mode is mode]
        for metric in SUMMARY_METRICS:
            values = np.array([v for v in (_final_metric(r, metric) for r in runs) if v is not None])
            if values.size == 0:
                rows.append([mode, metric, None, None, None, None, None, 0])
                continue
            q25, median, q75 = np.percentile(values, [25, 50, 75])
            rows.append([mode, metric, median, q25, q75, q75 - q25, values.mean(), int(values.size)])
    return rows


def _final_metric(result: RunResult, metric: str) -> Optional[float]:
    if metric == "overall_acc":
        return result.test.overall_acc
    if metric == "weight_norm_ratio":
        return result.weight_norm_ratio
    return result.test.bin_acc[metric[: -len("_acc")]]


def _write_manifest(output_dir: Path, status: str, outcomes: List[RunOutcome],
                    failure: Optional[RunOutcome] = None) -> Path:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "status": status,
        "runs": [outcome.manifest_entry() for outcome in outcomes],
    }
    if failure is not None:
        manifest["failure"] = {"run_id": failure.run_id, "error": failure.error}
    path = output_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def run_suite(config: ExperimentConfig, output_dir: Optional[Union[str, Path]] = None, jobs: int = 1) -> ExperimentReport:
    """
    Exécute chaque combinaison graine × mode et écrit les CSV de chaque exécution et le résumé

    Raises:
        RunFailureError: Si une exécution échoue ; le manifeste liste alors les résultats partiels
    """
    output_dir = Path(output_dir or config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    # l'écho de configuration reflète le répertoire réellement utilisé
    config = config.model_copy(update={"output_dir": str(output_dir)})
    (output_dir / "config.json").write_text(serialize_config(config), encoding="utf-8")

    tasks = [(mode, seed) for mode in config.modes for seed in config.seeds]
    logger.info("Campagne : %d exécutions (%d graines × %d modes) dans %s",
                len(tasks), len(config.seeds), len(config.modes), output_dir)
    started = time.perf_counter()

    outcomes: List[RunOutcome] = []
    parallel = Parallel(n_jobs=jobs, return_as="generator")
    for outcome in parallel(delayed(_execute_run)(config, seed, mode, output_dir) for mode, seed in tasks):
        outcomes.append(outcome)
        if outcome.error:
            logger.warning("Exécution %s en échec : %s", outcome.run_id, outcome.error)
            manifest = _write_manifest(output_dir, "partial", outcomes, failure=outcome)
            raise RunFailureError(outcome.run_id, outcome.error, str(manifest))

    results = [outcome.result for outcome in outcomes]
    summary = summarize(results, config.modes)
    ReportFormatter().write_csv(output_dir, "summary.csv", summary)
    _write_manifest(output_dir, "complete", outcomes)

    logger.info("Campagne terminée en %.2fs", time.perf_counter() - started)
    return ExperimentReport(
        config=config,
        output_dir=output_dir,
        runs=results,
        summary=summary,
        wall_clock={r.run_id: r.wall_clock for r in results},
    )


@dataclass
class LoadedReport:
    path: Path
    config: ExperimentConfig
    # mode -> graine -> groupe -> précision
    finals: Dict[str, Dict[int, Dict[str, Optional[float]]]]


def _parse_cell(value: str) -> Optional[float]:
    return None if value == "" else float(value)


def load_report(path: Union[str, Path]) -> LoadedReport:
    """Relit une campagne écrite par run_suite"""
    path = Path(path)
    for required in ("config.json", "manifest.json"):
        if not (path / required).is_file():
            raise ReportNotFoundError(str(path), required)
    config = parse_config(path / "config.json")
    manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))

    finals: Dict[str, Dict[int, Dict[str, Optional[float]]]] = {}
    for entry in manifest["runs"]:
        if entry["status"] != "ok":
            continue
        test_file = path / entry["run_id"] / "test.csv"
        if not test_file.is_file():
            raise ReportNotFoundError(str(path), f"{entry['run_id']}/test.csv")
        with test_file.open(encoding="utf-8", newline="") as handle:
            for row in csv.DictReader(handle):
                finals.setdefault(row["mode"], {})[int(row["seed"])] = {
                    "overall": _parse_cell(row["overall_acc"]),
                    **{name: _parse_cell(row[f"{name}_acc"]) for name in BIN_NAMES},
                }
    return LoadedReport(path=path, config=config, finals=finals)


@dataclass
class BinDelta:
    bin: str
    mean_a: Optional[float]
    mean_b: Optional[float]
    delta: Optional[float]
    median_delta: Optional[float]
    wins: int
    losses: int
    ties: int


@dataclass
class Comparison:
    dir_a: Path
    dir_b: Path
    mode_a: str
    mode_b: str
    seeds: List[int]
    deltas: List[BinDelta]


def _pick_mode(report: LoadedReport, mode: Optional[str], flag: str) -> str:
    if mode is not None:
        mode = AugmentationMode(mode).value
        if mode not in report.finals:
            raise ComparisonError(f"Le mode '{mode}' est absent de {report.path}",
                                  {"available": sorted(report.finals)})
        return mode
    if len(report.finals) != 1:
        raise ComparisonError(
            f"{report.path} contient plusieurs modes, précisez {flag}",
            {"available": sorted(report.finals)},
        )
    return next(iter(report.finals))


def _bin_definition(report: LoadedReport) -> Tuple:
    return (*COMPARED_BINS, *report.config.data.group_thresholds)


def compare(dir_a: Union[str, Path], dir_b: Union[str, Path],
            mode_a: Optional[str] = None, mode_b: Optional[str] = None) -> Comparison:
    """
    Écarts de précision par groupe (B − A) sur les graines communes, avec le décompte des signes

    Raises:
        BinMismatchError: Si les deux rapports ne définissent pas les mêmes groupes
        ComparisonError: Si le mode à comparer est ambigu ou s'il n'y a aucune graine commune
    """
    report_a, report_b = load_report(dir_a), load_report(dir_b)
    if _bin_definition(report_a) != _bin_definition(report_b):
        raise BinMismatchError(_bin_definition(report_a), _bin_definition(report_b))

    mode_a = _pick_mode(report_a, mode_a, "--mode-a")
    mode_b = _pick_mode(report_b, mode_b, "--mode-b")
    finals_a, finals_b = report_a.finals[mode_a], report_b.finals[mode_b]
    seeds = sorted(set(finals_a) & set(finals_b))
    if not seeds:
        raise ComparisonError("Aucune graine commune entre les deux rapports")

    deltas = []
    for name in COMPARED_BINS:
        pairs = [(finals_a[s][name], finals_b[s][name]) for s in seeds
                 if finals_a[s][name] is not None and finals_b[s][name] is not None]
        if not pairs:
            deltas.append(BinDelta(name, None, None, None, None, 0, 0, 0))
            continue
        a = np.array([p[0] for p in pairs])
        b = np.array([p[1] for p in pairs])
        diff = b - a
        deltas.append(BinDelta(
            bin=name,
            mean_a=float(a.mean()),
            mean_b=float(b.mean()),
            delta=float(b.mean() - a.mean()),
            median_delta=float(np.median(diff)),
            wins=int((diff > 0).sum()),
            losses=int((diff < 0).sum()),
            ties=int((diff == 0).sum()),
        ))
    return Comparison(Path(dir_a), Path(dir_b), mode_a, mode_b, seeds, deltas)
