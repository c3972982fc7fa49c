import functools
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, List, Optional

import click

from .config import settings, setup_logging
from .exceptions import ConfigError, FasaError
from .formatter import FormatType, ReportFormatter
from .models import AugmentationMode, parse_config
from .suite import compare as compare_reports
from .suite import run_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_RUN_FAILURE = 2


def _emit_error(payload: dict) -> None:
    click.echo(json.dumps(payload, ensure_ascii=False, indent=2), err=True)


def handle_errors(command: Callable) -> Callable:
    """Traduit les exceptions en message structuré et en code de sortie"""
    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return command(*args, **kwargs)
        except FasaError as exc:
            _emit_error(exc.to_payload())
            sys.exit(exc.exit_code)
        except Exception as exc:
            logger.exception("Erreur inattendue")
            _emit_error({"error": "UNEXPECTED_ERROR", "message": str(exc), "details": {}})
            sys.exit(EXIT_RUN_FAILURE)
    return wrapper


def _parse_seeds(value: Optional[str]) -> Optional[List[int]]:
    if value is None:
        return None
    try:
        return [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise ConfigError("--seeds attend une liste d'entiers séparés par des virgules",
                          [{"loc": "seeds", "msg": value}])


@click.group()
@click.option("--log-level", default=None, help="Niveau de log (DEBUG, INFO, WARNING...)")
@click.version_option("1.0.0", prog_name=settings.APP_NAME)
def cli(log_level: Optional[str]) -> None:
    """Expériences FASA sur données synthétiques à longue traîne"""
    setup_logging(log_level)


@cli.command()
@click.argument("config_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--seeds", default=None, help="Graines séparées par des virgules (ex : 0,1,2)")
@click.option("--mode", "modes", multiple=True,
              type=click.Choice([m.value for m in AugmentationMode]), help="Mode(s) à exécuter")
@click.option("--out", "output_dir", default=None, type=click.Path(file_okay=False, path_type=Path),
              help="Répertoire de sortie")
@click.option("--jobs", default=None, type=click.IntRange(min=1), help="Exécutions en parallèle")
@handle_errors
def run(config_path: Path, seeds: Optional[str], modes: tuple, output_dir: Optional[Path], jobs: Optional[int]) -> None:
    """Exécute une campagne à partir d'un fichier de configuration"""
    config = parse_config(config_path)
    overrides = {}
    parsed_seeds = _parse_seeds(seeds)
    if parsed_seeds is not None:
        overrides["seeds"] = parsed_seeds
    if modes:
        overrides["modes"] = list(modes)
    if output_dir is not None:
        overrides["output_dir"] = str(output_dir)
    if overrides:
        payload = config.model_dump(mode="json")
        payload.update(overrides)
        config = parse_config(json.dumps(payload))

    report = run_suite(config, jobs=jobs or settings.JOBS)
    click.echo(f"{len(report.runs)} exécution(s) écrite(s) dans {report.output_dir}")
    sys.exit(EXIT_OK)


@cli.command()
@click.argument("dir_a", type=click.Path(file_okay=False, path_type=Path))
@click.argument("dir_b", type=click.Path(file_okay=False, path_type=Path))
@click.option("--mode-a", default=None, type=click.Choice([m.value for m in AugmentationMode]))
@click.option("--mode-b", default=None, type=click.Choice([m.value for m in AugmentationMode]))
@click.option("--format", "format_type", default=FormatType.TEXT.value,
              type=click.Choice([f.value for f in FormatType]))
@handle_errors
def compare(dir_a: Path, dir_b: Path, mode_a: Optional[str], mode_b: Optional[str], format_type: str) -> None:
    """Compare les précisions finales de deux campagnes (B − A)"""
    comparison = compare_reports(dir_a, dir_b, mode_a, mode_b)
    rendered = ReportFormatter().format_comparison(comparison, FormatType(format_type))
    if isinstance(rendered, dict):
        rendered = json.dumps(rendered, indent=2)
    click.echo(rendered)
    sys.exit(EXIT_OK)


@cli.command()
@click.argument("config_path", type=click.Path(dir_okay=False, path_type=Path))
@handle_errors
def validate(config_path: Path) -> None:
    """Valide un fichier de configuration sans rien exécuter"""
    config = parse_config(config_path)
    click.echo(
        f"Configuration valide : {len(config.seeds)} graine(s), modes {', '.join(m.value for m in config.modes)}"
    )
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    cli()
