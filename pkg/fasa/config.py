import logging
import sys
from typing import List, Optional

from pydantic_settings import BaseSettings, SettingsConfigDict

LOGGER = logging.getLogger("fasa")


class Settings(BaseSettings):
    # Configuration de base
    APP_NAME: str = "FASA"
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = None

    # Valeurs par défaut des campagnes (surchargées par le fichier d'expérience ou la CLI)
    OUTPUT_DIR: str = "runs"
    JOBS: int = 1

    # Format des flottants dans les CSV ; fixe pour des sorties identiques octet par octet
    FLOAT_FORMAT: str = ".10g"

    model_config = SettingsConfigDict(env_prefix="FASA_", env_file=".env", extra="ignore")


settings = Settings()


def setup_logging(level: Optional[str] = None, logfile: Optional[str] = None) -> None:
    """Installe les handlers du logger `fasa` en remplaçant les précédents"""
    level_name = (level or settings.LOG_LEVEL).upper()
    LOGGER.setLevel(getattr(logging, level_name, logging.INFO))
    formatter = logging.Formatter("%(asctime)s  %(levelname)s  %(name)s  %(message)s")

    if LOGGER.handlers:
        for handler in list(LOGGER.handlers):
            LOGGER.removeHandler(handler)
            handler.close()

    handlers: List[logging.Handler] = []

    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(formatter)
    handlers.append(console)

    logfile = logfile or settings.LOG_FILE
    if logfile:
        file_handler = logging.FileHandler(logfile, mode="a", encoding="utf-8")
        file_handler.setFormatter(formatter)
        file_handler.setLevel(logging.DEBUG)
        handlers.append(file_handler)

    for handler in handlers:
        LOGGER.addHandler(handler)
