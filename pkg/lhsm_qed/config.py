import logging
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, validator

# --- Constantes numéricas ---
# Todas las frecuencias en unidades de ω_r, ΔX = 1, ħ = 1.

# Frecuencia a la que se fija la banda superior cerca de k = 0 (diverge)
UPPER_CUTOFF = 10.0
# Tolerancia de deriva de la norma en la evolución
NORM_TOLERANCE = 1e-6
# Guardia de estabilidad: dt * max|diag| <= STABILITY_LIMIT
STABILITY_LIMIT = 0.1
# Paso de diferencias finitas para la curvatura en los bordes de banda
CURVATURE_STEP = 1e-4
# Distancia mínima de k_r a los bordes de banda para la fórmula markoviana
MARKOV_EDGE_MARGIN = 0.1
# Fracción final de la trayectoria usada para la población estacionaria
TAIL_FRACTION = 0.2
# Variación relativa máxima al duplicar la ventana de cola
TAIL_STABILITY = 0.01
# Contraste mínimo pico-valle para medir la frecuencia de Rabi
MIN_RABI_CONTRAST = 0.5
# Rejilla por defecto de modos
DEFAULT_N_MODES = 2000
# Dígitos significativos en los CSV
CSV_DIGITS = 17

DEFAULT_OUTPUT_DIR = Path('results')
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
LOG_FILE_NAME = 'lhsm_qed.log'

logger = logging.getLogger(__name__)


class Settings(BaseModel):
    """Configuración leída del entorno (y de un archivo .env si existe)."""

    output_dir: Path = DEFAULT_OUTPUT_DIR
    log_level: str = 'INFO'
    max_modes: int = 20000
    dense_max_dim: int = 1400
    # límite de memoria del propagador denso; entre ambos valores decide el coste estimado
    dense_limit_dim: int = 4500

    class Config:
        allow_mutation = False

    @validator('log_level')
    def _known_level(cls, value: str) -> str:
        value = value.upper()
        if value not in logging._nameToLevel:
            raise ValueError(f"Nivel de log desconocido: {value}")
        return value

    @validator('max_modes', 'dense_max_dim', 'dense_limit_dim')
    def _positive(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("Debe ser un entero positivo")
        return value


def load_settings(env_file: Optional[Path] = None) -> Settings:
    """Carga variables de entorno (LHSM_QED_*) y devuelve los ajustes validados."""
    load_dotenv(dotenv_path=env_file)
    values = {}
    if os.getenv('LHSM_QED_OUT'):
        values['output_dir'] = Path(os.environ['LHSM_QED_OUT'])
    if os.getenv('LHSM_QED_LOG_LEVEL'):
        values['log_level'] = os.environ['LHSM_QED_LOG_LEVEL']
    if os.getenv('LHSM_QED_MAX_MODES'):
        values['max_modes'] = os.environ['LHSM_QED_MAX_MODES']
    if os.getenv('LHSM_QED_DENSE_MAX_DIM'):
        values['dense_max_dim'] = os.environ['LHSM_QED_DENSE_MAX_DIM']
    if os.getenv('LHSM_QED_DENSE_LIMIT_DIM'):
        values['dense_limit_dim'] = os.environ['LHSM_QED_DENSE_LIMIT_DIM']
    return Settings(**values)


def setup_logging(level: str = 'INFO', log_dir: Optional[Path] = None) -> None:
    """
    Configura el logging de la aplicación.

    Args:
        level: Nivel de log (INFO, DEBUG, ...).
        log_dir: Si se indica, también se escribe lhsm_qed.log en ese directorio.
    """
    handlers = [logging.StreamHandler()]
    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_dir / LOG_FILE_NAME, encoding='utf-8'))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)
    logger.debug(f"Logging configurado con nivel {level}")
