"""Ejecución de los puntos de un barrido en un pool de procesos acotado."""
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import List, Optional

from ..exceptions import ConfigError
from ..schemas.scenario import ScenarioConfig
from .points import PointResult, evaluate_point

logger = logging.getLogger(__name__)


def sweep(cfg: ScenarioConfig, parallelism: int = 1) -> List[PointResult]:
    """
    Evalúa todos los valores de `sweep_axis`.

    Args:
        cfg: Configuración validada con eje de barrido.
        parallelism: Número de procesos; 1 ejecuta en el proceso actual.

    Returns:
        Resultados ordenados por valor del eje (y por índice en empates),
        independientemente del orden de finalización.
    """
    if cfg.sweep_axis is None or not cfg.sweep_axis.values:
        raise ConfigError("El barrido necesita sweep_axis con al menos un valor")
    if parallelism < 1:
        raise ConfigError(f"parallelism debe ser >= 1 (recibido {parallelism})")

    values = cfg.axis_values
    keep_trajectory = len(values) == 1
    logger.info(
        f"Barrido {cfg.scenario.value} sobre {cfg.sweep_axis.parameter}: "
        f"{len(values)} puntos, {parallelism} proceso(s)"
    )

    results: List[Optional[PointResult]] = [None] * len(values)
    if parallelism == 1 or len(values) == 1:
        for i, value in enumerate(values):
            results[i] = evaluate_point(cfg, i, value, keep_trajectory)
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as executor:
            futures = {
                executor.submit(evaluate_point, cfg, i, value, keep_trajectory): i
                for i, value in enumerate(values)
            }
            for future in as_completed(futures):
                i = futures[future]
                results[i] = future.result()
                logger.info(f"Punto {i + 1}/{len(values)} completado")

    n_failed = sum(1 for r in results if r.failed)
    if n_failed:
        logger.warning(f"{n_failed} de {len(values)} puntos fallaron")
    return sorted(results, key=lambda r: (r.value, r.index))
