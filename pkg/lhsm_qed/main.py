"""
Punto de entrada de la línea de comandos `lhsm-qed`.

    lhsm-qed <escenario> --config <archivo.json> [--out <dir>] [--workers <n>]
             [--n-modes <N>] [--seedless] [--epsilon ...] [--g ...] ...

Códigos de salida: 0 éxito, 2 configuración, 3 física, 4 validez numérica,
1 error inesperado.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from . import __version__
from .config import DEFAULT_OUTPUT_DIR, load_settings, setup_logging
from .exceptions import EXIT_OK, EXIT_UNEXPECTED, ConfigError, LhsmQedError
from .harness.output import write_result_set
from .harness.scenarios import run_scenario
from .schemas.scenario import ScenarioConfig, ScenarioName

logger = logging.getLogger(__name__)

# flag -> ruta dentro del JSON de configuración
OVERRIDES = {
    'epsilon': ('lattice', 'epsilon'),
    'g': ('atom', 'g'),
    'ds': ('atom', 'd_s'),
    'dq': ('D_q',),
    'omega_q': ('atom', 'omega_q'),
    'k_r': ('target', 'k_r'),
    't_max': ('evolve', 't_max'),
    'dt': ('evolve', 'dt'),
    'n_modes': ('grid_N',),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='lhsm-qed',
        description='Simulador de átomos gigantes acoplados a una superred metamaterial zurda.',
    )
    parser.add_argument('scenario', choices=[s.value for s in ScenarioName], help='Escenario a ejecutar.')
    parser.add_argument('--config', '-c', required=True, help='Documento JSON del escenario.')
    parser.add_argument('--out', '-o', help='Directorio de salida (prevalece sobre la configuración).')
    parser.add_argument('--workers', '-w', type=int, default=1, help='Procesos para los barridos.')
    parser.add_argument('--n-modes', type=int, help='Número de modos N por banda.')
    parser.add_argument('--seedless', action='store_true',
                        help='Omite la marca de tiempo del manifiesto (salida reproducible byte a byte).')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    overrides = parser.add_argument_group('sobrescrituras de la configuración')
    overrides.add_argument('--epsilon', type=float)
    overrides.add_argument('--g', type=float)
    overrides.add_argument('--ds', type=int)
    overrides.add_argument('--dq', type=int)
    overrides.add_argument('--omega-q', type=float)
    overrides.add_argument('--k-r', type=float)
    overrides.add_argument('--t-max', type=float)
    overrides.add_argument('--dt', type=float)
    return parser


def load_config(path: Path, scenario: str, args: argparse.Namespace) -> ScenarioConfig:
    """Lee el JSON, aplica las sobrescrituras de la CLI y valida."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data: Dict[str, Any] = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"Archivo de configuración no encontrado: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON no válido en {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("La configuración debe ser un objeto JSON")

    if data.setdefault('scenario', scenario) != scenario:
        raise ConfigError(
            f"El escenario de la CLI ({scenario}) no coincide con el de la configuración ({data['scenario']})"
        )
    for flag, keys in OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        target = data
        for key in keys[:-1]:
            target = target.setdefault(key, {})
        target[keys[-1]] = value
        logger.info(f"Sobrescritura: {'.'.join(keys)} = {value}")

    try:
        return ScenarioConfig(**data)
    except ValidationError as e:
        fields = '; '.join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"Configuración no válida: {fields}", {'errors': e.errors()}) from e


def resolve_output_dir(cli_out: Optional[str], cfg: ScenarioConfig) -> Path:
    """--out > output_dir de la configuración > LHSM_QED_OUT > ./results."""
    if cli_out:
        return Path(cli_out)
    if cfg.output_dir is not None:
        return cfg.output_dir
    settings = load_settings()
    return settings.output_dir if settings.output_dir else DEFAULT_OUTPUT_DIR


def main(argv: Optional[List[str]] = None) -> int:
    """Función principal; devuelve el código de salida."""
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings()
        setup_logging(settings.log_level)
        if args.workers < 1:
            raise ConfigError(f"--workers debe ser >= 1 (recibido {args.workers})")

        cfg = load_config(Path(args.config), args.scenario, args)
        out_dir = resolve_output_dir(args.out, cfg)
        setup_logging(settings.log_level, log_dir=out_dir)
        logger.info(f"Escenario {cfg.scenario.value}; resultados en {out_dir}")

        result = run_scenario(cfg, parallelism=args.workers)
        write_result_set(result, out_dir, __version__, seedless=args.seedless)

        if result.all_failed:
            logger.error(f"Todos los puntos ({result.n_points}) fallaron")
            return result.failures[0]
        if result.failures:
            logger.warning(f"{len(result.failures)} de {result.n_points} puntos fallaron; ver la columna error")
        logger.info(f"\n{'=' * 40}\nEscenario {cfg.scenario.value} completado\nHash de configuración: {result.config_hash}\n{'=' * 40}")
        return EXIT_OK

    except LhsmQedError as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        return e.exit_code
    except Exception as e:
        logger.critical(f"Error crítico inesperado en main(): {str(e)}", exc_info=True)
        return EXIT_UNEXPECTED


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
