"""
Jerarquía de errores del simulador.

Cada categoría se corresponde con un código de salida de la CLI:
configuración (2), física (3) y validez numérica (4).
"""
from typing import Any, Dict, Optional

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_NUMERICAL = 4


class LhsmQedError(Exception):
    """Error base. `info` guarda los valores que provocaron el fallo."""

    exit_code = EXIT_UNEXPECTED

    def __init__(self, message: str, info: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.info: Dict[str, Any] = {'success': False, 'error': message}
        if info:
            self.info.update(info)


# --- Configuración ---
class ConfigError(LhsmQedError):
    exit_code = EXIT_CONFIG


class DimensionOverflowError(ConfigError):
    pass


# --- Física ---
class PhysicsError(LhsmQedError):
    exit_code = EXIT_PHYSICS


class DomainError(PhysicsError):
    pass


class DivergenceError(PhysicsError):
    pass


class UnsupportedBandEdgeError(PhysicsError):
    pass


class MarkovRegimeError(PhysicsError):
    pass


class NotInGapError(PhysicsError):
    pass


class NoBoundStateError(PhysicsError):
    pass


class PoleOnContourError(PhysicsError):
    pass


class BranchError(PhysicsError):
    pass


# --- Validez numérica ---
class NumericalValidityError(LhsmQedError):
    exit_code = EXIT_NUMERICAL


class NormDriftError(NumericalValidityError):
    pass


class NaNDetectedError(NumericalValidityError):
    pass


class StabilityGuardError(NumericalValidityError):
    pass


class NonMonotonicWindowError(NumericalValidityError):
    pass


class UnderflowWindowError(NumericalValidityError):
    pass


class NotConvergedError(NumericalValidityError):
    pass


class NoDominantPeakError(NumericalValidityError):
    pass


class DegenerateResidueError(NumericalValidityError):
    pass


class EigenSolverError(NumericalValidityError):
    pass


class ConstructionError(NumericalValidityError):
    pass


def exit_code_for(exc: BaseException) -> int:
    """Traduce una excepción al código de salida de la CLI."""
    if isinstance(exc, LhsmQedError):
        return exc.exit_code
    return EXIT_UNEXPECTED
