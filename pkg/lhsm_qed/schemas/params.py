"""Modelos de dominio: red LHSM, emisores gigantes y parámetros de evolución."""
import math
from enum import Enum

from pydantic import BaseModel, Field, root_validator, validator

from ..config import NORM_TOLERANCE

# Valores de circuito por defecto (F, H)
DEFAULT_CAPACITANCE = 2.5e-11
DEFAULT_INDUCTANCE = 2e-10
DEFAULT_EPSILON = 1.4


class Band(str, Enum):
    """Rama de la dispersión. Upper diverge en k = 0 (signo − dentro de la raíz)."""
    UPPER = 'Upper'
    LOWER = 'Lower'


class EdgeOrientation(str, Enum):
    MINIMUM = 'Minimum'
    MAXIMUM = 'Maximum'


class Frame(str, Enum):
    LAB = 'Lab'
    ROTATING = 'Rotating'


class Propagator(str, Enum):
    AUTO = 'auto'
    STEPPER = 'stepper'
    DENSE = 'dense'


class SelfEnergyMethod(str, Enum):
    QUADRATURE = 'Quadrature'
    CLOSED_FORM = 'ClosedForm'
    MODE_SUM = 'ModeSum'


class LatticeParams(BaseModel):
    """Constantes del circuito. C en faradios, L en henrios; ΔX fijo a 1."""

    capacitance_C: float = DEFAULT_CAPACITANCE
    inductance_L: float = DEFAULT_INDUCTANCE
    epsilon: float = DEFAULT_EPSILON

    class Config:
        allow_mutation = False

    @validator('capacitance_C', 'inductance_L', 'epsilon')
    def _strictly_positive(cls, value: float, field) -> float:
        if not math.isfinite(value) or value <= 0:
            raise ValueError(f"{field.name} debe ser finito y > 0 (recibido {value})")
        return value

    @property
    def cell_length(self) -> float:
        return 1.0

    @property
    def omega_r(self) -> float:
        """ω_r = 1/√(CL) en rad/s; siempre recalculado."""
        return 1.0 / math.sqrt(self.capacitance_C * self.inductance_L)


class GiantAtom(BaseModel):
    """Emisor de dos niveles acoplado en x = position y x = position + d_s."""

    omega_q: float
    d_s: int = Field(0, ge=0)
    g: float = Field(1e-4, ge=0.0)
    position: int = 0

    class Config:
        allow_mutation = False

    @validator('omega_q')
    def _finite_positive(cls, value: float) -> float:
        if not math.isfinite(value) or value <= 0:
            raise ValueError(f"omega_q debe ser finito y > 0 (recibido {value})")
        return value

    def with_changes(self, **changes) -> 'GiantAtom':
        return self.copy(update=changes)


class AtomPair(BaseModel):
    """Dos emisores idénticos; D_q separa sus puntos de acoplamiento izquierdos."""

    atom_a: GiantAtom
    atom_b: GiantAtom
    D_q: int = Field(..., ge=1)

    class Config:
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def _identical_atoms(cls, values):
        a, b = values['atom_a'], values['atom_b']
        if (a.omega_q, a.d_s, a.g) != (b.omega_q, b.d_s, b.g):
            raise ValueError("Los dos átomos deben tener omega_q, d_s y g idénticos")
        return values

    @classmethod
    def identical(cls, atom: GiantAtom, D_q: int) -> 'AtomPair':
        return cls(atom_a=atom, atom_b=atom.with_changes(position=atom.position + D_q), D_q=D_q)

    @property
    def atoms(self):
        return (self.atom_a, self.atom_b)


class EvolveConfig(BaseModel):
    """Parámetros del integrador (tiempos en unidades de 1/ω_r)."""

    dt: float = Field(..., gt=0.0)
    t_max: float = Field(..., gt=0.0)
    tolerance: float = Field(NORM_TOLERANCE, gt=0.0)
    frame: Frame = Frame.ROTATING
    record_stride: int = Field(1, ge=1)
    propagator: Propagator = Propagator.AUTO

    class Config:
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def _horizon_covers_step(cls, values):
        if values['t_max'] < values['dt']:
            raise ValueError("t_max debe ser >= dt")
        return values

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))
