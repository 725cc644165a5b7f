"""Esquema del documento JSON de entrada de la CLI."""
import math
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Set

from pydantic import BaseModel, Field, root_validator, validator

from ..config import DEFAULT_N_MODES, NORM_TOLERANCE, UPPER_CUTOFF
from .params import Band, Frame, LatticeParams, Propagator, SelfEnergyMethod


class ScenarioName(str, Enum):
    DISPERSION = 'Dispersion'
    DECAY_SWEEP = 'DecaySweep'
    BOUND_STATE_SWEEP = 'BoundStateSweep'
    DETUNING_SWEEP = 'DetuningSweep'
    TWO_ATOM_RABI = 'TwoAtomRabi'
    TWO_ATOM_DISTANCE_SWEEP = 'TwoAtomDistanceSweep'


class EdgeName(str, Enum):
    """upper → ω₁, lower → ω₂ (dentro del gap), bottom → ω₃ (bajo la banda inferior)."""
    UPPER = 'upper'
    LOWER = 'lower'
    BOTTOM = 'bottom'


# Ejes de barrido permitidos por escenario
SWEEP_PARAMETERS: Dict[ScenarioName, Set[str]] = {
    ScenarioName.DISPERSION: {'epsilon'},
    ScenarioName.DECAY_SWEEP: {'d_s', 'g', 'k_r'},
    ScenarioName.BOUND_STATE_SWEEP: {'d_s'},
    ScenarioName.DETUNING_SWEEP: {'detuning', 'detuning_fraction'},
    ScenarioName.TWO_ATOM_RABI: {'d_s'},
    ScenarioName.TWO_ATOM_DISTANCE_SWEEP: {'D_q'},
}
SWEEP_REQUIRED = {
    ScenarioName.DECAY_SWEEP,
    ScenarioName.BOUND_STATE_SWEEP,
    ScenarioName.DETUNING_SWEEP,
    ScenarioName.TWO_ATOM_DISTANCE_SWEEP,
}
TWO_ATOM_SCENARIOS = {ScenarioName.TWO_ATOM_RABI, ScenarioName.TWO_ATOM_DISTANCE_SWEEP}
INTEGER_PARAMETERS = {'d_s', 'D_q'}
OMEGA_FROM_AXIS = {ScenarioName.DECAY_SWEEP, ScenarioName.DETUNING_SWEEP}


class AtomSpec(BaseModel):
    """Emisor tal como aparece en el JSON; omega_q se deriva de `target` si falta."""

    omega_q: Optional[float] = None
    d_s: int = Field(0, ge=0)
    g: float = Field(1e-4, ge=0.0)
    position: int = 0


class TargetSpec(BaseModel):
    band: Band = Band.UPPER
    k_r: float = math.pi / 2
    edge: EdgeName = EdgeName.UPPER
    detuning_fraction: float = Field(0.2, gt=0.0, lt=1.0)
    detuning: Optional[float] = Field(None, gt=0.0)


class SweepAxis(BaseModel):
    parameter: str
    values: List[float] = Field(..., min_items=1)

    @validator('values', each_item=True)
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("Los valores del barrido deben ser finitos")
        return value


class EvolveSettings(BaseModel):
    """Como EvolveConfig, pero dt y t_max se pueden dejar al escenario."""

    enabled: bool = True
    dt: Optional[float] = Field(None, gt=0.0)
    t_max: Optional[float] = Field(None, gt=0.0)
    tolerance: float = Field(NORM_TOLERANCE, gt=0.0)
    frame: Frame = Frame.ROTATING
    record_stride: Optional[int] = Field(None, ge=1)
    n_records: int = Field(2000, ge=16)
    propagator: Propagator = Propagator.AUTO


class ScenarioConfig(BaseModel):
    scenario: ScenarioName
    lattice: LatticeParams = LatticeParams()
    atom: AtomSpec = AtomSpec()
    D_q: Optional[int] = Field(None, ge=1)
    target: TargetSpec = TargetSpec()
    grid_N: int = Field(DEFAULT_N_MODES, ge=2)
    upper_cutoff: float = Field(UPPER_CUTOFF, gt=0.0)
    method: SelfEnergyMethod = SelfEnergyMethod.CLOSED_FORM
    evolve: EvolveSettings = EvolveSettings()
    sweep_axis: Optional[SweepAxis] = None
    n_points: int = Field(1000, ge=2)
    output_dir: Optional[Path] = None

    class Config:
        allow_mutation = False

    @validator('grid_N')
    def _even_grid(cls, value: int) -> int:
        if value % 2:
            raise ValueError(f"grid_N debe ser par (recibido {value})")
        return value

    @root_validator(skip_on_failure=True)
    def _scenario_consistency(cls, values):
        scenario = values['scenario']
        axis: Optional[SweepAxis] = values.get('sweep_axis')
        if axis is None and scenario in SWEEP_REQUIRED:
            raise ValueError(f"El escenario {scenario.value} requiere sweep_axis")
        if axis is not None:
            allowed = SWEEP_PARAMETERS[scenario]
            if axis.parameter not in allowed:
                raise ValueError(
                    f"sweep_axis.parameter '{axis.parameter}' no existe para {scenario.value}; "
                    f"permitidos: {sorted(allowed)}"
                )
            if axis.parameter in INTEGER_PARAMETERS and not all(float(v).is_integer() for v in axis.values):
                raise ValueError(f"Los valores de {axis.parameter} deben ser enteros")
            if axis.parameter == 'D_q' and min(axis.values) < 1:
                raise ValueError("D_q debe ser >= 1")
            if axis.parameter == 'd_s' and min(axis.values) < 0:
                raise ValueError("d_s debe ser >= 0")
            if axis.parameter in ('epsilon', 'g', 'detuning') and min(axis.values) < 0:
                raise ValueError(f"{axis.parameter} no puede ser negativo")
            if axis.parameter == 'epsilon' and min(axis.values) <= 0:
                raise ValueError("epsilon debe ser > 0")
        atom: Optional[AtomSpec] = values.get('atom')
        if scenario in OMEGA_FROM_AXIS and atom is not None and atom.omega_q is not None:
            raise ValueError(
                f"En {scenario.value} ω_q se deriva de target/sweep_axis; elimine atom.omega_q"
            )
        if scenario in TWO_ATOM_SCENARIOS:
            needs_dq = not (axis is not None and axis.parameter == 'D_q')
            if needs_dq and values.get('D_q') is None:
                raise ValueError(f"El escenario {scenario.value} requiere D_q")
        return values

    @property
    def axis_values(self) -> List[float]:
        return list(self.sweep_axis.values) if self.sweep_axis else []

    def canonical_json(self) -> str:
        """Serialización canónica; su sha256 es el hash de configuración."""
        return self.json(sort_keys=True, separators=(',', ':'))
