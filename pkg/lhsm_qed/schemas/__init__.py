from .params import (
    AtomPair,
    Band,
    EdgeOrientation,
    EvolveConfig,
    Frame,
    GiantAtom,
    LatticeParams,
    Propagator,
    SelfEnergyMethod,
)
from .scenario import (
    AtomSpec,
    EdgeName,
    EvolveSettings,
    ScenarioConfig,
    ScenarioName,
    SweepAxis,
    TargetSpec,
)

__all__ = [
    'AtomPair', 'AtomSpec', 'Band', 'EdgeName', 'EdgeOrientation', 'EvolveConfig',
    'EvolveSettings', 'Frame', 'GiantAtom', 'LatticeParams', 'Propagator',
    'ScenarioConfig', 'ScenarioName', 'SelfEnergyMethod', 'SweepAxis', 'TargetSpec',
]
