from .analytics import (
    BoundStateResult,
    SelfEnergyContext,
    bound_state,
    bound_state_pole,
    decay_length_fit,
    dipole_coupling,
    markov_decay_rate,
    residue_population,
    self_energy,
)
from .bandstructure import (
    BandEdges,
    QuadraticBandEdge,
    band_edges,
    band_gap_table,
    group_velocity,
    omega,
    quadratic_band_edge,
    realspace_spectrum,
)
from .dynamics import (
    AtomExcited,
    Trajectory,
    evolve,
    fit_decay_rate,
    rabi_frequency,
    revival_horizon,
    steady_population,
)
from .hamiltonian import ArrowheadHamiltonian, ModeGrid, build_hamiltonian, mode_grid
