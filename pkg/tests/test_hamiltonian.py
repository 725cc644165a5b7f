import math

import numpy as np
import pytest

from lhsm_qed.core.bandstructure import omega
from lhsm_qed.core.hamiltonian import build_hamiltonian, coupling_amplitudes, dump_structure_csv, mode_grid
from lhsm_qed.exceptions import DimensionOverflowError, DomainError
from lhsm_qed.schemas.params import AtomPair, Band, Frame, GiantAtom


@pytest.fixture
def atom():
    return GiantAtom(omega_q=1.1, d_s=3, g=0.01)


def test_mode_grid_pins_divergent_modes(params):
    grid = mode_grid(100, params)
    assert grid.k_values.size == 100
    assert 0.0 in grid.k_values
    assert grid.n_pinned >= 1
    assert np.all(grid.frequencies_upper <= grid.upper_cutoff)
    free = grid.frequencies_upper < grid.upper_cutoff
    k_free = grid.k_values[free]
    np.testing.assert_array_equal(grid.frequencies_upper[free], omega(k_free, Band.UPPER, params))
    np.testing.assert_array_equal(grid.frequencies_lower, omega(grid.k_values, Band.LOWER, params))


def test_mode_grid_rejects_odd_sizes(params):
    with pytest.raises(DomainError):
        mode_grid(101, params)


def test_form_factor_vanishes_where_phases_cancel(params):
    """Con d_s = 2 el acoplamiento se anula en k = ±π/2."""
    grid = mode_grid(100, params)
    amps = coupling_amplitudes(GiantAtom(omega_q=1.0, d_s=2, g=0.1), grid)
    idx = int(np.argmin(np.abs(grid.k_values - math.pi / 2)))
    assert abs(amps[idx]) < 1e-12
    assert abs(amps[idx + grid.n_modes]) < 1e-12
    assert np.max(np.abs(amps)) == pytest.approx(0.2)


def test_single_atom_structure(params, atom, rng):
    grid = mode_grid(50, params)
    ham = build_hamiltonian(params, atom, grid, frame=Frame.LAB)
    assert ham.dimension == 101
    assert ham.nnz == 100 + 2 * 100 + 1
    assert ham.hermiticity_defect() == 0.0
    assert ham.atom_diagonal[0] == pytest.approx(1.1)

    psi = rng.normal(size=ham.dimension) + 1j * rng.normal(size=ham.dimension)
    np.testing.assert_allclose(ham.matvec(psi), ham.to_dense() @ psi, atol=1e-12)
    np.testing.assert_allclose(ham.to_sparse().toarray(), ham.to_dense(), atol=0)


def test_rotating_frame_shifts_diagonal(params, atom):
    grid = mode_grid(50, params)
    lab = build_hamiltonian(params, atom, grid, frame=Frame.LAB)
    rot = build_hamiltonian(params, atom, grid, frame=Frame.ROTATING)
    assert rot.atom_diagonal[0] == 0.0
    np.testing.assert_allclose(rot.mode_diagonal, lab.mode_diagonal - atom.omega_q)
    assert rot.max_abs_diagonal < lab.max_abs_diagonal


def test_pair_border_carries_separation_phase(params, atom):
    grid = mode_grid(40, params)
    pair = AtomPair.identical(atom, D_q=6)
    ham = build_hamiltonian(params, pair, grid)
    assert ham.dimension == 82
    assert ham.hermiticity_defect() == 0.0
    k = grid.k_both
    np.testing.assert_allclose(ham.border[:, 1], ham.border[:, 0] * np.exp(1j * k * 6))


def test_energy_of_atomic_state(params, atom):
    grid = mode_grid(20, params)
    ham = build_hamiltonian(params, atom, grid, frame=Frame.LAB)
    psi = np.zeros(ham.dimension, dtype=complex)
    psi[-1] = 1.0
    assert ham.energy(psi) == pytest.approx(atom.omega_q)


def test_dimension_guard(params, atom):
    grid = mode_grid(100, params)
    with pytest.raises(DimensionOverflowError):
        build_hamiltonian(params, atom, grid, max_modes=50)


def test_dimension_guard_from_environment(params, atom, monkeypatch):
    monkeypatch.setenv('LHSM_QED_MAX_MODES', '10')
    with pytest.raises(DimensionOverflowError):
        build_hamiltonian(params, atom, mode_grid(20, params))


def test_structure_dump(params, atom):
    ham = build_hamiltonian(params, atom, mode_grid(10, params))
    lines = dump_structure_csv(ham).splitlines()
    assert lines[0] == 'index,type,value'
    assert len(lines) == 1 + 20 + 1 + 20
    assert sum(1 for line in lines if ',atom_diagonal,' in line) == 1
