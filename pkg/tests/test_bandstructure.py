import math

import numpy as np
import pytest

from lhsm_qed.core.bandstructure import (
    analytic_grid_spectrum,
    band_edges,
    band_gap_table,
    brillouin_grid,
    group_velocity,
    omega,
    quadratic_band_edge,
    realspace_matrices,
    realspace_spectrum,
)
from lhsm_qed.exceptions import DivergenceError, DomainError, UnsupportedBandEdgeError
from lhsm_qed.schemas.params import Band, EdgeOrientation, LatticeParams


def test_reference_frequencies(params):
    """Prueba valores de referencia de la dispersión con ε = 1.4."""
    assert omega(0.0, Band.LOWER, params) == pytest.approx(0.41667, rel=1e-4)
    assert omega(math.pi / 2, Band.UPPER, params) == pytest.approx(1.12616, rel=1e-4)
    assert omega(math.pi, Band.UPPER, params) == pytest.approx(0.67330, rel=1e-4)
    assert omega(math.pi, Band.LOWER, params) == pytest.approx(0.53044, rel=1e-4)


def test_omega_is_vectorised_and_even(params):
    k = np.linspace(0.1, math.pi, 50)
    for band in Band:
        values = omega(k, band, params)
        assert values.shape == k.shape
        np.testing.assert_allclose(values, omega(-k, band, params), rtol=1e-14)


def test_upper_band_above_lower(params):
    k = brillouin_grid(64)
    k = k[k != 0]
    assert np.all(omega(k, Band.UPPER, params) > omega(k, Band.LOWER, params))


def test_out_of_zone_rejected(params):
    with pytest.raises(DomainError):
        omega(3.5, Band.LOWER, params)
    with pytest.raises(DomainError):
        group_velocity(np.array([0.5, -4.0]), Band.UPPER, params)


def test_upper_band_diverges_at_zero(params):
    with pytest.raises(DivergenceError):
        omega(0.0, Band.UPPER, params)
    with pytest.raises(DivergenceError):
        group_velocity(0.0, Band.UPPER, params)


def test_gap_width_reference_and_closure():
    assert band_edges(LatticeParams(epsilon=1.4)).gap_width == pytest.approx(0.14286, abs=1e-4)
    assert band_edges(LatticeParams(epsilon=1.0)).gap_width < 1e-12


def test_gap_grows_with_epsilon():
    rows = band_gap_table(np.linspace(1.0, 2.0, 20))
    gaps = [gap for _, gap, _ in rows]
    assert all(b > a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] == pytest.approx(0.25, rel=1e-9)


def test_group_velocity_reference(params):
    assert group_velocity(math.pi / 2, Band.UPPER, params) == pytest.approx(-0.66926, rel=1e-4)
    assert group_velocity(math.pi / 2, Band.LOWER, params) == pytest.approx(0.04227, rel=1e-3)
    assert group_velocity(math.pi, Band.UPPER, params) == 0.0
    assert group_velocity(0.0, Band.LOWER, params) == 0.0


@pytest.mark.parametrize('band', list(Band))
def test_group_velocity_matches_finite_difference(params, band):
    h = 1e-5
    for k in (0.3, 1.0, 1.5, 2.5):
        numeric = (omega(k + h, band, params) - omega(k - h, band, params)) / (2 * h)
        assert group_velocity(k, band, params) == pytest.approx(numeric, abs=1e-6)


def test_band_edge_coefficients(params):
    upper = quadratic_band_edge(Band.UPPER, math.pi, params)
    lower = quadratic_band_edge(Band.LOWER, math.pi, params)
    bottom = quadratic_band_edge(Band.LOWER, 0.0, params)
    assert upper.orientation == EdgeOrientation.MINIMUM
    assert lower.orientation == EdgeOrientation.MAXIMUM
    assert bottom.orientation == EdgeOrientation.MINIMUM
    assert upper.coefficient == pytest.approx(0.22187, rel=1e-3)
    assert lower.coefficient == pytest.approx(0.10849, rel=1e-3)
    assert bottom.coefficient == pytest.approx(0.012308, rel=1e-3)
    assert upper.coefficient == pytest.approx(upper.alpha / 2)


@pytest.mark.parametrize('band,k0', [(Band.UPPER, math.pi), (Band.LOWER, math.pi), (Band.LOWER, 0.0)])
def test_quadratic_model_error_is_fourth_order(params, band, k0):
    """El error del modelo cuadrático escala como δk⁴: cociente ~16 al dividir δk entre dos."""
    edge = quadratic_band_edge(band, k0, params)
    step = -1.0 if k0 > 0 else 1.0

    def error(dk):
        return abs(omega(k0 + step * dk, band, params) - edge.model(dk))

    ratio = error(0.2) / error(0.1)
    assert 10 < ratio < 24


def test_unsupported_band_edge(params):
    with pytest.raises(UnsupportedBandEdgeError):
        quadratic_band_edge(Band.UPPER, 0.0, params)
    with pytest.raises(UnsupportedBandEdgeError):
        quadratic_band_edge(Band.LOWER, 1.0, params)


def test_realspace_spectrum_matches_dispersion(params):
    """El oráculo de circuito reproduce la dispersión analítica sobre la misma rejilla."""
    numeric = realspace_spectrum(params, n_cells=200)
    analytic = analytic_grid_spectrum(params, n_cells=200)
    assert numeric.size == analytic.size == 400
    assert np.isinf(numeric).sum() == 1
    assert np.isinf(analytic).sum() == 1
    finite = np.isfinite(analytic)
    rel = np.abs(numeric[finite] - analytic[finite]) / analytic[finite]
    assert rel.max() < 1e-10


def test_realspace_gap_closes_at_unit_ratio():
    freqs = realspace_spectrum(LatticeParams(epsilon=1.0), n_cells=40)
    finite = np.sort(freqs[np.isfinite(freqs)])
    # 40 frecuencias inferiores y 39 superiores finitas: sin gap entre ellas
    assert finite[40] - finite[39] < 1e-9


def test_realspace_matrices_structure(params):
    c_matrix, inv_l = realspace_matrices(params, n_cells=8)
    dense = c_matrix.toarray()
    np.testing.assert_allclose(dense, dense.T)
    np.testing.assert_allclose(dense.sum(axis=1), 0.0, atol=1e-14)
    np.testing.assert_allclose(inv_l.diagonal()[:2], [1 / params.epsilon, 1.0])


def test_realspace_rejects_bad_sizes(params):
    with pytest.raises(DomainError):
        realspace_spectrum(params, n_cells=7)
    with pytest.raises(DomainError):
        realspace_spectrum(params, n_cells=4)
    with pytest.raises(DomainError):
        realspace_spectrum(params, n_cells=10, boundary='Open')
