"""Fixtures compartidas por las pruebas."""
import math

import numpy as np
import pytest

from lhsm_qed.core.bandstructure import band_edges, quadratic_band_edge
from lhsm_qed.schemas.params import Band, GiantAtom, LatticeParams


@pytest.fixture
def params() -> LatticeParams:
    return LatticeParams()


@pytest.fixture
def edges(params):
    return band_edges(params)


@pytest.fixture
def upper_edge(params):
    return quadratic_band_edge(Band.UPPER, math.pi, params)


@pytest.fixture
def lower_edge(params):
    return quadratic_band_edge(Band.LOWER, math.pi, params)


@pytest.fixture
def bottom_edge(params):
    return quadratic_band_edge(Band.LOWER, 0.0, params)


@pytest.fixture
def gap_atom_factory(edges):
    """Crea un átomo a una fracción de Δ_G por debajo del borde superior del gap."""
    def make(fraction: float = 0.2, d_s: int = 1, g: float = 1e-4) -> GiantAtom:
        omega_q = edges.omega_upper_pi - fraction * edges.gap_width
        return GiantAtom(omega_q=omega_q, d_s=d_s, g=g)
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
