"""
Estructura de bandas de la superred metamaterial zurda (LHSM).

Dispersión analítica de dos ramas, bordes de banda, velocidades de grupo,
curvaturas y un oráculo independiente en espacio real a partir de las
matrices de capacidad e inductancia del circuito.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, List, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ..config import CURVATURE_STEP
from ..exceptions import (
    ConstructionError,
    DivergenceError,
    DomainError,
    EigenSolverError,
    UnsupportedBandEdgeError,
)
from ..schemas.params import Band, EdgeOrientation, LatticeParams

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Holgura para aceptar k = ±π con error de redondeo
_BZ_SLACK = 1e-12


@dataclass(frozen=True)
class BandEdges:
    omega_upper_pi: float
    omega_lower_pi: float
    omega_lower_zero: float

    @property
    def gap_width(self) -> float:
        return self.omega_upper_pi - self.omega_lower_pi

    @property
    def lower_width(self) -> float:
        return self.omega_lower_pi - self.omega_lower_zero


@dataclass(frozen=True)
class QuadraticBandEdge:
    """Aproximación cuadrática alrededor de k0: E = edge ± coefficient·δk²."""

    band: Band
    k0: float
    edge_freq: float
    alpha: float
    orientation: EdgeOrientation

    @property
    def coefficient(self) -> float:
        # α es la segunda derivada; el término de Taylor lleva α/2
        return 0.5 * self.alpha

    @property
    def sign(self) -> int:
        """+1 si la banda queda por encima del borde (mínimo), −1 si por debajo."""
        return 1 if self.orientation == EdgeOrientation.MINIMUM else -1

    def model(self, dk: ArrayLike) -> ArrayLike:
        return self.edge_freq + self.sign * self.coefficient * np.square(dk)


def _inverse_square(k: ArrayLike, band: Band, epsilon: float) -> np.ndarray:
    """λ = 1/ω² para la rama pedida, sin cancelación en la rama superior."""
    k = np.asarray(k, dtype=float)
    half = 0.5 * (1.0 + epsilon) ** 2
    sin_half_sq = np.sin(0.5 * k) ** 2
    root = np.sqrt(half * half - 4.0 * epsilon ** 2 * sin_half_sq)
    if band == Band.UPPER:
        return 4.0 * epsilon ** 2 * sin_half_sq / (half + root)
    return half + root


def _omega_unchecked(k: ArrayLike, band: Band, epsilon: float) -> np.ndarray:
    lam = _inverse_square(k, band, epsilon)
    with np.errstate(divide='ignore'):
        return 1.0 / np.sqrt(lam)


def _check_bz(k: np.ndarray) -> None:
    if np.any(~np.isfinite(k)) or np.any(np.abs(k) > np.pi + _BZ_SLACK):
        raise DomainError(
            "k fuera de la primera zona de Brillouin (−π, π]",
            {'k_min': float(np.min(k)), 'k_max': float(np.max(k))},
        )


def omega(k: ArrayLike, band: Band, params: LatticeParams) -> ArrayLike:
    """
    Frecuencia ω±(k) en unidades de ω_r.

    Args:
        k: Vector de onda (escalar o array) en (−π, π].
        band: Rama Upper o Lower.
        params: Parámetros de la red.

    Returns:
        Frecuencia con la misma forma que `k`.
    """
    k_arr = np.asarray(k, dtype=float)
    _check_bz(k_arr)
    if band == Band.UPPER and np.any(k_arr == 0.0):
        raise DivergenceError("La banda superior diverge en k = 0", {'band': band.value})
    result = _omega_unchecked(k_arr, band, params.epsilon)
    return float(result) if np.ndim(k) == 0 else result


def group_velocity(k: ArrayLike, band: Band, params: LatticeParams) -> ArrayLike:
    """dω/dk analítica (unidades ω_r·ΔX). Negativa en la rama superior para k ∈ (0, π)."""
    k_arr = np.asarray(k, dtype=float)
    _check_bz(k_arr)
    if band == Band.UPPER and np.any(k_arr == 0.0):
        raise DivergenceError("La banda superior diverge en k = 0", {'band': band.value})
    eps = params.epsilon
    half = 0.5 * (1.0 + eps) ** 2
    root = np.sqrt(half * half - 4.0 * eps ** 2 * np.sin(0.5 * k_arr) ** 2)
    w = _omega_unchecked(k_arr, band, eps)
    sign = -1.0 if band == Band.UPPER else 1.0
    at_edge = np.abs(k_arr) >= np.pi - _BZ_SLACK
    with np.errstate(divide='ignore', invalid='ignore'):
        v = sign * 0.5 * w ** 3 * eps ** 2 * np.sin(k_arr) / root
    # borde de zona: banda plana (también cuando root = 0 con ε = 1)
    v = np.where(at_edge, 0.0, v)
    return float(v) if np.ndim(k) == 0 else v


def band_edges(params: LatticeParams) -> BandEdges:
    eps = params.epsilon
    edges = BandEdges(
        omega_upper_pi=float(_omega_unchecked(np.pi, Band.UPPER, eps)),
        omega_lower_pi=float(_omega_unchecked(np.pi, Band.LOWER, eps)),
        omega_lower_zero=float(_omega_unchecked(0.0, Band.LOWER, eps)),
    )
    logger.debug(f"Bordes de banda ε={eps}: Δ_G={edges.gap_width:.6g}, W₋={edges.lower_width:.6g}")
    return edges


def band_gap_table(epsilons: Iterable[float]) -> List[Tuple[float, float, float]]:
    """Filas (ε, Δ_G, W₋) para el barrido en ε."""
    rows = []
    for eps in epsilons:
        edges = band_edges(LatticeParams(epsilon=eps))
        rows.append((float(eps), edges.gap_width, edges.lower_width))
    return rows


# Casos soportados: (rama, k0) -> orientación
_EDGE_CASES = {
    (Band.UPPER, 'pi'): EdgeOrientation.MINIMUM,
    (Band.LOWER, 'pi'): EdgeOrientation.MAXIMUM,
    (Band.LOWER, 'zero'): EdgeOrientation.MINIMUM,
}


def _second_difference(band: Band, k0: float, eps: float, h: float) -> float:
    f0 = _omega_unchecked(k0, band, eps)
    fp = _omega_unchecked(k0 + h, band, eps)
    fm = _omega_unchecked(k0 - h, band, eps)
    return float((fp - 2.0 * f0 + fm) / (h * h))


def quadratic_band_edge(band: Band, k0: float, params: LatticeParams) -> QuadraticBandEdge:
    """Curvatura α = |d²ω/dk²| en k0 por diferencias centrales con extrapolación de Richardson."""
    if np.isclose(abs(k0), np.pi):
        key, k0 = 'pi', np.pi
    elif k0 == 0.0:
        key = 'zero'
    else:
        key = None
    orientation = _EDGE_CASES.get((band, key))
    if orientation is None:
        raise UnsupportedBandEdgeError(
            f"Borde no soportado: banda {band.value} en k0={k0}",
            {'band': band.value, 'k0': k0},
        )
    eps = params.epsilon
    h = CURVATURE_STEP
    coarse = _second_difference(band, k0, eps, h)
    fine = _second_difference(band, k0, eps, h / 2.0)
    second = (4.0 * fine - coarse) / 3.0
    return QuadraticBandEdge(
        band=band,
        k0=float(k0),
        edge_freq=float(_omega_unchecked(k0, band, eps)),
        alpha=abs(second),
        orientation=orientation,
    )


def brillouin_grid(n: int) -> np.ndarray:
    """k_j = −π + 2πj/n, j = 1…n."""
    j = np.arange(1, n + 1)
    return -np.pi + 2.0 * np.pi * j / n


def realspace_matrices(params: LatticeParams, n_cells: int) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    """
    Matrices Ĉ/C y L̂⁻¹·L de un anillo periódico de 2·n_cells nodos.

    Los condensadores en serie alternan C (entre b_{m−1} y a_m) y εC (entre
    a_m y b_m); las inductancias a tierra alternan εL (nodo a) y L (nodo b).
    """
    eps = params.epsilon
    n_nodes = 2 * n_cells
    bonds = np.tile([eps, 1.0], n_cells)  # bond i une el nodo i con el i+1
    left = np.roll(bonds, 1)
    diag = bonds + left
    idx = np.arange(n_nodes)
    nxt = (idx + 1) % n_nodes
    rows = np.concatenate([idx, idx, nxt])
    cols = np.concatenate([idx, nxt, idx])
    data = np.concatenate([diag, -bonds, -bonds])
    c_matrix = sp.csr_matrix((data, (rows, cols)), shape=(n_nodes, n_nodes))
    inv_l = sp.diags(np.tile([1.0 / eps, 1.0], n_cells), format='csr')
    return c_matrix, inv_l


def realspace_spectrum(params: LatticeParams, n_cells: int, boundary: str = 'Periodic') -> np.ndarray:
    """
    Frecuencias propias del circuito en espacio real, orden ascendente.

    Resuelve Ĉψ = ω⁻²·L̂⁻¹ψ. El modo de flujo uniforme (k = 0 de la rama
    superior) tiene ω⁻² = 0 y se devuelve como inf.
    """
    if boundary != 'Periodic':
        raise DomainError(f"Condición de contorno no soportada: {boundary}")
    if n_cells < 8 or n_cells % 2:
        raise DomainError("n_cells debe ser par y >= 8", {'n_cells': n_cells})
    c_matrix, inv_l = realspace_matrices(params, n_cells)
    try:
        lam = scipy.linalg.eigh(c_matrix.toarray(), inv_l.toarray(), eigvals_only=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        logger.error(f"Fallo del diagonalizador: {e}", exc_info=True)
        raise EigenSolverError(f"Fallo del diagonalizador: {e}") from e
    scale = float(np.max(np.abs(lam)))
    if lam[0] < -1e-12 * scale:
        raise ConstructionError(
            "Matriz de capacidad no semidefinida positiva",
            {'min_eigenvalue': float(lam[0])},
        )
    with np.errstate(divide='ignore'):
        freqs = np.where(lam <= 1e-12 * scale, np.inf, 1.0 / np.sqrt(np.clip(lam, 0.0, None)))
    freqs = np.sort(freqs)
    logger.info(f"Espectro en espacio real: {freqs.size} frecuencias (n_cells={n_cells})")
    return freqs


def analytic_grid_spectrum(params: LatticeParams, n_cells: int) -> np.ndarray:
    """Multiconjunto {ω±(k_j)} sobre la rejilla equivalente, con inf para Upper en k = 0."""
    k = brillouin_grid(n_cells)
    upper = _omega_unchecked(k, Band.UPPER, params.epsilon)
    lower = _omega_unchecked(k, Band.LOWER, params.epsilon)
    return np.sort(np.concatenate([upper, lower]))
