"""
Predicciones analíticas y semianalíticas.

Tasa de decaimiento markoviana, autoenergía Σ_e(s) (cuadratura, forma
cerrada y suma exacta sobre la rejilla de modos), polo y residuo del
estado ligado átomo-fotón y acoplamiento dipolo-dipolo entre dos átomos
gigantes.

Convención: marco rotante a ω_q, Δ_k = ω_k − ω_q. Los polos ligados se
parametrizan como s = −ix con x real.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize

from ..config import MARKOV_EDGE_MARGIN, UPPER_CUTOFF
from ..exceptions import (
    BranchError,
    DegenerateResidueError,
    DomainError,
    MarkovRegimeError,
    NoBoundStateError,
    NotInGapError,
    PoleOnContourError,
)
from ..schemas.params import AtomPair, Band, GiantAtom, LatticeParams, SelfEnergyMethod
from .bandstructure import QuadraticBandEdge, band_edges, group_velocity, omega, quadratic_band_edge
from .hamiltonian import mode_grid

logger = logging.getLogger(__name__)

# Puntos de muestreo para localizar cambios de signo antes de brentq
POLE_SCAN_POINTS = 200
# Paso relativo (a Δ₀) de la derivada de Σ_e en el polo
RESIDUE_STEP = 1e-6
QUAD_LIMIT = 400
QUAD_EPSREL = 1e-12


@dataclass(frozen=True)
class SelfEnergyContext:
    """Borde de banda, emisor y desintonía Δ₀ > 0 que alimentan las fórmulas analíticas."""

    edge: QuadraticBandEdge
    atom: GiantAtom
    detuning_Delta0: float
    n_modes: int
    lattice: LatticeParams
    upper_cutoff: float = UPPER_CUTOFF

    def __post_init__(self):
        if not self.detuning_Delta0 > 0:
            raise NotInGapError(
                "La desintonía Δ₀ debe ser positiva",
                {'detuning_Delta0': self.detuning_Delta0},
            )

    @classmethod
    def for_atom(
        cls,
        params: LatticeParams,
        atom: GiantAtom,
        n_modes: int,
        edge: Optional[QuadraticBandEdge] = None,
        upper_cutoff: float = UPPER_CUTOFF,
    ) -> 'SelfEnergyContext':
        """
        Contexto para un átomo fuera de las bandas.

        Sin `edge` se elige el borde del gap más cercano (k₀ = π) o, bajo la
        banda inferior, el borde (Lower, 0).
        """
        if edge is None:
            edges = band_edges(params)
            w = atom.omega_q
            if edges.omega_lower_pi < w < edges.omega_upper_pi:
                if edges.omega_upper_pi - w <= w - edges.omega_lower_pi:
                    edge = quadratic_band_edge(Band.UPPER, np.pi, params)
                else:
                    edge = quadratic_band_edge(Band.LOWER, np.pi, params)
            elif w < edges.omega_lower_zero:
                edge = quadratic_band_edge(Band.LOWER, 0.0, params)
            else:
                raise NotInGapError(
                    f"ω_q = {w:.6g} está dentro de una banda",
                    {'omega_q': w, 'gap': (edges.omega_lower_pi, edges.omega_upper_pi)},
                )
        delta0 = edge.sign * (edge.edge_freq - atom.omega_q)
        if delta0 <= 0:
            raise NotInGapError(
                f"ω_q = {atom.omega_q:.6g} no queda fuera de la banda en el borde {edge.band.value}",
                {'omega_q': atom.omega_q, 'edge_freq': edge.edge_freq},
            )
        return cls(
            edge=edge,
            atom=atom,
            detuning_Delta0=float(delta0),
            n_modes=n_modes,
            lattice=params,
            upper_cutoff=upper_cutoff,
        )

    @property
    def beta(self) -> float:
        """Inverso de la longitud del estado ligado, √(Δ₀/c)."""
        return float(np.sqrt(self.detuning_Delta0 / self.edge.coefficient))

    @property
    def coupling_scale(self) -> float:
        """N·g², prefactor común de Γ, Σ_e y J₁₂."""
        return self.n_modes * self.atom.g ** 2


@dataclass(frozen=True)
class BoundStateResult:
    pole_s0: complex
    residue: complex
    steady_population: float
    bound_length: float


# --- Régimen markoviano ---

def markov_decay_rate(
    params: LatticeParams,
    atom: GiantAtom,
    k_r: float,
    band: Band,
    n_modes: int,
) -> float:
    """
    Γ = 4Ng²[1 + cos(k_r d_s)]/|v_g(k_r)|.

    Raises:
        MarkovRegimeError: si k_r está a menos de 0.1 de un borde (k = 0, ±π).
    """
    distance = min(abs(k_r), np.pi - abs(k_r))
    if distance < MARKOV_EDGE_MARGIN:
        raise MarkovRegimeError(
            f"k_r = {k_r:.4g} demasiado cerca de un borde de banda",
            {'k_r': k_r, 'distance': distance},
        )
    w_res = omega(k_r, band, params)
    if not np.isclose(atom.omega_q, w_res, rtol=1e-9, atol=0.0):
        raise DomainError(
            "ω_q no es resonante con ω(k_r)",
            {'omega_q': atom.omega_q, 'omega_k_r': w_res},
        )
    v = abs(group_velocity(k_r, band, params))
    return 4.0 * n_modes * atom.g ** 2 * (1.0 + np.cos(k_r * atom.d_s)) / v


# --- Autoenergía ---

def _check_continuum(s: complex, ctx: SelfEnergyContext) -> None:
    """El contorno de Σ_e es {−iΔ_k}: Re s = 0 con y = σx en [Δ₀, Δ₀ + cπ²]."""
    if abs(s.real) > 1e-15:
        return
    y = ctx.edge.sign * (-s.imag)
    top = ctx.detuning_Delta0 + ctx.edge.coefficient * np.pi ** 2
    if ctx.detuning_Delta0 <= y <= top:
        raise PoleOnContourError(
            "s cae sobre el continuo de la integral",
            {'s': str(s), 'y': y},
        )


def _quad_complex(func: Callable[[float], complex], weight_d: float) -> complex:
    """∫₀^π f(δ)·w(δ) dδ separando partes real e imaginaria; w = cos(dδ) si d > 0."""
    kwargs = {'limit': QUAD_LIMIT, 'epsabs': 0.0, 'epsrel': QUAD_EPSREL}
    if weight_d > 0:
        kwargs.update(weight='cos', wvar=weight_d)
    re, _ = integrate.quad(lambda x: func(x).real, 0.0, np.pi, **kwargs)
    im, _ = integrate.quad(lambda x: func(x).imag, 0.0, np.pi, **kwargs)
    return complex(re, im)


def _self_energy_quadrature(s: complex, ctx: SelfEnergyContext) -> complex:
    _check_continuum(s, ctx)
    sigma, c, d0 = ctx.edge.sign, ctx.edge.coefficient, ctx.detuning_Delta0
    d = ctx.atom.d_s

    def kernel(delta: float) -> complex:
        return 1.0 / (s + 1j * sigma * (d0 + c * delta * delta))

    # cos(d(k₀+δ)) = cos(dk₀)cos(dδ) − sin(dk₀)sin(dδ); la parte impar se anula
    flat = _quad_complex(kernel, 0.0)
    wave = _quad_complex(kernel, float(d)) if d > 0 else flat
    phase = np.cos(d * ctx.edge.k0)
    # (N/2π)·2g²·2∫₀^π
    return 2.0 * ctx.coupling_scale / np.pi * (flat + phase * wave)


def _self_energy_closed_form(s: complex, ctx: SelfEnergyContext) -> complex:
    sigma, c = ctx.edge.sign, ctx.edge.coefficient
    a = ctx.detuning_Delta0 - 1j * sigma * s
    if abs(a.imag) <= 1e-15 * max(1.0, abs(a.real)) and a.real <= 0:
        raise BranchError(
            "Δ₀ − x ≤ 0: s fuera de la rama del estado ligado",
            {'s': str(s), 'a': a.real},
        )
    root = np.sqrt(complex(a) / c)
    phase = np.cos(ctx.atom.d_s * ctx.edge.k0)
    return -1j * sigma * ctx.coupling_scale / (c * root) * (1.0 + phase * np.exp(-ctx.atom.d_s * root))


def _mode_sum_data(ctx: SelfEnergyContext) -> Tuple[np.ndarray, np.ndarray]:
    """(|g_k|², Δ_k) para los 2N modos de la rejilla real."""
    grid = mode_grid(ctx.n_modes, ctx.lattice, ctx.upper_cutoff)
    k = grid.k_both
    weights = 2.0 * ctx.atom.g ** 2 * (1.0 + np.cos(k * ctx.atom.d_s))
    return weights, grid.frequencies - ctx.atom.omega_q


def _self_energy_mode_sum(s: complex, ctx: SelfEnergyContext) -> complex:
    weights, deltas = _mode_sum_data(ctx)
    denom = s + 1j * deltas
    if np.min(np.abs(denom)) < 1e-14:
        raise PoleOnContourError("s coincide con un modo de la rejilla", {'s': str(s)})
    return complex(np.sum(weights / denom))


_SELF_ENERGY = {
    SelfEnergyMethod.QUADRATURE: _self_energy_quadrature,
    SelfEnergyMethod.CLOSED_FORM: _self_energy_closed_form,
    SelfEnergyMethod.MODE_SUM: _self_energy_mode_sum,
}


def self_energy(
    s: complex,
    ctx: SelfEnergyContext,
    method: SelfEnergyMethod = SelfEnergyMethod.CLOSED_FORM,
) -> complex:
    """
    Σ_e(s) = Σ_k |g_k|²/(s + iΔ_k).

    Args:
        s: Frecuencia compleja de Laplace (unidades ω_r).
        ctx: Contexto del borde de banda.
        method: Quadrature y ClosedForm usan la dispersión cuadrática en el
            borde; ModeSum suma sobre la rejilla real de ambas bandas.

    Returns:
        Valor complejo de la autoenergía.
    """
    if ctx.atom.g == 0.0:
        return 0j
    return _SELF_ENERGY[method](complex(s), ctx)


# --- Polo y residuo ---

def _edge_profile(y: float, ctx: SelfEnergyContext, method: SelfEnergyMethod) -> float:
    """P(y) ≥ 0 tal que Σ_e(−ix) = −iσP(σx) sobre el eje imaginario."""
    sigma = ctx.edge.sign
    value = self_energy(-1j * sigma * y, ctx, method)
    return float((value * 1j * sigma).real)


def _bracketed_roots(func: Callable[[float], float], lo: float, hi: float) -> List[float]:
    xs = np.linspace(lo, hi, POLE_SCAN_POINTS + 1)
    values = np.array([func(x) for x in xs])
    roots = []
    for i in range(POLE_SCAN_POINTS):
        if values[i] == 0.0:
            roots.append(float(xs[i]))
        elif values[i] * values[i + 1] < 0:
            roots.append(optimize.brentq(func, xs[i], xs[i + 1], xtol=1e-16, rtol=4 * np.finfo(float).eps))
    if values[-1] == 0.0:
        roots.append(float(xs[-1]))
    return roots


def _pole_function(ctx: SelfEnergyContext, method: SelfEnergyMethod) -> Tuple[Callable[[float], float], float, float]:
    """Función real F(x) cuya raíz da el polo s₀ = −ix, con su intervalo de búsqueda."""
    sigma = ctx.edge.sign
    if method == SelfEnergyMethod.MODE_SUM:
        weights, deltas = _mode_sum_data(ctx)

        def func(x: float) -> float:
            return float(x + np.sum(weights / (deltas - x)))

        # modos con factor de forma nulo (p. ej. k = π con d_s impar) no acotan el polo
        coupled = deltas[weights > 1e-12 * np.max(weights)]
        below, above = coupled[coupled < 0], coupled[coupled > 0]
        hi = float(np.min(above)) if above.size else 1.0
        if below.size:
            lo = float(np.max(below))
        else:
            # bajo ambas bandas: F(−S/Δ_min) < 0 con S = Σ|g_k|²
            lo = -float(np.sum(weights)) / hi - hi
        span = hi - lo
        return func, lo + 1e-9 * span, hi - 1e-9 * span

    p0 = _edge_profile(0.0, ctx, method)

    def func(x: float) -> float:
        return x + sigma * _edge_profile(sigma * x, ctx, method)

    # la raíz cumple y = σx ∈ [−P(0), 0]
    margin = 1e-3 * p0
    bounds = sorted([0.0, -sigma * (p0 + margin)])
    return func, bounds[0], bounds[1]


def bound_state_pole(
    ctx: SelfEnergyContext,
    method: SelfEnergyMethod = SelfEnergyMethod.CLOSED_FORM,
) -> complex:
    """
    Resuelve s + Σ_e(s) = 0 sobre el eje imaginario (s = −ix).

    Raises:
        NoBoundStateError: si F(x) no cambia de signo en el intervalo.
    """
    if ctx.atom.g == 0.0:
        return 0j
    func, lo, hi = _pole_function(ctx, method)
    roots = _bracketed_roots(func, lo, hi)
    if not roots:
        raise NoBoundStateError(
            "Sin cambio de signo en el intervalo del polo: no se resuelve estado ligado",
            {'bracket': (lo, hi), 'method': method.value},
        )
    if len(roots) > 1:
        logger.warning(f"{len(roots)} raíces en el intervalo del polo; se toma la de menor |x|")
    x = min(roots, key=abs)
    logger.debug(f"Polo ligado ({method.value}): x = {x:.12g}, residuo = {func(x):.3e}")
    return complex(0.0, -x)


def residue_population(
    ctx: SelfEnergyContext,
    pole: complex,
    method: SelfEnergyMethod = SelfEnergyMethod.CLOSED_FORM,
) -> float:
    """|1/(1 + ∂_sΣ_e(s₀))|² con ∂_sΣ_e = i·dΣ_e/dx por diferencias centrales y Richardson."""
    if ctx.atom.g == 0.0:
        return 1.0
    return float(abs(_residue(ctx, pole, method)) ** 2)


def _residue(ctx: SelfEnergyContext, pole: complex, method: SelfEnergyMethod) -> complex:
    x = -complex(pole).imag
    h = RESIDUE_STEP * ctx.detuning_Delta0
    if h == 0.0 or x + h == x:
        raise DegenerateResidueError("Paso de derivada por debajo de la resolución", {'step': h, 'x': x})

    def derivative(step: float) -> complex:
        plus = self_energy(-1j * (x + step), ctx, method)
        minus = self_energy(-1j * (x - step), ctx, method)
        return (plus - minus) / (2.0 * step)

    d_sigma_dx = (4.0 * derivative(0.5 * h) - derivative(h)) / 3.0
    denom = 1.0 + 1j * d_sigma_dx
    if abs(denom) < 1e-12:
        raise DegenerateResidueError("|1 + ∂_sΣ_e| ≈ 0", {'denominator': abs(denom)})
    return 1.0 / denom


def bound_state(
    ctx: SelfEnergyContext,
    method: SelfEnergyMethod = SelfEnergyMethod.CLOSED_FORM,
) -> BoundStateResult:
    pole = bound_state_pole(ctx, method)
    residue = 1.0 + 0j if ctx.atom.g == 0.0 else _residue(ctx, pole, method)
    population = min(max(float(abs(residue) ** 2), 0.0), 1.0)
    return BoundStateResult(
        pole_s0=pole,
        residue=residue,
        steady_population=population,
        bound_length=1.0 / ctx.beta,
    )


# --- Acoplamiento dipolo-dipolo ---

def _dipole_closed_form(D: int, ctx: SelfEnergyContext) -> float:
    beta, c, k0 = ctx.beta, ctx.edge.coefficient, ctx.edge.k0
    d = ctx.atom.d_s
    envelope = np.exp(-D * beta) + 0.5 * np.cos(d * k0) * (
        np.exp(-(D + d) * beta) + np.exp(-abs(D - d) * beta)
    )
    return float(ctx.edge.sign * ctx.coupling_scale / (c * beta) * np.cos(D * k0) * envelope)


def _dipole_quadrature(D: int, ctx: SelfEnergyContext) -> float:
    sigma, c, d0, k0 = ctx.edge.sign, ctx.edge.coefficient, ctx.detuning_Delta0, ctx.edge.k0
    d = ctx.atom.d_s

    def kernel(delta: float) -> float:
        return 1.0 / (sigma * (d0 + c * delta * delta))

    kwargs = {'limit': QUAD_LIMIT, 'epsabs': 0.0, 'epsrel': QUAD_EPSREL}

    def cos_moment(freq: float) -> float:
        # ∫₀^π cos(freq·δ)/Δ(δ) dδ
        if freq == 0:
            return integrate.quad(kernel, 0.0, np.pi, **kwargs)[0]
        return integrate.quad(kernel, 0.0, np.pi, weight='cos', wvar=abs(freq), **kwargs)[0]

    # cos(D(k₀+δ))[1 + cos(d(k₀+δ))] tras descartar las partes impares en δ
    total = np.cos(D * k0) * cos_moment(D)
    total += 0.5 * np.cos((D + d) * k0) * cos_moment(D + d)
    total += 0.5 * np.cos((D - d) * k0) * cos_moment(D - d)
    # (N/2π)·2g²·2∫₀^π
    return float(2.0 * ctx.coupling_scale / np.pi * total)


def _dipole_mode_sum(D: int, ctx: SelfEnergyContext) -> float:
    grid = mode_grid(ctx.n_modes, ctx.lattice, ctx.upper_cutoff)
    k = grid.k_both
    weights = 2.0 * ctx.atom.g ** 2 * (1.0 + np.cos(k * ctx.atom.d_s))
    deltas = grid.frequencies - ctx.atom.omega_q
    if np.min(np.abs(deltas)) < 1e-14:
        raise PoleOnContourError("ω_q coincide con un modo de la rejilla", {'omega_q': ctx.atom.omega_q})
    return float(np.sum(weights * np.cos(k * D) / deltas))


_DIPOLE = {
    SelfEnergyMethod.QUADRATURE: _dipole_quadrature,
    SelfEnergyMethod.CLOSED_FORM: _dipole_closed_form,
    SelfEnergyMethod.MODE_SUM: _dipole_mode_sum,
}


def dipole_coupling(
    pair: AtomPair,
    ctx: SelfEnergyContext,
    method: SelfEnergyMethod = SelfEnergyMethod.CLOSED_FORM,
) -> float:
    """
    J₁₂ = Σ_k g_{k1} g*_{k2}/Δ_k para dos átomos idénticos separados D_q.

    El signo alterna con la paridad de D_q cuando k₀ = π.
    """
    if pair.atom_a != ctx.atom.with_changes(position=pair.atom_a.position):
        raise DomainError("El contexto no corresponde a los átomos del par")
    if pair.atom_a.g == 0.0:
        return 0.0
    return _DIPOLE[method](pair.D_q, ctx)


def decay_length_fit(distances: Sequence[float], couplings: Sequence[float]) -> Tuple[float, float]:
    """Pendiente y ordenada del ajuste lineal de ln|J₁₂| frente a D_q (la pendiente aproxima −β)."""
    d = np.asarray(distances, dtype=float)
    j = np.abs(np.asarray(couplings, dtype=float))
    if d.size < 2 or np.any(j == 0):
        raise DomainError("Se necesitan al menos dos acoplamientos no nulos para el ajuste")
    slope, intercept = np.polyfit(d, np.log(j), 1)
    return float(slope), float(intercept)
