"""
Evaluación de un punto de barrido por escenario.

Cada evaluador es una función de módulo (serializable con pickle) que
recibe la configuración validada y el valor del eje, y devuelve un
PointResult con la fila del CSV. Las columnas analíticas se calculan
primero; un fallo de la parte numérica queda en la columna `error` sin
perder las analíticas.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from ..core.analytics import (
    SelfEnergyContext,
    bound_state,
    dipole_coupling,
    markov_decay_rate,
)
from ..core.bandstructure import QuadraticBandEdge, band_edges, omega, quadratic_band_edge
from ..core.dynamics import (
    AtomExcited,
    Trajectory,
    evolve,
    fit_decay_rate,
    rabi_frequency,
    revival_horizon,
    stable_dt,
    steady_population,
)
from ..core.hamiltonian import ArrowheadHamiltonian, build_hamiltonian, mode_grid
from ..exceptions import EXIT_UNEXPECTED, LhsmQedError, NoDominantPeakError, NotInGapError
from ..schemas.params import AtomPair, Band, EvolveConfig, GiantAtom, LatticeParams, SelfEnergyMethod
from ..schemas.scenario import EdgeName, ScenarioConfig, ScenarioName

logger = logging.getLogger(__name__)

# t_max por defecto para estados ligados: BOUND_STATE_HORIZON/Δ₀
BOUND_STATE_HORIZON = 200.0
# Periodos de intercambio simulados por defecto en TwoAtomRabi
RABI_PERIODS = 8.0
# Por debajo de esta fracción de Γ₀ (átomo pequeño) el punto se considera atrapado
TRAPPED_FRACTION = 1e-3
HORIZON_FRACTION = 0.9


@dataclass
class PointResult:
    index: int
    value: Optional[float]
    row: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None
    error_code: int = 0
    trajectory: Optional[Trajectory] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


# --- Construcción de emisores y frecuencias objetivo ---

def make_atom(cfg: ScenarioConfig, omega_q: float, **changes) -> GiantAtom:
    spec = cfg.atom
    atom = GiantAtom(omega_q=omega_q, d_s=spec.d_s, g=spec.g, position=spec.position)
    return atom.with_changes(**changes) if changes else atom


def axis_changes(parameter: Optional[str], value: Optional[float]) -> Dict[str, Any]:
    """Cambios del emisor que implica el valor del eje (solo d_s y g)."""
    if value is None:
        return {}
    if parameter == 'd_s':
        return {'d_s': int(value)}
    if parameter == 'g':
        return {'g': float(value)}
    return {}


def edge_for(name: EdgeName, params: LatticeParams) -> QuadraticBandEdge:
    if name == EdgeName.UPPER:
        return quadratic_band_edge(Band.UPPER, math.pi, params)
    if name == EdgeName.LOWER:
        return quadratic_band_edge(Band.LOWER, math.pi, params)
    return quadratic_band_edge(Band.LOWER, 0.0, params)


def target_frequency(
    params: LatticeParams,
    name: EdgeName,
    detuning: Optional[float] = None,
    fraction: Optional[float] = None,
) -> Tuple[float, QuadraticBandEdge, float]:
    """
    ω_q a distancia Δ₀ del borde pedido, fuera de la banda.

    Δ₀ = detuning si se indica; si no, fraction·Δ_G (bordes del gap) o
    fraction·W₋ (borde inferior de la banda baja).

    Returns:
        (ω_q, borde, Δ₀)
    """
    edges = band_edges(params)
    edge = edge_for(name, params)
    if detuning is None:
        scale = edges.lower_width if name == EdgeName.BOTTOM else edges.gap_width
        detuning = fraction * scale
    limit = edges.omega_lower_zero if name == EdgeName.BOTTOM else edges.gap_width
    if not 0 < detuning < limit:
        raise NotInGapError(
            f"Desintonía {detuning:.6g} fuera de (0, {limit:.6g}) para el borde {name.value}",
            {'detuning': detuning, 'epsilon': params.epsilon},
        )
    return edge.edge_freq - edge.sign * detuning, edge, float(detuning)


def gap_atom(cfg: ScenarioConfig, changes: Dict[str, Any]) -> Tuple[GiantAtom, SelfEnergyContext]:
    """Emisor de los escenarios de gap: ω_q explícito o derivado de target."""
    params = cfg.lattice
    if cfg.atom.omega_q is not None:
        atom = make_atom(cfg, cfg.atom.omega_q, **changes)
        ctx = SelfEnergyContext.for_atom(params, atom, cfg.grid_N, upper_cutoff=cfg.upper_cutoff)
        return atom, ctx
    omega_q, edge, _ = target_frequency(
        params, cfg.target.edge, cfg.target.detuning, cfg.target.detuning_fraction
    )
    atom = make_atom(cfg, omega_q, **changes)
    ctx = SelfEnergyContext.for_atom(params, atom, cfg.grid_N, edge=edge, upper_cutoff=cfg.upper_cutoff)
    return atom, ctx


# --- Evolución ---

def evolve_config(cfg: ScenarioConfig, ham: ArrowheadHamiltonian, t_max: float) -> EvolveConfig:
    settings = cfg.evolve
    dt = settings.dt or stable_dt(ham)
    t_max = settings.t_max or t_max
    t_max = max(t_max, dt)
    n_steps = max(1, int(math.ceil(t_max / dt - 1e-9)))
    stride = settings.record_stride or max(1, n_steps // settings.n_records)
    # el último registro cae en t_max o justo después
    n_steps = -(-n_steps // stride) * stride
    return EvolveConfig(
        dt=dt,
        t_max=n_steps * dt,
        tolerance=settings.tolerance,
        frame=settings.frame,
        record_stride=stride,
        propagator=settings.propagator,
    )


def run_evolution(cfg: ScenarioConfig, atoms, t_max: float) -> Trajectory:
    grid = mode_grid(cfg.grid_N, cfg.lattice, cfg.upper_cutoff)
    ham = build_hamiltonian(cfg.lattice, atoms, grid, frame=cfg.evolve.frame)
    return evolve(ham, AtomExcited(0), evolve_config(cfg, ham, t_max))


def _numeric(result: PointResult, func: Callable[[], None]) -> None:
    """Ejecuta la parte numérica; cualquier error queda en la fila sin perder las columnas analíticas."""
    if not result.row.get('_evolve', True):
        return
    try:
        func()
    except LhsmQedError as e:
        logger.warning(f"Punto {result.index} ({result.value}): {e.message}")
        result.error = f"{type(e).__name__}: {e.message}"
        result.error_code = e.exit_code
    except Exception as e:
        logger.critical(f"Error inesperado en el punto {result.index} ({result.value}): {str(e)}", exc_info=True)
        result.error = f"{type(e).__name__}: {str(e)}"
        result.error_code = EXIT_UNEXPECTED


# --- Escenarios ---

def decay_columns(cfg: ScenarioConfig, atom: GiantAtom, k_r: float, band: Band) -> Dict[str, Any]:
    params = cfg.lattice
    omega_q = omega(k_r, band, params)
    atom = atom.with_changes(omega_q=omega_q)
    return {
        'omega_q': omega_q,
        'gamma_analytic': markov_decay_rate(params, atom, k_r, band, cfg.grid_N),
    }


def decay_numeric(
    cfg: ScenarioConfig,
    atom: GiantAtom,
    k_r: float,
    band: Band,
    gamma_analytic: float,
) -> Tuple[float, float, Tuple[float, float], float, Trajectory]:
    """Γ numérico ajustado en la ventana [0.5, 2.5]/Γ recortada al horizonte de reingreso."""
    params = cfg.lattice
    atom = atom.with_changes(omega_q=omega(k_r, band, params))
    small_atom = markov_decay_rate(params, atom.with_changes(d_s=0), k_r, band, cfg.grid_N)
    trapped = gamma_analytic <= TRAPPED_FRACTION * small_atom
    gamma_est = small_atom if trapped else gamma_analytic
    horizon = revival_horizon(cfg.grid_N, params, k_r=k_r, band=band)
    if gamma_est > 0:
        window = (min(0.5 / gamma_est, 0.2 * horizon), min(2.5 / gamma_est, HORIZON_FRACTION * horizon))
    else:
        # g = 0: átomo desacoplado
        window = (0.2 * horizon, HORIZON_FRACTION * horizon)
    traj = run_evolution(cfg, atom, window[1])
    fit = fit_decay_rate(traj, window, strict=not trapped)
    return fit.rate, fit.residual, window, horizon, traj


def _ratio(num: float, den: float) -> float:
    return num / den if den != 0 else math.nan


def evaluate_decay(cfg: ScenarioConfig, index: int, value: Optional[float], keep_trajectory: bool) -> PointResult:
    parameter = cfg.sweep_axis.parameter
    result = PointResult(index=index, value=value)
    # ω_q provisional; decay_columns lo fija a ω(k_r) en cada banda
    base = make_atom(cfg, 1.0, **axis_changes(parameter, value))
    bands = [Band.UPPER, Band.LOWER] if parameter == 'k_r' else [cfg.target.band]
    k_r = float(value) if parameter == 'k_r' else cfg.target.k_r
    suffixes = {band: (f'_{band.value.lower()}' if len(bands) > 1 else '') for band in bands}
    row: Dict[str, Any] = {parameter: value}
    for band, suffix in suffixes.items():
        for key, val in decay_columns(cfg, base, k_r, band).items():
            row[key + suffix] = val
    if len(bands) > 1:
        row['ratio_analytic'] = _ratio(row['gamma_analytic_lower'], row['gamma_analytic_upper'])
    row['_evolve'] = cfg.evolve.enabled
    result.row = row

    def numeric():
        for band, suffix in suffixes.items():
            rate, residual, window, horizon, traj = decay_numeric(
                cfg, base, k_r, band, row['gamma_analytic' + suffix]
            )
            row['gamma_num' + suffix] = rate
            row['fit_residual' + suffix] = residual
            row['t_fit_start' + suffix], row['t_fit_end' + suffix] = window
            row['revival_horizon' + suffix] = horizon
            if keep_trajectory and band == bands[0]:
                result.trajectory = traj
        if len(bands) > 1:
            row['ratio_num'] = _ratio(row['gamma_num_lower'], row['gamma_num_upper'])

    _numeric(result, numeric)
    return result


def bound_state_columns(ctx: SelfEnergyContext, method: SelfEnergyMethod) -> Dict[str, Any]:
    analytic = bound_state(ctx, method)
    mode_sum = bound_state(ctx, SelfEnergyMethod.MODE_SUM)
    return {
        'omega_q': ctx.atom.omega_q,
        'detuning': ctx.detuning_Delta0,
        'pole_x': -analytic.pole_s0.imag,
        'population_analytic': analytic.steady_population,
        'population_mode_sum': mode_sum.steady_population,
        'bound_length': analytic.bound_length,
    }


def bound_state_numeric(cfg: ScenarioConfig, ctx: SelfEnergyContext) -> Tuple[float, Trajectory]:
    horizon = revival_horizon(cfg.grid_N, cfg.lattice, edge=ctx.edge)
    t_max = min(HORIZON_FRACTION * horizon, BOUND_STATE_HORIZON / ctx.detuning_Delta0)
    traj = run_evolution(cfg, ctx.atom, t_max)
    return steady_population(traj), traj


def evaluate_bound_state(cfg: ScenarioConfig, index: int, value: Optional[float], keep_trajectory: bool) -> PointResult:
    result = PointResult(index=index, value=value)
    atom, ctx = gap_atom(cfg, axis_changes('d_s', value))
    result.row = {'d_s': atom.d_s, **bound_state_columns(ctx, cfg.method), '_evolve': cfg.evolve.enabled}

    def numeric():
        population, traj = bound_state_numeric(cfg, ctx)
        result.row['population_num'] = population
        result.row['relative_error'] = abs(population - result.row['population_analytic']) / max(population, 1e-300)
        if keep_trajectory:
            result.trajectory = traj

    _numeric(result, numeric)
    return result


def evaluate_detuning(cfg: ScenarioConfig, index: int, value: Optional[float], keep_trajectory: bool) -> PointResult:
    result = PointResult(index=index, value=value)
    parameter = cfg.sweep_axis.parameter
    detuning = float(value) if parameter == 'detuning' else None
    fraction = float(value) if parameter == 'detuning_fraction' else None
    row: Dict[str, Any] = {parameter: value}
    contexts = {}
    for name in (EdgeName.UPPER, EdgeName.LOWER):
        omega_q, edge, delta0 = target_frequency(cfg.lattice, name, detuning, fraction)
        atom = make_atom(cfg, omega_q)
        ctx = SelfEnergyContext.for_atom(cfg.lattice, atom, cfg.grid_N, edge=edge, upper_cutoff=cfg.upper_cutoff)
        contexts[name] = ctx
        analytic = bound_state(ctx, cfg.method)
        row[f'detuning_{name.value}'] = delta0
        row[f'population_{name.value}_analytic'] = analytic.steady_population
    row['_evolve'] = cfg.evolve.enabled
    result.row = row

    def numeric():
        for name, ctx in contexts.items():
            population, _ = bound_state_numeric(cfg, ctx)
            row[f'population_{name.value}_num'] = population

    _numeric(result, numeric)
    return result


def dipole_columns(pair: AtomPair, ctx: SelfEnergyContext, method: SelfEnergyMethod) -> Dict[str, Any]:
    couplings = {m: dipole_coupling(pair, ctx, m) for m in SelfEnergyMethod}
    row = {
        'j_closed_form': couplings[SelfEnergyMethod.CLOSED_FORM],
        'j_quadrature': couplings[SelfEnergyMethod.QUADRATURE],
        'j_mode_sum': couplings[SelfEnergyMethod.MODE_SUM],
    }
    j = couplings[method]
    exact = couplings[SelfEnergyMethod.MODE_SUM]
    # cociente forma cerrada / suma exacta: mide lo que aporta el borde opuesto del gap
    row['closed_form_ratio'] = row['j_closed_form'] / exact if exact else math.nan
    row['log_abs_j'] = math.log(abs(j)) if j != 0 else -math.inf
    row['exchange_analytic'] = 2.0 * abs(j)
    return row


def rabi_numeric(cfg: ScenarioConfig, pair: AtomPair, ctx: SelfEnergyContext, j_reference: float) -> Tuple[float, float, Trajectory]:
    """
    Intercambio numérico durante RABI_PERIODS periodos π/|J₁₂| de la suma de modos.

    En el gap solo se radia la fracción 1 − |Res|² del transitorio, así que
    el horizonte de reingreso no limita t_max; se avisa si se supera.
    """
    if not j_reference:
        raise NoDominantPeakError("J₁₂ = 0: no hay intercambio que medir", {'D_q': pair.D_q})
    t_max = RABI_PERIODS * math.pi / abs(j_reference)
    horizon = revival_horizon(cfg.grid_N, cfg.lattice, edge=ctx.edge)
    if t_max > horizon:
        logger.warning(f"t_max = {t_max:.4g} supera el horizonte de reingreso {horizon:.4g}")
    traj = run_evolution(cfg, pair, t_max)
    pop_b = traj.population(1)
    contrast = float(np.max(pop_b) - np.min(pop_b))
    return rabi_frequency(traj), contrast, traj


def _pair_for(cfg: ScenarioConfig, changes: Dict[str, Any], D_q: int) -> Tuple[AtomPair, SelfEnergyContext]:
    atom, ctx = gap_atom(cfg, changes)
    return AtomPair.identical(atom, D_q), ctx


def evaluate_rabi(cfg: ScenarioConfig, index: int, value: Optional[float], keep_trajectory: bool) -> PointResult:
    result = PointResult(index=index, value=value)
    pair, ctx = _pair_for(cfg, axis_changes('d_s', value), cfg.D_q)
    row = {'d_s': pair.atom_a.d_s, 'D_q': pair.D_q, 'omega_q': ctx.atom.omega_q, 'detuning': ctx.detuning_Delta0}
    row.update(dipole_columns(pair, ctx, cfg.method))
    row['_evolve'] = cfg.evolve.enabled
    result.row = row

    def numeric():
        freq, contrast, traj = rabi_numeric(cfg, pair, ctx, row['j_mode_sum'])
        row['exchange_num'] = freq
        row['contrast'] = contrast
        row['relative_error'] = abs(freq - row['exchange_analytic']) / row['exchange_analytic']
        row['relative_error_mode_sum'] = abs(freq - 2.0 * abs(row['j_mode_sum'])) / (2.0 * abs(row['j_mode_sum']))
        if keep_trajectory:
            result.trajectory = traj

    _numeric(result, numeric)
    return result


def evaluate_distance(cfg: ScenarioConfig, index: int, value: Optional[float], keep_trajectory: bool) -> PointResult:
    result = PointResult(index=index, value=value)
    pair, ctx = _pair_for(cfg, {}, int(value))
    row = {'D_q': pair.D_q}
    row.update(dipole_columns(pair, ctx, cfg.method))
    row['beta'] = ctx.beta
    row['_evolve'] = cfg.evolve.enabled
    result.row = row

    def numeric():
        freq, contrast, _ = rabi_numeric(cfg, pair, ctx, row['j_mode_sum'])
        row['exchange_num'] = freq
        row['contrast'] = contrast

    _numeric(result, numeric)
    return result


EVALUATORS = {
    ScenarioName.DECAY_SWEEP: evaluate_decay,
    ScenarioName.BOUND_STATE_SWEEP: evaluate_bound_state,
    ScenarioName.DETUNING_SWEEP: evaluate_detuning,
    ScenarioName.TWO_ATOM_RABI: evaluate_rabi,
    ScenarioName.TWO_ATOM_DISTANCE_SWEEP: evaluate_distance,
}


def evaluate_point(cfg: ScenarioConfig, index: int, value: Optional[float], keep_trajectory: bool = False) -> PointResult:
    """
    Evalúa un punto y deja cualquier fallo en la propia fila.

    Un error inesperado se registra con traza y lleva el código 1; el
    barrido continúa con los demás puntos.
    """
    axis_row = {cfg.sweep_axis.parameter if cfg.sweep_axis else 'point': value}
    try:
        result = EVALUATORS[cfg.scenario](cfg, index, value, keep_trajectory)
    except LhsmQedError as e:
        logger.warning(f"Punto {index} ({value}) falló: {e.message}")
        return PointResult(
            index=index,
            value=value,
            row=axis_row,
            error=f"{type(e).__name__}: {e.message}",
            error_code=e.exit_code,
        )
    except Exception as e:
        logger.critical(f"Error inesperado en el punto {index} ({value}): {str(e)}", exc_info=True)
        return PointResult(
            index=index,
            value=value,
            row=axis_row,
            error=f"{type(e).__name__}: {str(e)}",
            error_code=EXIT_UNEXPECTED,
        )
    result.row.pop('_evolve', None)
    return result
