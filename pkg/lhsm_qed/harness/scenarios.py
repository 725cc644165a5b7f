"""Ensamblado de cada escenario: tablas, gráficos y resumen del manifiesto."""
import logging
import math
from typing import Any, Dict, List

import numpy as np

from ..core.analytics import decay_length_fit
from ..core.bandstructure import (
    band_edges,
    band_gap_table,
    group_velocity,
    omega,
    quadratic_band_edge,
)
from ..core.dynamics import Trajectory
from ..exceptions import LhsmQedError
from ..schemas.params import Band
from ..schemas.scenario import ScenarioConfig, ScenarioName
from .output import ResultSet, Table, config_hash, table_from_rows
from .plots import line_plot
from .points import PointResult, evaluate_point
from .sweep import sweep

logger = logging.getLogger(__name__)

DEFAULT_EPSILONS = np.linspace(1.0, 2.0, 21)


def _empty_result(cfg: ScenarioConfig) -> ResultSet:
    return ResultSet(
        scenario=cfg.scenario.value,
        config_hash=config_hash(cfg),
        config_json=cfg.canonical_json(),
    )


def _column(rows: List[Dict[str, Any]], key: str) -> np.ndarray:
    return np.array([row.get(key) if row.get(key) is not None else math.nan for row in rows], dtype=float)


def _rows(points: List[PointResult]) -> List[Dict[str, Any]]:
    rows = []
    for point in points:
        row = dict(point.row)
        row['error'] = point.error
        rows.append(row)
    return rows


def _trajectory_table(traj: Trajectory) -> Table:
    return Table(header=traj.csv_header(), rows=traj.to_csv_rows())


def _population_table(traj: Trajectory) -> Table:
    header = ['t'] + [f'population_{q + 1}' for q in range(traj.n_atoms)] + ['mode_pop', 'norm']
    rows = []
    for i, t in enumerate(traj.t_grid):
        pops = [float(abs(traj.atom_amplitudes[q, i]) ** 2) for q in range(traj.n_atoms)]
        rows.append([float(t)] + pops + [float(traj.mode_population_total[i]), float(traj.norm_series[i])])
    return Table(header=header, rows=rows)


def _single_point(cfg: ScenarioConfig) -> List[PointResult]:
    """Escenarios sin eje: un único punto, conservando la trayectoria."""
    return [evaluate_point(cfg, 0, None, keep_trajectory=True)]


# --- Dispersion ---

def run_dispersion(cfg: ScenarioConfig) -> ResultSet:
    params = cfg.lattice
    result = _empty_result(cfg)
    j = np.arange(1, cfg.n_points + 1)
    k = -math.pi + 2.0 * math.pi * (j - 0.5) / cfg.n_points
    k = k[k != 0.0]
    upper, lower = omega(k, Band.UPPER, params), omega(k, Band.LOWER, params)
    v_upper, v_lower = group_velocity(k, Band.UPPER, params), group_velocity(k, Band.LOWER, params)
    result.tables['dispersion'] = Table(
        header=['k', 'omega_upper', 'omega_lower', 'vg_upper', 'vg_lower'],
        rows=[list(map(float, r)) for r in zip(k, upper, lower, v_upper, v_lower)],
    )
    epsilons = cfg.axis_values or list(DEFAULT_EPSILONS)
    gap_rows = band_gap_table(epsilons)
    result.tables['band_gap'] = Table(header=['epsilon', 'gap_width', 'lower_width'], rows=[list(r) for r in gap_rows])
    result.n_points = len(gap_rows)

    edges = band_edges(params)
    result.plots['dispersion'] = line_plot(
        [(k, np.minimum(upper, 3.0), 'ω₊ (recortada en 3)'), (k, lower, 'ω₋')],
        title=f'Dispersión LHSM, ε = {params.epsilon}',
        xlabel='k·ΔX',
        ylabel='ω/ω_r',
        hlines=[(edges.omega_upper_pi, 'ω₊(π)'), (edges.omega_lower_pi, 'ω₋(π)')],
    )
    result.plots['band_gap'] = line_plot(
        [([r[0] for r in gap_rows], [r[1] for r in gap_rows], 'Δ_G'),
         ([r[0] for r in gap_rows], [r[2] for r in gap_rows], 'W₋')],
        title='Gap y anchura de la banda inferior frente a ε',
        xlabel='ε',
        ylabel='ω/ω_r',
        markers=True,
    )
    curvatures = {}
    for band, k0, name in ((Band.UPPER, math.pi, 'upper_pi'), (Band.LOWER, math.pi, 'lower_pi'), (Band.LOWER, 0.0, 'lower_zero')):
        edge = quadratic_band_edge(band, k0, params)
        curvatures[name] = {'edge_freq': edge.edge_freq, 'alpha': edge.alpha, 'coefficient': edge.coefficient}
    result.summary = {
        'gap_width': edges.gap_width,
        'lower_width': edges.lower_width,
        'omega_upper_pi': edges.omega_upper_pi,
        'omega_lower_pi': edges.omega_lower_pi,
        'omega_lower_zero': edges.omega_lower_zero,
        'vg_upper_half_pi': group_velocity(math.pi / 2, Band.UPPER, params),
        'vg_lower_half_pi': group_velocity(math.pi / 2, Band.LOWER, params),
        'band_edges': curvatures,
    }
    return result


# --- Barridos ---

def _finish(cfg: ScenarioConfig, points: List[PointResult], leading: List[str]) -> ResultSet:
    result = _empty_result(cfg)
    result.n_points = len(points)
    result.failures = [p.error_code for p in points if p.failed]
    result.tables['results'] = table_from_rows(_rows(points), leading)
    if len(points) == 1 and points[0].trajectory is not None:
        traj = points[0].trajectory
        name = 'rabi_trajectory' if cfg.scenario == ScenarioName.TWO_ATOM_RABI else 'trajectory'
        result.tables[name] = _population_table(traj)
        result.tables['amplitudes'] = _trajectory_table(traj)
        result.plots[name] = line_plot(
            [(traj.t_grid, traj.population(q), f'|c_e,{q + 1}|²') for q in range(traj.n_atoms)],
            title='Población atómica',
            xlabel='t·ω_r',
            ylabel='población',
        )
    return result


def run_decay_sweep(cfg: ScenarioConfig, parallelism: int) -> ResultSet:
    points = sweep(cfg, parallelism)
    parameter = cfg.sweep_axis.parameter
    result = _finish(cfg, points, [parameter])
    rows = [p.row for p in points]
    x = _column(rows, parameter)
    if parameter == 'k_r':
        series = [(x, _column(rows, f'gamma_{kind}_{band}'), f'Γ {kind} ({band})')
                  for band in ('upper', 'lower') for kind in ('analytic', 'num')]
        ratio = abs(group_velocity(math.pi / 2, Band.UPPER, cfg.lattice) / group_velocity(math.pi / 2, Band.LOWER, cfg.lattice))
        result.summary['vg_ratio_half_pi'] = ratio
    else:
        series = [(x, _column(rows, 'gamma_analytic'), 'Γ analítico'), (x, _column(rows, 'gamma_num'), 'Γ numérico')]
    gammas = _column(rows, 'gamma_analytic' if parameter != 'k_r' else 'gamma_analytic_upper')
    if np.any(np.isfinite(gammas)):
        result.summary['gamma_analytic_max'] = float(np.nanmax(gammas))
    result.plots['decay'] = line_plot(series, title='Tasa de decaimiento', xlabel=parameter, ylabel='Γ/ω_r', markers=True)
    return result


def run_bound_state_sweep(cfg: ScenarioConfig, parallelism: int) -> ResultSet:
    points = sweep(cfg, parallelism)
    result = _finish(cfg, points, ['d_s'])
    rows = [p.row for p in points]
    x = _column(rows, 'd_s')
    result.plots['bound_state'] = line_plot(
        [(x, _column(rows, 'population_analytic'), f'residuo ({cfg.method.value})'),
         (x, _column(rows, 'population_mode_sum'), 'residuo (ModeSum)'),
         (x, _column(rows, 'population_num'), 'evolución')],
        title=f'Población estacionaria, borde {cfg.target.edge.value}',
        xlabel='d_s',
        ylabel='|c_e(∞)|²',
        markers=True,
    )
    result.summary['edge'] = cfg.target.edge.value
    return result


def run_detuning_sweep(cfg: ScenarioConfig, parallelism: int) -> ResultSet:
    points = sweep(cfg, parallelism)
    parameter = cfg.sweep_axis.parameter
    result = _finish(cfg, points, [parameter])
    rows = [p.row for p in points]
    x = _column(rows, parameter)
    series = [(x, _column(rows, f'population_{edge}_{kind}'), f'{edge} ({kind})')
              for edge in ('upper', 'lower') for kind in ('analytic', 'num')]
    result.plots['detuning'] = line_plot(series, title='Población estacionaria frente a la desintonía',
                                         xlabel=parameter, ylabel='|c_e(∞)|²', markers=True)
    upper, lower = _column(rows, 'population_upper_analytic'), _column(rows, 'population_lower_analytic')
    valid = np.isfinite(upper) & np.isfinite(lower)
    result.summary['upper_above_lower'] = bool(np.all(upper[valid] > lower[valid]))
    # filas ordenadas por Δ₀ creciente: la población sube al alejarse del borde
    for name, curve in (('upper', upper[valid]), ('lower', lower[valid])):
        result.summary[f'{name}_increasing_with_detuning'] = bool(np.all(np.diff(curve) > 0))
    return result


def run_two_atom_rabi(cfg: ScenarioConfig, parallelism: int) -> ResultSet:
    points = sweep(cfg, parallelism) if cfg.sweep_axis else _single_point(cfg)
    result = _finish(cfg, points, ['d_s'])
    if cfg.sweep_axis:
        rows = [p.row for p in points]
        x = _column(rows, 'd_s')
        result.plots['exchange'] = line_plot(
            [(x, _column(rows, 'exchange_analytic'), f'2|J₁₂| ({cfg.method.value})'),
             (x, 2.0 * np.abs(_column(rows, 'j_mode_sum')), '2|J₁₂| (ModeSum)'),
             (x, _column(rows, 'exchange_num'), 'numérico')],
            title='Frecuencia de intercambio frente a d_s', xlabel='d_s', ylabel='Ω/ω_r', markers=True,
        )
    return result


def run_distance_sweep(cfg: ScenarioConfig, parallelism: int) -> ResultSet:
    points = sweep(cfg, parallelism)
    result = _finish(cfg, points, ['D_q'])
    rows = [p.row for p in points if not p.failed or 'j_closed_form' in p.row]
    d = _column(rows, 'D_q')
    key = {'ClosedForm': 'j_closed_form', 'Quadrature': 'j_quadrature', 'ModeSum': 'j_mode_sum'}[cfg.method.value]
    j = _column(rows, key)
    result.plots['coupling'] = line_plot(
        [(d, np.abs(_column(rows, 'j_closed_form')), 'forma cerrada'),
         (d, np.abs(_column(rows, 'j_quadrature')), 'cuadratura'),
         (d, np.abs(_column(rows, 'j_mode_sum')), 'suma de modos')],
        title='Acoplamiento dipolo-dipolo', xlabel='D_q', ylabel='|J₁₂|/ω_r', logy=True, markers=True,
    )
    valid = np.isfinite(j) & (j != 0)
    if np.count_nonzero(valid) >= 2:
        try:
            slope, intercept = decay_length_fit(d[valid], j[valid])
        except LhsmQedError as e:
            logger.warning(f"Ajuste de longitud de decaimiento no disponible: {e.message}")
        else:
            beta = float(_column(rows, 'beta')[valid][0])
            result.summary.update({
                'decay_slope': slope,
                'decay_intercept': intercept,
                'beta': beta,
                'slope_relative_error': abs(slope + beta) / beta,
            })
    return result


def run_scenario(cfg: ScenarioConfig, parallelism: int = 1) -> ResultSet:
    """
    Ejecuta el escenario de la configuración.

    Args:
        cfg: Configuración validada.
        parallelism: Procesos para los barridos.

    Returns:
        ResultSet con tablas, gráficos y resumen.
    """
    logger.info(f"Ejecutando escenario {cfg.scenario.value} (N={cfg.grid_N}, método={cfg.method.value})")
    if cfg.scenario == ScenarioName.DISPERSION:
        return run_dispersion(cfg)
    runners = {
        ScenarioName.DECAY_SWEEP: run_decay_sweep,
        ScenarioName.BOUND_STATE_SWEEP: run_bound_state_sweep,
        ScenarioName.DETUNING_SWEEP: run_detuning_sweep,
        ScenarioName.TWO_ATOM_RABI: run_two_atom_rabi,
        ScenarioName.TWO_ATOM_DISTANCE_SWEEP: run_distance_sweep,
    }
    return runners[cfg.scenario](cfg, parallelism)
