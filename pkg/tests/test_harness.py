import json
import math
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from lhsm_qed.exceptions import EXIT_PHYSICS, EXIT_UNEXPECTED
from lhsm_qed.harness import points
from lhsm_qed.harness.output import Table, format_value, render_csv, table_from_rows
from lhsm_qed.harness.points import evaluate_point, target_frequency
from lhsm_qed.harness.scenarios import run_scenario
from lhsm_qed.harness.sweep import sweep
from lhsm_qed.schemas.params import LatticeParams
from lhsm_qed.schemas.scenario import EdgeName, ScenarioConfig, ScenarioName

CONFIG_DIR = Path(__file__).resolve().parents[1] / 'configs'


def _results(result):
    table = result.tables['results']
    return [dict(zip(table.header, row)) for row in table.rows]


def test_format_value():
    assert format_value(0.1) == '0.10000000000000001'
    assert format_value(None) == ''
    assert format_value(True) == 'true'
    assert format_value(3) == '3'
    assert format_value(np.int64(7)) == '7'
    assert format_value(np.float64(0.5)) == '0.5'


def test_render_csv_layout():
    text = render_csv(Table(header=['a', 'b'], rows=[[1, 0.25], [2, None]]), 'abc123')
    assert text == '# config-hash: abc123\na,b\n1,0.25\n2,\n'


def test_table_from_rows_puts_error_last():
    table = table_from_rows([{'x': 1, 'error': None, 'y': 2}, {'x': 2, 'z': 3, 'error': 'boom'}], ['x'])
    assert table.header == ['x', 'y', 'z', 'error']
    assert table.rows[1] == [2, None, 3, 'boom']


@pytest.mark.parametrize('data', [
    {'scenario': 'DecaySweep'},
    {'scenario': 'DecaySweep', 'sweep_axis': {'parameter': 'D_q', 'values': [1]}},
    {'scenario': 'DecaySweep', 'atom': {'omega_q': 1.0}, 'sweep_axis': {'parameter': 'd_s', 'values': [1]}},
    {'scenario': 'BoundStateSweep', 'sweep_axis': {'parameter': 'd_s', 'values': [1.5]}},
    {'scenario': 'TwoAtomRabi'},
    {'scenario': 'Dispersion', 'grid_N': 101},
])
def test_invalid_configurations(data):
    with pytest.raises(ValidationError):
        ScenarioConfig(**data)


def test_canonical_json_is_order_independent():
    a = ScenarioConfig(scenario='Dispersion', lattice={'epsilon': 1.5}, n_points=50)
    b = ScenarioConfig(n_points=50, lattice={'epsilon': 1.5}, scenario='Dispersion')
    assert a.canonical_json() == b.canonical_json()


def test_target_frequency(params, edges):
    omega_q, edge, delta0 = target_frequency(params, EdgeName.UPPER, fraction=0.2)
    assert omega_q == pytest.approx(edges.omega_upper_pi - 0.2 * edges.gap_width)
    assert delta0 == pytest.approx(0.2 * edges.gap_width)
    omega_q, _, _ = target_frequency(params, EdgeName.LOWER, detuning=0.01)
    assert omega_q == pytest.approx(edges.omega_lower_pi + 0.01)
    omega_q, _, _ = target_frequency(params, EdgeName.BOTTOM, fraction=0.2)
    assert omega_q == pytest.approx(edges.omega_lower_zero - 0.2 * edges.lower_width)


def test_closed_gap_point_fails_as_physics_error():
    cfg = ScenarioConfig(
        scenario='BoundStateSweep',
        lattice=LatticeParams(epsilon=1.0),
        evolve={'enabled': False},
        sweep_axis={'parameter': 'd_s', 'values': [1]},
    )
    point = evaluate_point(cfg, 0, 1.0)
    assert point.failed
    assert point.error.startswith('NotInGapError')
    assert point.error_code == EXIT_PHYSICS


def test_dispersion_scenario(params):
    result = run_scenario(ScenarioConfig(scenario='Dispersion', n_points=100))
    assert len(result.tables['dispersion'].rows) == 100
    assert len(result.tables['band_gap'].rows) == 21
    assert result.summary['gap_width'] == pytest.approx(0.142857, rel=1e-5)
    assert result.summary['band_edges']['upper_pi']['coefficient'] == pytest.approx(0.22187, rel=1e-3)
    assert set(result.plots) == {'dispersion', 'band_gap'}
    assert result.plots['dispersion'].lstrip().startswith('<?xml')


def test_decay_sweep_analytic_interference_zeros():
    cfg = ScenarioConfig(
        scenario='DecaySweep',
        grid_N=500,
        atom={'g': 1e-3},
        evolve={'enabled': False},
        sweep_axis={'parameter': 'd_s', 'values': list(range(13))},
    )
    rows = _results(run_scenario(cfg))
    gammas = np.array([row['gamma_analytic'] for row in rows])
    zeros = [int(row['d_s']) for row, g in zip(rows, gammas) if g < 1e-12 * gammas.max()]
    assert zeros == [2, 6, 10]
    assert all(row['error'] is None for row in rows)
    assert 'gamma_num' not in rows[0]


def test_decay_sweep_over_k_reports_both_bands():
    cfg = ScenarioConfig(
        scenario='DecaySweep',
        grid_N=500,
        atom={'d_s': 1, 'g': 1e-3},
        evolve={'enabled': False},
        sweep_axis={'parameter': 'k_r', 'values': [1.0, math.pi / 2, 2.0]},
    )
    result = run_scenario(cfg)
    rows = _results(result)
    for row in rows:
        assert row['gamma_analytic_upper'] > 0
        assert row['gamma_analytic_lower'] > 0
        assert row['ratio_analytic'] == pytest.approx(row['gamma_analytic_lower'] / row['gamma_analytic_upper'])
    # en k = π/2 el cociente de tasas es el inverso del de velocidades de grupo
    assert rows[1]['ratio_analytic'] == pytest.approx(result.summary['vg_ratio_half_pi'], rel=1e-9)


def test_detuning_sweep_parallel_matches_serial():
    cfg = ScenarioConfig(
        scenario='DetuningSweep',
        grid_N=200,
        evolve={'enabled': False},
        sweep_axis={'parameter': 'detuning_fraction', 'values': [0.3, 0.1, 0.2]},
    )
    serial = run_scenario(cfg, parallelism=1)
    parallel = run_scenario(cfg, parallelism=2)
    assert serial.tables['results'].rows == parallel.tables['results'].rows
    rows = _results(serial)
    assert [row['detuning_fraction'] for row in rows] == [0.1, 0.2, 0.3]
    assert serial.summary['upper_above_lower'] is True


def test_detuning_sweep_population_rises_away_from_edge():
    cfg = ScenarioConfig(
        scenario='DetuningSweep',
        grid_N=400,
        atom={'d_s': 2, 'g': 5e-4},
        evolve={'enabled': False},
        sweep_axis={'parameter': 'detuning_fraction', 'values': [0.05, 0.1, 0.2, 0.3, 0.5]},
    )
    result = run_scenario(cfg)
    assert all(row['error'] is None for row in _results(result))
    assert result.summary['upper_above_lower'] is True
    assert result.summary['upper_increasing_with_detuning'] is True
    assert result.summary['lower_increasing_with_detuning'] is True


def test_unexpected_error_stays_in_its_row(monkeypatch):
    """Un fallo ajeno a la jerarquía de errores marca la fila con código 1 y el barrido sigue."""
    evaluate = points.EVALUATORS[ScenarioName.BOUND_STATE_SWEEP]

    def flaky(cfg, index, value, keep_trajectory):
        if value == 3:
            raise RuntimeError('fallo de prueba')
        return evaluate(cfg, index, value, keep_trajectory)

    monkeypatch.setitem(points.EVALUATORS, ScenarioName.BOUND_STATE_SWEEP, flaky)
    cfg = ScenarioConfig(
        scenario='BoundStateSweep',
        grid_N=200,
        evolve={'enabled': False},
        sweep_axis={'parameter': 'd_s', 'values': [1, 3, 5]},
    )
    results = sweep(cfg)
    failed = [p for p in results if p.failed]
    assert [p.value for p in failed] == [3]
    assert failed[0].error == 'RuntimeError: fallo de prueba'
    assert failed[0].error_code == EXIT_UNEXPECTED
    assert failed[0].row == {'d_s': 3}
    assert all(p.error is None for p in results if p.value != 3)


def test_sweep_orders_points_by_value():
    cfg = ScenarioConfig(
        scenario='BoundStateSweep',
        grid_N=200,
        evolve={'enabled': False},
        sweep_axis={'parameter': 'd_s', 'values': [5, 1, 3, 1]},
    )
    points = sweep(cfg)
    assert [(p.value, p.index) for p in points] == [(1, 1), (1, 3), (3, 2), (5, 0)]


@pytest.mark.parametrize('fraction', [0.2, 0.5])
def test_distance_sweep_decay_length(fraction):
    cfg = ScenarioConfig(
        scenario='TwoAtomDistanceSweep',
        grid_N=2000,
        atom={'d_s': 3},
        target={'edge': 'upper', 'detuning_fraction': fraction},
        evolve={'enabled': False},
        sweep_axis={'parameter': 'D_q', 'values': list(range(4, 15))},
    )
    result = run_scenario(cfg)
    rows = _results(result)
    signs = np.sign([row['j_closed_form'] for row in rows])
    assert np.all(signs[1:] == -signs[:-1])
    assert result.summary['slope_relative_error'] < 0.1
    assert result.summary['decay_slope'] == pytest.approx(-result.summary['beta'], rel=1e-6)


def test_bound_state_sweep_with_evolution():
    """La población estacionaria de la evolución coincide con el residuo sobre la rejilla."""
    cfg = ScenarioConfig(
        scenario='BoundStateSweep',
        grid_N=200,
        atom={'g': 1e-3},
        sweep_axis={'parameter': 'd_s', 'values': [1]},
    )
    result = run_scenario(cfg)
    row = _results(result)[0]
    assert row['error'] is None
    assert row['population_num'] == pytest.approx(row['population_mode_sum'], abs=0.05)
    assert {'results', 'trajectory', 'amplitudes'} <= set(result.tables)
    assert result.tables['amplitudes'].header == ['t', 're_ce_1', 'im_ce_1', 'mode_pop', 'norm']


@pytest.mark.parametrize('path', sorted(CONFIG_DIR.glob('*.json')), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    data = json.loads(path.read_text(encoding='utf-8'))
    cfg = ScenarioConfig(**data)
    assert cfg.scenario.value == data['scenario']


@pytest.mark.slow
def test_two_atom_exchange_at_mid_gap():
    """
    Intercambio en mitad del gap con d_s = 3 y D_q = 6 (configuración distribuida).

    Se usa N = 400 con el mismo N·g² que N = 2000 y g = 1e-4, así que J₁₂
    no cambia. El periodo sigue a 2|J₁₂| de la suma de modos; la forma
    cerrada, que solo ve el borde superior, sobrestima |J₁₂| allí.
    """
    data = json.loads((CONFIG_DIR / 'two_atom_rabi.json').read_text(encoding='utf-8'))
    assert (data['grid_N'], data['atom']['g'], data['D_q']) == (2000, 1e-4, 6)
    n_modes = 400
    data['atom']['g'] = math.sqrt(data['grid_N'] * data['atom']['g'] ** 2 / n_modes)
    data['grid_N'] = n_modes
    cfg = ScenarioConfig(**data)
    assert cfg.target.detuning_fraction == 0.5
    result = run_scenario(cfg)
    row = _results(result)[0]
    assert row['error'] is None
    assert row['contrast'] > 0.9
    assert row['exchange_num'] == pytest.approx(2 * abs(row['j_mode_sum']), rel=0.05)
    assert row['relative_error_mode_sum'] < 0.05
    assert row['j_quadrature'] == pytest.approx(row['j_closed_form'], rel=0.15)
    assert 1.5 < row['closed_form_ratio'] < 4.0
    assert 'rabi_trajectory' in result.tables


@pytest.mark.slow
def test_decay_sweep_numeric_follows_analytic():
    """Γ numérico frente a d_s: sigue a la fórmula markoviana y se anula en d_s = 2, 6, 10."""
    cfg = ScenarioConfig(
        scenario='DecaySweep',
        grid_N=500,
        atom={'g': 8.2e-4},
        sweep_axis={'parameter': 'd_s', 'values': [1, 2, 3, 4, 5, 6, 10]},
    )
    rows = _results(run_scenario(cfg, parallelism=2))
    assert all(row['error'] is None for row in rows)
    largest = max(abs(row['gamma_num']) for row in rows)
    for row in rows:
        if int(row['d_s']) in (2, 6, 10):
            assert row['gamma_analytic'] < 1e-12 * largest
            assert abs(row['gamma_num']) <= 1e-2 * largest
        else:
            assert row['gamma_num'] == pytest.approx(row['gamma_analytic'], rel=0.1)
