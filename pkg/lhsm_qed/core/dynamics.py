"""
Evolución de Schrödinger en el subespacio de una excitación y extracción
de tasas de decaimiento, poblaciones estacionarias y frecuencias de Rabi.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..config import (
    MIN_RABI_CONTRAST,
    STABILITY_LIMIT,
    TAIL_FRACTION,
    TAIL_STABILITY,
    load_settings,
)
from ..exceptions import (
    ConfigError,
    NaNDetectedError,
    NoDominantPeakError,
    NonMonotonicWindowError,
    NormDriftError,
    NotConvergedError,
    StabilityGuardError,
    UnderflowWindowError,
)
from ..schemas.params import Band, EvolveConfig, LatticeParams, Propagator
from .bandstructure import QuadraticBandEdge, group_velocity
from .hamiltonian import ArrowheadHamiltonian

logger = logging.getLogger(__name__)

# Subida máxima tolerada en ln|c_e|², relativa a la caída total de la ventana
MONOTONIC_RISE_TOLERANCE = 1e-3
UNDERFLOW_POPULATION = 1e-12
# Modelo de coste del modo auto, en operaciones elementales de numpy
DENSE_OP_WEIGHT = 1.0
STEP_OVERHEAD_OPS = 2e4
MATVEC_PASSES = 10
MIN_SPECTRAL_SAMPLES = 4


@dataclass(frozen=True)
class AtomExcited:
    """Estado inicial |e, 0⟩ con el átomo `index` excitado."""
    index: int = 0


@dataclass(frozen=True)
class Trajectory:
    t_grid: np.ndarray
    atom_amplitudes: np.ndarray  # forma (Q, T)
    mode_population_total: np.ndarray
    norm_series: np.ndarray
    energy_series: np.ndarray

    @property
    def n_atoms(self) -> int:
        return self.atom_amplitudes.shape[0]

    def population(self, index: int = 0) -> np.ndarray:
        return np.abs(self.atom_amplitudes[index]) ** 2

    @property
    def max_norm_drift(self) -> float:
        return float(np.max(np.abs(self.norm_series - 1.0)))

    def csv_header(self) -> List[str]:
        header = ['t']
        for q in range(1, self.n_atoms + 1):
            header += [f're_ce_{q}', f'im_ce_{q}']
        return header + ['mode_pop', 'norm']

    def to_csv_rows(self) -> List[List[float]]:
        rows = []
        for i, t in enumerate(self.t_grid):
            row = [float(t)]
            for q in range(self.n_atoms):
                c = self.atom_amplitudes[q, i]
                row += [float(c.real), float(c.imag)]
            row += [float(self.mode_population_total[i]), float(self.norm_series[i])]
            rows.append(row)
        return rows


@dataclass(frozen=True)
class DecayFit:
    rate: float
    intercept: float
    residual: float
    window: Tuple[float, float]


def rk4_step(ham: ArrowheadHamiltonian, psi: np.ndarray, dt: float) -> np.ndarray:
    k1 = -1j * ham.matvec(psi)
    k2 = -1j * ham.matvec(psi + 0.5 * dt * k1)
    k3 = -1j * ham.matvec(psi + 0.5 * dt * k2)
    k4 = -1j * ham.matvec(psi + dt * k3)
    return psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_propagator(ham: ArrowheadHamiltonian, dt: float, stride: int) -> np.ndarray:
    """Mapa RK4 denso U = Σ_{n≤4} (−iHdt)ⁿ/n!, elevado a `stride`."""
    a = -1j * dt * ham.to_dense()
    eye = np.eye(ham.dimension, dtype=complex)
    # Horner: I + A(I + A/2(I + A/3(I + A/4)))
    u = eye + a / 4.0
    u = eye + (a @ u) / 3.0
    u = eye + (a @ u) / 2.0
    u = eye + a @ u
    return np.linalg.matrix_power(u, stride)


def _check_stability(ham: ArrowheadHamiltonian, cfg: EvolveConfig) -> None:
    product = cfg.dt * ham.max_abs_diagonal
    if product > STABILITY_LIMIT * (1.0 + 1e-12):
        raise StabilityGuardError(
            f"dt·max|diag| = {product:.4g} supera {STABILITY_LIMIT}",
            {'dt': cfg.dt, 'max_abs_diagonal': ham.max_abs_diagonal},
        )


def stable_dt(ham: ArrowheadHamiltonian) -> float:
    """Mayor paso que respeta la guardia de estabilidad."""
    return STABILITY_LIMIT / ham.max_abs_diagonal


def choose_dense(
    dimension: int,
    n_steps: int,
    stride: int,
    dense_max_dim: int,
    dense_limit_dim: int,
) -> bool:
    """
    Decide el camino del modo auto.

    Hasta `dense_max_dim` siempre denso; por encima de `dense_limit_dim`
    nunca. Entre ambos se comparan operaciones estimadas: el denso paga
    ~dim³ por producto de matrices (Horner más potencia binaria) y dim²
    por registro; el paso a paso paga 4 matvec O(dim) más el coste fijo
    de Python en cada paso.
    """
    if dimension <= dense_max_dim:
        return True
    if dimension > dense_limit_dim:
        return False
    n_records = n_steps // stride + 1
    products = 3 + 2 * max(1, int(np.ceil(np.log2(max(stride, 2)))))
    dense_ops = DENSE_OP_WEIGHT * dimension ** 3 * products + n_records * dimension ** 2
    stepper_ops = n_steps * 4 * (STEP_OVERHEAD_OPS + MATVEC_PASSES * dimension)
    return dense_ops < stepper_ops


def evolve(
    ham: ArrowheadHamiltonian,
    initial: AtomExcited,
    cfg: EvolveConfig,
    dense_max_dim: Optional[int] = None,
) -> Trajectory:
    """
    Integra iψ̇ = Hψ con RK4 de paso fijo desde |e, 0⟩.

    Args:
        ham: Hamiltoniano (su marco debe coincidir con cfg.frame).
        initial: Átomo excitado inicialmente.
        cfg: Paso, horizonte, tolerancia y decimación.
        dense_max_dim: Dimensión hasta la que el modo auto usa siempre el propagador denso.

    Returns:
        Trayectoria con amplitudes atómicas, población de modos, norma y energía.
    """
    if ham.frame != cfg.frame:
        raise ConfigError(
            f"El Hamiltoniano está en el marco {ham.frame.value} y la evolución pide {cfg.frame.value}"
        )
    if not 0 <= initial.index < ham.n_atoms:
        raise ConfigError(f"Índice de átomo inicial fuera de rango: {initial.index}")
    _check_stability(ham, cfg)

    m = ham.n_modes_total
    stride = cfg.record_stride
    n_records = cfg.n_steps // stride + 1
    settings = load_settings()
    limit = dense_max_dim if dense_max_dim is not None else settings.dense_max_dim
    use_dense = cfg.propagator == Propagator.DENSE or (
        cfg.propagator == Propagator.AUTO
        and choose_dense(ham.dimension, cfg.n_steps, stride, limit, max(limit, settings.dense_limit_dim))
    )
    logger.info(
        f"Evolución: dim={ham.dimension}, pasos={cfg.n_steps}, registros={n_records}, "
        f"propagador={'denso' if use_dense else 'paso a paso'}"
    )

    psi = np.zeros(ham.dimension, dtype=complex)
    psi[m + initial.index] = 1.0
    propagator = rk4_propagator(ham, cfg.dt, stride) if use_dense else None

    t_grid = np.arange(n_records) * stride * cfg.dt
    amplitudes = np.empty((ham.n_atoms, n_records), dtype=complex)
    mode_pop = np.empty(n_records)
    norms = np.empty(n_records)
    energies = np.empty(n_records)

    for r in range(n_records):
        if r > 0:
            if use_dense:
                psi = propagator @ psi
            else:
                for _ in range(stride):
                    psi = rk4_step(ham, psi, cfg.dt)
        if not np.all(np.isfinite(psi)):
            raise NaNDetectedError("NaN/inf en el vector de estado", {'t': float(t_grid[r])})
        amplitudes[:, r] = psi[m:]
        mode_pop[r] = float(np.sum(np.abs(psi[:m]) ** 2))
        norms[r] = mode_pop[r] + float(np.sum(np.abs(psi[m:]) ** 2))
        energies[r] = ham.energy(psi)
        drift = abs(norms[r] - 1.0)
        if drift > cfg.tolerance:
            logger.error(f"Deriva de norma {drift:.3e} en t={t_grid[r]:.4g}")
            raise NormDriftError(
                f"Deriva de norma {drift:.3e} supera la tolerancia {cfg.tolerance}",
                {'t': float(t_grid[r]), 'drift': drift},
            )

    return Trajectory(
        t_grid=t_grid,
        atom_amplitudes=amplitudes,
        mode_population_total=mode_pop,
        norm_series=norms,
        energy_series=energies,
    )


def fit_decay_rate(
    traj: Trajectory,
    window: Tuple[float, float],
    atom_index: int = 0,
    strict: bool = True,
) -> DecayFit:
    """
    Ajuste por mínimos cuadrados de ln|c_e|² = a − Γt en la ventana.

    Con `strict` se exige caída monótona (subidas menores que 10⁻³ de la
    caída total se toleran); una ventana no monótona indica régimen no
    markoviano.
    """
    t0, t1 = window
    t_last = float(traj.t_grid[-1])
    if t1 > t_last * (1.0 + 1e-9):
        logger.warning(
            f"La ventana de ajuste termina en t={t1:.6g}, después del último registro "
            f"(t={t_last:.6g}); se recorta"
        )
        t1 = t_last
    mask = (traj.t_grid >= t0) & (traj.t_grid <= t1)
    if np.count_nonzero(mask) < 3:
        raise UnderflowWindowError(
            "La ventana de ajuste contiene menos de 3 muestras", {'window': window}
        )
    t = traj.t_grid[mask]
    pop = traj.population(atom_index)[mask]
    if np.min(pop) <= UNDERFLOW_POPULATION:
        raise UnderflowWindowError(
            "|c_e|² por debajo del umbral de subdesbordamiento en la ventana",
            {'window': window, 'min_population': float(np.min(pop))},
        )
    log_pop = np.log(pop)
    if strict:
        drop = log_pop[0] - log_pop[-1]
        rise = float(np.max(np.diff(log_pop)))
        if drop <= 0 or rise > MONOTONIC_RISE_TOLERANCE * drop:
            raise NonMonotonicWindowError(
                "|c_e|² no decrece de forma monótona en la ventana (régimen no markoviano)",
                {'window': window, 'max_rise': rise, 'total_drop': float(drop)},
            )
    coeffs, residuals, *_ = np.polyfit(t, log_pop, 1, full=True)
    slope, intercept = coeffs
    residual = float(np.sqrt(residuals[0] / t.size)) if residuals.size else 0.0
    return DecayFit(rate=float(-slope), intercept=float(intercept), residual=residual, window=(t0, t1))


def steady_population(
    traj: Trajectory,
    tail_fraction: float = TAIL_FRACTION,
    atom_index: int = 0,
) -> float:
    """Promedio de |c_e|² sobre la fracción final; falla si la cola aún deriva."""
    if not 0.0 < tail_fraction <= 0.5:
        raise ConfigError(f"tail_fraction debe estar en (0, 0.5]: {tail_fraction}")
    pop = traj.population(atom_index)
    n = pop.size
    n_tail = max(1, int(round(tail_fraction * n)))
    tail = float(np.mean(pop[-n_tail:]))
    doubled = float(np.mean(pop[-min(n, 2 * n_tail):]))
    scale = max(abs(tail), 1e-300)
    change = abs(doubled - tail) / scale
    if change > TAIL_STABILITY:
        raise NotConvergedError(
            f"La población de cola no ha convergido (cambio relativo {change:.3%})",
            {'tail_mean': tail, 'doubled_mean': doubled},
        )
    return min(max(tail, 0.0), 1.0)


def dominant_frequency(t_grid: np.ndarray, signal: np.ndarray) -> float:
    """Frecuencia angular del pico espectral dominante (Hann + relleno + interpolación parabólica)."""
    if t_grid.size < MIN_SPECTRAL_SAMPLES or signal.size != t_grid.size:
        raise ConfigError(
            f"Se necesitan al menos {MIN_SPECTRAL_SAMPLES} muestras alineadas para el espectro",
            {'n_times': int(t_grid.size), 'n_signal': int(signal.size)},
        )
    dt = float(t_grid[1] - t_grid[0])
    centred = signal - np.mean(signal)
    windowed = centred * np.hanning(centred.size)
    n_fft = 8 * centred.size
    spectrum = np.abs(np.fft.rfft(windowed, n=n_fft))
    peak = int(np.argmax(spectrum[1:])) + 1
    offset = 0.0
    if 1 <= peak < spectrum.size - 1:
        a, b, c = np.log(spectrum[peak - 1:peak + 2] + 1e-300)
        denom = a - 2.0 * b + c
        if denom != 0.0:
            offset = 0.5 * (a - c) / denom
    return 2.0 * np.pi * (peak + offset) / (n_fft * dt)


def rabi_frequency(traj: Trajectory, atom_index: int = 1) -> float:
    """Frecuencia angular del intercambio de población |c_{e,b}(t)|² (= 2|J₁₂|)."""
    pop = traj.population(atom_index)
    contrast = float(np.max(pop) - np.min(pop))
    if contrast <= MIN_RABI_CONTRAST:
        raise NoDominantPeakError(
            f"Contraste de intercambio demasiado bajo ({contrast:.3g})",
            {'contrast': contrast},
        )
    return dominant_frequency(traj.t_grid, pop)


def revival_horizon(
    n_modes: int,
    params: LatticeParams,
    k_r: Optional[float] = None,
    band: Band = Band.UPPER,
    edge: Optional[QuadraticBandEdge] = None,
) -> float:
    """
    Horizonte de confianza antes del reingreso del paquete por la frontera periódica.

    Con `k_r` es N·ΔX/|v_g(k_r)|; con `edge` (átomo en el gap) se usa la
    velocidad no nula más lenta de la rejilla junto al borde.
    """
    if edge is not None:
        step = 2.0 * np.pi / n_modes
        k = edge.k0 - step if edge.k0 > 0 else step
        return n_modes / abs(group_velocity(k, edge.band, params))
    if k_r is None:
        raise ConfigError("revival_horizon necesita k_r o un borde de banda")
    return n_modes / abs(group_velocity(k_r, band, params))
