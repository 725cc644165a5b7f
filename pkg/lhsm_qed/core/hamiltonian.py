"""
Hamiltoniano de una excitación (2N+Q) con estructura de punta de flecha.

Orden de la base: N modos de la banda superior, N de la inferior, Q átomos.
"""
import csv
import io
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from ..config import UPPER_CUTOFF, load_settings
from ..exceptions import DimensionOverflowError, DomainError
from ..schemas.params import AtomPair, Band, Frame, GiantAtom, LatticeParams
from .bandstructure import _omega_unchecked, brillouin_grid

logger = logging.getLogger(__name__)

Atoms = Union[GiantAtom, AtomPair]


@dataclass(frozen=True)
class ModeGrid:
    n_modes: int
    k_values: np.ndarray
    frequencies_upper: np.ndarray
    frequencies_lower: np.ndarray
    upper_cutoff: float
    n_pinned: int

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.n_modes

    @property
    def frequencies(self) -> np.ndarray:
        """Frecuencias de los 2N modos en el orden de la base."""
        return np.concatenate([self.frequencies_upper, self.frequencies_lower])

    @property
    def k_both(self) -> np.ndarray:
        return np.concatenate([self.k_values, self.k_values])


def mode_grid(n_modes: int, params: LatticeParams, upper_cutoff: float = UPPER_CUTOFF) -> ModeGrid:
    """
    Discretiza la primera zona de Brillouin con N modos por banda.

    La rejilla contiene k = 0; la rama superior se fija a `upper_cutoff` en
    k = 0 y en todo modo cuya frecuencia supere el corte.
    """
    if n_modes < 2 or n_modes % 2:
        raise DomainError("N debe ser par y >= 2", {'n_modes': n_modes})
    k = brillouin_grid(n_modes)
    upper = _omega_unchecked(k, Band.UPPER, params.epsilon)
    pinned = ~(upper < upper_cutoff)
    upper = np.where(pinned, upper_cutoff, upper)
    lower = _omega_unchecked(k, Band.LOWER, params.epsilon)
    n_pinned = int(np.count_nonzero(pinned))
    logger.debug(f"Rejilla de modos N={n_modes}: {n_pinned} modos superiores fijados a {upper_cutoff}")
    return ModeGrid(
        n_modes=n_modes,
        k_values=k,
        frequencies_upper=upper,
        frequencies_lower=lower,
        upper_cutoff=upper_cutoff,
        n_pinned=n_pinned,
    )


def coupling_amplitudes(atom: GiantAtom, grid: ModeGrid, D_q: Optional[int] = None) -> np.ndarray:
    """
    g_k = g(1 + e^{ik d_s}), repetido para ambas bandas (longitud 2N).

    Con `D_q` se devuelve el acoplamiento del segundo átomo, g_k·e^{ik D_q}.
    """
    k = grid.k_values
    amps = atom.g * (1.0 + np.exp(1j * k * atom.d_s))
    if D_q is not None:
        amps = amps * np.exp(1j * k * D_q)
    return np.concatenate([amps, amps])


@dataclass(frozen=True)
class ArrowheadHamiltonian:
    """
    Matriz hermítica de punta de flecha.

    `border[:, i]` guarda la columna de acoplamientos del átomo i; la fila
    conjugada se obtiene al operar, nunca se almacena.
    """

    mode_diagonal: np.ndarray
    border: np.ndarray
    atom_diagonal: np.ndarray
    frame: Frame
    omega_ref: float

    @property
    def n_modes_total(self) -> int:
        return self.mode_diagonal.size

    @property
    def n_atoms(self) -> int:
        return self.atom_diagonal.size

    @property
    def dimension(self) -> int:
        return self.n_modes_total + self.n_atoms

    @property
    def nnz(self) -> int:
        return self.n_modes_total + 2 * self.n_modes_total * self.n_atoms + self.n_atoms

    @property
    def max_abs_diagonal(self) -> float:
        return float(max(np.max(np.abs(self.mode_diagonal)), np.max(np.abs(self.atom_diagonal))))

    def matvec(self, psi: np.ndarray) -> np.ndarray:
        m = self.n_modes_total
        modes, atoms = psi[:m], psi[m:]
        out = np.empty_like(psi, dtype=complex)
        out[:m] = self.mode_diagonal * modes + self.border @ atoms
        out[m:] = self.border.conj().T @ modes + self.atom_diagonal * atoms
        return out

    def to_dense(self) -> np.ndarray:
        m = self.n_modes_total
        dense = np.zeros((self.dimension, self.dimension), dtype=complex)
        dense[np.arange(m), np.arange(m)] = self.mode_diagonal
        q = np.arange(m, self.dimension)
        dense[q, q] = self.atom_diagonal
        dense[:m, m:] = self.border
        dense[m:, :m] = self.border.conj().T
        return dense

    def to_sparse(self) -> sp.csr_matrix:
        m = self.n_modes_total
        diag = sp.diags(np.concatenate([self.mode_diagonal, self.atom_diagonal]).astype(complex))
        upper = sp.bmat([[None, sp.csr_matrix(self.border)],
                         [sp.csr_matrix((self.n_atoms, m), dtype=complex), None]])
        return sp.csr_matrix(diag + upper + upper.conj().T)

    def energy(self, psi: np.ndarray) -> float:
        return float(np.real(np.vdot(psi, self.matvec(psi))))

    def hermiticity_defect(self) -> float:
        dense = self.to_dense()
        return float(np.max(np.abs(dense - dense.conj().T)))


def build_hamiltonian(
    params: LatticeParams,
    atoms: Atoms,
    grid: ModeGrid,
    frame: Frame = Frame.ROTATING,
    max_modes: Optional[int] = None,
) -> ArrowheadHamiltonian:
    """
    Construye el Hamiltoniano en el marco de laboratorio o rotante (ω_ref = ω_q).

    Args:
        params: Parámetros de la red (solo para trazabilidad; la rejilla ya
            contiene las frecuencias).
        atoms: Un átomo gigante o un par de átomos idénticos.
        grid: Rejilla de modos.
        frame: Lab o Rotating.
        max_modes: Límite de N; por defecto LHSM_QED_MAX_MODES.

    Returns:
        ArrowheadHamiltonian inmutable.
    """
    limit = max_modes if max_modes is not None else load_settings().max_modes
    if grid.n_modes > limit:
        raise DimensionOverflowError(
            f"N={grid.n_modes} supera el máximo configurado ({limit})",
            {'n_modes': grid.n_modes, 'max_modes': limit},
        )
    if isinstance(atoms, AtomPair):
        atom_list: Sequence[GiantAtom] = atoms.atoms
        columns = [coupling_amplitudes(atoms.atom_a, grid),
                   coupling_amplitudes(atoms.atom_a, grid, D_q=atoms.D_q)]
    else:
        atom_list = [atoms]
        columns = [coupling_amplitudes(atoms, grid)]
    omega_q = atom_list[0].omega_q
    omega_ref = omega_q if frame == Frame.ROTATING else 0.0
    ham = ArrowheadHamiltonian(
        mode_diagonal=grid.frequencies - omega_ref,
        border=np.column_stack(columns),
        atom_diagonal=np.array([a.omega_q - omega_ref for a in atom_list], dtype=float),
        frame=frame,
        omega_ref=omega_ref,
    )
    logger.info(
        f"Hamiltoniano construido: dim={ham.dimension}, Q={ham.n_atoms}, "
        f"marco={frame.value}, ε={params.epsilon}"
    )
    return ham


def dump_structure_csv(ham: ArrowheadHamiltonian) -> str:
    """Volcado de depuración con filas index,type,value."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['index', 'type', 'value'])
    for i, value in enumerate(ham.mode_diagonal):
        writer.writerow([i, 'mode_diagonal', repr(float(value))])
    m = ham.n_modes_total
    for q in range(ham.n_atoms):
        writer.writerow([m + q, 'atom_diagonal', repr(float(ham.atom_diagonal[q]))])
        for i, value in enumerate(ham.border[:, q]):
            writer.writerow([i, f'border_{q}', repr(complex(value))])
    return buffer.getvalue()
