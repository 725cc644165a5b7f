"""Gráficos SVG estáticos (backend Agg, sin servidor gráfico)."""
import io
from typing import Optional, Sequence, Tuple

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# Identificadores internos del SVG estables entre ejecuciones
plt.rcParams['svg.hashsalt'] = 'lhsm-qed'

Series = Tuple[Sequence[float], Sequence[float], str]


def line_plot(
    series: Sequence[Series],
    title: str,
    xlabel: str,
    ylabel: str,
    logy: bool = False,
    markers: bool = False,
    hlines: Optional[Sequence[Tuple[float, str]]] = None,
) -> str:
    """
    Dibuja varias curvas y devuelve el SVG como texto.

    Args:
        series: Tuplas (x, y, etiqueta).
        title: Título del gráfico.
        xlabel: Etiqueta del eje x.
        ylabel: Etiqueta del eje y.
        logy: Escala logarítmica en y.
        markers: Dibuja marcadores en cada punto.
        hlines: Líneas horizontales (valor, etiqueta).

    Returns:
        Documento SVG sin fecha de creación.
    """
    fig, ax = plt.subplots(figsize=(7, 4.5))
    try:
        for x, y, label in series:
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            ax.plot(x, y, marker='o' if markers else None, markersize=4, label=label)
        for value, label in hlines or ():
            ax.axhline(value, linestyle='--', linewidth=0.8, color='gray', label=label)
        if logy:
            ax.set_yscale('log')
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        if any(label for *_, label in series):
            ax.legend()
        fig.tight_layout()
        buffer = io.StringIO()
        fig.savefig(buffer, format='svg', metadata={'Date': None})
        return buffer.getvalue()
    finally:
        plt.close(fig)
