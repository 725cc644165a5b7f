"""
Persistencia de resultados: tablas CSV, gráficos SVG, config.json y manifest.json.

Todas las tablas llevan la línea `# config-hash: <hex>` antes de la cabecera
y se formatean con 17 cifras significativas para que dos ejecuciones de la
misma configuración produzcan archivos idénticos byte a byte.
"""
import csv
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Sequence

from ..config import CSV_DIGITS
from ..schemas.scenario import ScenarioConfig

logger = logging.getLogger(__name__)


@dataclass
class Table:
    header: List[str]
    rows: List[Sequence[Any]] = field(default_factory=list)


@dataclass
class ResultSet:
    scenario: str
    config_hash: str
    config_json: str
    tables: Dict[str, Table] = field(default_factory=dict)
    plots: Dict[str, str] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    n_points: int = 1
    failures: List[int] = field(default_factory=list)

    @property
    def all_failed(self) -> bool:
        return bool(self.failures) and len(self.failures) == self.n_points

    def manifest(self, version: str, seedless: bool = False) -> Dict[str, Any]:
        manifest = {
            'scenario': self.scenario,
            'config_hash': self.config_hash,
            'version': version,
            'tables': sorted(f'{name}.csv' for name in self.tables),
            'plots': sorted(f'{name}.svg' for name in self.plots),
            'n_points': self.n_points,
            'n_failed': len(self.failures),
            'summary': self.summary,
        }
        if not seedless:
            manifest['timestamp'] = datetime.now().isoformat()
        return manifest


def config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(cfg.canonical_json().encode('utf-8')).hexdigest()


def format_value(value: Any) -> str:
    """Formato fijo: floats con 17 cifras significativas, vacío para None."""
    if value is None:
        return ''
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f'{value:.{CSV_DIGITS}g}'
    if hasattr(value, 'item'):
        return format_value(value.item())
    return str(value)


def render_csv(table: Table, digest: str) -> str:
    buffer = io.StringIO()
    buffer.write(f'# config-hash: {digest}\n')
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(table.header)
    for row in table.rows:
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def table_from_rows(rows: List[Dict[str, Any]], leading: Sequence[str] = ()) -> Table:
    """Une filas heterogéneas; columnas en orden de primera aparición y `error` al final."""
    header: List[str] = list(leading)
    for row in rows:
        for key in row:
            if key not in header and key != 'error':
                header.append(key)
    header.append('error')
    return Table(header=header, rows=[[row.get(col) for col in header] for row in rows])


def write_result_set(result: ResultSet, out_dir: Path, version: str, seedless: bool = False) -> List[Path]:
    """
    Escribe todos los artefactos del ResultSet en out_dir.

    Returns:
        Rutas escritas, en orden.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    try:
        config_path = out_dir / 'config.json'
        config_path.write_text(result.config_json, encoding='utf-8')
        written.append(config_path)

        for name, table in sorted(result.tables.items()):
            path = out_dir / f'{name}.csv'
            with open(path, 'w', encoding='utf-8', newline='') as f:
                f.write(render_csv(table, result.config_hash))
            written.append(path)

        for name, svg in sorted(result.plots.items()):
            path = out_dir / f'{name}.svg'
            path.write_text(svg, encoding='utf-8')
            written.append(path)

        manifest_path = out_dir / 'manifest.json'
        with open(manifest_path, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(result.manifest(version, seedless), f, indent=2, ensure_ascii=False, sort_keys=True)
            f.write('\n')
        written.append(manifest_path)
    except OSError as e:
        logger.error(f"Fallo al guardar los resultados en {out_dir}: {e}", exc_info=True)
        raise

    logger.info(f"Resultados guardados en {out_dir} ({len(written)} archivos)")
    return written
