from .output import ResultSet, Table, write_result_set
from .scenarios import run_scenario
from .sweep import sweep

__all__ = ['ResultSet', 'Table', 'run_scenario', 'sweep', 'write_result_set']
