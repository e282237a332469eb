"""
Scenario files, the task runner, reports and run history behind the subrq command
"""

from .scenario import Scenario, load_scenario, parse_scenario, validate_task, build_control, TASK_TYPES
from .tasks import TaskRunner, on_shell
from .report_writer import SCHEMA, build_report, write_reports, report_text, report_table, deterministic_part
from .run_storage import RunStorage

__all__ = [
    'Scenario', 'load_scenario', 'parse_scenario', 'validate_task', 'build_control', 'TASK_TYPES',
    'TaskRunner', 'on_shell',
    'SCHEMA', 'build_report', 'write_reports', 'report_text', 'report_table', 'deterministic_part',
    'RunStorage',
]
