import logging
import sys

from state import RunState
from tools.reports import build_report, render_text, to_json, write_report

logger = logging.getLogger(__name__)


def _exit_code(state: RunState) -> int:
    if state.get('error'):
        return state.get('exit_code') or 3
    return 0 if state.get('conditions_passed') else 1


def report_node(state: RunState) -> RunState:
    """
    Assemble the report document and emit it.

    The JSON report goes to --output (stdout when absent, and always for
    `simulate`, whose --output is the dataset). --text adds the plain-text
    rendering on stdout. An error becomes one `Error:` line on stderr.

    Returns:
        Updated RunState with report and exit_code populated
    """
    config = state['config']
    code = _exit_code(state)
    report = build_report(config.command, state.get('result'), state.get('input_sha256'), config.to_dict(),
                          code, state.get('error'), state.get('artifacts'))
    try:
        if config.output and config.command != 'simulate':
            write_report(config.output, report)
        else:
            sys.stdout.write(to_json(report))
        if config.text:
            sys.stdout.write(render_text(report))
    except OSError as e:
        message = f"Report Error: cannot write {config.output}: {e.strerror}"
        print(f"Error: {message}", file=sys.stderr)
        return {**state, 'report': report, 'error': state.get('error') or message, 'exit_code': 2}

    if state.get('error'):
        print(f"Error: {state['error']}", file=sys.stderr)
    return {**state, 'report': report, 'exit_code': code}
