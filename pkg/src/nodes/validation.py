import logging

from state import RunState
from tools.errors import InputError, NetidentError
from tools.network import validate_network

logger = logging.getLogger(__name__)


def validation_node(state: RunState) -> RunState:
    """
    Check the loaded network: hollow G, monic H, Lambda positive definite,
    stability of the network, of H and of R, minimum-phase H.

    For the `validate` command the report is the result and a failed check
    is a condition failure. Every other command refuses an invalid network.

    Returns:
        Updated RunState with validation populated
    """
    try:
        if state.get('error'):
            return state

        config = state['config']
        report = validate_network(state['network'])
        summary = report.to_dict()

        if config.command == 'validate':
            return {
                **state,
                'validation': summary,
                'result': {'validation': summary},
                'conditions_passed': report.valid
            }

        if not report.valid:
            details = ", ".join(report.failures())
            raise InputError(f"invalid network: {details}", stage="validate")

        return {**state, 'validation': summary}

    except NetidentError as e:
        return {**state, 'error': f"Validation Error: {e}", 'exit_code': e.exit_code}

    except Exception as e:
        logger.debug("unexpected validation failure", exc_info=True)
        return {**state, 'error': f"Unexpected Validation Error: {type(e).__name__}: {e}", 'exit_code': 3}
