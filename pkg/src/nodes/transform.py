import logging

from state import RunState
from tools.errors import NetidentError
from tools.immersion import (delay_pattern_of, predicted_delay_pattern, second_order_check, transform_network,
                             verify_invariance)
from tools.transfer import uniform_grid

logger = logging.getLogger(__name__)


def transform_node(state: RunState) -> RunState:
    """
    Immerse, factorize and rewrite the network into the canonical form for
    the selection, then compare the target entry with the true module.

    Returns:
        Updated RunState with result and conditions_passed populated
    """
    try:
        if state.get('error'):
            return state

        config = state['config']
        net = state['network']
        sel = state['selection']

        transformed = transform_network(net, sel, grid_size=min(config.grid, 128))
        invariance = verify_invariance(net, sel, tol=config.tol, grid_size=config.grid, transformed=transformed)
        grid = uniform_grid(min(config.grid, 128))
        observed = delay_pattern_of(transformed)
        predicted = predicted_delay_pattern(net, sel)

        result = {
            'selection': sel.to_dict(),
            'transformed': transformed.to_dict(),
            'invariance': invariance.to_dict(),
            'second_order_deviation': second_order_check(net, sel, transformed, grid),
            'delay_pattern': {f"{y},{d}": sp for (y, d), sp in sorted(observed.items())},
            'delay_pattern_matches_graph': all(observed[k] == predicted[k] for k in observed),
        }
        if config.dump:
            result['coefficients'] = transformed.coefficient_table()

        return {**state, 'result': result, 'conditions_passed': invariance.passed}

    except NetidentError as e:
        return {**state, 'error': f"Transform Error: {e}", 'exit_code': e.exit_code}

    except Exception as e:
        logger.debug("unexpected transform failure", exc_info=True)
        return {**state, 'error': f"Unexpected Transform Error: {type(e).__name__}: {e}", 'exit_code': 3}
