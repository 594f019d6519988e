import logging

from state import RunState
from tools.errors import NetidentError
from tools.graph import Selection, check_delay_conditions, check_invariance_conditions
from tools.immersion import predicted_delay_pattern, transform_network, unconfounded_noise_check
from tools.simulation import Dataset, check_informativity
from tools.transfer import uniform_grid

logger = logging.getLogger(__name__)


def check_node(state: RunState) -> RunState:
    """
    Graph conditions for a selection: module invariance, delay conditions
    (with the measured inputs B, and with the inputs whose innovations are
    correlated with the outputs), noise-block orthogonality and, when
    requested, data informativity.

    Returns:
        Updated RunState with result and conditions_passed populated
    """
    try:
        if state.get('error'):
            return state

        config = state['config']
        net = state['network']
        sel = state['selection']

        invariance = check_invariance_conditions(net, sel)
        pattern = predicted_delay_pattern(net, sel)
        delays = check_delay_conditions(net, sel, pattern)
        result = {
            'selection': sel.to_dict(),
            'conditions': invariance.to_dict(),
            'delay_conditions': delays.to_dict(),
        }
        passed = invariance.passed and delays.passed

        if invariance.passed:
            transformed = transform_network(net, sel, grid_size=min(config.grid, 128))
            correlated = sorted(set(sel.U) - set(transformed.uncorrelated_inputs()))
            variant = Selection.from_sets(sel.L, sel.j, sel.i, sel.Y, sel.D,
                                          A=set(sel.U) - set(correlated), B=correlated)
            result['correlated_inputs'] = correlated
            result['uncorrelated_inputs'] = transformed.uncorrelated_inputs()
            result['delay_conditions_correlated_inputs'] = check_delay_conditions(net, variant, pattern).to_dict()
            result['noise_orthogonality'] = unconfounded_noise_check(net, sel, uniform_grid(min(config.grid, 128)))
            result['transform_warnings'] = transformed.warnings
        else:
            transformed = None
            logger.info("invariance conditions failed: %s", invariance.failures())

        if config.informativity is not None:
            data = Dataset.load(config.data) if config.informativity == 'data' else None
            report = check_informativity(net, sel, mode=config.informativity, data=data,
                                         grid=uniform_grid(min(config.grid, 128)), transformed=transformed)
            result['informativity'] = report.to_dict()
            passed = passed and report.passed

        return {**state, 'result': result, 'conditions_passed': passed}

    except NetidentError as e:
        return {**state, 'error': f"Check Error: {e}", 'exit_code': e.exit_code}

    except Exception as e:
        logger.debug("unexpected check failure", exc_info=True)
        return {**state, 'error': f"Unexpected Check Error: {type(e).__name__}: {e}", 'exit_code': 3}
