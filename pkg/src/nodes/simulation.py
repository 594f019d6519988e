import logging

from state import RunState
from tools.errors import NetidentError
from tools.simulation import simulate

logger = logging.getLogger(__name__)


def simulation_node(state: RunState) -> RunState:
    """
    Simulate N samples and write the dataset container to --output.

    Returns:
        Updated RunState with result and artifacts populated
    """
    try:
        if state.get('error'):
            return state

        config = state['config']
        data = simulate(state['network'], config.N, seed=config.seed)
        data.save(config.output)
        logger.info("wrote %s", config.output)

        return {
            **state,
            'result': {'dataset': {'path': config.output, 'N': data.N, 'L': data.L, 'seed': data.seed,
                                   'meta': data.meta}},
            'conditions_passed': True,
            'artifacts': state.get('artifacts', []) + [config.output]
        }

    except NetidentError as e:
        return {**state, 'error': f"Simulation Error: {e}", 'exit_code': e.exit_code}

    except OSError as e:
        return {**state, 'error': f"Simulation Error: cannot write dataset: {e.strerror}", 'exit_code': 2}

    except Exception as e:
        logger.debug("unexpected simulation failure", exc_info=True)
        return {**state, 'error': f"Unexpected Simulation Error: {type(e).__name__}: {e}", 'exit_code': 3}
