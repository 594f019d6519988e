import logging

from state import RunState
from tools.errors import NetidentError
from tools.estimation import MisoSetup, Orders
from tools.montecarlo import montecarlo_bias, write_replica_csv

logger = logging.getLogger(__name__)


def montecarlo_node(state: RunState) -> RunState:
    """
    Repeat simulate + identify over seeded replicas and report the bias of
    the target-module coefficients.

    Returns:
        Updated RunState with result and artifacts populated
    """
    try:
        if state.get('error'):
            return state

        config = state['config']
        net = state['network']
        if config.miso is not None:
            j, i = config.target
            setup = MisoSetup(j=j, i=i, inputs=tuple(config.miso))
        else:
            setup = state['selection']

        report = montecarlo_bias(net, setup, config.montecarlo(), Orders(*config.orders))

        artifacts = list(state.get('artifacts', []))
        if config.csv:
            write_replica_csv(report, config.csv)
            artifacts.append(config.csv)

        return {
            **state,
            'result': {'bias': report.to_dict()},
            'conditions_passed': True,
            'artifacts': artifacts
        }

    except NetidentError as e:
        return {**state, 'error': f"Monte-Carlo Error: {e}", 'exit_code': e.exit_code}

    except OSError as e:
        return {**state, 'error': f"Monte-Carlo Error: cannot write CSV: {e.strerror}", 'exit_code': 2}

    except Exception as e:
        logger.debug("unexpected montecarlo failure", exc_info=True)
        return {**state, 'error': f"Unexpected Monte-Carlo Error: {type(e).__name__}: {e}", 'exit_code': 3}
