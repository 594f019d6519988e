import hashlib
import logging

from state import RunState
from tools.errors import NetidentError
from tools.network import load_network

logger = logging.getLogger(__name__)


def load_node(state: RunState) -> RunState:
    """
    Read and parse the network document named in the run config.

    Returns:
        Updated RunState with network and input_sha256 populated
    """
    try:
        if state.get('error'):
            return state

        config = state['config']
        net, raw = load_network(config.network)
        digest = hashlib.sha256(raw).hexdigest()
        logger.info("loaded %s: L=%d K=%d, %d modules", config.network, net.L, net.K, len(net.edges()))
        return {**state, 'network': net, 'input_sha256': digest}

    except NetidentError as e:
        return {**state, 'network': None, 'error': f"Load Error: {e}", 'exit_code': e.exit_code}

    except Exception as e:
        logger.debug("unexpected load failure", exc_info=True)
        return {**state, 'network': None, 'error': f"Unexpected Load Error: {type(e).__name__}: {e}",
                'exit_code': 3}
