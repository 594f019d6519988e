import json
import logging
from typing import Optional

from config import RunConfig
from state import RunState
from tools.errors import InputError, NetidentError
from tools.graph import Selection
from tools.network import NetworkSpec
from tools.selection import AccessibilitySpec, select_full_input, select_minimum_input, select_user

logger = logging.getLogger(__name__)


def load_selection(path: str, net: NetworkSpec) -> Selection:
    """Selection document or a `select` report holding one under result.selection."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise InputError(f"cannot read selection file: {e.strerror}", position=path)
    except json.JSONDecodeError as e:
        raise InputError(f"selection file is not JSON: {e.msg}", position=f"{path}:{e.lineno}:{e.colno}")
    if isinstance(doc, dict) and isinstance(doc.get("result"), dict) and "selection" in doc["result"]:
        doc = doc["result"]["selection"]
    if not isinstance(doc, dict):
        raise InputError("selection document must be a JSON object", position=path)
    return Selection.from_dict(doc, net.L)


def compute_selection(config: RunConfig, net: NetworkSpec) -> Selection:
    j, i = config.target
    if config.mode == "full":
        return select_full_input(net, i, j)
    if config.mode == "min":
        return select_minimum_input(net, i, j)
    return select_user(net, AccessibilitySpec(accessible=frozenset(config.accessible), i=i, j=j))


def resolve_selection(config: RunConfig, net: NetworkSpec) -> Optional[Selection]:
    if config.selection is not None:
        return load_selection(config.selection, net)
    if config.target is not None:
        return compute_selection(config, net)
    return None


def selection_node(state: RunState) -> RunState:
    """
    Provide the identification setup.

    `select` runs the chosen algorithm and reports it. The other commands
    read --selection or derive one from --target and --mode; MISO runs
    (--miso) need no selection.

    Returns:
        Updated RunState with selection populated
    """
    try:
        if state.get('error'):
            return state

        config = state['config']
        net = state['network']

        if config.miso is not None:
            return {**state, 'selection': None}

        sel = resolve_selection(config, net)
        if config.command == 'select':
            return {
                **state,
                'selection': sel,
                'result': {'selection': sel.to_dict(), 'mode': config.mode},
                'conditions_passed': True
            }
        return {**state, 'selection': sel}

    except NetidentError as e:
        return {**state, 'selection': None, 'error': f"Selection Error: {e}", 'exit_code': e.exit_code}

    except Exception as e:
        logger.debug("unexpected selection failure", exc_info=True)
        return {**state, 'selection': None,
                'error': f"Unexpected Selection Error: {type(e).__name__}: {e}", 'exit_code': 3}
