import logging

from state import RunState
from tools.errors import InputError, NetidentError
from tools.estimation import MisoSetup, Orders, identify_ml, identify_wls, miso_direct, residual_whiteness
from tools.montecarlo import setup_model_set
from tools.simulation import Dataset

logger = logging.getLogger(__name__)


def identification_node(state: RunState) -> RunState:
    """
    Identify the target module from a dataset with the direct method:
    the MIMO predictor of the selection, or a MISO predictor with --miso.

    Returns:
        Updated RunState with result populated
    """
    try:
        if state.get('error'):
            return state

        config = state['config']
        net = state['network']
        data = Dataset.load(config.data)
        if data.L != net.L:
            raise InputError(f"dataset has {data.L} nodes, network has {net.L}", position=config.data)
        orders = Orders(*config.orders)
        estimator = config.estimator()

        if config.miso is not None:
            j, i = config.target
            setup = MisoSetup(j=j, i=i, inputs=tuple(config.miso))
            excitation = net.R.select([j - 1], list(range(net.K))) if net.K else None
            estimate = miso_direct(data, j, setup.inputs, orders, excitation, estimator, config.seed)
        else:
            sel = state['selection']
            j, i = sel.j, sel.i
            ms = setup_model_set(net, sel, orders)
            if config.criterion == 'ml':
                estimate = identify_ml(ms, data, estimator, config.seed)
            else:
                estimate = identify_wls(ms, data, None, estimator, config.seed)

        num, den = estimate.target_coefficients(j, i)
        true = net.module(j, i)
        result = {
            'estimate': estimate.to_dict(),
            'target_module': {'to': j, 'from': i, 'num': [float(v) for v in num], 'den': [float(v) for v in den]},
            'true_module': true.coefficients(),
            'whiteness': residual_whiteness(estimate.residuals),
        }
        if state.get('selection') is not None:
            result['selection'] = state['selection'].to_dict()
        if not estimate.diagnostics.get('converged', True):
            logger.warning("optimizer did not converge; reporting the best point")

        return {**state, 'result': result, 'conditions_passed': True}

    except NetidentError as e:
        return {**state, 'error': f"Identification Error: {e}", 'exit_code': e.exit_code}

    except Exception as e:
        logger.debug("unexpected identification failure", exc_info=True)
        return {**state, 'error': f"Unexpected Identification Error: {type(e).__name__}: {e}", 'exit_code': 3}
