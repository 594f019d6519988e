import argparse
import logging
import sys
from typing import List, Optional, Tuple

from langgraph.graph import END, StateGraph

from config import CRITERIA, SELECTION_MODES, RunConfig, default_log_level
from nodes.check import check_node
from nodes.identification import identification_node
from nodes.load import load_node
from nodes.montecarlo import montecarlo_node
from nodes.report import report_node
from nodes.selection import selection_node
from nodes.simulation import simulation_node
from nodes.transform import transform_node
from nodes.validation import validation_node
from state import RunState
from tools.errors import NetidentError

logger = logging.getLogger(__name__)

# command -> node run after the selection step
COMMAND_NODES = {
    "check": "check",
    "transform": "transform",
    "identify": "identification",
    "montecarlo": "montecarlo",
}


def create_graph():
    """Create the LangGraph pipeline"""
    workflow = StateGraph(RunState)

    workflow.add_node("load", load_node)
    workflow.add_node("validation", validation_node)
    workflow.add_node("selection", selection_node)
    workflow.add_node("check", check_node)
    workflow.add_node("transform", transform_node)
    workflow.add_node("simulation", simulation_node)
    workflow.add_node("identification", identification_node)
    workflow.add_node("montecarlo", montecarlo_node)
    workflow.add_node("report", report_node)

    workflow.set_entry_point("load")
    workflow.add_edge("load", "validation")

    workflow.add_conditional_edges(
        "validation",
        route_after_validation,
        {"selection": "selection", "simulation": "simulation", "report": "report"}
    )
    workflow.add_conditional_edges(
        "selection",
        route_after_selection,
        {name: name for name in list(COMMAND_NODES.values()) + ["report"]}
    )

    for name in list(COMMAND_NODES.values()) + ["simulation"]:
        workflow.add_edge(name, "report")
    workflow.add_edge("report", END)

    return workflow.compile()


def route_after_validation(state: RunState) -> str:
    """Errors and `validate` go straight to the report."""
    command = state['config'].command
    if state.get('error') or command == 'validate':
        return "report"
    if command == 'simulate':
        return "simulation"
    return "selection"


def route_after_selection(state: RunState) -> str:
    if state.get('error'):
        return "report"
    return COMMAND_NODES.get(state['config'].command, "report")


def initial_state(config: RunConfig) -> RunState:
    return {
        "config": config,
        "network": None,
        "input_sha256": None,
        "validation": None,
        "selection": None,
        "result": None,
        "conditions_passed": False,
        "artifacts": [],
        "report": None,
        "exit_code": 0,
        "error": None,
    }


def run(config: RunConfig) -> Tuple[int, RunState]:
    """Run one command through the pipeline; returns the exit code and final state."""
    graph = create_graph()
    result = graph.invoke(initial_state(config))
    return result['exit_code'], result


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netident",
                                     description="Local module identification in dynamic networks")
    parser.add_argument("--verbose", action="store_true", help="log at INFO level")
    parser.add_argument("--debug", action="store_true", help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("network", help="network document (JSON)")
    common.add_argument("--output", "-o", help="report path (dataset path for simulate)")
    common.add_argument("--text", action="store_true", help="also print a plain-text rendering")
    common.add_argument("--seed", type=int, help="base seed (default NETIDENT_SEED or 0)")
    common.add_argument("--grid", type=int, help="frequency grid size (default NETIDENT_GRID or 256)")

    targeted = argparse.ArgumentParser(add_help=False)
    targeted.add_argument("--target", type=int, nargs=2, metavar=("J", "I"), help="target module G_ji")
    targeted.add_argument("--mode", choices=SELECTION_MODES, default="full")
    targeted.add_argument("--accessible", help="comma-separated accessible nodes (--mode user)")
    targeted.add_argument("--selection", help="selection document (JSON)")

    estimating = argparse.ArgumentParser(add_help=False)
    estimating.add_argument("--criterion", choices=CRITERIA, default="wls")
    estimating.add_argument("--orders", help="nb,nf,nc,nd (default 1,1,1,1)")
    estimating.add_argument("--starts", type=int, help="optimizer starts (default 8)")
    estimating.add_argument("--miso", help="comma-separated MISO inputs for the target output")

    sub.add_parser("validate", parents=[common], help="check a network document")
    sub.add_parser("select", parents=[common, targeted], help="choose predictor inputs and outputs")
    check = sub.add_parser("check", parents=[common, targeted], help="graph conditions for a selection")
    check.add_argument("--informativity", choices=("model", "data"))
    check.add_argument("--data", help="dataset for --informativity data")
    transform = sub.add_parser("transform", parents=[common, targeted], help="canonical transformed network")
    transform.add_argument("--tol", type=float, help="invariance tolerance (default 1e-6)")
    transform.add_argument("--dump", action="store_true", help="include coefficient tables")
    simulate = sub.add_parser("simulate", parents=[common], help="simulate a dataset")
    simulate.add_argument("--N", type=int, help="number of samples (default 10000)")
    identify = sub.add_parser("identify", parents=[common, targeted, estimating], help="estimate the target module")
    identify.add_argument("--data", required=True, help="dataset container (.npz)")
    montecarlo = sub.add_parser("montecarlo", parents=[common, targeted, estimating], help="bias over replicas")
    montecarlo.add_argument("--N", type=int, help="samples per replica (default 10000)")
    montecarlo.add_argument("--replicas", type=int, help="number of replicas (default 50)")
    montecarlo.add_argument("--csv", help="write per-replica target coefficients")
    return parser


def configure_logging(verbose: bool = False, debug: bool = False) -> None:
    level = logging.DEBUG if debug else logging.INFO if verbose else getattr(logging, default_log_level(),
                                                                             logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    """CLI entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.debug)
    try:
        config = RunConfig.from_args(args)
    except NetidentError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    code, _ = run(config)
    return code


if __name__ == "__main__":
    sys.exit(main())
