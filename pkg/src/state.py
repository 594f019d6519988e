from typing import Any, Dict, List, Optional, TypedDict

from config import RunConfig
from tools.graph import Selection
from tools.network import NetworkSpec


class RunState(TypedDict):
    """State that flows through the identification pipeline"""

    #input
    config: RunConfig
    network: Optional[NetworkSpec]
    input_sha256: Optional[str]

    #validation
    validation: Optional[Dict[str, Any]]

    #selection used by check / transform / identify / montecarlo
    selection: Optional[Selection]

    #command output
    result: Optional[Dict[str, Any]]
    conditions_passed: bool
    artifacts: List[str]

    #output
    report: Optional[Dict[str, Any]]
    exit_code: int
    error: Optional[str]  # single-line diagnostic, set by the first failing node
