"""
Report documents: provenance envelope, stable JSON encoding and a plain-text
rendering for the terminal.
"""
import json
from typing import Any, Dict, List, Optional

import numpy as np

TOOL_NAME = "netident"
TOOL_VERSION = "0.1.0"
REPORT_FORMAT_VERSION = 1


def _plain(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def build_report(command: str, result: Optional[Dict[str, Any]], input_sha256: Optional[str],
                 resolved_config: Dict[str, Any], exit_code: int, error: Optional[str] = None,
                 artifacts: Optional[List[str]] = None) -> Dict[str, Any]:
    """Wrap a command result with the provenance fields every report carries."""
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "tool": TOOL_NAME,
        "tool_version": TOOL_VERSION,
        "command": command,
        "input_sha256": input_sha256,
        "resolved_config": resolved_config,
        "exit_code": exit_code,
        "error": error,
        "artifacts": artifacts or [],
        "result": result,
    }


def to_json(report: Dict[str, Any]) -> str:
    return json.dumps(report, sort_keys=True, indent=2, default=_plain) + "\n"


def write_report(path: str, report: Dict[str, Any]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_json(report))


def _condition_lines(report: Dict[str, Any], indent: str = "  ") -> List[str]:
    lines = [f"{indent}{report['name']}: {'pass' if report['passed'] else 'FAIL'}"]
    for item in report.get("items", []):
        mark = "ok" if item["passed"] else "failed"
        line = f"{indent}  - {item['name']}: {mark}"
        if item.get("detail"):
            line += f" ({item['detail']})"
        lines.append(line)
    return lines


def _selection_lines(sel: Dict[str, Any]) -> List[str]:
    lines = [f"target G_{sel['j']}{sel['i']}"]
    for key in ("Y", "D", "Q", "A", "B", "Z"):
        lines.append(f"  {key} = {{{', '.join(str(v) for v in sel[key])}}}")
    for step in sel.get("trace", []):
        lines.append(f"  . {step}")
    return lines


def render_text(report: Dict[str, Any]) -> str:
    """Human-readable summary of a report; the JSON document stays the reference."""
    lines = [f"{TOOL_NAME} {report['tool_version']} {report['command']}",
             f"input sha256: {report['input_sha256']}"]
    if report.get("error"):
        lines.append(f"error: {report['error']}")
    result = report.get("result") or {}
    if "validation" in result:
        v = result["validation"]
        lines.append(f"network valid: {v['valid']}")
        for name, check in sorted(v["checks"].items()):
            lines.append(f"  - {name}: {'ok' if check['passed'] else 'failed'} {check.get('detail', '')}".rstrip())
    if "selection" in result and result["selection"]:
        lines.extend(_selection_lines(result["selection"]))
    for key in ("conditions", "delay_conditions", "delay_conditions_correlated_inputs", "informativity"):
        if result.get(key):
            lines.extend(_condition_lines(result[key]))
    if "invariance" in result:
        inv = result["invariance"]
        lines.append(f"invariance: {'pass' if inv['passed'] else 'FAIL'} (max deviation {inv['deviation']:.3e}, "
                     f"tol {inv['tol']:.1e})")
    if "estimate" in result:
        est = result["estimate"]
        crit = est["criterion"]
        lines.append(f"criterion ({crit['kind']}): {crit['value']!r}")
        target = result.get("target_module")
        if target:
            lines.append(f"  G_{target['to']}{target['from']} num = {target['num']}")
            lines.append(f"  G_{target['to']}{target['from']} den = {target['den']}")
        if "whiteness" in result:
            lines.append(f"  residual whiteness: {result['whiteness']:.3f}")
    if "bias" in result:
        bias = result["bias"]
        lines.append(f"replicas: {bias['completed']} of {bias['replicas']}")
        for c in bias["coefficients"]:
            lines.append(f"  {c['name']}: mean {c['mean']:.6f} truth {c['truth']:.6f} se {c['std_error']:.2e} "
                         f"z {c['z']:.2f}")
        for w in bias["warnings"]:
            lines.append(f"  warning: {w}")
    if "dataset" in result:
        ds = result["dataset"]
        lines.append(f"dataset: {ds['path']} (N={ds['N']}, seed={ds['seed']})")
    for path in report.get("artifacts", []):
        lines.append(f"wrote {path}")
    lines.append(f"exit code: {report['exit_code']}")
    return "\n".join(lines) + "\n"
