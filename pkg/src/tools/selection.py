"""
Predictor input / predicted output selection for a target module G_ji.

Three strategies: full input (every in-neighbor of Y measured), minimum
input (fewest extra nodes, confounded inputs become outputs) and user
selection (restricted to a set of accessible nodes). Each returns a
Selection that passes check_invariance_conditions, or raises.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional, Set, Union

import networkx as nx

from tools.errors import InfeasibleSelectionError, InputError
from tools.graph import (BoolGraph, Selection, _as_graph, _unmeasured_paths_to, build_graph,
                         check_blocking_property, check_invariance_conditions, check_parallel_path_loop,
                         exists_path, find_confounders, in_neighbors)
from tools.network import NetworkSpec

logger = logging.getLogger(__name__)

EXACT_SEARCH_LIMIT = 16
MAX_BLOCKER_CANDIDATES = 16


@dataclass(frozen=True)
class AccessibilitySpec:
    accessible: FrozenSet[int]
    i: int
    j: int

    def __post_init__(self):
        object.__setattr__(self, "accessible", frozenset(self.accessible))
        missing = {self.i, self.j} - self.accessible
        if missing:
            raise InputError(f"target nodes {sorted(missing)} must be accessible")


def _require_target(net: NetworkSpec, i: int, j: int) -> None:
    for label in (i, j):
        if not 1 <= label <= net.L:
            raise InputError(f"target label {label} outside 1..{net.L}")
    if i == j or not net.has_edge(i, j):
        raise InputError(f"target module G_{j}{i} is absent from the network")


def _exact_blocking(g: BoolGraph, i: int, j: int, candidates: Iterable[int]) -> Optional[Set[int]]:
    pool = sorted(set(candidates) - {i, j})
    for size in range(len(pool) + 1):
        for combo in itertools.combinations(pool, size):
            if check_parallel_path_loop(g, i, j, {i, *combo}).passed:
                return {i, *combo}
    return None


def _split_graph(g: BoolGraph, i: int, j: int, candidates: Set[int]) -> nx.DiGraph:
    """
    Split-node graph: every node k becomes in_k -> out_k with unit capacity
    (unbounded for non-candidates and i); j splits into a source copy (for
    loops) and a sink copy.
    """
    flow = nx.DiGraph()
    for k in range(1, g.L + 1):
        if k == j:
            continue
        if k in candidates:
            flow.add_edge(("in", k), ("out", k), capacity=1)
        else:
            flow.add_edge(("in", k), ("out", k))
    flow.add_node(("j", "out"))
    flow.add_node(("j", "in"))
    for a, b in sorted(g.w_edges()):
        if b == i or (a == i and b == j):
            continue
        tail = ("j", "out") if a == j else ("out", a)
        head = ("j", "in") if b == j else ("in", b)
        flow.add_edge(tail, head)
    flow.add_edge("source", ("out", i))
    flow.add_edge("source", ("j", "out"))
    return flow


def _cut_value(flow: nx.DiGraph, forced_in: Set[int], forced_out: Set[int]) -> Optional[int]:
    h = flow.copy()
    for k in forced_in:
        h.remove_edge(("in", k), ("out", k))
    for k in forced_out:
        del h[("in", k)][("out", k)]["capacity"]
    try:
        return int(round(nx.maximum_flow_value(h, "source", ("j", "in"))))
    except nx.NetworkXUnbounded:
        return None


def _cut_blocking(g: BoolGraph, i: int, j: int, candidates: Iterable[int]) -> Optional[Set[int]]:
    """
    Minimum node cut, lexicographically smallest among the minimum cuts:
    candidates are fixed in label order, each kept in the cut iff some
    minimum cut still contains it.
    """
    candidates = set(candidates) - {i, j}
    flow = _split_graph(g, i, j, candidates)
    size = _cut_value(flow, set(), set())
    if size is None:
        return None
    chosen, excluded = set(), set()
    for k in sorted(candidates):
        if len(chosen) < size and _cut_value(flow, chosen | {k}, excluded) == size - len(chosen) - 1:
            chosen.add(k)
        else:
            excluded.add(k)
    return {i} | chosen


def _blocking(g: BoolGraph, i: int, j: int, candidates: Iterable[int]) -> Optional[Set[int]]:
    candidates = set(candidates)
    if len(candidates) <= EXACT_SEARCH_LIMIT:
        return _exact_blocking(g, i, j, candidates)
    found = _cut_blocking(g, i, j, candidates)
    if found is not None and not check_parallel_path_loop(g, i, j, found).passed:
        return None
    return found


def minimal_blocking_set(net_or_graph: Union[NetworkSpec, BoolGraph], i: int, j: int) -> Set[int]:
    """
    Smallest node set S containing i such that every parallel path i -> j and
    every loop through j passes a node of S. Ties go to the lexicographically
    smallest set.
    """
    if isinstance(net_or_graph, NetworkSpec):
        _require_target(net_or_graph, i, j)
    g = _as_graph(net_or_graph)
    found = _blocking(g, i, j, range(1, g.L + 1))
    if found is None:
        raise InfeasibleSelectionError(f"no blocking set for G_{j}{i}", stage="select")
    return found


def _unblockable(g: BoolGraph, source: int, k: int, Z: Set[int], inaccessible: Set[int]) -> bool:
    return bool(exists_path(g, source, k, Z & inaccessible, from_noise=True))


def _relevant_blockers(g: BoolGraph, X: Set[int], Y: Set[int], Z: Set[int], pool: Set[int]) -> List[int]:
    """Nodes of pool lying on a Z-path from a confounding source to X."""
    sources = find_confounders(g, X, Y, Z).sources()
    relevant = []
    for z in sorted(pool & Z):
        feeds = any(exists_path(g, l, z, Z, from_noise=True) for l in sources)
        if feeds and any(exists_path(g, z, x, Z) for x in X):
            relevant.append(z)
    if len(relevant) > MAX_BLOCKER_CANDIDATES:
        logger.warning("blocker search truncated to %d of %d candidates", MAX_BLOCKER_CANDIDATES, len(relevant))
        relevant = relevant[:MAX_BLOCKER_CANDIDATES]
    return relevant


def _search_blockers(g: BoolGraph, sel_i: int, sel_j: int, X: Set[int], A: Set[int], Y: Set[int],
                     B: Set[int], Z: Set[int], pool: Set[int]) -> Optional[Set[int]]:
    """
    Smallest extra B (by size, then label order) that removes every
    confounder for X -> Y without creating A -> B confounders or an
    unmeasured path from {w_i, w_j} into B.
    """
    relevant = _relevant_blockers(g, X, Y, Z, pool)
    for size in range(1, len(relevant) + 1):
        for combo in itertools.combinations(relevant, size):
            extra = set(combo)
            Zc, Bc = Z - extra, B | extra
            if find_confounders(g, X, Y, Zc):
                continue
            if find_confounders(g, A, Bc, Zc):
                continue
            if _unmeasured_paths_to(g, {sel_i, sel_j}, Bc, Zc):
                continue
            return extra
    return None


def _can_move_to_b(g: BoolGraph, k: int, i: int, j: int, A: Set[int], B: Set[int], Z: Set[int]) -> bool:
    if k == i:
        return False
    Bc = B | {k}
    return not find_confounders(g, A - {k}, Bc, Z) and not _unmeasured_paths_to(g, {i, j}, Bc, Z)


def _finish(g: BoolGraph, L: int, j: int, i: int, Y: Set[int], D: Set[int], B: Set[int],
            trace: List[str], strategy: str) -> Selection:
    sel = Selection.from_sets(L, j, i, Y, D, A=D - Y - B, B=B, trace=trace)
    report = check_invariance_conditions(g, sel)
    if not report.passed:
        raise InfeasibleSelectionError(
            f"{strategy} selection violates {', '.join(report.failures())}", stage="select")
    if sel.B:
        blocking = check_blocking_property(g, sel)
        if not blocking.passed:
            raise InfeasibleSelectionError(
                f"{strategy} selection: B = {sorted(sel.B)} violates {', '.join(blocking.failures())}",
                stage="select")
    logger.info("%s selection for G_%d%d: Y=%s D=%s", strategy, j, i, sorted(sel.Y), sorted(sel.D))
    return sel


def select_full_input(net: NetworkSpec, i: int, j: int) -> Selection:
    """Measure every in-neighbor of the predicted outputs."""
    _require_target(net, i, j)
    g = build_graph(net)
    L = g.L
    nodes = set(range(1, L + 1))
    Y, B = {j}, set()
    trace = [f"start: i={i} in D, j={j} in Y"]

    for _ in range(2 * L + 2):
        core = in_neighbors(g, Y) | {i} | (Y - {j})
        B -= Y
        absorbed = []
        for d in sorted(core - Y - B):
            if any(g.is_correlated(d, y) for y in Y):
                Y.add(d)
                absorbed.append(d)
        if absorbed:
            trace.append(f"disturbance correlated with Y: {absorbed} moved to Y and Q")
            continue

        D = core | B
        A = D - Y - B
        Z = nodes - D - Y
        if not find_confounders(g, A, Y, Z):
            return _finish(g, L, j, i, Y, D, B, trace, "full-input")

        extra = _search_blockers(g, i, j, A, A, Y, B, Z, Z)
        if extra:
            B |= extra
            trace.append(f"B += {sorted(extra)} blocks indirect confounders for A -> Y")
            continue

        moved = False
        for k in sorted(A):
            Z = nodes - D - Y
            if not find_confounders(g, {k}, Y, Z):
                continue
            if _can_move_to_b(g, k, i, j, D - Y - B, B, Z):
                B.add(k)
                trace.append(f"w{k} has unblockable confounders: moved to B")
            else:
                Y.add(k)
                trace.append(f"w{k} has unblockable confounders: moved to Y and Q")
            moved = True
        if not moved:
            break
    raise InfeasibleSelectionError("full-input selection did not converge", stage="select")


def select_minimum_input(net: NetworkSpec, i: int, j: int) -> Selection:
    """Fewest predictor inputs; confounded inputs become predicted outputs too."""
    _require_target(net, i, j)
    g = build_graph(net)
    L = g.L
    nodes = set(range(1, L + 1))
    D = minimal_blocking_set(g, i, j)
    Y = {j}
    trace = [f"minimal blocking set D = {sorted(D)}"]

    changed = True
    while changed:
        changed = False
        Z = nodes - D - Y
        for k in sorted(D - Y):
            report = find_confounders(g, {k}, Y, Z)
            if report:
                Y.add(k)
                trace.append(f"w{k} confounded by {['e%d' % s for s in report.sources()]}: moved to Y and Q")
                changed = True
                break
    return _finish(g, L, j, i, Y, set(D), set(), trace, "minimum-input")


def select_user(net: NetworkSpec, spec: AccessibilitySpec) -> Selection:
    """Selection restricted to the accessible nodes."""
    i, j = spec.i, spec.j
    _require_target(net, i, j)
    g = build_graph(net)
    L = g.L
    nodes = set(range(1, L + 1))
    acc = set(spec.accessible)
    bad = acc - nodes
    if bad:
        raise InputError(f"accessible labels {sorted(bad)} outside 1..{L}")
    inacc = nodes - acc

    base = _blocking(g, i, j, acc)
    if base is None:
        raise InfeasibleSelectionError(
            "no accessible node set satisfies the parallel path and loop condition", stage="select")
    D, Y, B = set(base), {j}, set()
    trace = [f"parallel path and loop condition: D = {sorted(D)}"]

    for _ in range(2 * L + 2):
        new = (in_neighbors(g, Y) & acc) - D - Y
        if new:
            D |= new
            trace.append(f"accessible in-neighbors of Y added to D: {sorted(new)}")
        for k in sorted(in_neighbors(g, Y) - acc):
            feeders = [a for a in sorted(acc - Y - D) if exists_path(g, a, k, inacc)]
            if feeders:
                D.update(feeders)
                trace.append(f"accessible nodes feeding inaccessible w{k}: {feeders} added to D")
        Z = nodes - D - Y

        if i not in Y:
            report = find_confounders(g, {i}, Y, Z)
            if any(_unblockable(g, c.source, i, Z, inacc) for c in report.confounders):
                Y.add(i)
                trace.append(f"w{i} has an unblockable confounder: moved to Y and Q")
                continue

        restart = False
        for k in sorted(D - Y - B - {i}):
            report = find_confounders(g, {k}, Y, Z)
            if not any(_unblockable(g, c.source, k, Z, inacc) for c in report.confounders):
                continue
            if _can_move_to_b(g, k, i, j, D - Y - B, B, Z):
                B.add(k)
                trace.append(f"w{k} has an unblockable confounder: moved to B")
            else:
                Y.add(k)
                trace.append(f"w{k} has an unblockable confounder: moved to Y and Q")
                restart = True
                break
        if restart:
            continue

        for k in sorted(D - Y - B):
            Z = nodes - D - Y
            if not find_confounders(g, {k}, Y, Z):
                continue
            if _can_move_to_b(g, k, i, j, D - Y - B, B, Z):
                B.add(k)
                trace.append(f"w{k} has indirect confounders: moved to B")
                continue
            extra = _search_blockers(g, i, j, {k}, D - Y - B, Y, B, Z, acc)
            if extra:
                B |= extra
                D |= extra
                trace.append(f"accessible blockers {sorted(extra)} added to B for w{k}")
                continue
            Y.add(k)
            trace.append(f"w{k} has indirect confounders that cannot be blocked: moved to Y and Q")
            restart = True
            break
        if restart:
            continue
        return _finish(g, L, j, i, Y, D, B, trace, "user")
    raise InfeasibleSelectionError("user selection did not converge", stage="select")
