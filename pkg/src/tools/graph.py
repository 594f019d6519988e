"""
Boolean-graph queries over a network: paths, confounding variables and the
selection conditions (parallel path and loop, decomposition, module
invariance, delay conditions).

All public functions take and return 1-based node labels.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np

from tools.errors import InputError
from tools.network import NetworkSpec
from tools.transfer import FEEDTHROUGH_TOL

logger = logging.getLogger(__name__)


def w_node(k: int) -> Tuple[str, int]:
    return ("w", k)


def e_node(l: int) -> Tuple[str, int]:
    return ("e", l)


@dataclass(frozen=True, eq=False)
class BoolGraph:
    """
    Directed graph with node signals ("w", k) and unit-variance noise sources
    ("e", l). `delay_free` holds the subgraph of edges with nonzero
    feedthrough. `correlated[a, b]` is the Phi_v pattern (0-based).
    """

    L: int
    full: nx.DiGraph
    delay_free: nx.DiGraph
    correlated: np.ndarray

    def w_edges(self) -> Set[Tuple[int, int]]:
        return {(u[1], v[1]) for u, v in self.full.edges if u[0] == "w"}

    def e_edges(self) -> Set[Tuple[int, int]]:
        return {(u[1], v[1]) for u, v in self.full.edges if u[0] == "e"}

    def delay_free_w_edges(self) -> Set[Tuple[int, int]]:
        return {(u[1], v[1]) for u, v in self.delay_free.edges if u[0] == "w"}

    def delay_free_e_edges(self) -> Set[Tuple[int, int]]:
        return {(u[1], v[1]) for u, v in self.delay_free.edges if u[0] == "e"}

    def is_correlated(self, a: int, b: int) -> bool:
        return bool(self.correlated[a - 1, b - 1])


def build_graph(net: NetworkSpec) -> BoolGraph:
    """Edge sets from the nonzero patterns of G and H chol(Lambda)."""
    L = net.L
    full = nx.DiGraph()
    delay_free = nx.DiGraph()
    for k in range(1, L + 1):
        for g in (full, delay_free):
            g.add_node(w_node(k))
            g.add_node(e_node(k))

    for frm, to in net.edges():
        full.add_edge(w_node(frm), w_node(to))
        if abs(net.G[to - 1, frm - 1].feedthrough()) > FEEDTHROUGH_TOL:
            delay_free.add_edge(w_node(frm), w_node(to))

    noise_feedthrough = net.H.feedthrough() @ net.lambda_factor
    sources = net.noise_sources
    for k in range(L):
        for l in range(L):
            if sources[k, l]:
                full.add_edge(e_node(l + 1), w_node(k + 1))
                if abs(noise_feedthrough[k, l]) > FEEDTHROUGH_TOL:
                    delay_free.add_edge(e_node(l + 1), w_node(k + 1))

    return BoolGraph(L=L, full=full, delay_free=delay_free, correlated=net.noise_pattern.copy())


def _as_graph(net_or_graph: Union[NetworkSpec, BoolGraph]) -> BoolGraph:
    if isinstance(net_or_graph, BoolGraph):
        return net_or_graph
    return build_graph(net_or_graph)


def correlation_pattern(net: NetworkSpec) -> np.ndarray:
    """Boolean Phi_v pattern (0-based), from H Lambda H^T structure plus declared pairs."""
    return net.noise_pattern.copy()


def in_neighbors(g: BoolGraph, nodes: Iterable[int]) -> Set[int]:
    out = set()
    for k in nodes:
        out.update(u[1] for u in g.full.predecessors(w_node(k)) if u[0] == "w")
    return out


def out_neighbors(g: BoolGraph, nodes: Iterable[int]) -> Set[int]:
    out = set()
    for k in nodes:
        out.update(v[1] for v in g.full.successors(w_node(k)))
    return out


@dataclass(frozen=True)
class PathResult:
    found: bool
    witness: Tuple[int, ...] = ()

    def __bool__(self) -> bool:
        return self.found


def _bfs_path(graph: nx.DiGraph, source, target, interior: Set[int]) -> Optional[List]:
    """
    Shortest path source -> target whose intermediate nodes are w-nodes in
    `interior`; ties resolved towards lower labels. A path from a node to
    itself must have at least one edge.
    """
    allowed = {w_node(k) for k in interior}
    if source == target:
        best = None
        for nxt in sorted(graph.successors(source)):
            if nxt == target:
                return [source, target]
            if nxt not in allowed:
                continue
            tail = _bfs_path(graph, nxt, target, interior - {source[1]} if source[0] == "w" else interior)
            if tail is not None and (best is None or len(tail) + 1 < len(best)):
                best = [source] + tail
        return best
    nodes = (allowed - {source}) | {source, target}
    view = graph.subgraph(nodes)
    if source not in view or target not in view:
        return None
    parent = {source: None}
    for u, v in nx.bfs_edges(view, source, sort_neighbors=sorted):
        if v in parent:
            continue
        parent[v] = u
        if v == target:
            break
    if target not in parent:
        return None
    path = [target]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    path.reverse()
    return path


def _labels(path: Sequence) -> Tuple[int, ...]:
    return tuple(n[1] for n in path if n[0] == "w")


def exists_path(g: BoolGraph, source: int, target: int, interior: Iterable[int],
                from_noise: bool = False, delay_free: bool = False) -> PathResult:
    """
    Is there a directed path source -> target with every intermediate w-node
    in `interior`?

    Args:
        g: graph
        source: w label, or e label when from_noise is True
        target: w label
        interior: labels allowed as intermediate nodes
        from_noise: start at noise source e_source instead of w_source
        delay_free: search only edges with nonzero feedthrough

    Returns:
        PathResult; witness lists the w labels along the path
    """
    if not 1 <= target <= g.L or not 1 <= source <= g.L:
        raise InputError(f"node label outside 1..{g.L}")
    graph = g.delay_free if delay_free else g.full
    src = e_node(source) if from_noise else w_node(source)
    path = _bfs_path(graph, src, w_node(target), set(interior))
    if path is None:
        return PathResult(False)
    return PathResult(True, _labels(path))


@dataclass(frozen=True)
class Confounder:
    source: int
    kind: str
    input_path: Tuple[int, ...]
    output_path: Tuple[int, ...]

    def to_dict(self) -> dict:
        return {"source": f"e{self.source}", "kind": self.kind,
                "input_path": list(self.input_path), "output_path": list(self.output_path)}


@dataclass(frozen=True)
class ConfounderReport:
    confounders: Tuple[Confounder, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.confounders)

    def __len__(self) -> int:
        return len(self.confounders)

    def sources(self) -> List[int]:
        return [c.source for c in self.confounders]

    def kinds(self) -> Dict[int, str]:
        return {c.source: c.kind for c in self.confounders}

    def to_dict(self) -> list:
        return [c.to_dict() for c in self.confounders]


def _nearest(g: BoolGraph, l: int, targets: Iterable[int], Z: Set[int]) -> Optional[Tuple[int, ...]]:
    best = None
    for t in sorted(targets):
        res = exists_path(g, l, t, Z, from_noise=True)
        if res and (best is None or len(res.witness) < len(best)):
            best = res.witness
    return best


def find_confounders(net_or_graph: Union[NetworkSpec, BoolGraph], X: Iterable[int], Yset: Iterable[int],
                     Z: Iterable[int]) -> ConfounderReport:
    """
    Every e_l with a path to some w in X and a path to some w in Yset, each
    direct or running through Z only. Direct iff both witnesses are single
    e -> w edges.
    """
    g = _as_graph(net_or_graph)
    X, Yset, Z = set(X), set(Yset), set(Z)
    if not X or not Yset:
        return ConfounderReport()
    found = []
    for l in range(1, g.L + 1):
        to_x = _nearest(g, l, X, Z)
        if to_x is None:
            continue
        to_y = _nearest(g, l, Yset, Z)
        if to_y is None:
            continue
        kind = "direct" if len(to_x) == 1 and len(to_y) == 1 else "indirect"
        found.append(Confounder(source=l, kind=kind, input_path=to_x, output_path=to_y))
    return ConfounderReport(tuple(found))


@dataclass
class ConditionItem:
    name: str
    passed: bool
    witness: list = field(default_factory=list)
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "witness": self.witness, "detail": self.detail}


@dataclass
class ConditionReport:
    name: str
    items: List[ConditionItem] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items)

    def add(self, name: str, passed: bool, witness: Optional[list] = None, detail: str = "") -> ConditionItem:
        item = ConditionItem(name, bool(passed), list(witness or []), detail)
        self.items.append(item)
        return item

    def extend(self, other: "ConditionReport") -> "ConditionReport":
        self.items.extend(other.items)
        return self

    def failures(self) -> List[str]:
        return [item.name for item in self.items if not item.passed]

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "items": [item.to_dict() for item in self.items], "details": self.details}


@dataclass(frozen=True)
class Selection:
    """
    Identification setup w_D -> w_Y for target module G_ji.

    Y = Q + {o}, D = Q + U, U = A + B, Z = L \\ (D + Y). Labels are 1-based.
    """

    L: int
    j: int
    i: int
    Y: FrozenSet[int]
    D: FrozenSet[int]
    Q: FrozenSet[int]
    U: FrozenSet[int]
    A: FrozenSet[int]
    B: FrozenSet[int]
    Z: FrozenSet[int]
    o: Optional[int] = None
    trace: Tuple[str, ...] = ()

    @classmethod
    def from_sets(cls, L: int, j: int, i: int, Y: Iterable[int], D: Iterable[int],
                  A: Optional[Iterable[int]] = None, B: Iterable[int] = (),
                  trace: Sequence[str] = ()) -> "Selection":
        Y, D, B = frozenset(Y), frozenset(D), frozenset(B)
        for label in Y | D | {i, j}:
            if isinstance(label, bool) or not isinstance(label, (int, np.integer)) or not 1 <= label <= L:
                raise InputError(f"selection label {label!r} outside 1..{L}")
        if i == j:
            raise InputError("target input and output must differ")
        if j not in Y:
            raise InputError(f"target output {j} must be in Y")
        if i not in D:
            raise InputError(f"target input {i} must be in D")
        Q = Y & D
        extra = Y - D - {j}
        if extra:
            raise InputError(f"Y nodes {sorted(extra)} are neither the target output nor predictor inputs")
        U = D - Q
        A = frozenset(A) if A is not None else U - B
        if A & B:
            raise InputError(f"A and B overlap at {sorted(A & B)}")
        if A | B != U:
            raise InputError(f"A + B must equal U = {sorted(U)}")
        o = None if j in Q else j
        Z = frozenset(range(1, L + 1)) - D - Y
        return cls(L=L, j=j, i=i, Y=Y, D=D, Q=Q, U=U, A=A, B=B, Z=Z, o=o, trace=tuple(trace))

    @classmethod
    def from_dict(cls, doc: Mapping, L: int) -> "Selection":
        try:
            return cls.from_sets(L, int(doc["j"]), int(doc["i"]), [int(v) for v in doc["Y"]],
                                 [int(v) for v in doc["D"]],
                                 [int(v) for v in doc["A"]] if "A" in doc else None,
                                 [int(v) for v in doc.get("B", [])], doc.get("trace", ()))
        except KeyError as e:
            raise InputError(f"selection document missing key {e}", position="selection")
        except (TypeError, ValueError) as e:
            raise InputError(f"malformed selection document: {e}", position="selection")

    @property
    def y_order(self) -> List[int]:
        """Output ordering: Q then o."""
        return sorted(self.Q) + ([self.o] if self.o is not None else [])

    @property
    def d_order(self) -> List[int]:
        """Input ordering: Q then U."""
        return sorted(self.Q) + sorted(self.U)

    def with_trace(self, trace: Sequence[str]) -> "Selection":
        return replace(self, trace=tuple(trace))

    def to_dict(self) -> dict:
        return {"j": self.j, "i": self.i, "o": self.o,
                "Y": sorted(self.Y), "D": sorted(self.D), "Q": sorted(self.Q), "U": sorted(self.U),
                "A": sorted(self.A), "B": sorted(self.B), "Z": sorted(self.Z),
                "trace": list(self.trace)}


def check_parallel_path_loop(net_or_graph: Union[NetworkSpec, BoolGraph], i: int, j: int,
                             D: Iterable[int]) -> ConditionReport:
    """
    Every w_i -> w_j path other than the direct edge, and every loop through
    w_j, must contain an intermediate node in D.
    """
    g = _as_graph(net_or_graph)
    if i == j:
        raise InputError("parallel path check needs i != j")
    D = set(D)
    nodes = set(range(1, g.L + 1))
    report = ConditionReport("parallel_path_and_loop", details={"i": i, "j": j, "D": sorted(D)})

    path_witnesses = []
    for k in sorted(out_neighbors(g, [i])):
        if k == j or k in D:
            continue
        res = exists_path(g, k, j, nodes - D - {i, j})
        if res:
            path_witnesses.append([i] + list(res.witness))
    report.add("parallel_paths_blocked", not path_witnesses, path_witnesses,
               "" if not path_witnesses else f"{len(path_witnesses)} unblocked parallel path(s)")

    loop_witnesses = []
    for k in sorted(out_neighbors(g, [j])):
        if k in D:
            continue
        res = exists_path(g, k, j, nodes - D - {j})
        if res:
            loop_witnesses.append([j] + list(res.witness))
    report.add("loops_blocked", not loop_witnesses, loop_witnesses,
               "" if not loop_witnesses else f"{len(loop_witnesses)} unblocked loop(s) through w{j}")
    return report


def check_decomposition(net_or_graph: Union[NetworkSpec, BoolGraph], sel: Selection) -> ConditionReport:
    """No confounding variables for w_A -> w_Y and w_A -> w_B."""
    g = _as_graph(net_or_graph)
    report = ConditionReport("decomposition", details={"A": sorted(sel.A), "B": sorted(sel.B)})
    to_y = find_confounders(g, sel.A, sel.Y, sel.Z)
    report.add("no_confounders_A_to_Y", not to_y, to_y.to_dict())
    to_b = find_confounders(g, sel.A, sel.B, sel.Z)
    report.add("no_confounders_A_to_B", not to_b, to_b.to_dict())
    return report


def _unmeasured_paths_to(g: BoolGraph, starts: Iterable[int], targets: Iterable[int], Z: Set[int]) -> List[list]:
    witnesses = []
    for s in sorted(set(starts)):
        for b in sorted(targets):
            if s == b:
                continue
            res = exists_path(g, s, b, Z)
            if res:
                witnesses.append(list(res.witness))
    return witnesses


def check_blocking_property(net_or_graph: Union[NetworkSpec, BoolGraph], sel: Selection) -> ConditionReport:
    """
    Conditions on B: confounder paths to A blocked (no A -> Y confounders),
    no A -> B confounders, and every path from {w_i, w_j} to w_B passing a
    measured node.
    """
    g = _as_graph(net_or_graph)
    report = ConditionReport("blocking_property", details={"B": sorted(sel.B)})
    to_y = find_confounders(g, sel.A, sel.Y, sel.Z)
    report.add("confounder_paths_to_A_blocked", not to_y, to_y.to_dict())
    to_b = find_confounders(g, sel.A, sel.B, sel.Z)
    report.add("no_confounders_A_to_B", not to_b, to_b.to_dict())
    paths = _unmeasured_paths_to(g, {sel.i, sel.j}, sel.B, set(sel.Z))
    report.add("no_unmeasured_path_to_B", not paths, paths)
    return report


def check_invariance_conditions(net_or_graph: Union[NetworkSpec, BoolGraph], sel: Selection) -> ConditionReport:
    """Conjunction of the conditions under which the target module is left invariant."""
    g = _as_graph(net_or_graph)
    report = ConditionReport("module_invariance", details={"selection": sel.to_dict()})
    report.extend(check_parallel_path_loop(g, sel.i, sel.j, sel.D))
    report.extend(check_decomposition(g, sel))
    in_aq = sel.i in sel.A or sel.i in sel.Q
    report.add("input_in_A_or_Q", in_aq, [] if in_aq else [sel.i],
               "" if in_aq else f"w{sel.i} is in B")
    paths = _unmeasured_paths_to(g, {sel.i, sel.j}, sel.B, set(sel.Z))
    report.add("no_unmeasured_path_to_B", not paths, paths)
    return report


def check_delay_conditions(net_or_graph: Union[NetworkSpec, BoolGraph], sel: Selection,
                           model_delay_pattern: Mapping[Tuple[int, int], bool]) -> ConditionReport:
    """
    Delay conditions on the original network and the parameterized model.

    Args:
        model_delay_pattern: {(y, d): strictly_proper} for every parameterized
            entry of the model's G matrix (labels)

    A path set "has a delay" iff no delay-free path exists.
    """
    g = _as_graph(net_or_graph)
    model = nx.DiGraph()
    model.add_nodes_from(w_node(k) for k in sel.Y | sel.D)
    for (y, d), strictly_proper in sorted(model_delay_pattern.items()):
        if y not in sel.Y or d not in sel.D:
            raise InputError(f"model entry ({y}, {d}) outside Y x D")
        if not strictly_proper:
            model.add_edge(w_node(d), w_node(y))
    all_nodes = set(range(1, g.L + 1))
    model_nodes = set(sel.Y | sel.D)

    def _delay_free_path(graph: nx.DiGraph, s: int, t: int, interior: Set[int]) -> Optional[list]:
        if w_node(s) not in graph or w_node(t) not in graph:
            return None
        path = _bfs_path(graph, w_node(s), w_node(t), interior)
        return None if path is None else list(_labels(path))

    report = ConditionReport("delay_conditions", details={"model_pattern": {
        f"{y},{d}": bool(sp) for (y, d), sp in sorted(model_delay_pattern.items())}})
    starts = sorted(sel.Y | sel.B)

    original_hits, model_hits = [], []
    for s in starts:
        for t in sorted(sel.Y):
            p = _delay_free_path(g.delay_free, s, t, all_nodes)
            if p:
                original_hits.append(p)
            p = _delay_free_path(model, s, t, model_nodes)
            if p:
                model_hits.append(p)
    report.add("paths_to_Y_delayed_in_network", not original_hits, original_hits)
    report.add("paths_to_Y_delayed_in_model", not model_hits, model_hits)

    for k in sorted(sel.A):
        inbound = [p for s in starts if s != k for p in [_delay_free_path(g.delay_free, s, k, all_nodes)] if p]
        outbound = [p for t in sorted(sel.Y) for p in [_delay_free_path(model, k, t, model_nodes)] if p]
        ok = not inbound or not outbound
        report.add(f"A_node_{k}_delayed", ok, [] if ok else inbound[:1] + outbound[:1],
                   "" if ok else "delay-free path into the node and delay-free model path to Y")
    return report
