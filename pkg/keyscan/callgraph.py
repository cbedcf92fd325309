"""
Per-app call graph and capped backward reachability.

The graph is a networkx DiGraph keyed by MethodSignature, caller -> callee.
Traversal order is always lexicographic on the rendered signature so results
do not depend on insertion order.
"""

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Set

import networkx as nx
from loguru import logger

from .errors import UnknownMethod
from .smali_ir import AppIR, Invoke, MethodSignature

FIRST_PARTY = "first"
THIRD_PARTY = "third"
EXCLUDED_OBFUSCATED = "excluded-obfuscated"

_VIRTUAL_KINDS = ("virtual", "interface")


def _by_render(methods: Iterable[MethodSignature]) -> List[MethodSignature]:
    return sorted(methods, key=MethodSignature.render)


class CallGraph:
    def __init__(self, graph: nx.DiGraph, app_id: str = ""):
        self.graph = graph
        self.app_id = app_id

    def __contains__(self, method: MethodSignature) -> bool:
        return method in self.graph

    def __len__(self) -> int:
        return self.graph.number_of_nodes()

    def nodes(self) -> List[MethodSignature]:
        return _by_render(self.graph.nodes)

    def callers(self, method: MethodSignature) -> List[MethodSignature]:
        return _by_render(self.graph.predecessors(method))

    def callees(self, method: MethodSignature) -> List[MethodSignature]:
        return _by_render(self.graph.successors(method))

    def is_stub(self, method: MethodSignature) -> bool:
        return not self.graph.nodes[method].get("defined", False)

    def edge_count(self) -> int:
        return self.graph.number_of_edges()


def _subtypes(app: AppIR) -> Dict[str, Set[str]]:
    """Transitive subtype sets for every class or interface named in the app's hierarchy."""
    children: Dict[str, Set[str]] = defaultdict(set)
    for cls in app.classes.values():
        for parent in [cls.superclass, *cls.interfaces]:
            if parent:
                children[parent].add(cls.name)

    closure: Dict[str, Set[str]] = {}
    for root in list(children):
        seen: Set[str] = set()
        stack = list(children[root])
        while stack:
            name = stack.pop()
            if name in seen:
                continue
            seen.add(name)
            stack.extend(children.get(name, ()))
        closure[root] = seen
    return closure


def build_call_graph(app: AppIR, cha: bool = False) -> CallGraph:
    """
    Builds the app's call graph from its Invoke instructions.

    Args:
        app (AppIR): Parsed app.
        cha (bool): Also link virtual and interface invokes to every override in app subclasses.

    Returns:
        CallGraph: Defined methods plus stub nodes for targets the app does not define.
    """
    graph = nx.DiGraph()
    for method in app.iter_methods():
        graph.add_node(method.signature, defined=True)

    subtypes = _subtypes(app) if cha else {}
    for method in app.iter_methods():
        caller = method.signature
        for instr in method.instructions:
            if not isinstance(instr, Invoke):
                continue
            target = instr.target
            if target not in graph:
                graph.add_node(target, defined=False)
            graph.add_edge(caller, target)
            if cha and instr.invoke_kind in _VIRTUAL_KINDS:
                for sub in sorted(subtypes.get(target.class_name, ())):
                    override = MethodSignature(sub, target.method_name, target.param_descriptors, target.return_descriptor)
                    if app.method(override) is not None:
                        graph.add_edge(caller, override)

    logger.debug(
        "call graph {}: {} nodes, {} edges (cha={})", app.app_id, graph.number_of_nodes(), graph.number_of_edges(), cha
    )
    return CallGraph(graph, app.app_id)


@dataclass
class CallTrace:
    """Capped backward BFS from one method: discovery order plus predecessor links."""

    method: MethodSignature
    order: List[MethodSignature]
    parents: List[int]
    truncated: bool
    node_limit: int

    def path_to_root(self, position: int) -> List[MethodSignature]:
        path = []
        while position >= 0:
            path.append(self.order[position])
            position = self.parents[position]
        return path

    def to_dict(self) -> Dict:
        return {
            "method": self.method.render(),
            "order": [m.render() for m in self.order],
            "parents": list(self.parents),
            "truncated": self.truncated,
            "node_limit": self.node_limit,
        }

    @classmethod
    def from_dict(cls, record: Dict) -> "CallTrace":
        return cls(
            method=MethodSignature.parse(record["method"]),
            order=[MethodSignature.parse(m) for m in record["order"]],
            parents=list(record["parents"]),
            truncated=record["truncated"],
            node_limit=record["node_limit"],
        )


def explore_ancestors(graph: CallGraph, method: MethodSignature, node_limit: int = 1000) -> CallTrace:
    """
    Breadth-first walk over reverse edges visiting at most ``node_limit`` methods.

    Raises:
        UnknownMethod: If ``method`` is not a graph node.
    """
    if node_limit < 1:
        raise ValueError(f"node_limit must be >= 1, got {node_limit}")
    if method not in graph:
        raise UnknownMethod(method.render())

    order = [method]
    parents = [-1]
    position_of = {method: 0}
    truncated = False
    head = 0
    while head < len(order) and not truncated:
        node = order[head]
        for caller in graph.callers(node):
            if caller in position_of:
                continue
            if len(order) >= node_limit:
                truncated = True
                break
            position_of[caller] = len(order)
            order.append(caller)
            parents.append(head)
        head += 1
    return CallTrace(method=method, order=order, parents=parents, truncated=truncated, node_limit=node_limit)


@dataclass
class ReachabilityResult:
    callsite_id: str
    reachable: bool
    evidence_path: List[MethodSignature] = field(default_factory=list)
    visited_count: int = 0
    truncated: bool = False

    def to_dict(self) -> Dict:
        return {
            "callsite_id": self.callsite_id,
            "reachable": self.reachable,
            "evidence_path": [m.render() for m in self.evidence_path],
            "visited_count": self.visited_count,
            "truncated": self.truncated,
        }

    @classmethod
    def from_dict(cls, record: Dict) -> "ReachabilityResult":
        return cls(
            callsite_id=record["callsite_id"],
            reachable=record["reachable"],
            evidence_path=[MethodSignature.parse(m) for m in record["evidence_path"]],
            visited_count=record["visited_count"],
            truncated=record["truncated"],
        )


def first_party_test(party_map: Mapping[str, str]) -> Callable[[MethodSignature], bool]:
    """Obfuscated and unclassified packages never count as first-party."""
    return lambda method: party_map.get(method.package) == FIRST_PARTY


def evaluate_trace(trace: CallTrace, party_map: Mapping[str, str], callsite_id: str = "") -> ReachabilityResult:
    """Reachability from a recorded trace; the search ends at the first first-party method in BFS order."""
    is_first = first_party_test(party_map)
    for position, method in enumerate(trace.order):
        if is_first(method):
            return ReachabilityResult(
                callsite_id=callsite_id,
                reachable=True,
                evidence_path=trace.path_to_root(position),
                visited_count=position + 1,
                truncated=False,
            )
    return ReachabilityResult(
        callsite_id=callsite_id,
        reachable=False,
        evidence_path=[],
        visited_count=len(trace.order),
        truncated=trace.truncated,
    )


def backward_reachability(
    graph: CallGraph,
    containing_method: MethodSignature,
    party_map: Mapping[str, str],
    node_limit: int = 1000,
    callsite_id: str = "",
) -> ReachabilityResult:
    """
    Whether a first-party method can reach ``containing_method``.

    Args:
        graph (CallGraph): The app's call graph.
        containing_method (MethodSignature): Method holding the call site.
        party_map (Mapping[str, str]): Package -> party ("first", "third", "excluded-obfuscated").
        node_limit (int): Visited-node budget.
        callsite_id (str): Copied into the result.

    Returns:
        ReachabilityResult: The evidence path runs from the first-party method to ``containing_method``.

    Raises:
        UnknownMethod: If ``containing_method`` is not in the graph.
    """
    trace = explore_ancestors(graph, containing_method, node_limit)
    return evaluate_trace(trace, party_map, callsite_id)
