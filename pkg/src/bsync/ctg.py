"""Causal control graphs of barrier processes.

The control graph is the covering DAG of the causal order on a process's
actions, built structurally: prefixing adds a node above the current minimal
vertices, parallel composition is graph union (barrier vertices of the same
binder unify), and discharging a binder splices every path through its
barrier vertex.  A failed synchronization leaves a self-loop on the barrier,
so deadlock shows up as a cycle.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable

from .process import (
    Act, New, Par, Stop, Sync, Term, UnboundBarrierError,
)


class GraphError(Exception):
    """Base class for control-graph errors."""


class DuplicateNodeError(GraphError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"node already present: {node!r}")


class DeadlockedGraphError(GraphError):
    def __init__(self, detail: str = ""):
        super().__init__(detail or "graph has a cycle or residual barrier")


class NotTransitivelyReducedError(GraphError):
    def __init__(self, edge):
        self.edge = edge
        super().__init__(f"transitive edge present: {edge!r}")


class CyclicInputError(GraphError):
    pass


@dataclass(frozen=True)
class BarrierNode:
    """A barrier vertex, tagged with its binder so reused names never clash."""

    name: str
    uid: int

    def __repr__(self) -> str:
        return f"<{self.name}#{self.uid}>"


def node_key(n) -> tuple:
    if isinstance(n, BarrierNode):
        return (1, n.name, n.uid)
    return (0, str(n), -1)


@dataclass(frozen=True)
class ControlGraph:
    vertices: frozenset
    edges: frozenset  # ordered pairs; self-loop artifacts may dangle

    @staticmethod
    def empty() -> "ControlGraph":
        return ControlGraph(frozenset(), frozenset())

    @staticmethod
    def of(vertices: Iterable, edges: Iterable = ()) -> "ControlGraph":
        return ControlGraph(frozenset(vertices), frozenset(tuple(e) for e in edges))

    def actions(self) -> list[str]:
        return sorted(v for v in self.vertices if not isinstance(v, BarrierNode))

    def barrier_vertices(self) -> list[BarrierNode]:
        return sorted((v for v in self.vertices if isinstance(v, BarrierNode)),
                      key=node_key)

    def sorted_vertices(self) -> list:
        return sorted(self.vertices, key=node_key)

    def minimal_vertices(self) -> list:
        with_incoming = {y for _, y in self.edges}
        return sorted((v for v in self.vertices if v not in with_incoming),
                      key=node_key)

    def successors(self, v) -> list:
        return sorted((y for x, y in self.edges if x == v), key=node_key)

    def predecessors(self, v) -> list:
        return sorted((x for x, y in self.edges if y == v), key=node_key)

    def __len__(self) -> int:
        return len(self.vertices)


def prefix_node(x, g: ControlGraph) -> ControlGraph:
    """Add `x` above the graph: edges from x to every minimal vertex."""
    if x in g.vertices:
        raise DuplicateNodeError(x)
    return _prefix(x, g)


def _prefix(x, g: ControlGraph) -> ControlGraph:
    # Connecting to the minimal vertices (rather than only to sources of
    # existing edges) also covers graphs mixing edges with isolated vertices;
    # prefixing an already-present barrier yields its deadlock self-loop.
    targets = g.minimal_vertices()
    new_edges = {(x, y) for y in targets}
    return ControlGraph(g.vertices | {x}, g.edges | new_edges)


def graph_union(a: ControlGraph, b: ControlGraph) -> ControlGraph:
    return ControlGraph(a.vertices | b.vertices, a.edges | b.edges)


def eliminate_barrier(g: ControlGraph, barrier) -> ControlGraph:
    """Discharge a barrier vertex, splicing paths through it.

    A self-loop on the barrier survives (deadlock witness), as do the edges
    it re-generates through the splice product.  Absent barrier: no-op.
    """
    b = _resolve_barrier(g, barrier)
    if b is None:
        return g
    ins = {x for x, y in g.edges if y == b}
    outs = {y for x, y in g.edges if x == b}
    kept = {(x, y) for x, y in g.edges if not (x != y and (x == b or y == b))}
    spliced = {(x, y) for x in ins for y in outs}
    return ControlGraph(g.vertices - {b}, frozenset(kept | spliced))


def _resolve_barrier(g: ControlGraph, barrier):
    if isinstance(barrier, BarrierNode):
        return barrier if barrier in g.vertices else None
    matches = [v for v in g.vertices
               if isinstance(v, BarrierNode) and v.name == barrier]
    if not matches:
        return None
    if len(matches) > 1:
        raise GraphError(f"ambiguous barrier name {barrier!r}")
    return matches[0]


def build_ctg(term: Term, check_reduced: bool = True) -> ControlGraph:
    """Construct the control graph of a validated term.

    For a deadlock-free result the graph is checked to be an intransitive
    DAG; deadlocked results (cycles, dangling barrier self-loops) are
    returned as-is for has_deadlock to witness.
    """
    uids = itertools.count()

    def rec(t: Term, env: dict[str, BarrierNode]) -> ControlGraph:
        if isinstance(t, Stop):
            return ControlGraph.empty()
        if isinstance(t, Act):
            g = rec(t.cont, env)
            if t.label in g.vertices:
                raise DuplicateNodeError(t.label)
            return _prefix(t.label, g)
        if isinstance(t, Sync):
            node = env.get(t.barrier)
            if node is None:
                raise UnboundBarrierError(t.barrier)
            # the same barrier vertex may legally reappear (double sync on
            # one thread); prefixing it again produces the self-loop witness
            return _prefix(node, rec(t.cont, env))
        if isinstance(t, New):
            node = BarrierNode(t.barrier, next(uids))
            g = rec(t.body, {**env, t.barrier: node})
            return eliminate_barrier(g, node)
        if isinstance(t, Par):
            return graph_union(rec(t.left, env), rec(t.right, env))
        raise TypeError(f"not a term: {t!r}")

    g = rec(term, {})
    if check_reduced and not has_deadlock(g):
        edge = _find_transitive_edge(g.vertices, g.edges)
        if edge is not None:
            raise NotTransitivelyReducedError(edge)
    return g


def has_cycle(vertices: Iterable, edges: Iterable[tuple]) -> bool:
    nodes = set(vertices)
    succ: dict = {}
    for x, y in edges:
        nodes.add(x)
        nodes.add(y)
        succ.setdefault(x, []).append(y)
    state: dict = {}  # 1 = on stack, 2 = done
    for start in nodes:
        if state.get(start):
            continue
        stack = [(start, iter(succ.get(start, ())))]
        state[start] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if state.get(nxt) == 1:
                    return True
                if not state.get(nxt):
                    state[nxt] = 1
                    stack.append((nxt, iter(succ.get(nxt, ()))))
                    advanced = True
                    break
            if not advanced:
                state[node] = 2
                stack.pop()
    return False


def has_deadlock(g: ControlGraph) -> bool:
    """Residual barrier vertices, dangling barrier edges, or any cycle."""
    if any(isinstance(v, BarrierNode) for v in g.vertices):
        return True
    for x, y in g.edges:
        if isinstance(x, BarrierNode) or isinstance(y, BarrierNode):
            return True
    return has_cycle(g.vertices, g.edges)


def _reachability(vertices: list, edges: Iterable[tuple]) -> dict:
    """Strict-descendant sets as bitmasks, keyed by vertex."""
    idx = {v: i for i, v in enumerate(vertices)}
    succ: dict = {v: [] for v in vertices}
    indeg = {v: 0 for v in vertices}
    for x, y in edges:
        succ[x].append(y)
        indeg[y] += 1
    # topological order
    order = [v for v in vertices if indeg[v] == 0]
    queue = list(order)
    while queue:
        v = queue.pop()
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                order.append(w)
                queue.append(w)
    if len(order) != len(vertices):
        raise CyclicInputError("relation has a cycle")
    desc = {v: 0 for v in vertices}
    for v in reversed(order):
        mask = 0
        for w in succ[v]:
            mask |= desc[w] | (1 << idx[w])
        desc[v] = mask
    return desc


def _find_transitive_edge(vertices, edges):
    verts = sorted(vertices, key=node_key)
    idx = {v: i for i, v in enumerate(verts)}
    desc = _reachability(verts, edges)
    for x, y in edges:
        # is y reachable from x without the direct edge?
        for z in (w for w in verts if desc[x] >> idx[w] & 1):
            if z != y and desc[z] >> idx[y] & 1:
                return (x, y)
    return None


def transitive_reduction(vertices: Iterable, edges: Iterable[tuple]) -> set:
    """Covering edges of the order generated by an acyclic relation."""
    verts = sorted(set(vertices), key=node_key)
    idx = {v: i for i, v in enumerate(verts)}
    desc = _reachability(verts, set(edges))
    reduced = set()
    for x, y in set(edges):
        via = False
        for z in verts:
            if z == x or z == y:
                continue
            if desc[x] >> idx[z] & 1 and desc[z] >> idx[y] & 1:
                via = True
                break
        if not via:
            reduced.add((x, y))
    return reduced


# ---------------------------------------------------------------------------
# Posets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Poset:
    """Finite poset given by its elements and covering relation."""

    elements: tuple
    covering: frozenset

    def __post_init__(self):
        elems = set(self.elements)
        for x, y in self.covering:
            if x not in elems or y not in elems:
                raise GraphError(f"covering edge off the element set: {(x, y)!r}")
        if has_cycle(self.elements, self.covering):
            raise CyclicInputError("covering relation has a cycle")
        edge = _find_transitive_edge(self.elements, self.covering)
        if edge is not None:
            raise NotTransitivelyReducedError(edge)

    @staticmethod
    def from_relation(elements: Iterable, pairs: Iterable[tuple]) -> "Poset":
        """Build from any acyclic relation by transitive reduction."""
        elems = tuple(sorted(set(elements), key=node_key))
        reduced = transitive_reduction(elems, set(pairs))
        return Poset(elems, frozenset(reduced))

    def graph(self) -> ControlGraph:
        return ControlGraph.of(self.elements, self.covering)

    def __len__(self) -> int:
        return len(self.elements)


def to_poset(g: ControlGraph) -> Poset:
    """Covering poset of a deadlock-free control graph."""
    if has_deadlock(g):
        raise DeadlockedGraphError("cannot read a poset off a deadlocked graph")
    elements = tuple(sorted(g.vertices, key=node_key))
    return Poset(elements, frozenset(g.edges))


def encode_poset(poset: Poset) -> Term:
    """Process whose control graph is the given poset.

    One component per element: wait on the element's own barrier, perform the
    action, then release each covering successor's barrier; all composed in
    parallel under one binder per element, in canonical element order.
    """
    elements = sorted(poset.elements, key=node_key)
    succ: dict = {e: [] for e in elements}
    for x, y in poset.covering:
        succ[x].append(y)
    components = []
    for e in elements:
        kids = sorted(succ[e], key=node_key)
        if kids:
            body = Act(e, _par([Sync(_bname(k), Stop()) for k in kids]))
        else:
            body = Act(e, Stop())
        components.append(Sync(_bname(e), body))
    term: Term = _par(components)
    for e in reversed(elements):
        term = New(_bname(e), term)
    return term


def _bname(element) -> str:
    return f"B_{element}"


def _par(parts: list[Term]) -> Term:
    if not parts:
        return Stop()
    out = parts[0]
    for p in parts[1:]:
        out = Par(out, p)
    return out


# ---------------------------------------------------------------------------
# Import/export
# ---------------------------------------------------------------------------

def to_dot(g: ControlGraph) -> str:
    """DOT rendering: actions as ellipses, residual barriers as boxes."""
    lines = ["digraph ctg {"]
    names = {}
    for v in g.sorted_vertices():
        if isinstance(v, BarrierNode):
            names[v] = f"{v.name}#{v.uid}"
            lines.append(f'  "{names[v]}" [shape=box, label="{v.name}"];')
        else:
            names[v] = str(v)
            lines.append(f'  "{names[v]}" [shape=ellipse];')
    for x, y in sorted(g.edges, key=lambda e: (node_key(e[0]), node_key(e[1]))):
        nx = names.get(x, str(x))
        ny = names.get(y, str(y))
        lines.append(f'  "{nx}" -> "{ny}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def format_edge_list(poset: Poset) -> str:
    """One `u -> v` line per covering edge; bare lines for isolated elements."""
    lines = [f"{x} -> {y}" for x, y in
             sorted(poset.covering, key=lambda e: (node_key(e[0]), node_key(e[1])))]
    touched = {v for e in poset.covering for v in e}
    lines += [str(v) for v in poset.elements if v not in touched]
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str) -> Poset:
    elements = set()
    edges = set()
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" in line:
            lhs, rhs = (part.strip() for part in line.split("->", 1))
            if not lhs or not rhs:
                raise GraphError(f"bad edge line: {raw!r}")
            elements.add(lhs)
            elements.add(rhs)
            edges.add((lhs, rhs))
        else:
            elements.add(line)
    return Poset.from_relation(elements, edges)
