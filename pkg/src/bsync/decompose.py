"""Symbolic decomposition of a DAG into an exact volume formula.

Nodes are removed one at a time: a node with in-degree one and out-degree
zero integrates the running polynomial from its predecessor up to 1 (bottom
rule), the mirror case integrates from 0 up to its successor (top rule), a
node with exactly one predecessor and one successor integrates between them
and re-links the pair (intermediate rule), and an isolated node integrates
over the whole unit interval.  When no rule applies, a split on an
incomparable pair sums the two orientations.  The resulting tree of nested
integrals evaluates to the volume of the order polytope, and n! times that
volume is the number of linear extensions.

Graphs are kept transitively reduced throughout: the intermediate rule only
re-links when the shortcut is not already implied, and each split orientation
is reduced after adding its edge.  This mirrors the worked reductions and
keeps the rule degrees honest.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

from .ctg import ControlGraph, DeadlockedGraphError, has_deadlock, node_key
from .poly import Bound, Polynomial, as_bound


class NonIntegerVolumeError(Exception):
    """n! x Vol failed to be an integer: internal consistency failure."""


@dataclass(frozen=True)
class DecompStep:
    rule: str           # "B" | "I" | "T" | "S" | "free"
    nodes: tuple        # one node, or the incomparable pair for "S"

    def __repr__(self) -> str:
        inner = ",".join(str(n) for n in self.nodes)
        return f"{self.rule}({inner})"


@dataclass(frozen=True)
class IntegrationStep:
    var: object
    lo: Bound
    hi: Bound
    integrand: Polynomial  # polynomial being integrated at this step


@dataclass(frozen=True)
class Leaf:
    volume: Fraction
    trace: tuple[DecompStep, ...]
    stack: tuple[IntegrationStep, ...]  # innermost (first-removed) first


@dataclass(frozen=True)
class Split:
    x: object
    y: object
    left: "FormulaTree"   # orientation x below y
    right: "FormulaTree"  # orientation y below x


FormulaTree = Leaf | Split


def volume(tree: FormulaTree) -> Fraction:
    if isinstance(tree, Leaf):
        return tree.volume
    return volume(tree.left) + volume(tree.right)


def leaves(tree: FormulaTree) -> list[Leaf]:
    if isinstance(tree, Leaf):
        return [tree]
    return leaves(tree.left) + leaves(tree.right)


# ---------------------------------------------------------------------------
# Working graph
# ---------------------------------------------------------------------------

class _Graph:
    """Mutable adjacency view used during decomposition."""

    __slots__ = ("succ", "pred")

    def __init__(self, succ: dict, pred: dict):
        self.succ = succ
        self.pred = pred

    @staticmethod
    def from_control_graph(g: ControlGraph) -> "_Graph":
        succ = {v: set() for v in g.vertices}
        pred = {v: set() for v in g.vertices}
        for x, y in g.edges:
            succ[x].add(y)
            pred[y].add(x)
        return _Graph(succ, pred)

    def copy(self) -> "_Graph":
        return _Graph({v: set(s) for v, s in self.succ.items()},
                      {v: set(p) for v, p in self.pred.items()})

    def vertices(self) -> list:
        return sorted(self.succ, key=node_key)

    def has_edges(self) -> bool:
        return any(self.succ.values())

    def reachable(self, src, dst) -> bool:
        stack = [src]
        seen = {src}
        while stack:
            v = stack.pop()
            if v == dst:
                return True
            for w in self.succ[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return False

    def classify(self, v) -> str | None:
        """Applicable removal rule for v, if any."""
        ins, outs = len(self.pred[v]), len(self.succ[v])
        if ins == 0 and outs == 0:
            return "free"
        if ins == 1 and outs == 0:
            return "B"
        if ins == 0 and outs == 1:
            return "T"
        if ins == 1 and outs == 1:
            return "I"
        return None

    def remove(self, v, rule: str) -> tuple[Bound, Bound]:
        """Remove v per `rule`, returning its integration bounds."""
        if rule == "free":
            lo, hi = Bound.zero(), Bound.one()
        elif rule == "B":
            (p,) = self.pred[v]
            lo, hi = Bound.var(p), Bound.one()
        elif rule == "T":
            (s,) = self.succ[v]
            lo, hi = Bound.zero(), Bound.var(s)
        elif rule == "I":
            (p,) = self.pred[v]
            (s,) = self.succ[v]
            lo, hi = Bound.var(p), Bound.var(s)
        else:
            raise ValueError(f"not a removal rule: {rule}")
        preds = self.pred.pop(v)
        succs = self.succ.pop(v)
        for p in preds:
            self.succ[p].discard(v)
        for s in succs:
            self.pred[s].discard(v)
        if rule == "I":
            (p,) = preds
            (s,) = succs
            # re-link only when the constraint is not already implied
            if not self.reachable(p, s):
                self.succ[p].add(s)
                self.pred[s].add(p)
        return lo, hi

    def add_edge_reduced(self, x, y) -> None:
        """Add x -> y and drop edges the new order makes redundant."""
        below_x = self._ancestors(x) | {x}
        above_y = self._descendants(y) | {y}
        drop = [(u, v) for u in below_x for v in self.succ[u] if v in above_y]
        for u, v in drop:
            self.succ[u].discard(v)
            self.pred[v].discard(u)
        self.succ[x].add(y)
        self.pred[y].add(x)

    def _ancestors(self, v) -> set:
        out: set = set()
        stack = [v]
        while stack:
            u = stack.pop()
            for w in self.pred[u]:
                if w not in out:
                    out.add(w)
                    stack.append(w)
        return out

    def _descendants(self, v) -> set:
        out: set = set()
        stack = [v]
        while stack:
            u = stack.pop()
            for w in self.succ[u]:
                if w not in out:
                    out.add(w)
                    stack.append(w)
        return out

    def incomparable_pairs(self, nonisolated_only: bool = False) -> list[tuple]:
        verts = self.vertices()
        if nonisolated_only:
            verts = [v for v in verts if self.succ[v] or self.pred[v]]
        desc = {v: self._descendants(v) for v in verts}
        pairs = []
        for i, x in enumerate(verts):
            for y in verts[i + 1:]:
                if y not in desc[x] and x not in desc[y]:
                    pairs.append((x, y))
        return pairs

    def shared_neighbours(self, x, y) -> int:
        nx = self.succ[x] | self.pred[x]
        ny = self.succ[y] | self.pred[y]
        return len(nx & ny)


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------

class GreedyStrategy:
    """Deterministic default: isolated first, then bottom/top, then
    intermediate; splits pick the incomparable pair sharing the most
    neighbours (ties lexicographic)."""

    def choose_removal(self, g: _Graph):
        for rule in ("free", "B", "T", "I"):
            for v in g.vertices():
                if g.classify(v) == rule:
                    return DecompStep(rule, (v,))
        return None

    def choose_split(self, g: _Graph):
        pairs = g.incomparable_pairs(nonisolated_only=True)
        return min(pairs, key=lambda p: (-g.shared_neighbours(*p),
                                         node_key(p[0]), node_key(p[1])))


class RandomStrategy:
    """Uniform choice among applicable removals and incomparable pairs."""

    def __init__(self, seed: int):
        self.rng = random.Random(seed)

    def choose_removal(self, g: _Graph):
        options = [(v, rule) for v in g.vertices()
                   if (rule := g.classify(v)) is not None]
        if not options:
            return None
        v, rule = self.rng.choice(options)
        return DecompStep(rule, (v,))

    def choose_split(self, g: _Graph):
        return self.rng.choice(g.incomparable_pairs(nonisolated_only=True))


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def _check_input(g: ControlGraph) -> None:
    if has_deadlock(g):
        raise DeadlockedGraphError("decomposition needs an acyclic, "
                                   "barrier-free graph")


def applicable_rules(g: ControlGraph, include_splits: bool = False) -> list[DecompStep]:
    """All bottom/intermediate/top candidates, optionally plus split pairs."""
    _check_input(g)
    G = _Graph.from_control_graph(g)
    steps = []
    for rule in ("B", "I", "T"):
        for v in G.vertices():
            if G.classify(v) == rule:
                steps.append(DecompStep(rule, (v,)))
    if include_splits:
        for pair in G.incomparable_pairs():
            steps.append(DecompStep("S", pair))
    return steps


def decompose(g: ControlGraph, strategy=None) -> FormulaTree:
    """Build the volume formula tree for an acyclic barrier-free graph."""
    _check_input(g)
    strategy = strategy or GreedyStrategy()
    G = _Graph.from_control_graph(g)
    return _reduce(G, Polynomial.one(), [], [], strategy)


def _reduce(G: _Graph, psi: Polynomial, stack: list, trace: list,
            strategy) -> FormulaTree:
    while True:
        if not G.succ:
            return Leaf(psi.constant_value(), tuple(trace), tuple(stack))
        step = strategy.choose_removal(G)
        if step is not None:
            (v,) = step.nodes
            lo, hi = G.remove(v, step.rule)
            stack.append(IntegrationStep(v, lo, hi, psi))
            trace.append(step)
            psi = psi.integrate(v, lo, hi)
            continue
        x, y = strategy.choose_split(G)
        s = DecompStep("S", (x, y))
        Gl = G.copy()
        Gl.add_edge_reduced(x, y)
        left = _reduce(Gl, psi, list(stack), trace + [s], strategy)
        Gr = G
        Gr.add_edge_reduced(y, x)
        right = _reduce(Gr, psi, list(stack), trace + [s], strategy)
        return Split(x, y, left, right)


def count_executions(g: ControlGraph, strategy=None) -> int:
    """Exact number of linear extensions: n! times the polytope volume."""
    _check_input(g)
    n = len(g.vertices)
    total = factorial(n) * volume(decompose(g, strategy))
    if total.denominator != 1:
        raise NonIntegerVolumeError(f"n! * Vol = {total} is not an integer")
    return int(total)


def is_bit_decomposable(g: ControlGraph) -> bool:
    """True iff bottom/intermediate/top removals alone empty the graph.

    Isolated vertices are set aside (they can never regain edges, so
    deferring them to the end loses nothing); success means no edge remains
    once no rule applies.
    """
    _check_input(g)
    G = _Graph.from_control_graph(g)
    progress = True
    while progress:
        progress = False
        for v in G.vertices():
            rule = G.classify(v)
            if rule in ("B", "T", "I"):
                G.remove(v, rule)
                progress = True
    return not G.has_edges()


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def _bound_to_json(b: Bound):
    return str(b.value) if b.kind == "const" else {"var": b.value}

def _bound_from_json(j) -> Bound:
    if isinstance(j, dict):
        return Bound.var(j["var"])
    return Bound("const", int(j))


def _poly_to_json(p: Polynomial) -> list:
    out = []
    for mono in sorted(p.terms, key=lambda m: tuple((str(v), e) for v, e in m)):
        c = p.terms[mono]
        out.append([str(c), {str(v): e for v, e in mono}])
    return out

def _poly_from_json(j) -> Polynomial:
    terms = {}
    for c, mono in j:
        key = tuple(sorted(((v, e) for v, e in mono.items()), key=lambda ve: str(ve[0])))
        terms[key] = Fraction(c)
    return Polynomial(terms)


def tree_to_json(tree: FormulaTree) -> dict:
    if isinstance(tree, Leaf):
        return {
            "kind": "leaf",
            "volume": str(tree.volume),
            "trace": [[s.rule, *map(str, s.nodes)] for s in tree.trace],
            "stack": [
                {
                    "var": str(s.var),
                    "lo": _bound_to_json(s.lo),
                    "hi": _bound_to_json(s.hi),
                    "integrand": _poly_to_json(s.integrand),
                }
                for s in tree.stack
            ],
        }
    return {
        "kind": "split",
        "pair": [str(tree.x), str(tree.y)],
        "left": tree_to_json(tree.left),
        "right": tree_to_json(tree.right),
    }


def tree_from_json(data: dict) -> FormulaTree:
    if data["kind"] == "leaf":
        stack = tuple(
            IntegrationStep(
                s["var"],
                _bound_from_json(s["lo"]),
                _bound_from_json(s["hi"]),
                _poly_from_json(s["integrand"]),
            )
            for s in data["stack"]
        )
        trace = tuple(DecompStep(t[0], tuple(t[1:])) for t in data["trace"])
        return Leaf(Fraction(data["volume"]), trace, stack)
    return Split(
        data["pair"][0],
        data["pair"][1],
        tree_from_json(data["left"]),
        tree_from_json(data["right"]),
    )


def tree_to_json_text(tree: FormulaTree, indent: int | None = None) -> str:
    return json.dumps(tree_to_json(tree), indent=indent)
