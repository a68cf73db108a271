"""Uniform random generation of executions.

A draw walks the formula tree to a leaf (branch probabilities exactly
proportional to subtree volumes), then replays that leaf's integration stack
outermost-in: at each step the already-fixed outer coordinates turn the
stored integrand into a univariate density whose CDF is inverted by
bisection.  Ranking the sampled coordinates yields a linear extension.
"""
from __future__ import annotations

import random
from fractions import Fraction

from .ctg import ControlGraph
from .decompose import FormulaTree, Leaf, Split, decompose, volume
from .poly import Bound, horner


class NumericalFailureError(Exception):
    """The replayed CDF was degenerate (non-positive mass)."""


class TieDetectedError(Exception):
    """Two sampled coordinates compared equal; caller should resample."""


BISECT_TOL = 1e-12
BISECT_MAX_ITER = 200


def choose_branch(tree: FormulaTree, rng: random.Random) -> Leaf:
    """Descend splits, each side weighted by its exact subtree volume."""
    while isinstance(tree, Split):
        p = volume(tree.left) / (volume(tree.left) + volume(tree.right))
        # integer draw keeps the branch probability exact
        tree = tree.left if rng.randrange(p.denominator) < p.numerator else tree.right
    return tree


def _prepare(leaf: Leaf) -> list:
    """Float-coefficient form of the stack, outermost step first."""
    prepared = []
    for step in reversed(leaf.stack):
        terms = [
            (float(c), tuple((v, e) for v, e in mono if v != step.var),
             _mono_degree(mono, step.var))
            for mono, c in step.integrand.terms.items()
        ]
        degree = max((d for _, _, d in terms), default=0)
        prepared.append((step.var, step.lo, step.hi, terms, degree))
    return prepared


def _mono_degree(mono, var) -> int:
    for v, e in mono:
        if v == var:
            return e
    return 0


_PREP_CACHE: dict[int, tuple[Leaf, list]] = {}


def _prepared(leaf: Leaf) -> list:
    key = id(leaf)
    hit = _PREP_CACHE.get(key)
    if hit is not None and hit[0] is leaf:
        return hit[1]
    prep = _prepare(leaf)
    _PREP_CACHE[key] = (leaf, prep)
    return prep


def _bound_value(b: Bound, fixed: dict) -> float:
    if b.kind == "const":
        return float(b.value)
    return fixed[b.value]


def sample_point(leaf: Leaf, rng: random.Random) -> dict:
    """One point of the leaf's polytope region, uniformly at random."""
    fixed: dict = {}
    for var, lo_b, hi_b, terms, degree in _prepared(leaf):
        lo = _bound_value(lo_b, fixed)
        hi = _bound_value(hi_b, fixed)
        # univariate restriction of the integrand
        coeffs = [0.0] * (degree + 1)
        for c, rest, d in terms:
            val = c
            for v, e in rest:
                val *= fixed[v] ** e
            coeffs[d] += val
        # antiderivative coefficients
        anti = [0.0] * (degree + 2)
        for d, c in enumerate(coeffs):
            anti[d + 1] = c / (d + 1)
        f_lo = horner(anti, lo)
        mass = horner(anti, hi) - f_lo
        if not mass > 0.0:
            raise NumericalFailureError(
                f"non-positive mass {mass!r} integrating {var} on [{lo}, {hi}]")
        target = f_lo + rng.random() * mass
        a, b = lo, hi
        for _ in range(BISECT_MAX_ITER):
            if b - a <= BISECT_TOL:
                break
            mid = 0.5 * (a + b)
            if horner(anti, mid) < target:
                a = mid
            else:
                b = mid
        fixed[var] = 0.5 * (a + b)
    return fixed


def rank_to_execution(point: dict) -> tuple:
    """Elements sorted by ascending coordinate."""
    items = sorted(point.items(), key=lambda kv: kv[1])
    for (_, c1), (_, c2) in zip(items, items[1:]):
        if c1 == c2:
            raise TieDetectedError("equal coordinates")
    return tuple(k for k, _ in items)


def sample_execution(g: ControlGraph, k: int, seed: int,
                     tree: FormulaTree | None = None) -> list[tuple]:
    """k independent uniform executions of the graph's order."""
    if tree is None:
        tree = decompose(g)
    rng = random.Random(seed)
    out = []
    for _ in range(k):
        while True:
            leaf = choose_branch(tree, rng)
            try:
                out.append(rank_to_execution(sample_point(leaf, rng)))
                break
            except TieDetectedError:
                continue
    return out
