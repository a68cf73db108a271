"""Ground-truth oracles and statistical checks.

Everything here is deliberately independent of the symbolic engine:
extensions are enumerated by plain backtracking over minimal elements, the
baseline sampler picks uniformly from that list, and the adjacent-swap chain
is a simple (approximate) Markov sampler.
"""
from __future__ import annotations

import random
from typing import Iterable, Sequence

from scipy.special import gammaincc

from .ctg import ControlGraph, Poset, to_poset


class TooLargeError(Exception):
    pass


class UnknownOutcomeError(ValueError):
    pass


DEFAULT_MAX_VERTICES = 12
DEFAULT_MAX_EXTENSIONS = 10_000_000


def _as_poset(g: ControlGraph | Poset) -> Poset:
    return g if isinstance(g, Poset) else to_poset(g)


def is_linear_extension(sequence: Sequence, g: ControlGraph | Poset) -> bool:
    """Does the sequence list every element once, respecting every edge?"""
    poset = _as_poset(g)
    if sorted(sequence, key=str) != sorted(poset.elements, key=str):
        return False
    pos = {v: i for i, v in enumerate(sequence)}
    return all(pos[a] < pos[b] for a, b in poset.covering)


def brute_force_extensions(g: ControlGraph | Poset,
                           max_vertices: int = DEFAULT_MAX_VERTICES,
                           max_extensions: int = DEFAULT_MAX_EXTENSIONS,
                           ) -> list[tuple]:
    """All linear extensions by backtracking, lexicographically ordered."""
    poset = _as_poset(g)
    if len(poset) > max_vertices:
        raise TooLargeError(f"{len(poset)} vertices exceeds cap {max_vertices}")
    elements = sorted(poset.elements, key=str)
    pred_count = {v: 0 for v in elements}
    succ: dict = {v: [] for v in elements}
    for a, b in poset.covering:
        succ[a].append(b)
        pred_count[b] += 1
    out: list[tuple] = []
    prefix: list = []

    def backtrack() -> None:
        if len(prefix) == len(elements):
            out.append(tuple(prefix))
            if len(out) > max_extensions:
                raise TooLargeError(f"more than {max_extensions} extensions")
            return
        for v in elements:
            if pred_count[v] == 0:
                pred_count[v] = -1  # taken
                for w in succ[v]:
                    pred_count[w] -= 1
                prefix.append(v)
                backtrack()
                prefix.pop()
                for w in succ[v]:
                    pred_count[w] += 1
                pred_count[v] = 0

    backtrack()
    return out


def brute_force_sampler(g: ControlGraph | Poset, k: int, seed: int,
                        **caps) -> list[tuple]:
    """k exact-uniform picks from the enumerated extension list."""
    extensions = brute_force_extensions(g, **caps)
    rng = random.Random(seed)
    return [extensions[rng.randrange(len(extensions))] for _ in range(k)]


def mcmc_sampler(g: ControlGraph | Poset, k: int,
                 burn_in: int = 2000, steps_between: int = 50,
                 seed: int = 0) -> list[tuple]:
    """Adjacent-transposition chain on linear extensions.

    Approximate sampler: starts from the lexicographic-first topological
    sort, swaps a uniformly chosen adjacent unconstrained pair per step.
    Symmetric proposals make the uniform distribution stationary, but finite
    burn-in gives no exactness guarantee.
    """
    poset = _as_poset(g)
    state = list(_lex_min_topological(poset))
    n = len(state)
    edges = set(poset.covering)
    rng = random.Random(seed)
    out: list[tuple] = []
    if n <= 1:
        return [tuple(state)] * k

    def run(steps: int) -> None:
        for _ in range(steps):
            i = rng.randrange(n - 1)
            if (state[i], state[i + 1]) not in edges:
                state[i], state[i + 1] = state[i + 1], state[i]

    run(burn_in)
    for _ in range(k):
        run(steps_between)
        out.append(tuple(state))
    return out


def _lex_min_topological(poset: Poset) -> list:
    elements = sorted(poset.elements, key=str)
    pred_count = {v: 0 for v in elements}
    succ: dict = {v: [] for v in elements}
    for a, b in poset.covering:
        succ[a].append(b)
        pred_count[b] += 1
    out = []
    ready = [v for v in elements if pred_count[v] == 0]
    while ready:
        v = min(ready, key=str)
        ready.remove(v)
        out.append(v)
        for w in succ[v]:
            pred_count[w] -= 1
            if pred_count[w] == 0:
                ready.append(w)
    return out


def chi_square_uniformity(samples: Iterable[tuple],
                          support: Sequence[tuple]) -> tuple[float, float]:
    """Pearson statistic against the uniform law on `support`, with the
    p-value from the regularized upper incomplete gamma function."""
    index = {outcome: i for i, outcome in enumerate(support)}
    counts = [0] * len(support)
    total = 0
    for s in samples:
        s = tuple(s)
        if s not in index:
            raise UnknownOutcomeError(f"sample outside support: {s!r}")
        counts[index[s]] += 1
        total += 1
    if total == 0:
        raise ValueError("no samples")
    k = len(support)
    expected = total / k
    stat = sum((c - expected) ** 2 / expected for c in counts)
    df = k - 1
    if df == 0:
        return stat, 1.0
    p_value = float(gammaincc(df / 2.0, stat / 2.0))
    return stat, p_value
