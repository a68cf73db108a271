"""Structured subclasses: fork-join and promise/arch processes.

Fork-join processes use their barriers with a stack discipline, which makes
the causal order series-parallel; counting then collapses to multinomial
products and sampling to the recursive method.  Promise processes let a main
thread spawn one-shot helpers joined later through dedicated barriers; arch
processes additionally finish all spawns before the first join.
"""
from __future__ import annotations

import random
import sys
from dataclasses import dataclass
from math import comb

from .ctg import build_ctg, has_deadlock, node_key
from .process import Act, New, Par, Stop, Sync, Term, STOP, par_all


class NotForkJoinError(Exception):
    pass


class NotPromiseError(Exception):
    pass


class InvalidParametersError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Series-parallel trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SPAtom:
    label: str


@dataclass(frozen=True)
class SPSeq:
    parts: tuple


@dataclass(frozen=True)
class SPPar:
    parts: tuple


SPTree = SPAtom | SPSeq | SPPar


def sp_seq(parts: list) -> SPTree:
    flat: list = []
    for p in parts:
        flat.extend(p.parts if isinstance(p, SPSeq) else [p])
    return flat[0] if len(flat) == 1 else SPSeq(tuple(flat))


def sp_par(parts: list) -> SPTree:
    flat: list = []
    for p in parts:
        flat.extend(p.parts if isinstance(p, SPPar) else [p])
    if len(flat) == 1:
        return flat[0]
    flat.sort(key=sp_labels)  # parallel parts commute; keep a canonical order
    return SPPar(tuple(flat))


def sp_size(tree: SPTree) -> int:
    n = 0
    stack = [tree]
    while stack:
        t = stack.pop()
        if isinstance(t, SPAtom):
            n += 1
        else:
            stack.extend(t.parts)
    return n


def sp_labels(tree: SPTree) -> list[str]:
    out: list[str] = []
    stack = [tree]
    while stack:
        t = stack.pop()
        if isinstance(t, SPAtom):
            out.append(t.label)
        else:
            stack.extend(reversed(t.parts))
    return out


def sp_covering(tree: SPTree) -> set[tuple]:
    """Covering edges of the poset the tree denotes."""

    def walk(t: SPTree) -> tuple[list, list, set]:
        if isinstance(t, SPAtom):
            return [t.label], [t.label], set()
        if isinstance(t, SPPar):
            mins: list = []
            maxs: list = []
            edges: set = set()
            for p in t.parts:
                m, x, e = walk(p)
                mins += m
                maxs += x
                edges |= e
            return mins, maxs, edges
        mins, maxs, edges = walk(t.parts[0])
        for p in t.parts[1:]:
            m2, x2, e2 = walk(p)
            edges |= e2
            edges |= {(u, v) for u in maxs for v in m2}
            maxs = x2
        return mins, maxs, edges

    return walk(tree)[2]


# ---------------------------------------------------------------------------
# Recognizers
# ---------------------------------------------------------------------------

def is_fork_join(term: Term) -> bool:
    """Stack-disciplined barrier usage: a sync may only release the most
    recently opened barrier."""
    work: list[tuple[Term, tuple[str, ...]]] = [(term, ())]
    while work:
        t, sigma = work.pop()
        if isinstance(t, Stop):
            continue
        if isinstance(t, Act):
            work.append((t.cont, sigma))
        elif isinstance(t, Par):
            work.append((t.left, sigma))
            work.append((t.right, sigma))
        elif isinstance(t, New):
            work.append((t.body, (t.barrier,) + sigma))
        elif isinstance(t, Sync):
            if not sigma or sigma[0] != t.barrier:
                return False
            work.append((t.cont, sigma[1:]))
        else:
            raise TypeError(f"not a term: {t!r}")
    return True


def sp_tree(term: Term) -> SPTree:
    """Series-parallel shape of a fork-join process's causal order.

    Decomposes the control graph; the reconstructed covering is checked
    against the graph, so an accepted result is always faithful.
    """
    if not is_fork_join(term):
        raise NotForkJoinError("barrier usage is not stack-disciplined")
    g = build_ctg(term)
    if has_deadlock(g):
        # possible only through name shadowing abuse; not a usable shape
        raise NotForkJoinError("control graph is deadlocked")
    nodes = sorted(g.vertices, key=node_key)
    if not nodes:
        raise NotForkJoinError("empty process has no shape")
    succ = {v: set() for v in nodes}
    for x, y in g.edges:
        succ[x].add(y)
    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 4 * len(nodes) + 100))
    try:
        tree = _sp_decompose(nodes, succ)
    finally:
        sys.setrecursionlimit(old_limit)
    if sp_covering(tree) != set(g.edges):
        raise NotForkJoinError("shape does not reproduce the causal order")
    return tree


def _sp_decompose(nodes: list, succ: dict) -> SPTree:
    if len(nodes) == 1:
        return SPAtom(nodes[0])
    comps = _weak_components(nodes, succ)
    if len(comps) > 1:
        return sp_par([
            _sp_decompose(c, {v: succ[v] & set(c) for v in c}) for c in comps
        ])
    segments = _series_segments(nodes, succ)
    if len(segments) == 1:
        raise NotForkJoinError("causal order is not series-parallel")
    return sp_seq([
        _sp_decompose(seg, {v: succ[v] & set(seg) for v in seg})
        for seg in segments
    ])


def _weak_components(nodes: list, succ: dict) -> list[list]:
    neigh = {v: set() for v in nodes}
    for v in nodes:
        for w in succ[v]:
            neigh[v].add(w)
            neigh[w].add(v)
    seen: set = set()
    comps = []
    for v in nodes:
        if v in seen:
            continue
        comp = []
        stack = [v]
        seen.add(v)
        while stack:
            u = stack.pop()
            comp.append(u)
            for w in neigh[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        comps.append(sorted(comp, key=node_key))
    return comps


def _series_segments(nodes: list, succ: dict) -> list[list]:
    """Split at every point where the prefix lies wholly below the rest."""
    idx = {v: i for i, v in enumerate(nodes)}
    pred_count = {v: 0 for v in nodes}
    for v in nodes:
        for w in succ[v]:
            pred_count[w] += 1
    order = [v for v in nodes if pred_count[v] == 0]
    queue = list(order)
    while queue:
        v = queue.pop()
        for w in succ[v]:
            pred_count[w] -= 1
            if pred_count[w] == 0:
                order.append(w)
                queue.append(w)
    desc = {v: 0 for v in nodes}
    for v in reversed(order):
        mask = 0
        for w in succ[v]:
            mask |= desc[w] | (1 << idx[w])
        desc[v] = mask
    full = (1 << len(nodes)) - 1
    segments: list[list] = []
    current: list = []
    below_rest = full
    taken = 0
    for v in order:
        current.append(v)
        taken |= 1 << idx[v]
        below_rest &= desc[v]
        rest = full & ~taken
        if rest and below_rest & rest == rest:
            segments.append(current)
            current = []
            below_rest = full
    if current:
        segments.append(current)
    return segments


# ---------------------------------------------------------------------------
# Counting and sampling on series-parallel shapes
# ---------------------------------------------------------------------------

def fj_count(tree: SPTree) -> int:
    """Linear-extension count: products along sequences, multinomial
    interleavings across parallel parts."""
    count, _ = _fj_count_size(tree)
    return count


def _fj_count_size(tree: SPTree) -> tuple[int, int]:
    # iterative post-order: results per node as (count, size)
    results: list[tuple[int, int]] = []
    work: list[tuple[SPTree, bool]] = [(tree, False)]
    while work:
        node, ready = work.pop()
        if isinstance(node, SPAtom):
            results.append((1, 1))
            continue
        if not ready:
            work.append((node, True))
            for p in node.parts:
                work.append((p, False))
            continue
        k = len(node.parts)
        children = results[-k:]
        del results[-k:]
        children.reverse()
        if isinstance(node, SPSeq):
            count = 1
            total = 0
            for c, s in children:
                count *= c
                total += s
        else:
            count = 1
            total = 0
            for c, s in children:
                total += s
                count *= comb(total, s) * c
        results.append((count, total))
    return results[0]


def fj_sample(tree: SPTree, rng: random.Random | int) -> tuple[str, ...]:
    """One uniform linear extension via the recursive method: sequences
    concatenate, parallel parts merge by remaining-size-proportional picks."""
    rng = _as_rng(rng)
    results: list[list[str]] = []
    work: list[tuple[SPTree, bool]] = [(tree, False)]
    while work:
        node, ready = work.pop()
        if isinstance(node, SPAtom):
            results.append([node.label])
            continue
        if not ready:
            work.append((node, True))
            for p in node.parts:
                work.append((p, False))
            continue
        k = len(node.parts)
        children = results[-k:]
        del results[-k:]
        children.reverse()
        if isinstance(node, SPSeq):
            merged: list[str] = []
            for c in children:
                merged.extend(c)
        else:
            merged = _merge_uniform(children, rng)
        results.append(merged)
    return tuple(results[0])


def _merge_uniform(parts: list[list[str]], rng: random.Random) -> list[str]:
    positions = [0] * len(parts)
    remaining = [len(p) for p in parts]
    total = sum(remaining)
    out: list[str] = []
    for _ in range(total):
        r = rng.randrange(sum(remaining))
        for i, rem in enumerate(remaining):
            if r < rem:
                out.append(parts[i][positions[i]])
                positions[i] += 1
                remaining[i] -= 1
                break
            r -= rem
    return out


# ---------------------------------------------------------------------------
# Promise and arch recognizers
# ---------------------------------------------------------------------------

def _promise_tail(term: Term, barrier: str) -> bool:
    """Actions only, ending exactly in a sync on `barrier` then stop."""
    t = term
    while isinstance(t, Act):
        t = t.cont
    return isinstance(t, Sync) and t.barrier == barrier and isinstance(t.cont, Stop)


def is_promise_process(term: Term) -> bool:
    """Main control thread spawning one-shot promises joined on dedicated
    barriers; all pending promises must be joined before termination."""
    pending: set[str] = set()
    t = term
    while True:
        if isinstance(t, Stop):
            return not pending
        if isinstance(t, Act):
            t = t.cont
        elif isinstance(t, Sync):
            if t.barrier not in pending:
                return False
            pending.remove(t.barrier)
            t = t.cont
        elif isinstance(t, New):
            if not isinstance(t.body, Par):
                return False
            cont, promise = t.body.left, t.body.right
            if t.barrier in pending or not _promise_tail(promise, t.barrier):
                return False
            pending.add(t.barrier)
            t = cont
        else:
            return False


def is_arch(term: Term) -> bool:
    """Promise process whose spawns all precede its first join."""
    if not is_promise_process(term):
        raise NotPromiseError("not a promise process")
    joined = False
    t = term
    while not isinstance(t, Stop):
        if isinstance(t, Act):
            t = t.cont
        elif isinstance(t, Sync):
            joined = True
            t = t.cont
        else:  # New spawn
            if joined:
                return False
            t = t.body.left
    return True


# ---------------------------------------------------------------------------
# Random instance generation
# ---------------------------------------------------------------------------

def _as_rng(rng: random.Random | int) -> random.Random:
    return rng if isinstance(rng, random.Random) else random.Random(rng)


_EXACT_SHAPE_MAX = 500
_tree_counts: list[int] = [1]  # binary trees by node count (Catalan)


def _tree_count(n: int) -> int:
    while len(_tree_counts) <= n:
        m = len(_tree_counts)
        _tree_counts.append(sum(_tree_counts[k] * _tree_counts[m - 1 - k]
                                for k in range(m)))
    return _tree_counts[n]


def gen_fork_join_instance(size: int,
                           rng: random.Random | int) -> tuple[SPTree, Term]:
    """Random fork-join instance: one action forks two children that are
    joined back on a dedicated barrier, recursively (a binary tree of
    actions).

    The underlying binary tree is exactly uniform up to _EXACT_SHAPE_MAX
    actions (by Catalan counting); beyond that the subtree split is uniform,
    which keeps generation linear.  Returns both the series-parallel shape
    and the process term, consistently labeled.
    """
    if size < 1:
        raise InvalidParametersError("size must be >= 1")
    rng = _as_rng(rng)
    exact = size <= _EXACT_SHAPE_MAX
    if exact:
        _tree_count(size)

    def split(n: int) -> int:
        # n actions at this node: 1 root + k left + (n-1-k) right
        if not exact:
            return rng.randrange(n)
        r = rng.randrange(_tree_counts[n])
        for k in range(n):
            w = _tree_counts[k] * _tree_counts[n - 1 - k]
            if r < w:
                return k
            r -= w
        raise AssertionError("counting table out of sync")

    counter = [0]
    barriers = [0]

    # stack machine producing (shape, term) pairs bottom-up
    out: list[tuple[SPTree, Term]] = []
    work: list[tuple] = [("gen", size)]
    while work:
        op = work.pop()
        if op[0] == "mk":
            label = op[1]
            right = out.pop()
            left = out.pop()
            kids = [st for st in (left, right) if st is not None]
            if not kids:
                out.append((SPAtom(label), Act(label, STOP)))
                continue
            shape = sp_seq([SPAtom(label),
                            sp_par([s for s, _ in kids])])
            barriers[0] += 1
            b = f"J{barriers[0]}"
            comps: list[Term] = [Act(label, Sync(b, STOP))]
            comps += [Sync(b, t) for _, t in kids]
            out.append((shape, New(b, par_all(comps))))
            continue
        n = op[1]
        if n == 0:
            out.append(None)
            continue
        counter[0] += 1
        label = f"a{counter[0]}"
        k = split(n)
        work.append(("mk", label))
        work.append(("gen", n - 1 - k))
        work.append(("gen", k))
    return out[0]


def gen_fork_join_shape(size: int, rng: random.Random | int) -> SPTree:
    """Series-parallel shape of a random fork-join instance."""
    return gen_fork_join_instance(size, rng)[0]


def gen_fork_join(size: int, rng: random.Random | int) -> Term:
    """Random fork-join process of the given action count."""
    return gen_fork_join_instance(size, rng)[1]


def fj_term_of_shape(shape: SPTree) -> Term:
    """Process term whose causal order is the given series-parallel shape.

    Parallel parts with a continuation join on a fresh barrier; without one
    they stay bare parallel compositions.  Note that a shape putting two or
    more maximal actions directly before two or more minimal ones denotes a
    complete-bipartite (crown) boundary, which no bottom/intermediate/top
    reduction can consume.
    """
    barriers = [0]

    def enc(t: SPTree, cont: Term) -> Term:
        if isinstance(t, SPAtom):
            return Act(t.label, cont)
        if isinstance(t, SPSeq):
            for p in reversed(t.parts):
                cont = enc(p, cont)
            return cont
        if isinstance(cont, Stop):
            return par_all([enc(p, STOP) for p in t.parts])
        barriers[0] += 1
        b = f"J{barriers[0]}"
        comps = [enc(p, Sync(b, STOP)) for p in t.parts]
        comps.append(Sync(b, cont))
        return New(b, par_all(comps))

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 10_000))
    try:
        return enc(shape, STOP)
    finally:
        sys.setrecursionlimit(old_limit)


def gen_arch(n: int, k: int, rng: random.Random | int) -> Term:
    """Random arch process: `k` promises all spawned before any join,
    `n` actions total (each promise runs at least one)."""
    if n < 1:
        raise InvalidParametersError("n must be >= 1")
    if k < 0 or k > n:
        raise InvalidParametersError("need 0 <= k <= n")
    rng = _as_rng(rng)
    extras = [0] * (k + 1)  # per-promise extras, last bin = main thread
    for _ in range(n - k):
        extras[rng.randrange(k + 1)] += 1
    promise_lengths = [1 + extras[i] for i in range(k)]
    m_main = extras[k]
    if k == 0:
        m_main = n

    join_order = list(range(k))
    rng.shuffle(join_order)
    skeleton: list[tuple] = [("spawn", i) for i in range(k)]
    skeleton += [("join", i) for i in join_order]
    slots = m_main + len(skeleton)
    action_at = set(rng.sample(range(slots), m_main))
    events: list[tuple] = []
    label = 0
    si = 0
    for pos in range(slots):
        if pos in action_at:
            label += 1
            events.append(("act", f"m{label}"))
        else:
            events.append(skeleton[si])
            si += 1

    bodies: list[Term] = []
    for i in range(k):
        body: Term = Sync(f"B{i + 1}", STOP)
        for j in range(promise_lengths[i], 0, -1):
            body = Act(f"p{i + 1}_{j}", body)
        bodies.append(body)

    term: Term = STOP
    for ev in reversed(events):
        if ev[0] == "act":
            term = Act(ev[1], term)
        elif ev[0] == "join":
            term = Sync(f"B{ev[1] + 1}", term)
        else:
            i = ev[1]
            term = New(f"B{i + 1}", Par(term, bodies[i]))
    return term
