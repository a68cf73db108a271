"""Barrier-synchronization process terms.

Syntax tree, concrete-text parser, validation, small-step operational
semantics and exhaustive execution enumeration.  The concrete grammar:

    proc := "0" | ident "." proc | "<" ident ">" proc
          | "nu" "(" ident ("," ident)* ")" proc | proc "||" proc
          | "(" proc ")" | "[" proc "]"

``||`` is left-associative and binds loosest, prefixes bind tighter, and
``nu(B)`` extends as far right as possible.  Whitespace is insignificant and
``#`` starts a comment running to end of line.  ``nu(A,B)`` is sugar for
``nu(A) nu(B)``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass


class ProcessError(Exception):
    """Base class for term-level errors."""


class ParseError(ProcessError):
    def __init__(self, position: int, expected: str, found: str = ""):
        self.position = position
        self.expected = expected
        self.found = found
        what = f", found {found!r}" if found else ""
        super().__init__(f"at offset {position}: expected {expected}{what}")


class DuplicateLabelError(ProcessError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"duplicate action label {label!r}")


class UnboundBarrierError(ProcessError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"barrier {name!r} used outside any nu({name}) scope")


class LimitExceededError(ProcessError):
    def __init__(self, limit: int):
        self.limit = limit
        super().__init__(f"more than {limit} executions")


# ---------------------------------------------------------------------------
# Syntax
# ---------------------------------------------------------------------------

class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Stop(Term):
    def __str__(self) -> str:
        return "0"


@dataclass(frozen=True)
class Act(Term):
    label: str
    cont: Term


@dataclass(frozen=True)
class Sync(Term):
    barrier: str
    cont: Term


@dataclass(frozen=True)
class New(Term):
    barrier: str
    body: Term


@dataclass(frozen=True)
class Par(Term):
    left: Term
    right: Term


STOP = Stop()

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def par_all(parts: list[Term]) -> Term:
    """Left-associated parallel composition of `parts` (Stop when empty)."""
    if not parts:
        return STOP
    out = parts[0]
    for p in parts[1:]:
        out = Par(out, p)
    return out


def flatten_par(term: Term) -> list[Term]:
    """Top-level parallel components, left to right."""
    out: list[Term] = []
    stack = [term]
    while stack:
        t = stack.pop()
        if isinstance(t, Par):
            stack.append(t.right)
            stack.append(t.left)
        else:
            out.append(t)
    return out


def size(term: Term) -> int:
    """Number of atomic actions in the term."""
    n = 0
    stack = [term]
    while stack:
        t = stack.pop()
        if isinstance(t, Act):
            n += 1
            stack.append(t.cont)
        elif isinstance(t, Sync):
            stack.append(t.cont)
        elif isinstance(t, New):
            stack.append(t.body)
        elif isinstance(t, Par):
            stack.append(t.left)
            stack.append(t.right)
    return n


def action_labels(term: Term) -> list[str]:
    """All action labels in leftmost-innermost order (with duplicates)."""
    out: list[str] = []
    stack = [term]
    while stack:
        t = stack.pop()
        if isinstance(t, Act):
            out.append(t.label)
            stack.append(t.cont)
        elif isinstance(t, Sync):
            stack.append(t.cont)
        elif isinstance(t, New):
            stack.append(t.body)
        elif isinstance(t, Par):
            stack.append(t.right)
            stack.append(t.left)
    return out


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+|\#[^\n]*)
      | (?P<par>\|\|)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<sym>[0<>()\[\].,])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(pos, "a token", text[pos])
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _TokenStream:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def next(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str) -> None:
        kind, val, pos = self.next()
        if val != value:
            raise ParseError(pos, repr(value), val or kind)

    def ident(self, what: str = "an identifier") -> str:
        kind, val, pos = self.next()
        if kind != "ident" or val == "nu":
            raise ParseError(pos, what, val or kind)
        return val


def parse_process(text: str) -> Term:
    """Parse the concrete syntax into a term (no validation)."""
    toks = _TokenStream(text)
    term = _parse_par(toks)
    kind, val, pos = toks.peek()
    if kind != "eof":
        raise ParseError(pos, "end of input", val)
    return term


def _parse_par(toks: _TokenStream) -> Term:
    term = _parse_unit(toks)
    while toks.peek()[1] == "||":
        toks.next()
        term = Par(term, _parse_unit(toks))
    return term


def _parse_unit(toks: _TokenStream) -> Term:
    kind, val, pos = toks.peek()
    if val == "0":
        toks.next()
        return STOP
    if val == "(":
        toks.next()
        term = _parse_par(toks)
        toks.expect(")")
        return term
    if val == "[":
        toks.next()
        term = _parse_par(toks)
        toks.expect("]")
        return term
    if val == "<":
        toks.next()
        name = toks.ident("a barrier name")
        toks.expect(">")
        return Sync(name, _parse_unit(toks))
    if val == "nu":
        toks.next()
        toks.expect("(")
        names = [toks.ident("a barrier name")]
        while toks.peek()[1] == ",":
            toks.next()
            names.append(toks.ident("a barrier name"))
        toks.expect(")")
        body = _parse_par(toks)  # nu extends as far right as possible
        for name in reversed(names):
            body = New(name, body)
        return body
    if kind == "ident":
        toks.next()
        toks.expect(".")
        return Act(val, _parse_unit(toks))
    raise ParseError(pos, "a process", val or kind)


def format_process(term: Term) -> str:
    """Concrete text for a term; inverse of parse_process on valid labels."""
    def fmt(t: Term, under_prefix: bool) -> str:
        # under_prefix: the result is the continuation of a prefix, so a
        # parallel or nu body must be parenthesised to keep its extent.
        if isinstance(t, Stop):
            return "0"
        if isinstance(t, Act):
            return f"{t.label}.{fmt(t.cont, True)}"
        if isinstance(t, Sync):
            return f"<{t.barrier}> {fmt(t.cont, True)}"
        if isinstance(t, New):
            inner = f"nu({t.barrier}) {fmt(t.body, False)}"
            return f"({inner})" if under_prefix else inner
        if isinstance(t, Par):
            parts = flatten_par(t)
            rendered = []
            for i, p in enumerate(parts):
                last = i == len(parts) - 1
                # a nu part swallows the rest of the composition unless last
                if isinstance(p, New) and not last:
                    rendered.append(f"({fmt(p, False)})")
                else:
                    rendered.append(fmt(p, False))
            text = " || ".join(rendered)
            return f"[{text}]" if under_prefix else text
        raise TypeError(f"not a term: {t!r}")

    return fmt(term, False)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    term: Term
    labels: tuple[str, ...]
    duplicates: tuple[str, ...]
    renamed: tuple[tuple[str, str], ...]
    unused_barriers: tuple[str, ...]


def validate(term: Term, auto_rename: bool = False) -> ValidationReport:
    """Check label uniqueness and barrier scoping.

    Raises UnboundBarrierError for a sync with no enclosing binder, and
    DuplicateLabelError for repeated labels unless `auto_rename` is set, in
    which case later occurrences become ``name#k``.
    """
    used: set[int] = set()
    binders: list[str] = []  # binder names, leftmost order

    def walk_scope(t: Term, env: dict[str, int]) -> None:
        # env maps a barrier name to the index of its innermost binder
        if isinstance(t, Act):
            walk_scope(t.cont, env)
        elif isinstance(t, Sync):
            if t.barrier not in env:
                raise UnboundBarrierError(t.barrier)
            used.add(env[t.barrier])
            walk_scope(t.cont, env)
        elif isinstance(t, New):
            idx = len(binders)
            binders.append(t.barrier)
            walk_scope(t.body, {**env, t.barrier: idx})
        elif isinstance(t, Par):
            walk_scope(t.left, env)
            walk_scope(t.right, env)

    walk_scope(term, {})
    unused = [name for idx, name in enumerate(binders) if idx not in used]

    labels = action_labels(term)
    seen: dict[str, int] = {}
    duplicates: list[str] = []
    for lab in labels:
        seen[lab] = seen.get(lab, 0) + 1
        if seen[lab] == 2:
            duplicates.append(lab)

    renamed: list[tuple[str, str]] = []
    out_term = term
    if duplicates:
        if not auto_rename:
            raise DuplicateLabelError(duplicates[0])
        taken = set(labels)
        counters: dict[str, int] = {}

        def fresh(name: str) -> str:
            k = counters.get(name, 2)
            while f"{name}#{k}" in taken:
                k += 1
            counters[name] = k + 1
            new = f"{name}#{k}"
            taken.add(new)
            return new

        first_seen: set[str] = set()

        def rename(t: Term) -> Term:
            if isinstance(t, Act):
                if t.label in first_seen:
                    new = fresh(t.label)
                    renamed.append((t.label, new))
                    return Act(new, rename(t.cont))
                first_seen.add(t.label)
                return Act(t.label, rename(t.cont))
            if isinstance(t, Sync):
                return Sync(t.barrier, rename(t.cont))
            if isinstance(t, New):
                return New(t.barrier, rename(t.body))
            if isinstance(t, Par):
                left = rename(t.left)  # evaluation order fixes label order
                return Par(left, rename(t.right))
            return t

        out_term = rename(term)
        labels = action_labels(out_term)

    return ValidationReport(
        term=out_term,
        labels=tuple(labels),
        duplicates=tuple(duplicates),
        renamed=tuple(renamed),
        unused_barriers=tuple(unused),
    )


# ---------------------------------------------------------------------------
# Operational semantics
# ---------------------------------------------------------------------------

def sync_barrier(term: Term, barrier: str) -> Term:
    """Erase every top-level sync prefix on `barrier`.

    Stops at action prefixes and at a rebinding nu of the same name.
    """
    if isinstance(term, Sync):
        if term.barrier == barrier:
            return term.cont
        return term  # a different barrier's sync blocks the sweep
    if isinstance(term, Par):
        return Par(sync_barrier(term.left, barrier),
                   sync_barrier(term.right, barrier))
    if isinstance(term, New) and term.barrier != barrier:
        return New(term.barrier, sync_barrier(term.body, barrier))
    # Stop, action prefixes and nu of the same name block the sweep
    return term


def wait_barrier(term: Term, barrier: str) -> bool:
    """True iff a sync on `barrier` is still reachable (not yet resolvable)."""
    if isinstance(term, Stop):
        return False
    if isinstance(term, Act):
        return wait_barrier(term.cont, barrier)
    if isinstance(term, Par):
        return wait_barrier(term.left, barrier) or wait_barrier(term.right, barrier)
    if isinstance(term, New):
        if term.barrier == barrier:
            return False
        return wait_barrier(term.body, barrier)
    if isinstance(term, Sync):
        if term.barrier == barrier:
            return True
        return wait_barrier(term.cont, barrier)
    raise TypeError(f"not a term: {term!r}")


def step(term: Term) -> list[tuple[str, Term]]:
    """All transitions of the term, leftmost-innermost first."""
    if isinstance(term, Act):
        return [(term.label, term.cont)]
    if isinstance(term, Par):
        out = [(a, Par(l2, term.right)) for a, l2 in step(term.left)]
        out += [(a, Par(term.left, r2)) for a, r2 in step(term.right)]
        return out
    if isinstance(term, New):
        body = sync_barrier(term.body, term.barrier)
        if wait_barrier(body, term.barrier):
            # synchronization incomplete: step inside, barrier kept
            return [(a, New(term.barrier, t2)) for a, t2 in step(term.body)]
        # synchronization complete: barrier discharged together with the step
        return step(body)
    return []


def discharge_barriers(term: Term) -> Term:
    """Silently resolve every barrier whose parties have all arrived.

    A binder whose swept body no longer waits is discharged even though no
    action witnesses it; this may expose further dischargeable barriers.
    """
    if isinstance(term, Par):
        return Par(discharge_barriers(term.left), discharge_barriers(term.right))
    if isinstance(term, New):
        body = discharge_barriers(term.body)
        swept = sync_barrier(body, term.barrier)
        if not wait_barrier(swept, term.barrier):
            return discharge_barriers(swept)
        return New(term.barrier, body)
    return term


def is_terminated(term: Term) -> bool:
    """Structurally finished: after discharging every ripe barrier, no
    action and no pending sync remain."""
    stack = [discharge_barriers(term)]
    while stack:
        t = stack.pop()
        if isinstance(t, (Act, Sync)):
            return False
        if isinstance(t, New):
            stack.append(t.body)
        elif isinstance(t, Par):
            stack.append(t.left)
            stack.append(t.right)
    return True


@dataclass(frozen=True)
class EnumerationResult:
    executions: tuple[tuple[str, ...], ...]
    deadlocked: bool
    deadlock_witness: Term | None = None


def enumerate_executions(term: Term, limit: int = 1_000_000) -> EnumerationResult:
    """All maximal runs of the term, lexicographically ordered.

    Also reports whether some maximal state is a deadlock (terminal but not
    structurally terminated).  Raises LimitExceededError beyond `limit` runs.
    """
    executions: set[tuple[str, ...]] = set()
    deadlocked = False
    witness: Term | None = None
    stack: list[tuple[Term, tuple[str, ...]]] = [(term, ())]
    while stack:
        t, path = stack.pop()
        moves = step(t)
        if not moves:
            if is_terminated(t):
                executions.add(path)
                if len(executions) > limit:
                    raise LimitExceededError(limit)
            else:
                deadlocked = True
                if witness is None:
                    witness = t
            continue
        for label, t2 in reversed(moves):
            stack.append((t2, path + (label,)))
    return EnumerationResult(tuple(sorted(executions)), deadlocked, witness)
