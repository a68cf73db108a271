"""Sparse multivariate polynomials over exact rationals.

The counting pipeline integrates polynomials repeatedly against bounds that
are either the constants 0/1 or another live variable, so everything here is
kept exact (``fractions.Fraction`` coefficients, no floats) except for the two
helpers used by the numeric sampler, ``eval`` with float assignments and
``restrict_univariate``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Iterable, Mapping

Monomial = tuple  # sorted tuple of (variable, positive exponent) pairs


class MissingVariableError(KeyError):
    """An evaluation/restriction did not cover some variable."""


@dataclass(frozen=True)
class Bound:
    """Integration bound: the constant 0, the constant 1, or a variable."""

    kind: str  # "const" | "var"
    value: object

    @staticmethod
    def zero() -> "Bound":
        return Bound("const", 0)

    @staticmethod
    def one() -> "Bound":
        return Bound("const", 1)

    @staticmethod
    def var(v: Hashable) -> "Bound":
        return Bound("var", v)

    def __str__(self) -> str:
        return str(self.value)


def as_bound(x) -> Bound:
    """Coerce 0, 1, a variable name, or a Bound into a Bound."""
    if isinstance(x, Bound):
        return x
    if x == 0 or x == 1:
        return Bound("const", int(x))
    return Bound("var", x)


def _mono_get(mono: Monomial, var) -> int:
    for v, e in mono:
        if v == var:
            return e
    return 0


def _mono_set(mono: Monomial, var, exp: int) -> Monomial:
    items = [(v, e) for v, e in mono if v != var]
    if exp > 0:
        items.append((var, exp))
    items.sort(key=lambda ve: str(ve[0]))
    return tuple(items)


class Polynomial:
    """Immutable sparse polynomial; term map from monomial to Fraction."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, Fraction] | None = None):
        clean: dict[Monomial, Fraction] = {}
        if terms:
            for m, c in terms.items():
                c = Fraction(c)
                if c != 0:
                    clean[m] = c
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero() -> "Polynomial":
        return Polynomial()

    @staticmethod
    def one() -> "Polynomial":
        return Polynomial.constant(1)

    @staticmethod
    def constant(c) -> "Polynomial":
        return Polynomial({(): Fraction(c)})

    @staticmethod
    def variable(v: Hashable) -> "Polynomial":
        return Polynomial({((v, 1),): Fraction(1)})

    # -- ring operations ----------------------------------------------

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if not isinstance(other, Polynomial):
            return NotImplemented
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = terms.get(m, Fraction(0)) + c
        return Polynomial(terms)

    def __neg__(self) -> "Polynomial":
        return Polynomial({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        if not isinstance(other, Polynomial):
            return NotImplemented
        terms: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                terms[m] = terms.get(m, Fraction(0)) + c1 * c2
        return Polynomial(terms)

    def scale(self, c) -> "Polynomial":
        c = Fraction(c)
        return Polynomial({m: k * c for m, k in self.terms.items()})

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    # -- queries ------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(m == () for m in self.terms)

    def constant_value(self) -> Fraction:
        if not self.terms:
            return Fraction(0)
        if not self.is_constant():
            raise ValueError("polynomial is not constant: %s" % self.render())
        return self.terms[()]

    def variables(self) -> set:
        return {v for m in self.terms for v, _ in m}

    def degree(self, var) -> int:
        return max((_mono_get(m, var) for m in self.terms), default=0)

    # -- calculus -----------------------------------------------------

    def integrate(self, var, lo, hi) -> "Polynomial":
        """Definite integral d(var) from `lo` to `hi`; result drops `var`."""
        lo, hi = as_bound(lo), as_bound(hi)
        anti: dict[Monomial, Fraction] = {}
        for m, c in self.terms.items():
            k = _mono_get(m, var)
            m2 = _mono_set(m, var, k + 1)
            anti[m2] = anti.get(m2, Fraction(0)) + c / (k + 1)
        return _substitute(anti, var, hi) - _substitute(anti, var, lo)

    # -- numeric helpers ----------------------------------------------

    def eval(self, assignment: Mapping):
        """Evaluate; exact on Fraction/int inputs, float on float inputs."""
        total = None
        for m, c in self.terms.items():
            val = c
            for v, e in m:
                try:
                    val = val * assignment[v] ** e
                except KeyError:
                    raise MissingVariableError(v) from None
            total = val if total is None else total + val
        return Fraction(0) if total is None else total

    def restrict_univariate(self, var, fixed: Mapping) -> list[float]:
        """Float coefficients (index = degree) of self viewed in `var` alone.

        Every other variable must appear in `fixed`.
        """
        coeffs = [0.0] * (self.degree(var) + 1)
        for m, c in self.terms.items():
            val = float(c)
            deg = 0
            for v, e in m:
                if v == var:
                    deg = e
                    continue
                try:
                    val *= fixed[v] ** e
                except KeyError:
                    raise MissingVariableError(v) from None
            coeffs[deg] += val
        return coeffs

    # -- rendering ----------------------------------------------------

    def render(self) -> str:
        """Canonical sorted-term string, stable across runs."""
        if not self.terms:
            return "0"
        def mono_key(m):
            return (-sum(e for _, e in m), tuple((str(v), e) for v, e in m))
        parts = []
        for m in sorted(self.terms, key=mono_key):
            c = self.terms[m]
            factors = [str(c)] if (c != 1 or not m) else []
            for v, e in m:
                factors.append(f"{v}^{e}" if e > 1 else str(v))
            parts.append("*".join(factors))
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"Polynomial({self.render()})"


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    exps: dict = {}
    for v, e in m1:
        exps[v] = exps.get(v, 0) + e
    for v, e in m2:
        exps[v] = exps.get(v, 0) + e
    return tuple(sorted(exps.items(), key=lambda ve: str(ve[0])))


def _substitute(terms: Mapping[Monomial, Fraction], var, bound: Bound) -> Polynomial:
    """Replace `var` by `bound` in a term map (antiderivative evaluation)."""
    if bound.kind == "const" and bound.value == 0:
        # antiderivatives always carry var with exponent >= 1
        kept = {m: c for m, c in terms.items() if _mono_get(m, var) == 0}
        return Polynomial(kept)
    out: dict[Monomial, Fraction] = {}
    for m, c in terms.items():
        k = _mono_get(m, var)
        m2 = _mono_set(m, var, 0)
        if bound.kind == "var" and k:
            z = bound.value
            m2 = _mono_set(m2, z, _mono_get(m2, z) + k)
        out[m2] = out.get(m2, Fraction(0)) + c
    return Polynomial(out)


def horner(coeffs: Iterable[float], x: float) -> float:
    """Evaluate a coefficient list (index = degree) at x."""
    acc = 0.0
    for c in reversed(list(coeffs)):
        acc = acc * x + c
    return acc
