"""Exact numbers in Q[sqrt(2), sqrt(3), ...].

A :class:`Surd` is a finite sum ``sum_r q_r * sqrt(r)`` with rational ``q_r``
and squarefree positive radicands ``r``.  It is closed under ``+``, ``-``, ``*``
and under division by anything with a single radicand, which covers every
constant the block calculus needs (``a_k``, ``b_k`` and their products).
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Union

Number = Union[int, Fraction, "Surd"]


@lru_cache(maxsize=None)
def _squarefree_split(n: int) -> tuple[int, int]:
    """Return (s, r) with n = s*s*r and r squarefree."""
    if n <= 0:
        raise ValueError("radicand must be positive")
    s, r, p = 1, 1, 2
    while p * p <= n:
        while n % (p * p) == 0:
            n //= p * p
            s *= p
        if n % p == 0:
            n //= p
            r *= p
        p += 1
    return s, r * n


class Surd:
    __slots__ = ("terms",)

    def __init__(self, terms: dict[int, Fraction] | None = None):
        self.terms: dict[int, Fraction] = {}
        if terms:
            for r, q in terms.items():
                q = Fraction(q)
                if q:
                    s, rr = _squarefree_split(r)
                    self.terms[rr] = self.terms.get(rr, Fraction(0)) + q * s
            self.terms = {r: q for r, q in self.terms.items() if q}

    @classmethod
    def sqrt(cls, x: int | Fraction) -> "Surd":
        """Exact square root of a non-negative rational."""
        x = Fraction(x)
        if x < 0:
            raise ValueError("negative radicand")
        if x == 0:
            return cls()
        # sqrt(p/q) = sqrt(p*q)/q
        return cls({x.numerator * x.denominator: Fraction(1, x.denominator)})

    @classmethod
    def coerce(cls, x: Number) -> "Surd":
        if isinstance(x, Surd):
            return x
        if isinstance(x, (int, Rational)):
            return cls({1: Fraction(x)})
        raise TypeError(f"cannot coerce {type(x).__name__} to Surd")

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        try:
            o = Surd.coerce(other)
        except TypeError:
            return NotImplemented
        t = dict(self.terms)
        for r, q in o.terms.items():
            t[r] = t.get(r, Fraction(0)) + q
        return Surd(t)

    __radd__ = __add__

    def __neg__(self):
        return Surd({r: -q for r, q in self.terms.items()})

    def __sub__(self, other):
        return self + (-Surd.coerce(other))

    def __rsub__(self, other):
        return Surd.coerce(other) - self

    def __mul__(self, other):
        try:
            o = Surd.coerce(other)
        except TypeError:
            return NotImplemented
        t: dict[int, Fraction] = {}
        for r1, q1 in self.terms.items():
            for r2, q2 in o.terms.items():
                g = math.gcd(r1, r2)
                r = (r1 // g) * (r2 // g)
                t[r] = t.get(r, Fraction(0)) + q1 * q2 * g
        return Surd(t)

    __rmul__ = __mul__

    def inverse(self) -> "Surd":
        if len(self.terms) != 1:
            raise ZeroDivisionError("only single-radicand surds are invertible here")
        (r, q), = self.terms.items()
        return Surd({r: 1 / (q * r)})

    def __truediv__(self, other):
        return self * Surd.coerce(other).inverse()

    def __rtruediv__(self, other):
        return Surd.coerce(other) * self.inverse()

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = Surd.coerce(1)
        for _ in range(k):
            out = out * self
        return out

    # comparison / conversion -------------------------------------------
    def __eq__(self, other):
        try:
            o = Surd.coerce(other)
        except TypeError:
            return NotImplemented
        return self.terms == o.terms

    def __hash__(self):
        if self.is_rational():
            return hash(self.rational())
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    def is_rational(self) -> bool:
        return set(self.terms) <= {1}

    def rational(self) -> Fraction:
        if not self.is_rational():
            raise ValueError(f"{self} is irrational")
        return self.terms.get(1, Fraction(0))

    def __float__(self):
        return float(sum(float(q) * math.sqrt(r) for r, q in self.terms.items()))

    def __complex__(self):
        return complex(float(self))

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for r in sorted(self.terms):
            q = self.terms[r]
            parts.append(str(q) if r == 1 else f"{q}*sqrt({r})")
        return " + ".join(parts)

    def to_sympy(self):
        import sympy

        return sum((sympy.Rational(q.numerator, q.denominator) * sympy.sqrt(r)
                    for r, q in self.terms.items()), sympy.Integer(0))


def exact(x: Number) -> Number:
    """Collapse a rational-valued Surd back to a Fraction."""
    if isinstance(x, Surd) and x.is_rational():
        return x.rational()
    return x
