"""Symbolic covariant calculus for one Fourier mode on a rotationally symmetric surface.

A reduced field is a list of unknown radial functions ``f_j(mu)``; an
expression linear in them is stored as ``{(j, p): coeff}`` meaning
``sum coeff * d^p f_j / dmu^p``.  Every expression carries an implicit factor
``mu^beta e^{i ell phi}``, so ``d_mu`` acts as ``d_mu + beta/mu`` and ``d_phi``
as multiplication by ``i ell``.  Coordinates are ``(mu, phi)`` with index 0 = mu.
"""
from __future__ import annotations

import itertools
import math

import sympy as sp

MU = sp.Symbol("mu")
ELL = sp.Symbol("ell")


def _add(a: dict, b: dict, s=1) -> dict:
    out = dict(a)
    for key, v in b.items():
        out[key] = out.get(key, 0) + s * v
    return out


def _scale(a: dict, c) -> dict:
    return {key: c * v for key, v in a.items()}


def sorted_indices(dim: int, k: int) -> list:
    return list(itertools.combinations_with_replacement(range(dim), k))


def mult_fact(K) -> int:
    return math.prod(math.factorial(K.count(i)) for i in set(K))


class ModeCalculus:
    """Operators on full-component tensors ``{I: expr}`` over the metric ``diag(g_mumu, g_phiphi)``."""

    dim = 2

    def __init__(self, g_mumu, g_phiphi, beta=0):
        self.beta = beta
        g = sp.diag(g_mumu, g_phiphi)
        self.g = g
        self.ginv = sp.diag(1 / g_mumu, 1 / g_phiphi)
        x = (MU, sp.Symbol("phi"))
        d = 2
        self.gamma = [[[sp.cancel(sum(self.ginv[k, l] * (sp.diff(g[l, i], x[j]) + sp.diff(g[l, j], x[i])
                                                           - sp.diff(g[i, j], x[l])) for l in range(d)) / 2)
                        for j in range(d)] for i in range(d)] for k in range(d)]
        G = self.gamma
        self.riemann = [[[[sp.cancel(sp.diff(G[l][b][k], x[a]) - sp.diff(G[l][a][k], x[b])
                                     + sum(G[l][a][e] * G[e][b][k] - G[l][b][e] * G[e][a][k] for e in range(d)))
                           for k in range(d)] for l in range(d)] for b in range(d)] for a in range(d)]

    # -- scalar-valued linear expressions ---------------------------------
    def dmu(self, e: dict) -> dict:
        out: dict = {}
        for (j, p), c in e.items():
            out = _add(out, {(j, p + 1): c, (j, p): sp.diff(c, MU) + self.beta * c / MU})
        return out

    def deriv(self, a: int, e: dict) -> dict:
        return self.dmu(e) if a == 0 else _scale(e, sp.I * ELL)

    # -- tensors: dict full index -> expression ----------------------------
    @staticmethod
    def indices(k):
        return list(itertools.product(range(2), repeat=k))

    def from_sorted(self, k: int, offset: int) -> dict:
        """Full components of a rank-k field whose sorted coefficients are unknowns offset.."""
        pos = {K: offset + r for r, K in enumerate(sorted_indices(2, k))}
        return {I: {(pos[tuple(sorted(I))], 0): sp.Integer(mult_fact(tuple(sorted(I))))} for I in self.indices(k)}

    @staticmethod
    def to_sorted(T: dict, k: int) -> list:
        return [_scale(T[K], sp.Rational(1, mult_fact(K))) for K in sorted_indices(2, k)]

    @staticmethod
    def rank(T: dict) -> int:
        return len(next(iter(T)))

    def nabla(self, T: dict) -> dict:
        k = self.rank(T)
        out = {}
        for a in range(2):
            for I in self.indices(k):
                e = self.deriv(a, T[I])
                for r in range(k):
                    for c in range(2):
                        G = self.gamma[c][a][I[r]]
                        if G != 0:
                            e = _add(e, _scale(T[I[:r] + (c,) + I[r + 1:]], -G))
                out[(a,) + I] = e
        return out

    def sym(self, T: dict) -> dict:
        k = self.rank(T)
        perms = list(itertools.permutations(range(k)))
        out = {}
        for I in self.indices(k):
            e: dict = {}
            for p in perms:
                e = _add(e, T[tuple(I[q] for q in p)])
            out[I] = _scale(e, sp.Rational(1, len(perms)))
        return out

    def contract01(self, T: dict) -> dict:
        k = self.rank(T)
        out = {}
        for I in self.indices(k - 2):
            e: dict = {}
            for a in range(2):
                e = _add(e, _scale(T[(a, a) + I], self.ginv[a, a]))
            out[I] = e
        return out

    def d(self, T):
        k = self.rank(T)
        return {I: _scale(v, k + 1) for I, v in self.sym(self.nabla(T)).items()}

    def div(self, T):
        return {I: _scale(v, -1) for I, v in self.contract01(self.nabla(T)).items()}

    def rough(self, T):
        return {I: _scale(v, -1) for I, v in self.contract01(self.nabla(self.nabla(T))).items()}

    def curvature(self, T):
        k = self.rank(T)
        if k == 0:
            return {(): {}}
        Ru = {}
        for a, b in itertools.product(range(2), repeat=2):
            for J in self.indices(k):
                e: dict = {}
                for r in range(k):
                    for c in range(2):
                        R = self.riemann[a][b][c][J[r]]
                        if R != 0:
                            e = _add(e, _scale(T[J[:r] + (c,) + J[r + 1:]], -R))
                Ru[(a, b) + J] = e
        t = {}
        for I in self.indices(k):
            e: dict = {}
            for a in range(2):
                e = _add(e, _scale(Ru[(a, I[0], a) + I[1:]], self.ginv[a, a]))
            t[I] = e
        return {I: _scale(v, k) for I, v in self.sym(t).items()}

    def lich(self, T):
        return {I: _add(a, self.curvature(T)[I]) for I, a in self.rough(T).items()}

    def trace(self, T):
        return self.contract01(T)

    def L(self, T):
        k = self.rank(T)
        prod = {}
        for I in self.indices(k + 2):
            gij = self.g[I[0], I[1]]
            prod[I] = _scale(T[I[2:]], gij) if gij != 0 else {}
        return {I: _scale(v, (k + 2) * (k + 1)) for I, v in self.sym(prod).items()}

    def by_tag(self, tag: str, T: dict) -> dict:
        if tag == "Lich":
            return self.lich(T)
        if tag == "Rough":
            return self.rough(T)
        if tag == "d":
            return self.d(T)
        if tag == "div":
            return self.div(T)
        if tag == "Trace":
            return self.trace(T)
        if tag == "LefL":
            return self.L(T)
        if tag == "LL":
            return self.L(self.trace(T))
        if tag == "Id":
            return T
        raise ValueError(f"unknown tag {tag!r}")


def poly_times(w: list, k: int, u: list, j: int) -> list:
    """Sorted coefficients of ``w^j . u`` for a 1-form w and sorted rank-k coefficients u."""
    out = {K: {} for K in sorted_indices(2, k + j)}
    pos = sorted_indices(2, k)
    for r, K in enumerate(pos):
        for extra in itertools.product(range(2), repeat=j):
            c = math.prod(w[e] for e in extra)
            if c == 0:
                continue
            out[tuple(sorted(K + extra))] = _add(out[tuple(sorted(K + extra))], _scale(u[r], c))
    return [out[K] for K in sorted_indices(2, k + j)]


def sorted_to_full(k: int, u: list) -> dict:
    Ks = sorted_indices(2, k)
    pos = {K: r for r, K in enumerate(Ks)}
    return {I: _scale(u[pos[tuple(sorted(I))]], mult_fact(tuple(sorted(I))))
            for I in itertools.product(range(2), repeat=k)}
