"""Symbolic covariant calculus on coordinate tensors (dict index-tuple -> sympy expr).

Independent of the package: used to produce exact expected values for the
finite-difference operators.
"""
import itertools

import sympy as sp


class Geometry:
    def __init__(self, coords, g):
        self.x = tuple(coords)
        self.d = len(self.x)
        self.g = sp.Matrix(g)
        self.gi = sp.simplify(self.g.inv())
        d = self.d
        self.Gam = [[[sp.simplify(sum(self.gi[k, l] * (sp.diff(self.g[l, i], self.x[j])
                                                        + sp.diff(self.g[l, j], self.x[i])
                                                        - sp.diff(self.g[i, j], self.x[l]))
                                      for l in range(d)) / 2)
                      for j in range(d)] for i in range(d)] for k in range(d)]
        G = self.Gam
        self.R = {}
        for a, b, l, k in itertools.product(range(d), repeat=4):
            self.R[a, b, l, k] = sp.simplify(
                sp.diff(G[l][b][k], self.x[a]) - sp.diff(G[l][a][k], self.x[b])
                + sum(G[l][a][e] * G[e][b][k] - G[l][b][e] * G[e][a][k] for e in range(d)))

    def idx(self, k):
        return list(itertools.product(range(self.d), repeat=k))

    def nabla(self, u, k):
        out = {}
        for a in range(self.d):
            for I in self.idx(k):
                v = sp.diff(u[I], self.x[a])
                for r in range(k):
                    for c in range(self.d):
                        J = I[:r] + (c,) + I[r + 1:]
                        v -= self.Gam[c][a][I[r]] * u[J]
                out[(a,) + I] = v
        return out

    def sym(self, T, k):
        out = {}
        perms = list(itertools.permutations(range(k)))
        for I in self.idx(k):
            out[I] = sum(T[tuple(I[p] for p in P)] for P in perms) / len(perms)
        return out

    def contract01(self, T, k):
        """contract the first two slots of a rank-(k+2) tensor"""
        return {I: sum(self.gi[a, b] * T[(a, b) + I] for a in range(self.d) for b in range(self.d))
                for I in self.idx(k)}

    def d_op(self, u, k):
        return {I: (k + 1) * v for I, v in self.sym(self.nabla(u, k), k + 1).items()}

    def div(self, u, k):
        return {I: -v for I, v in self.contract01(self.nabla(u, k), k - 1).items()}

    def rough(self, u, k):
        return {I: -v for I, v in self.contract01(self.nabla(self.nabla(u, k), k + 1), k).items()}

    def q(self, u, k):
        if k == 0:
            return {(): sp.Integer(0)}
        Ru = {}
        for a, b in itertools.product(range(self.d), repeat=2):
            for J in self.idx(k):
                v = 0
                for r in range(k):
                    for c in range(self.d):
                        v -= self.R[a, b, c, J[r]] * u[J[:r] + (c,) + J[r + 1:]]
                Ru[(a, b) + J] = v
        t = {}
        for I in self.idx(k):
            b, rest = I[0], I[1:]
            t[I] = sum(self.gi[a, c] * Ru[(a, b, c) + rest] for a in range(self.d) for c in range(self.d))
        return {I: k * v for I, v in self.sym(t, k).items()}

    def lich(self, u, k):
        r, q = self.rough(u, k), self.q(u, k)
        return {I: r[I] + q[I] for I in r}

    def trace(self, u, k):
        return self.contract01(u, k - 2)

    def L(self, u, k):
        T = {}
        for I in self.idx(k + 2):
            T[I] = self.g[I[0], I[1]] * u[I[2:]]
        return {I: (k + 2) * (k + 1) * v for I, v in self.sym(T, k + 2).items()}


def symmetric_from_sorted(geo, k, comps):
    """Full tensor dict from sorted-coefficient dict (c_K e^K convention)."""
    import math
    out = {}
    for I in geo.idx(k):
        K = tuple(sorted(I))
        m = math.prod(math.factorial(K.count(i)) for i in set(K))
        out[I] = comps.get(K, 0) * m
    return out
