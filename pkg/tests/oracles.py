"""Brute-force reference computations on full tensor arrays.

Everything here works from the defining formulas (permutation sums, explicit
metric contractions) and shares no code with the package.
"""
import itertools
import math
import random
from fractions import Fraction

import numpy as np


def signature(dim, lorentzian):
    return [(-1 if (lorentzian and i == 0) else 1) for i in range(dim)]


def outer(*vecs):
    out = np.array(Fraction(1), dtype=object)
    for v in vecs:
        out = np.multiply.outer(out, np.array(v, dtype=object))
    return out


def sym_product_of_covectors(vecs):
    """u_1 . ... . u_k = sum over permutations of u_s(1) (x) ... (x) u_s(k)."""
    k = len(vecs)
    dim = len(vecs[0])
    total = np.zeros((dim,) * k, dtype=object)
    total[...] = Fraction(0)
    for perm in itertools.permutations(range(k)):
        total = total + outer(*[vecs[p] for p in perm])
    return total


def inner_of_decomposables(us, vs, sig):
    """<u_1...u_k, v_1...v_k> = sum_sigma prod_i eta^{-1}(u_i, v_sigma(i))."""
    def pair(a, b):
        return sum(Fraction(s) * x * y for s, x, y in zip(sig, a, b))
    total = Fraction(0)
    for perm in itertools.permutations(range(len(us))):
        total += math.prod((pair(us[i], vs[perm[i]]) for i in range(len(us))), start=Fraction(1))
    return total


def hook_full(u, V, sig):
    """(iota_u V)_{j...} = sum_a sig_a u_a V_{a j...}."""
    return sum(Fraction(sig[a]) * u[a] * V[a] for a in range(len(u)))


def trace_full(V, sig):
    """Metric trace over the first two slots."""
    return sum(Fraction(sig[a]) * V[a, a] for a in range(len(sig)))


def random_covector(rng, dim, lo=-3, hi=3):
    return [Fraction(rng.randint(lo, hi)) for _ in range(dim)]


def rng(seed=0):
    return random.Random(seed)


def constant_curvature_tensor(dim, kappa):
    """R_ab^l_k for the curvature-kappa space form in an orthonormal frame.

    R(X,Y)Z = kappa (g(Y,Z) X - g(X,Z) Y) on vectors; on covectors the
    component convention is R_{e_a,e_b} e^l = -sum_k R_ab^l_k e^k with
    R_ab^l_k = kappa (delta_bk delta_al - delta_ak delta_bl).
    """
    R = [[[[Fraction(0)] * dim for _ in range(dim)] for _ in range(dim)] for _ in range(dim)]
    for a, b, l, k in itertools.product(range(dim), repeat=4):
        R[a][b][l][k] = kappa * (int(b == k) * int(a == l) - int(a == k) * int(b == l))
    return R
