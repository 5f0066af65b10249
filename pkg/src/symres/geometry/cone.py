"""The Lorentzian cone ``M = R+ x X`` with ``eta = -ds^2 + s^2 g``.

Sections are handled analytically in ``s``: a section of weight ``w`` has
coordinate components ``s^{w - p} * (function of x)`` where ``p`` counts the
``s``-indices of the component, and the covariant derivative preserves the
weight.  Everything is evaluated on the slice ``s = 1``, where ``d_s`` acts
on a component with ``p`` s-indices as multiplication by ``w - p``.
Coordinate index 0 is ``s``; base coordinates are shifted by one.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
import scipy.sparse as sps

from ..blocks import assemble_ambient_Q, bind, indicial_substitute
from ..fibre import FibreSpec, SymTensor, curvature_endomorphism
from .discrete import (Discretization, contract_first_two, curvature_full, nabla_full_matrix,
                       pack_matrix, pointwise, sorted_indices, unpack_matrix)


def cone_christoffel(gamma: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Christoffel symbols of eta at s = 1 from those of the base."""
    n1 = g.shape[0]
    P = g.shape[-1]
    G = np.zeros((n1 + 1,) * 3 + (P,))
    G[1:, 1:, 1:] = gamma
    G[0, 1:, 1:] = g                      # Γ^s_ij = s g_ij
    for i in range(n1):
        G[i + 1, 0, i + 1] = 1.0          # Γ^i_sj = δ^i_j / s
        G[i + 1, i + 1, 0] = 1.0
    return G


def cone_riemann(riemann: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Curvature of eta at s = 1 in the convention of the metric tables.

    Only tangential components survive; they equal the base curvature plus the
    curvature of the unit-curvature space form built from g.
    """
    n1 = g.shape[0]
    P = g.shape[-1]
    I = np.eye(n1)
    unit = np.einsum("bkP,al->ablkP", g, I) - np.einsum("akP,bl->ablkP", g, I)
    R = np.zeros((n1 + 1,) * 4 + (P,))
    R[1:, 1:, 1:, 1:] = riemann + unit
    return R


def cone_curvature_fibre(R_E) -> list:
    """Cone curvature on the fibre F = R + E from an algebraic curvature tensor on E.

    Orthonormal frame, f = index 0; ``R_E[a][b][l][k]`` follows the fibre convention.
    """
    d = len(R_E)
    out = [[[[0] * (d + 1) for _ in range(d + 1)] for _ in range(d + 1)] for _ in range(d + 1)]
    for a, b, l, k in itertools.product(range(d), repeat=4):
        unit = int(b == k) * int(a == l) - int(a == k) * int(b == l)
        out[a + 1][b + 1][l + 1][k + 1] = R_E[a][b][l][k] + unit
    return out


def curvature_on_lift(u: SymTensor, p: int, R_E) -> SymTensor:
    """``q(R_cone)(f^p . u)`` for u on E, computed on the fibre F."""
    F = FibreSpec.lorentzian(u.fibre.dim_E)
    lifted = SymTensor(F, u.rank + p, {(0,) * p + tuple(i + 1 for i in K): c for K, c in u.coeffs.items()})
    return curvature_endomorphism(lifted, cone_curvature_fibre(R_E))


class ConeOperator:
    """The conjugated cone d'Alembertian on s-homogeneous sections over a discretised base."""

    def __init__(self, base: Discretization):
        self.base = base
        self.n = base.dim - 1
        self.dim = base.dim + 1
        self.P = base.P
        self.gamma = cone_christoffel(base.gamma, base.g)
        self.riemann = cone_riemann(base.riemann, base.g)
        eta_inv = np.zeros((self.dim, self.dim, self.P))
        eta_inv[0, 0] = -1.0
        eta_inv[1:, 1:] = base.ginv
        self.eta_inv = eta_inv
        self._cache = {}

    def _deriv(self, weight):
        I = sps.identity(self.P, format="csr")

        def deriv(a, idx):
            if a == 0:
                return (weight - idx.count(0)) * I
            return self.base._D[a - 1]
        return deriv

    def _nabla(self, k, weight):
        key = ("nabla", k, weight)
        if key not in self._cache:
            self._cache[key] = nabla_full_matrix(self.dim, k, self.P, self._deriv(weight), self.gamma)
        return self._cache[key]

    def box_full(self, m: int, weight: float) -> sps.csr_matrix:
        """``box = nabla^* nabla + q(R)`` on full rank-m components of weight ``weight``."""
        C = pointwise(lambda T: -contract_first_two(T, self.eta_inv), self.dim, m + 2, self.P)
        rough = C @ self._nabla(m + 1, weight) @ self._nabla(m, weight)
        q = pointwise(lambda u: curvature_full(u, self.riemann, self.eta_inv), self.dim, m, self.P)
        return (rough + q).tocsr()

    def Q_full(self, m: int, lam0: float) -> sps.csr_matrix:
        """``s^{n/2-m+2} box s^{-n/2+m}`` on full components of ``s^{-lam0}`` sections, at s = 1."""
        return self.box_full(m, -lam0 + m - self.n / 2)

    # -- Minkowski decomposition of fields ------------------------------
    def lift(self, comps: list, m: int) -> np.ndarray:
        """``sum_k a_k (ds/s)^{m-k} . u^(k)`` as full cone components at s = 1."""
        P = self.P
        Ks = sorted_indices(self.dim, m)
        sorted_vec = np.zeros(len(Ks) * P, dtype=np.result_type(*comps))
        pos = {K: r for r, K in enumerate(Ks)}
        for k, u in enumerate(comps):
            a = 1.0 / math.sqrt(math.factorial(m - k))
            for j, K in enumerate(sorted_indices(self.dim - 1, k)):
                r = pos[(0,) * (m - k) + tuple(i + 1 for i in K)]
                sorted_vec[r * P:(r + 1) * P] = a * u[j * P:(j + 1) * P]
        return unpack_matrix(self.dim, m, P) @ sorted_vec

    def split(self, full: np.ndarray, m: int) -> list:
        P = self.P
        coeffs = pack_matrix(self.dim, m, P) @ full
        pos = {K: r for r, K in enumerate(sorted_indices(self.dim, m))}
        out = []
        for k in range(m + 1):
            inv_a = math.sqrt(math.factorial(m - k))
            parts = []
            for K in sorted_indices(self.dim - 1, k):
                r = pos[(0,) * (m - k) + tuple(i + 1 for i in K)]
                parts.append(inv_a * coeffs[r * P:(r + 1) * P])
            out.append(np.concatenate(parts))
        return out

    def apply_Q(self, comps: list, m: int, lam0: float) -> list:
        return self.split(self.Q_full(m, lam0) @ self.lift(comps, m), m)

    def apply_blocks(self, comps: list, m: int, lam0: float) -> list:
        """The block formula realised with the base operators."""
        B = indicial_substitute(assemble_ambient_Q(m, self.n), lam0)
        mats = bind(B, lambda tag, k: self.base.by_tag(tag, k).matrix, dense=False)
        out = []
        for r in range(m + 1):
            acc = 0
            for c in range(m + 1):
                if (r, c) in mats:
                    acc = acc + mats[(r, c)] @ comps[c]
            out.append(np.real_if_close(acc))
        return out

    def residual(self, comps: list, m: int, lam0: float) -> tuple[float, float]:
        """(relative block-formula residual, scale) with the signed-free fibre norm."""
        lhs = self.apply_Q(comps, m, lam0)
        rhs = self.apply_blocks(comps, m, lam0)
        num = math.sqrt(sum(self.base.norm(a - b, k) ** 2 for k, (a, b) in enumerate(zip(lhs, rhs))))
        scale = math.sqrt(sum(self.base.norm(b, k) ** 2 for k, b in enumerate(rhs)))
        return num / scale, scale
