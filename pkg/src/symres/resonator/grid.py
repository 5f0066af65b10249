"""Chebyshev discretisation of the radial interval ``[-1/2, MU_CENTER]``.

Two realisations share one grid: pointwise collocation at Chebyshev-Lobatto
nodes, and the ultraspherical (coefficient space) method, where an operator
with polynomial coefficients maps Chebyshev-T coefficients to C^(2)
coefficients through banded matrices.
"""
from __future__ import annotations

import math
from functools import cached_property

import numpy as np
import scipy.fft

from .modes import MU_CENTER

MU_EDGE = -0.5


class CollocationGrid:
    """``N + 1`` Chebyshev-Lobatto nodes on ``[lo, hi]``, stored in ascending order."""

    def __init__(self, N: int, lo: float = MU_EDGE, hi: float = MU_CENTER):
        if N < 16:
            raise ValueError("need at least 16 collocation nodes")
        if not lo < 0 < hi:
            raise ValueError("the interval must straddle mu = 0")
        self.N = int(N)
        self.lo = float(lo)
        self.hi = float(hi)
        self.half = (self.hi - self.lo) / 2

    def __repr__(self):
        return f"CollocationGrid(N={self.N}, lo={self.lo}, hi={self.hi})"

    def describe(self) -> dict:
        return {"N": self.N, "lo": self.lo, "hi": self.hi}

    def refine(self, factor: int = 2) -> "CollocationGrid":
        return CollocationGrid(self.N * factor, self.lo, self.hi)

    # -- nodes and collocation matrices -------------------------------------
    @cached_property
    def x(self) -> np.ndarray:
        return -np.cos(np.pi * np.arange(self.N + 1) / self.N)

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.to_mu(self.x)

    def to_mu(self, x):
        return self.lo + self.half * (np.asarray(x) + 1)

    def to_x(self, mu):
        return (np.asarray(mu) - self.lo) / self.half - 1

    @cached_property
    def D1(self) -> np.ndarray:
        N, x = self.N, self.x
        c = np.ones(N + 1)
        c[0] = c[-1] = 2
        c *= (-1.0) ** np.arange(N + 1)
        dX = x[:, None] - x[None, :]
        D = np.outer(c, 1 / c) / (dX + np.eye(N + 1))
        D -= np.diag(D.sum(axis=1))
        return D / self.half

    @cached_property
    def D2(self) -> np.ndarray:
        return self.D1 @ self.D1

    def D(self, p: int) -> np.ndarray:
        return (np.eye(self.N + 1), self.D1, self.D2)[p]

    @cached_property
    def weights(self) -> np.ndarray:
        """Clenshaw-Curtis weights in mu."""
        N = self.N
        theta = np.pi * np.arange(N + 1) / N
        w = np.zeros(N + 1)
        v = np.ones(N - 1)
        if N % 2 == 0:
            w[0] = w[N] = 1 / (N ** 2 - 1)
            for k in range(1, N // 2):
                v -= 2 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
            v -= np.cos(N * theta[1:-1]) / (N ** 2 - 1)
        else:
            w[0] = w[N] = 1 / N ** 2
            for k in range(1, (N - 1) // 2 + 1):
                v -= 2 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
        w[1:-1] = 2 * v / N
        return w * self.half

    # -- Chebyshev coefficients ---------------------------------------------
    def values_to_coeffs(self, v: np.ndarray) -> np.ndarray:
        """Chebyshev-T coefficients (in x) of the interpolant through node values."""
        v = np.asarray(v)
        c = scipy.fft.dct(v[::-1], type=1, axis=0) / self.N
        c[0] /= 2
        c[-1] /= 2
        return c

    def coeffs_to_values(self, c: np.ndarray) -> np.ndarray:
        return self.evaluate(c, self.nodes)

    def evaluate(self, c: np.ndarray, mu) -> np.ndarray:
        return np.polynomial.chebyshev.chebval(self.to_x(mu), c)

    def evaluate_derivative(self, c: np.ndarray, mu, p: int = 1) -> np.ndarray:
        dc = np.polynomial.chebyshev.chebder(c, p) / self.half ** p if p else c
        return np.polynomial.chebyshev.chebval(self.to_x(mu), dc)

    # -- ultraspherical operators (padded size ``M``, truncated by callers) --
    def us_derivative(self, p: int, M: int) -> np.ndarray:
        """``d^p/dmu^p``: T coefficients to C^(p) coefficients (p = 0 is the identity)."""
        D = np.zeros((M, M))
        if p == 0:
            return np.eye(M)
        for k in range(p, M):
            D[k - p, k] = k * 2 ** (p - 1) * math.factorial(p - 1) / self.half ** p
        return D

    @staticmethod
    def us_convert(lam: int, M: int) -> np.ndarray:
        """C^(lam) to C^(lam+1); lam = 0 means Chebyshev T."""
        S = np.zeros((M, M))
        if lam == 0:
            S[0, 0] = 1
            for k in range(1, M):
                S[k, k] = 0.5
                if k >= 2:
                    S[k - 2, k] = -0.5
            return S
        for k in range(M):
            S[k, k] = lam / (k + lam)
            if k >= 2:
                S[k - 2, k] = -lam / (k + lam)
        return S

    @staticmethod
    def _jacobi(lam: int, M: int) -> np.ndarray:
        J = np.zeros((M, M))
        for k in range(M):
            if k + 1 < M:
                J[k + 1, k] = (k + 1) / (2 * (k + lam))
            if k >= 1:
                J[k - 1, k] = (k + 2 * lam - 1) / (2 * (k + lam))
        return J

    def us_multiply(self, poly_mu, M: int) -> np.ndarray:
        """Multiplication by a polynomial in mu (highest degree first) in the C^(2) basis."""
        # rewrite the polynomial in x = (mu - lo)/half - 1
        p = np.poly1d(np.asarray(poly_mu, dtype=complex))
        px = np.poly1d([0j])
        lin = np.poly1d([self.half, self.lo + self.half])
        for coef in p.coeffs:
            px = px * lin + coef
        J = self._jacobi(2, M)
        R = np.zeros((M, M), dtype=complex)
        for coef in np.atleast_1d(px.coeffs):
            R = R @ J + coef * np.eye(M)
        return R

    @cached_property
    def _us_pad(self) -> int:
        return self.N + 1 + 16

    def us_operator(self, p: int) -> np.ndarray:
        """``d^p`` followed by conversion into C^(2), padded."""
        M = self._us_pad
        if p == 2:
            return self.us_derivative(2, M)
        if p == 1:
            return self.us_convert(1, M) @ self.us_derivative(1, M)
        return self.us_convert(1, M) @ self.us_convert(0, M)

    def to_c2(self, c: np.ndarray) -> np.ndarray:
        """T coefficients to C^(2) coefficients, same length."""
        M = len(c)
        return self.us_convert(1, M) @ (self.us_convert(0, M) @ c)
