"""Model metrics with closed-form (or sympy-derived) curvature tables.

Index conventions used throughout the geometry package:

* ``gamma[k, i, j]`` is the Christoffel symbol Γ^k_ij;
* ``riemann[a, b, l, k]`` is R_ab^l_k with ``R(∂a,∂b)∂k = R_ab^l_k ∂l``, so that on
  covectors ``R_{∂a,∂b} dx^l = -R_ab^l_k dx^k``;
* ``ricci[b, k] = R_ab^a_k``.

All tables are evaluated on arrays of points ``X`` of shape ``(dim, P)`` and
carry the point axis last.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import sympy as sp


class ChartError(ValueError):
    """Point outside the region where the metric is defined."""


class ModelMetric:
    kind: str = "abstract"
    dim: int

    def metric(self, X): raise NotImplementedError
    def christoffel(self, X): raise NotImplementedError
    def riemann(self, X): raise NotImplementedError

    def inverse(self, X):
        g = self.metric(X)
        return np.moveaxis(np.linalg.inv(np.moveaxis(g, -1, 0)), 0, -1)

    def sqrt_det(self, X):
        g = self.metric(X)
        return np.sqrt(np.linalg.det(np.moveaxis(g, -1, 0)))

    def ricci(self, X):
        return np.einsum("abak...->bk...", self.riemann(X))

    def check(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[0] != self.dim:
            X = X.T
        return X

    def is_einstein(self) -> bool:
        return False

    def describe(self) -> dict:
        return {"kind": self.kind, "dim": self.dim}


@dataclass
class FlatTorus(ModelMetric):
    dims: int = 2
    kind: str = "flat_torus"

    @property
    def dim(self):
        return self.dims

    def metric(self, X):
        X = self.check(X)
        return np.broadcast_to(np.eye(self.dim)[..., None], (self.dim, self.dim, X.shape[1])).copy()

    def christoffel(self, X):
        X = self.check(X)
        return np.zeros((self.dim,) * 3 + (X.shape[1],))

    def riemann(self, X):
        X = self.check(X)
        return np.zeros((self.dim,) * 4 + (X.shape[1],))

    def is_einstein(self):
        return True


@dataclass
class HyperbolicSpace(ModelMetric):
    """Upper half-space model ``g = (dx_1^2 + ... + dy^2)/y^2``, y the last coordinate."""

    dims: int = 2
    kind: str = "hyperbolic"

    @property
    def dim(self):
        return self.dims

    def _y(self, X):
        X = self.check(X)
        y = X[-1]
        if np.any(y <= 0):
            raise ChartError("half-space model needs y > 0")
        return X, y

    def metric(self, X):
        X, y = self._y(X)
        return np.eye(self.dim)[..., None] / y ** 2

    def inverse(self, X):
        X, y = self._y(X)
        return np.eye(self.dim)[..., None] * y ** 2

    def sqrt_det(self, X):
        X, y = self._y(X)
        return y ** (-self.dim)

    def christoffel(self, X):
        # conformal factor e^{2 phi}, phi = -log y:  Γ^k_ij = δ_ik φ_j + δ_jk φ_i - δ_ij φ_k
        X, y = self._y(X)
        d = self.dim
        dphi = np.zeros((d, X.shape[1]))
        dphi[-1] = -1.0 / y
        I = np.eye(d)
        return (np.einsum("ik,jP->kijP", I, dphi) + np.einsum("jk,iP->kijP", I, dphi)
                - np.einsum("ij,kP->kijP", I, dphi))

    def riemann(self, X):
        # R(X,Y)Z = -(g(Y,Z) X - g(X,Z) Y)
        X, y = self._y(X)
        g = self.metric(X)
        I = np.eye(self.dim)
        return -(np.einsum("bkP,al->ablkP", g, I) - np.einsum("akP,bl->ablkP", g, I))

    def is_einstein(self):
        return True


class SymbolicMetric(ModelMetric):
    """Metric given by sympy expressions; curvature derived symbolically."""

    kind = "symbolic"

    def __init__(self, coords, g_expr, kind: str = "symbolic", einstein: bool = False):
        self.coords = tuple(coords)
        self.g_expr = sp.Matrix(g_expr)
        self.kind = kind
        self._einstein = einstein
        self.dim = len(self.coords)

    def is_einstein(self):
        return self._einstein

    @cached_property
    def _tables(self):
        x, g = self.coords, self.g_expr
        d = self.dim
        ginv = sp.simplify(g.inv())
        Gam = [[[sp.simplify(sum(ginv[k, l] * (sp.diff(g[l, i], x[j]) + sp.diff(g[l, j], x[i])
                                                - sp.diff(g[i, j], x[l])) for l in range(d)) / 2)
                 for j in range(d)] for i in range(d)] for k in range(d)]
        R = [[[[sp.simplify(sp.diff(Gam[l][b][k], x[a]) - sp.diff(Gam[l][a][k], x[b])
                            + sum(Gam[l][a][e] * Gam[e][b][k] - Gam[l][b][e] * Gam[e][a][k] for e in range(d)))
                for k in range(d)] for l in range(d)] for b in range(d)] for a in range(d)]
        sqrtg = sp.sqrt(sp.simplify(g.det()))
        arr = lambda e: np.array(e, dtype=object)
        return {"g": arr(g.tolist()), "ginv": arr(ginv.tolist()), "gamma": arr(Gam),
                "riemann": arr(R), "sqrtg": sqrtg}

    @cached_property
    def _funcs(self):
        out = {}
        for name, table in self._tables.items():
            if name == "sqrtg":
                out[name] = sp.lambdify(self.coords, table, "numpy")
            else:
                out[name] = {idx: sp.lambdify(self.coords, table[idx], "numpy")
                             for idx in np.ndindex(table.shape)}
        return out

    def _eval(self, name, X):
        X = self.check(X)
        funcs = self._funcs[name]
        shape = self._tables[name].shape
        out = np.empty(shape + (X.shape[1],))
        for idx, f in funcs.items():
            out[idx] = np.broadcast_to(np.asarray(f(*X), dtype=float), (X.shape[1],))
        return out

    def metric(self, X):
        return self._eval("g", X)

    def inverse(self, X):
        return self._eval("ginv", X)

    def christoffel(self, X):
        return self._eval("gamma", X)

    def riemann(self, X):
        return self._eval("riemann", X)

    def sqrt_det(self, X):
        X = self.check(X)
        return np.broadcast_to(np.asarray(self._funcs["sqrtg"](*X), dtype=float), (X.shape[1],))


def product_collar(dim: int = 3, coeffs=None) -> SymbolicMetric:
    """Even collar ``(d rho^2 + sum_i h_i(rho^2) dy_i^2)/rho^2`` on ``T^{dim-1} x (0, inf)``.

    Coordinates ``(y_1, .., y_{dim-1}, rho)`` with ``h_i(mu) = 1 + a_i mu + b_i mu^2``.
    For generic coefficients the metric is not Einstein and, in dimension >= 3,
    its Ricci tensor is not parallel.
    """
    if dim < 2:
        raise ValueError("collar needs dim >= 2")
    if coeffs is None:
        coeffs = [(0.5, 0.3), (-0.4, 0.2)][: dim - 1]
        coeffs += [(0.3, 0.1)] * (dim - 1 - len(coeffs))
    coeffs = [tuple(c) for c in coeffs]
    if len(coeffs) != dim - 1:
        raise ValueError("need one (a, b) pair per boundary direction")
    ys = sp.symbols(f"y1:{dim}", real=True)
    rho = sp.Symbol("rho", positive=True)
    mu = rho ** 2
    hs = [1 + sp.nsimplify(a) * mu + sp.nsimplify(b) * mu ** 2 for a, b in coeffs]
    g = sp.diag(*[h / rho ** 2 for h in hs], 1 / rho ** 2)
    return SymbolicMetric((*ys, rho), g, kind="product_collar")


def hyperbolic_symbolic(dim: int = 2) -> SymbolicMetric:
    xs = sp.symbols(f"x0:{dim}", positive=True)
    g = sp.eye(dim) / xs[-1] ** 2
    return SymbolicMetric(xs, g, kind="hyperbolic_symbolic", einstein=True)


def make_metric(spec: dict) -> ModelMetric:
    kind = spec.get("kind", "hyperbolic")
    if kind == "flat_torus":
        return FlatTorus(int(spec.get("dim", 2)))
    if kind in ("hyperbolic", "hyperbolic_ball"):
        return HyperbolicSpace(int(spec.get("dim", 2)))
    if kind == "product_collar":
        return product_collar(int(spec.get("dim", 3)), spec.get("coeffs"))
    raise ValueError(f"unknown metric kind {kind!r}")
