"""Finite-difference realisations of the natural operators on symmetric tensors.

Fields are stored in the sorted-coefficient basis of the fibre module: a
rank-k field is a vector indexed by (sorted multi-index K, grid point), with
the component index major.  Internally operators act on full tensor
components and are sandwiched between ``unpack`` (sorted -> full) and
``pack`` (full -> sorted).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sps

from .metrics import ModelMetric


class ChartError(ValueError):
    pass


# ---------------------------------------------------------------------------
# grid


def _diff_matrix(N: int, h: float, periodic: bool, order: int) -> sps.csr_matrix:
    """First-derivative matrix; one-sided stencils at non-periodic edges."""
    if order == 2:
        offs, wts = (-1, 1), (-0.5, 0.5)
        edge = [(-1.5, 2.0, -0.5)]
    elif order == 4:
        offs, wts = (-2, -1, 1, 2), (1 / 12, -2 / 3, 2 / 3, -1 / 12)
        edge = [(-25 / 12, 4.0, -3.0, 4 / 3, -1 / 4), (-1 / 4, -5 / 6, 3 / 2, -1 / 2, 1 / 12)]
    else:
        raise ChartError("stencil order must be 2 or 4")
    D = sps.lil_matrix((N, N))
    w = len(edge)
    for i in range(N):
        if periodic or w <= i < N - w:
            for o, c in zip(offs, wts):
                D[i, (i + o) % N] += c
    if not periodic:
        for r, row in enumerate(edge):
            for j, c in enumerate(row):
                D[r, j] += c
                D[N - 1 - r, N - 1 - j] -= c
    return (D.tocsr() / h)


@dataclass(frozen=True)
class Chart:
    lo: tuple
    hi: tuple
    N: tuple
    periodic: tuple = None
    order: int = 2

    def __post_init__(self):
        d = len(self.lo)
        if not (len(self.hi) == len(self.N) == d):
            raise ChartError("lo, hi and N must have equal length")
        if self.periodic is None:
            object.__setattr__(self, "periodic", (False,) * d)
        if self.order not in (2, 4):
            raise ChartError("stencil order must be 2 or 4")
        if any(n < 2 * self.order + 1 for n in self.N):
            raise ChartError("too few grid points for the stencil")

    @property
    def dim(self):
        return len(self.lo)

    def axis(self, a):
        if self.periodic[a]:
            return self.lo[a] + (self.hi[a] - self.lo[a]) * np.arange(self.N[a]) / self.N[a]
        return np.linspace(self.lo[a], self.hi[a], self.N[a])

    def spacing(self, a):
        L = self.hi[a] - self.lo[a]
        return L / self.N[a] if self.periodic[a] else L / (self.N[a] - 1)

    @cached_property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*[self.axis(a) for a in range(self.dim)], indexing="ij")
        return np.stack([m.ravel() for m in mesh])

    @property
    def size(self):
        return int(np.prod(self.N))

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoidal coordinate weights."""
        ws = []
        for a in range(self.dim):
            w = np.full(self.N[a], self.spacing(a))
            if not self.periodic[a]:
                w[0] = w[-1] = self.spacing(a) / 2
            ws.append(w)
        out = ws[0]
        for w in ws[1:]:
            out = np.multiply.outer(out, w)
        return out.ravel()

    def derivative(self, a) -> sps.csr_matrix:
        mats = [sps.identity(n, format="csr") for n in self.N]
        mats[a] = _diff_matrix(self.N[a], self.spacing(a), self.periodic[a], self.order)
        out = mats[0]
        for M in mats[1:]:
            out = sps.kron(out, M, format="csr")
        return out

    def refine(self, factor=2):
        N = tuple(n * factor if p else (n - 1) * factor + 1 for n, p in zip(self.N, self.periodic))
        return Chart(self.lo, self.hi, N, self.periodic, self.order)

    def describe(self):
        return {"lo": list(self.lo), "hi": list(self.hi), "N": list(self.N),
                "periodic": list(self.periodic), "order": self.order}


# ---------------------------------------------------------------------------
# component bookkeeping


def sorted_indices(dim: int, k: int) -> list[tuple]:
    return list(itertools.combinations_with_replacement(range(dim), k))


def _mult_fact(K) -> int:
    return math.prod(math.factorial(K.count(i)) for i in set(K))


def _full_index(dim, I) -> int:
    return int(np.ravel_multi_index(I, (dim,) * len(I))) if I else 0


def pack_matrix(dim: int, k: int, P: int) -> sps.csr_matrix:
    """full -> sorted: c_K = full[K] / mult!(K)."""
    Ks = sorted_indices(dim, k)
    rows, cols, vals = [], [], []
    for r, K in enumerate(Ks):
        rows.append(r)
        cols.append(_full_index(dim, K))
        vals.append(1.0 / _mult_fact(K))
    S = sps.csr_matrix((vals, (rows, cols)), shape=(len(Ks), dim ** k))
    return sps.kron(S, sps.identity(P), format="csr")


def unpack_matrix(dim: int, k: int, P: int) -> sps.csr_matrix:
    """sorted -> full: full[I] = c_sort(I) * mult!(sort(I))."""
    pos = {K: r for r, K in enumerate(sorted_indices(dim, k))}
    rows, cols, vals = [], [], []
    for I in itertools.product(range(dim), repeat=k):
        K = tuple(sorted(I))
        rows.append(_full_index(dim, I))
        cols.append(pos[K])
        vals.append(float(_mult_fact(K)))
    U = sps.csr_matrix((vals, (rows, cols)), shape=(dim ** k, len(pos)))
    return sps.kron(U, sps.identity(P), format="csr")


def pointwise(fn: Callable[[np.ndarray], np.ndarray], dim: int, k_in: int, P: int) -> sps.csr_matrix:
    """Sparse matrix of a pointwise linear map on full components.

    ``fn`` maps an array of shape ``(dim,)*k_in + (P,)`` to ``(dim,)*k_out + (P,)``.
    """
    n_in = dim ** k_in
    n_out = None
    rows, cols, vals = [], [], []
    for j in range(n_in):
        e = np.zeros((n_in, P))
        e[j] = 1.0
        out = fn(e.reshape((dim,) * k_in + (P,)))
        out = out.reshape(-1, P)
        n_out = out.shape[0]
        i, p = np.nonzero(out)
        rows.append(i * P + p)
        cols.append(j * P + p)
        vals.append(out[i, p])
    return sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n_out * P, n_in * P))


# ---------------------------------------------------------------------------
# pointwise tensor maps on full components (point axis last)


def sym_full(T: np.ndarray) -> np.ndarray:
    k = T.ndim - 1
    if k <= 1:
        return T
    perms = list(itertools.permutations(range(k)))
    return sum(np.transpose(T, p + (k,)) for p in perms) / len(perms)


def christoffel_term(u: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """``-sum_r Gamma^c_{a i_r} u_{.. c ..}`` with the new index a first."""
    k = u.ndim - 1
    dim = gamma.shape[0]
    out = np.zeros((dim,) + u.shape)
    for r in range(k):
        # move slot r to the front, contract with gamma[c, a, i], put i back in slot r
        ur = np.moveaxis(u, r, 0)
        t = np.einsum("cai...,c...->ai...", gamma, ur)
        out -= np.moveaxis(t, 1, r + 1)
    return out


def contract_first_two(T: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    return np.einsum("ab...P,abP->...P", T, ginv)


def lefschetz_L_full(u: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = u.ndim - 1
    prod = np.einsum("abP,...P->ab...P", g, u)
    return (k + 2) * (k + 1) * sym_full(prod)


def trace_full(u: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    return contract_first_two(u, ginv)


def curvature_full(u: np.ndarray, riemann: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    """``(q u)_{i1..ik} = k Sym[g^{ac} (R_{a i1} u)_{c i2..ik}]``."""
    k = u.ndim - 1
    if k == 0:
        return np.zeros_like(u)
    dim = ginv.shape[0]
    # (R_ab u)_J = -sum_r riemann[a,b,c,j_r] u_{..c..}
    Ru = np.zeros((dim, dim) + u.shape)
    for r in range(k):
        ur = np.moveaxis(u, r, 0)
        t = np.einsum("abcj...,c...->abj...", riemann, ur)
        Ru -= np.moveaxis(t, 2, r + 2)
    # contract a (slot 0) with c (slot 2), free index b -> position 0
    t = np.einsum("abc...P,acP->b...P", Ru, ginv)
    return k * sym_full(t)


def raise_all(u: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    out = u
    for r in range(u.ndim - 1):
        t = np.einsum("ijP,j...P->i...P", ginv, np.moveaxis(out, r, 0))
        out = np.moveaxis(t, 0, r)
    return out


# ---------------------------------------------------------------------------
# covariant derivative with pluggable coordinate derivatives


def nabla_full_matrix(dim: int, k: int, P: int, deriv: Callable[[int, tuple], sps.spmatrix],
                      gamma: np.ndarray) -> sps.csr_matrix:
    """Full rank k -> full rank k+1, ``(nabla u)_{a I} = d_a u_I - sum_r Gamma^c_{a i_r} u_{..c..}``.

    ``deriv(a, I)`` returns the P x P matrix differentiating component I along axis a.
    """
    blocks_r, blocks_c, blocks = [], [], []
    for a in range(dim):
        for I in itertools.product(range(dim), repeat=k):
            blocks.append(deriv(a, I).tocoo())
            blocks_r.append(_full_index(dim, (a,) + I))
            blocks_c.append(_full_index(dim, I))
    rows = np.concatenate([b.row + r * P for b, r in zip(blocks, blocks_r)])
    cols = np.concatenate([b.col + c * P for b, c in zip(blocks, blocks_c)])
    vals = np.concatenate([b.data for b in blocks])
    D = sps.csr_matrix((vals, (rows, cols)), shape=(dim ** (k + 1) * P, dim ** k * P))
    if k == 0 or not np.any(gamma):
        return D
    G = pointwise(lambda u: christoffel_term(u, gamma), dim, k, P)
    return (D + G).tocsr()


# ---------------------------------------------------------------------------


@dataclass
class DiscreteOperator:
    matrix: sps.csr_matrix
    k_in: int
    k_out: int
    name: str

    def __call__(self, v):
        return self.matrix @ v

    def __matmul__(self, other):
        if isinstance(other, DiscreteOperator):
            if other.k_out != self.k_in:
                raise ValueError("rank mismatch in composition")
            return DiscreteOperator((self.matrix @ other.matrix).tocsr(), other.k_in, self.k_out,
                                    f"{self.name}∘{other.name}")
        return self.matrix @ other

    def __add__(self, other):
        return DiscreteOperator((self.matrix + other.matrix).tocsr(), self.k_in, self.k_out,
                                f"({self.name}+{other.name})")

    def __sub__(self, other):
        return DiscreteOperator((self.matrix - other.matrix).tocsr(), self.k_in, self.k_out,
                                f"({self.name}-{other.name})")

    def scale(self, c):
        return DiscreteOperator((c * self.matrix).tocsr(), self.k_in, self.k_out, f"{c}*{self.name}")


@dataclass
class DiscreteField:
    rank: int
    values: np.ndarray
    chart: Chart

    def __post_init__(self):
        n = len(sorted_indices(self.chart.dim, self.rank)) * self.chart.size
        if self.values.shape != (n,):
            raise ChartError(f"expected {n} samples, got {self.values.shape}")

    def component(self, K) -> np.ndarray:
        r = sorted_indices(self.chart.dim, self.rank).index(tuple(K))
        P = self.chart.size
        return self.values[r * P:(r + 1) * P].reshape(self.chart.N)


class Discretization:
    """All natural operators of a metric on a chart, cached per rank."""

    def __init__(self, metric: ModelMetric, chart: Chart):
        if metric.dim != chart.dim:
            raise ChartError("metric and chart dimensions differ")
        self.metric = metric
        self.chart = chart
        X = chart.points
        self.P = chart.size
        self.dim = chart.dim
        self.g = metric.metric(X)
        self.ginv = metric.inverse(X)
        self.gamma = metric.christoffel(X)
        self.riemann = metric.riemann(X)
        self.vol = chart.weights * metric.sqrt_det(X)
        self._D = [chart.derivative(a) for a in range(self.dim)]
        self._cache = {}

    # -- helpers ---------------------------------------------------------
    def ncomp(self, k):
        return len(sorted_indices(self.dim, k))

    def pack(self, k):
        return self._cached(("pack", k), lambda: pack_matrix(self.dim, k, self.P))

    def unpack(self, k):
        return self._cached(("unpack", k), lambda: unpack_matrix(self.dim, k, self.P))

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def nabla_full(self, k):
        return self._cached(("nabla", k), lambda: nabla_full_matrix(
            self.dim, k, self.P, lambda a, I: self._D[a], self.gamma))

    def _pw(self, fn, k):
        return pointwise(fn, self.dim, k, self.P)

    def _op(self, full, k_in, k_out, name):
        return DiscreteOperator((self.pack(k_out) @ full @ self.unpack(k_in)).tocsr(), k_in, k_out, name)

    # -- operators -------------------------------------------------------
    def d(self, k) -> DiscreteOperator:
        def build():
            S = self._pw(lambda T: (k + 1) * sym_full(T), k + 1)
            return self._op(S @ self.nabla_full(k), k, k + 1, "d")
        return self._cached(("d", k), build)

    def div(self, k) -> DiscreteOperator:
        if k < 1:
            raise ValueError("div needs rank >= 1")

        def build():
            C = self._pw(lambda T: -contract_first_two(T, self.ginv), k + 1)
            return self._op(C @ self.nabla_full(k), k, k - 1, "div")
        return self._cached(("div", k), build)

    def rough(self, k) -> DiscreteOperator:
        def build():
            C = self._pw(lambda T: -contract_first_two(T, self.ginv), k + 2)
            return self._op(C @ self.nabla_full(k + 1) @ self.nabla_full(k), k, k, "∇*∇")
        return self._cached(("rough", k), build)

    def curvature(self, k) -> DiscreteOperator:
        return self._cached(("q", k), lambda: self._op(
            self._pw(lambda u: curvature_full(u, self.riemann, self.ginv), k), k, k, "q(R)"))

    def laplacian(self, k) -> DiscreteOperator:
        return self._cached(("lich", k), lambda: DiscreteOperator(
            (self.rough(k).matrix + self.curvature(k).matrix).tocsr(), k, k, "Δ"))

    def L(self, k) -> DiscreteOperator:
        return self._cached(("L", k), lambda: self._op(
            self._pw(lambda u: lefschetz_L_full(u, self.g), k), k, k + 2, "L"))

    def trace(self, k) -> DiscreteOperator:
        if k < 2:
            raise ValueError("trace needs rank >= 2")
        return self._cached(("trace", k), lambda: self._op(
            self._pw(lambda u: trace_full(u, self.ginv), k), k, k - 2, "Λ"))

    def identity(self, k) -> DiscreteOperator:
        n = self.ncomp(k) * self.P
        return DiscreteOperator(sps.identity(n, format="csr"), k, k, "Id")

    def by_tag(self, tag: str, k: int) -> DiscreteOperator:
        """Realise a block-operator tag acting on rank k."""
        if tag in ("Lich",):
            return self.laplacian(k)
        if tag == "Rough":
            return self.rough(k)
        if tag == "d":
            return self.d(k)
        if tag == "div":
            return self.div(k)
        if tag == "Trace":
            return self.trace(k)
        if tag == "LefL":
            return self.L(k)
        if tag == "LL":
            return self.L(k - 2) @ self.trace(k)
        if tag == "Id":
            return self.identity(k)
        raise KeyError(tag)

    # -- quadrature ------------------------------------------------------
    def mass(self, k) -> sps.csr_matrix:
        """``<u, v> = u^T M v`` with the fibre inner product and dvol_g."""
        def build():
            U = self.unpack(k)
            G = self._pw(lambda u: raise_all(u, self.ginv), k)
            W = sps.kron(sps.identity(self.dim ** k), sps.diags(self.vol), format="csr")
            return (U.T @ W @ G @ U / math.factorial(k)).tocsr()
        return self._cached(("mass", k), build)

    def inner(self, u, v, k):
        return np.vdot(u, self.mass(k) @ v) if np.iscomplexobj(u) else u @ (self.mass(k) @ v)

    def norm(self, u, k):
        return float(np.sqrt(abs(self.inner(u, u, k))))

    # -- test data -------------------------------------------------------
    def bump(self, width=0.25, cutoff=0.98) -> np.ndarray:
        """Gaussian envelope times a C-infinity cutoff supported in the chart interior.

        Periodic axes carry no envelope.

        ``width`` is the Gaussian radius as a fraction of the half-width of each
        axis; the cutoff only acts where the envelope is already ~1e-7, so the
        field is compactly supported without steep edges.
        """
        X = self.chart.points
        out = np.ones(self.P)
        for a in range(self.dim):
            if self.chart.periodic[a]:
                continue
            c = 0.5 * (self.chart.lo[a] + self.chart.hi[a])
            r = 0.5 * (self.chart.hi[a] - self.chart.lo[a])
            t = (X[a] - c) / r
            inside = np.abs(t) < cutoff
            val = np.zeros(self.P)
            tc = t[inside] / cutoff
            val[inside] = np.exp(-(t[inside] / width) ** 2 + 1.0 - 1.0 / (1.0 - tc ** 2))
            out *= val
        return out

    def random_field(self, k, rng, modes=2, width=0.25) -> np.ndarray:
        """Random trigonometric polynomial coefficients times a bump, per component."""
        X = self.chart.points
        b = self.bump(width)
        comps = []
        for _ in range(self.ncomp(k)):
            f = np.full(self.P, rng.standard_normal())
            for _ in range(modes):
                freq = rng.integers(-2, 3, size=self.dim)
                phase = rng.uniform(0, 2 * np.pi)
                f = f + rng.standard_normal() * np.cos(freq @ X + phase)
            comps.append(f * b)
        return np.concatenate(comps)


def metric_tables(metric: ModelMetric, point, k: int = 0) -> dict:
    """Closed-form tables at one point, plus q(R) on rank k in the sorted basis."""
    X = np.asarray(point, dtype=float).reshape(metric.dim, 1)
    g, ginv = metric.metric(X), metric.inverse(X)
    riem = metric.riemann(X)
    q = (pack_matrix(metric.dim, k, 1) @ pointwise(lambda u: curvature_full(u, riem, ginv), metric.dim, k, 1)
         @ unpack_matrix(metric.dim, k, 1)).toarray()
    return {"g": g[..., 0], "ginv": ginv[..., 0], "gamma": metric.christoffel(X)[..., 0],
            "riemann": riem[..., 0], "ricci": metric.ricci(X)[..., 0], "q": q}
