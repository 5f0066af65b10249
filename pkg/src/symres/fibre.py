"""Symmetric tensor algebra on a single fibre.

``Sym^k E*`` is realised as the degree-k part of the polynomial ring in the
coframe ``e^0, ..., e^{d-1}``: the symmetrised basis element ``e^K`` (``K``
sorted) is a monomial and the permutation-sum product is polynomial
multiplication.  Coefficients may be ``int``/``Fraction``/``Surd`` (exact) or
``float``/``complex``.

Convention: the full tensor component of ``e^K`` at the index tuple ``K`` is
``prod_j mult_j(K)!``, so ``<e^K, e^K> = prod_j mult_j(K)! * prod_i sig(k_i)``.
"""
from __future__ import annotations

import enum
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .surd import Surd, exact

MultiIndex = tuple[int, ...]


class FibreError(ValueError):
    """Operands live on different fibres or on the wrong kind of fibre."""


class RankError(ValueError):
    """Operation is undefined for the given tensor rank."""


class Signature(str, enum.Enum):
    EUCLIDEAN = "euclidean_on_E"
    LORENTZIAN = "lorentzian_on_F"


@dataclass(frozen=True)
class FibreSpec:
    """Fibre E of dimension ``dim_E`` or F = R + E with metric -f.f + g.

    On the Lorentzian fibre the distinguished covector f has index 0 and the
    E-coframe occupies indices 1..dim_E.
    """

    dim_E: int
    signature: Signature = Signature.EUCLIDEAN

    def __post_init__(self):
        if self.dim_E < 1:
            raise ValueError("dim_E must be >= 1")
        object.__setattr__(self, "signature", Signature(self.signature))

    @classmethod
    def euclidean(cls, dim_E: int) -> "FibreSpec":
        return cls(dim_E, Signature.EUCLIDEAN)

    @classmethod
    def lorentzian(cls, dim_E: int) -> "FibreSpec":
        return cls(dim_E, Signature.LORENTZIAN)

    @property
    def lorentzian_fibre(self) -> bool:
        return self.signature is Signature.LORENTZIAN

    @property
    def dim(self) -> int:
        return self.dim_E + 1 if self.lorentzian_fibre else self.dim_E

    def sig(self, i: int) -> int:
        return -1 if (self.lorentzian_fibre and i == 0) else 1

    def base(self) -> "FibreSpec":
        """The Euclidean fibre E underlying this fibre."""
        return FibreSpec.euclidean(self.dim_E)

    def to_json(self) -> dict:
        return {"dim_E": self.dim_E, "signature": self.signature.value}

    @classmethod
    def from_json(cls, d: Mapping) -> "FibreSpec":
        return cls(int(d["dim_E"]), Signature(d["signature"]))


def _is_zero(c) -> bool:
    return c == 0


def _mult_factorial(K: MultiIndex) -> int:
    return math.prod(math.factorial(v) for v in Counter(K).values())


class SymTensor:
    """Element ``sum_K coeffs[K] e^K`` of Sym^rank over a fibre."""

    __slots__ = ("fibre", "rank", "coeffs")

    def __init__(self, fibre: FibreSpec, rank: int, coeffs: Mapping[Sequence[int], Any] | None = None):
        self.fibre = fibre
        self.rank = int(rank)
        if self.rank < 0:
            raise RankError("negative rank")
        acc: dict[MultiIndex, Any] = {}
        for K, c in (coeffs or {}).items():
            K = tuple(sorted(int(i) for i in K))
            if len(K) != self.rank:
                raise RankError(f"multi-index {K} has length {len(K)}, rank is {self.rank}")
            if any(i < 0 or i >= fibre.dim for i in K):
                raise FibreError(f"multi-index {K} out of range for dim {fibre.dim}")
            acc[K] = acc[K] + c if K in acc else c
        self.coeffs = {K: exact(c) for K, c in acc.items() if not _is_zero(c)}

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls, fibre: FibreSpec, rank: int) -> "SymTensor":
        return cls(fibre, rank)

    @classmethod
    def scalar(cls, fibre: FibreSpec, value=1) -> "SymTensor":
        return cls(fibre, 0, {(): value})

    @classmethod
    def basis(cls, fibre: FibreSpec, K: Sequence[int], coeff=1) -> "SymTensor":
        return cls(fibre, len(K), {tuple(K): coeff})

    @classmethod
    def covector(cls, fibre: FibreSpec, comps: Sequence) -> "SymTensor":
        return cls(fibre, 1, {(i,): c for i, c in enumerate(comps)})

    # vector space structure --------------------------------------------
    def _check(self, other: "SymTensor", same_rank=True):
        if not isinstance(other, SymTensor):
            raise TypeError("expected SymTensor")
        if other.fibre != self.fibre:
            raise FibreError("fibre mismatch")
        if same_rank and other.rank != self.rank:
            raise RankError(f"rank mismatch {self.rank} != {other.rank}")

    def __add__(self, other: "SymTensor") -> "SymTensor":
        self._check(other)
        c = dict(self.coeffs)
        for K, v in other.coeffs.items():
            c[K] = c[K] + v if K in c else v
        return SymTensor(self.fibre, self.rank, c)

    def __neg__(self) -> "SymTensor":
        return SymTensor(self.fibre, self.rank, {K: -v for K, v in self.coeffs.items()})

    def __sub__(self, other: "SymTensor") -> "SymTensor":
        return self + (-other)

    def scale(self, a) -> "SymTensor":
        return SymTensor(self.fibre, self.rank, {K: a * v for K, v in self.coeffs.items()})

    def __mul__(self, other):
        if isinstance(other, SymTensor):
            return sym_product(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __eq__(self, other):
        if not isinstance(other, SymTensor):
            return NotImplemented
        return (self.fibre == other.fibre and self.rank == other.rank
                and (self - other).is_zero())

    __hash__ = None

    def is_zero(self) -> bool:
        return not self.coeffs

    def norm_inf(self) -> float:
        return max((abs(complex(v)) for v in self.coeffs.values()), default=0.0)

    def map_coeffs(self, fn) -> "SymTensor":
        return SymTensor(self.fibre, self.rank, {K: fn(v) for K, v in self.coeffs.items()})

    def __repr__(self):
        body = ", ".join(f"{K}: {v}" for K, v in sorted(self.coeffs.items()))
        return f"SymTensor(rank={self.rank}, dim={self.fibre.dim}, {{{body}}})"

    # dense full-component view -----------------------------------------
    def full(self, dtype=object) -> np.ndarray:
        """Array of full tensor components T[i_1..i_k]."""
        d = self.fibre.dim
        out = np.zeros((d,) * self.rank, dtype=dtype)
        if dtype is object:
            out[...] = 0
        for K, v in self.coeffs.items():
            w = _mult_factorial(K) * v
            for I in set(itertools.permutations(K)):
                out[I] = w
        return out

    @classmethod
    def from_full(cls, fibre: FibreSpec, arr) -> "SymTensor":
        """Inverse of :meth:`full`; reads the sorted-index entries only."""
        arr = np.asarray(arr, dtype=object) if not isinstance(arr, np.ndarray) else arr
        k = arr.ndim
        coeffs = {}
        for K in itertools.combinations_with_replacement(range(fibre.dim), k):
            v = arr[K] if k else arr[()]
            if not _is_zero(v):
                m = _mult_factorial(K)
                coeffs[K] = v * Fraction(1, m)
        return cls(fibre, k, coeffs)

    # serialisation ------------------------------------------------------
    def to_json(self) -> dict:
        entries = []
        for K in sorted(self.coeffs):
            v = self.coeffs[K]
            if isinstance(v, (int, Fraction)):
                q = Fraction(v)
                entries.append([list(K), q.numerator, q.denominator, 1])
            elif isinstance(v, Surd):
                for r in sorted(v.terms):
                    q = v.terms[r]
                    entries.append([list(K), q.numerator, q.denominator, r])
            else:
                entries.append([list(K), float(v), 1, 1])
        return {"fibre": self.fibre.to_json(), "rank": self.rank, "entries": entries}

    @classmethod
    def from_json(cls, d: Mapping) -> "SymTensor":
        fibre = FibreSpec.from_json(d["fibre"])
        coeffs: dict[MultiIndex, Any] = {}
        for K, num, den, rad in d["entries"]:
            if isinstance(num, float):
                v = num
            else:
                v = Surd({int(rad): Fraction(int(num), int(den))})
            K = tuple(K)
            coeffs[K] = coeffs[K] + v if K in coeffs else v
        return cls(fibre, int(d["rank"]), coeffs)


# ---------------------------------------------------------------------------
# products and contractions


def sym_product(u: SymTensor, v: SymTensor) -> SymTensor:
    """Permutation-sum symmetric product (no 1/k! normalisation)."""
    u._check(v, same_rank=False)
    out: dict[MultiIndex, Any] = {}
    for K, a in u.coeffs.items():
        for L, b in v.coeffs.items():
            M = tuple(sorted(K + L))
            out[M] = out[M] + a * b if M in out else a * b
    return SymTensor(u.fibre, u.rank + v.rank, out)


def hook_basis(j: int, v: SymTensor) -> SymTensor:
    """Interior product with the metric dual of e^j."""
    if v.rank < 1:
        raise RankError("cannot contract a rank-0 tensor")
    s = v.fibre.sig(j)
    out: dict[MultiIndex, Any] = {}
    for K, c in v.coeffs.items():
        mult = K.count(j)
        if mult:
            pos = K.index(j)
            L = K[:pos] + K[pos + 1:]
            out[L] = out.get(L, 0) + s * mult * c
    return SymTensor(v.fibre, v.rank - 1, out)


def hook_contract(u: SymTensor, v: SymTensor) -> SymTensor:
    """``iota_u v`` for a covector u: (iota_u v)(w...) = v(u^sharp, w...)."""
    u._check(v, same_rank=False)
    if u.rank != 1:
        raise RankError("first argument must be a covector")
    if v.rank < 1:
        raise RankError("cannot contract a rank-0 tensor")
    out = SymTensor.zero(v.fibre, v.rank - 1)
    for (j,), c in u.coeffs.items():
        out = out + hook_basis(j, v).scale(c)
    return out


def metric(fibre: FibreSpec) -> SymTensor:
    """``g = 1/2 sum_i sig_i e^i.e^i`` (identity full-component matrix up to signature)."""
    return SymTensor(fibre, 2, {(i, i): Fraction(fibre.sig(i), 2) for i in range(fibre.dim)})


def lefschetz_L(u: SymTensor) -> SymTensor:
    """``L u = 2 g.u``."""
    return sym_product(metric(u.fibre).scale(2), u)


def lefschetz_trace(u: SymTensor) -> SymTensor:
    """Metric trace ``sum_i sig_i iota_{e_i} iota_{e_i}``; undefined below rank 2."""
    if u.rank < 2:
        raise RankError("trace needs rank >= 2")
    out = SymTensor.zero(u.fibre, u.rank - 2)
    for i in range(u.fibre.dim):
        # hook_basis carries sig_i twice; the metric trace carries it once
        out = out + hook_basis(i, hook_basis(i, u)).scale(u.fibre.sig(i))
    return out


def inner_product(u: SymTensor, v: SymTensor):
    u._check(v)
    total = 0
    for K, a in u.coeffs.items():
        b = v.coeffs.get(K)
        if b is not None:
            sig = math.prod(u.fibre.sig(i) for i in K)
            total = total + a * b * _mult_factorial(K) * sig
    return exact(total) if not isinstance(total, int) else total


def apply_derivation(u: SymTensor, A) -> SymTensor:
    """Extend the covector map ``e^j -> sum_c A[j][c] e^c`` to u as a derivation."""
    out: dict[MultiIndex, Any] = {}
    for K, c in u.coeffs.items():
        for r, j in enumerate(K):
            rest = K[:r] + K[r + 1:]
            for cc in range(u.fibre.dim):
                a = A[j][cc]
                if a != 0:
                    M = tuple(sorted(rest + (cc,)))
                    out[M] = out.get(M, 0) + a * c
    return SymTensor(u.fibre, u.rank, out)


def curvature_endomorphism(u: SymTensor, R) -> SymTensor:
    """``q(R) u = sum_{a,b} e^b . iota_{e^a}(R_{ab} u)`` in an orthonormal coframe.

    ``R[a][b][l][k]`` holds ``R_ab^l_k`` with ``R_{e_a,e_b} e^l = -sum_k R_ab^l_k e^k``.
    """
    d = u.fibre.dim
    out = SymTensor.zero(u.fibre, u.rank)
    if u.rank == 0:
        return out
    for a in range(d):
        for b in range(d):
            A = [[-R[a][b][l][k] for k in range(d)] for l in range(d)]
            Ru = apply_derivation(u, A)
            if Ru.is_zero():
                continue
            out = out + sym_product(SymTensor.basis(u.fibre, (b,)), hook_basis(a, Ru))
    return out


def sym_basis(fibre: FibreSpec, rank: int) -> list[SymTensor]:
    return [SymTensor.basis(fibre, K)
            for K in itertools.combinations_with_replacement(range(fibre.dim), rank)]


# ---------------------------------------------------------------------------
# Minkowski-scale decomposition on F = R + E


def a_coeff(m: int, k: int) -> Surd:
    """``a_k = ((m-k)!)^{-1/2}``."""
    return Surd.sqrt(Fraction(1, math.factorial(m - k)))


def b_coeff(m: int, k: int) -> Surd:
    """``b_k = sqrt(m-k)``."""
    return Surd.sqrt(m - k)


def _like(c, template_values: Iterable):
    """Convert an exact constant to float when the data are floating point."""
    if any(isinstance(v, (float, complex, np.floating, np.complexfloating)) for v in template_values):
        return float(c)
    return c


@dataclass
class LorentzDecomposition:
    """``u = sum_k a_k f^{m-k} . u^(k)`` with ``u^(k)`` in Sym^k E*."""

    m: int
    components: list[SymTensor]

    def __post_init__(self):
        if len(self.components) != self.m + 1:
            raise RankError("need exactly m+1 components")
        for k, c in enumerate(self.components):
            if c.rank != k:
                raise RankError(f"component {k} has rank {c.rank}")
            if c.fibre.lorentzian_fibre:
                raise FibreError("components live on E")

    @property
    def fibre_E(self) -> FibreSpec:
        return self.components[0].fibre

    def to_json(self) -> dict:
        return {"m": self.m, "components": [c.to_json() for c in self.components]}

    @classmethod
    def from_json(cls, d: Mapping) -> "LorentzDecomposition":
        return cls(int(d["m"]), [SymTensor.from_json(c) for c in d["components"]])


def lorentz_decompose(u: SymTensor) -> LorentzDecomposition:
    if not u.fibre.lorentzian_fibre:
        raise FibreError("decomposition needs the Lorentzian fibre F")
    m = u.rank
    E = u.fibre.base()
    parts: list[dict] = [dict() for _ in range(m + 1)]
    for K, c in u.coeffs.items():
        p = K.count(0)
        k = m - p
        parts[k][tuple(i - 1 for i in K[p:])] = c
    vals = u.coeffs.values()
    comps = []
    for k in range(m + 1):
        inv_a = _like(Surd.sqrt(math.factorial(m - k)), vals)
        comps.append(SymTensor(E, k, {K: inv_a * c for K, c in parts[k].items()}))
    return LorentzDecomposition(m, comps)


def lorentz_compose(d: LorentzDecomposition) -> SymTensor:
    F = FibreSpec.lorentzian(d.fibre_E.dim_E)
    m = d.m
    out: dict[MultiIndex, Any] = {}
    vals = [v for c in d.components for v in c.coeffs.values()]
    for k, comp in enumerate(d.components):
        a = _like(a_coeff(m, k), vals)
        for K, c in comp.coeffs.items():
            out[(0,) * (m - k) + tuple(i + 1 for i in K)] = a * c
    return SymTensor(F, m, out)


def lift_to_F(u: SymTensor) -> SymTensor:
    """Embed a tensor on E into F (shift indices past f)."""
    F = FibreSpec.lorentzian(u.fibre.dim_E)
    return SymTensor(F, u.rank, {tuple(i + 1 for i in K): c for K, c in u.coeffs.items()})


@dataclass(frozen=True)
class TraceRelationWitness:
    holds: bool
    violated_k: int | None = None

    def __bool__(self):
        return self.holds


def check_tracefree_relation(d: LorentzDecomposition, sign: int = +1) -> TraceRelationWitness:
    """Test ``Lambda u^(k) = sign * b_{k-2} b_{k-1} u^(k-2)`` for all k >= 2.

    ``sign=+1`` is the relation equivalent to ``trace_F(compose(d)) = 0`` for the
    metric ``-f.f + g``; ``sign=-1`` is offered for comparison with the
    opposite-sign convention.
    """
    m = d.m
    vals = [v for c in d.components for v in c.coeffs.values()]
    for k in range(2, m + 1):
        bb = _like(Surd.sqrt((m - k + 2) * (m - k + 1)), vals)
        lhs = lefschetz_trace(d.components[k])
        rhs = d.components[k - 2].scale(sign * bb)
        diff = lhs - rhs
        if vals and isinstance(_like(1, vals), float):
            bad = diff.norm_inf() > 1e-12 * max(1.0, max(abs(complex(v)) for v in vals))
        else:
            bad = not diff.is_zero()
        if bad:
            return TraceRelationWitness(False, k)
    return TraceRelationWitness(True)


def trace_F(u: SymTensor) -> SymTensor:
    if not u.fibre.lorentzian_fibre:
        raise FibreError("trace_F needs the Lorentzian fibre")
    return lefschetz_trace(u)
