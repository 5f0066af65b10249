"""Fourier-mode reduction of the conjugated operator on the hyperbolic ball.

The even boundary defining function is ``rho = 2 e^{-r}``, so ``mu = rho^2``
runs from 0 at infinity to ``MU_CENTER = 4`` at the centre and

    g = dmu^2 / (4 mu^2) + (1 - mu/4)^2 h_round / mu,

with ``h(0)`` the round metric of curvature +1.  The reduced operator is
derived symbolically as ``mu^{-1} J Q_lambda J^{-1}`` acting on
``mu^{alpha/2} f``, ``alpha = lambda + n/2 - m``; its coefficients are
rational in ``mu`` with poles only at the centre.  Polar components with
``j`` angular indices vanish like ``(1 - mu/4)^j`` at the centre, so the
unknowns (and rows) are rescaled by that weight; afterwards each row is
multiplied by the least power of ``(mu - 4)`` that clears the poles.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import sympy as sp

from ..blocks import LAM, assemble_indicial_Q, build_scale_change
from .calculus import ELL, MU, ModeCalculus, _add, _scale, poly_times, sorted_indices, sorted_to_full

MU_CENTER = 4
BASES = {"H2": 1, "H3": 2}


class ModeError(ValueError):
    """Unsupported base/rank/mode combination."""


class AssemblyError(RuntimeError):
    """The reduced operator violates a structural requirement."""


def _base_dim(base) -> int:
    if isinstance(base, int):
        if base not in (1, 2):
            raise ModeError(f"boundary dimension {base} not supported")
        return base
    key = str(base).upper().replace("ℍ", "H").replace("²", "2").replace("³", "3")
    if key not in BASES:
        raise ModeError(f"unknown base {base!r}; expected H2 or H3")
    return BASES[key]


@dataclass(frozen=True)
class ModeSystem:
    """Bookkeeping for one angular mode.

    ``components`` lists the radial unknowns as ``(k, K)``: rank ``k`` and the
    sorted multi-index ``K`` over ``(mu, phi)``; ranks run from ``m`` down.
    ``parity`` is the parity of each radial function under ``r -> -r``
    through the centre.
    """

    n: int
    m: int
    ell: int
    components: tuple
    delta_h: int
    parity: tuple

    @property
    def base(self) -> str:
        return "H2" if self.n == 1 else "H3"

    @property
    def blocks(self) -> int:
        return self.m + 1

    @property
    def size(self) -> int:
        return len(self.components)

    def offsets(self) -> dict:
        out, o = {}, 0
        for k in range(self.m, -1, -1):
            out[k] = o
            o += len(sorted_indices(2, k)) if self.n == 1 else 1
        return out

    def describe(self) -> dict:
        return {"base": self.base, "n": self.n, "m": self.m, "ell": self.ell, "blocks": self.blocks,
                "components": self.size, "delta_h": self.delta_h, "parity": list(self.parity)}


def mode_reduce(base, m: int, ell: int) -> ModeSystem:
    n = _base_dim(base)
    if m < 0:
        raise ModeError("rank must be non-negative")
    if n == 2 and m != 0:
        raise ModeError("on H3 only scalars (m = 0) are reduced")
    if n == 2 and ell < 0:
        raise ModeError("spherical-harmonic degree must be >= 0")
    if n == 2:
        return ModeSystem(2, 0, ell, ((0, ()),), ell * (ell + 1), (ell % 2,))
    comps, parity = [], []
    for k in range(m, -1, -1):
        for K in sorted_indices(2, k):
            comps.append((k, K))
            parity.append((ell + K.count(0)) % 2)
    return ModeSystem(1, m, ell, tuple(comps), ell * ell, tuple(parity))


# ---------------------------------------------------------------------------
# symbolic derivation


class WarpedScalar:
    """Scalar Laplacian on ``dmu^2/(4mu^2) + sigma(mu) h_round`` for one eigenvalue ``nu`` of h."""

    def __init__(self, n: int, beta, nu):
        self.n = n
        self.beta = beta
        self.nu = nu
        self.sigma = (1 - MU / MU_CENTER) ** 2 / MU

    def dmu(self, e: dict) -> dict:
        out: dict = {}
        for (j, p), c in e.items():
            out = _add(out, {(j, p + 1): c, (j, p): sp.diff(c, MU) + self.beta * c / MU})
        return out

    def by_tag(self, tag: str, T: dict) -> dict:
        if tag == "Id":
            return T
        if tag not in ("Lich", "Rough"):
            raise ModeError(f"{tag} acts on tensors; H3 reduction is scalar only")
        e = T[()]
        vol = self.sigma ** sp.Rational(self.n, 2) / (2 * MU)
        outer = self.dmu(_scale(self.dmu(e), vol * 4 * MU ** 2))
        lap = _add(_scale(outer, -1 / vol), _scale(e, self.nu / self.sigma))
        return {(): lap}

    @staticmethod
    def to_sorted(T: dict, k: int) -> list:
        return [T[()]]


@dataclass
class ReducedOperator:
    """Coefficients of the reduced operator for one mode.

    ``raw[(row, col, p)]`` is the unscaled coefficient of ``d^p/dmu^p`` (a
    rational function of ``mu`` and ``lambda``) in the polar frame.
    ``weight[c]`` is the exponent of ``t = 1 - mu/4`` in ``u_c = t^w v_c``;
    ``conj`` holds the coefficients acting on ``v`` with row ``r`` divided by
    ``t^weight[r]``.  ``poly[(row, col, p, q)]`` is the coefficient of
    ``lambda^q`` of ``conj`` after row scaling, as a list of polynomial
    coefficients in ``mu`` (highest degree first).
    """

    system: ModeSystem
    raw: dict
    row_power: list
    weight: tuple = ()
    conj: dict = field(default_factory=dict)
    poly: dict = field(default_factory=dict)

    @property
    def degree(self) -> int:
        return max((q for (_, _, _, q) in self.poly), default=0)

    def scaled(self, row: int, col: int, p: int):
        return sp.expand(sp.cancel(self.conj.get((row, col, p), 0) * (MU - MU_CENTER) ** self.row_power[row]))


def _apply_scale_change(S, ranks, u: dict, w) -> dict:
    out = {}
    for k in ranks:
        acc = [{} for _ in sorted_indices(2, k)]
        for kin in ranks:
            c = S.coefficient(k, kin)
            if kin > k or c == 0:
                continue
            acc = [_add(a, _scale(b, c)) for a, b in zip(acc, poly_times(w, kin, u[kin], k - kin))]
        out[k] = acc
    return out


@functools.lru_cache(maxsize=None)
def _derive_surface(m: int) -> tuple:
    """Rows of ``mu^{-1} J Q J^{-1}`` on H2 with symbolic ``ell`` and ``lambda``."""
    alpha = LAM + sp.Rational(1, 2) - m
    calc = ModeCalculus(1 / (4 * MU ** 2), (1 - MU / MU_CENTER) ** 2 / MU, beta=alpha / 2)
    ranks = list(range(m, -1, -1))
    off, o = {}, 0
    for k in ranks:
        off[k] = o
        o += k + 1
    u = {k: [{(off[k] + r, 0): sp.Integer(1)} for r in range(k + 1)] for k in ranks}
    w = [1 / (2 * MU), 0]  # d rho / rho = d mu / (2 mu)
    J = build_scale_change(m)
    v = _apply_scale_change(J.inverse(), ranks, u, w)
    B = assemble_indicial_Q(m, 1)
    Qv = {k: [{} for _ in range(k + 1)] for k in ranks}
    for (r, c), blk in B.blocks.items():
        T = sorted_to_full(c, v[c])
        for (tag, _), coef in blk.items():
            res = calc.to_sorted(calc.by_tag(tag, T), r)
            Qv[r] = [_add(a, _scale(b, coef)) for a, b in zip(Qv[r], res)]
    out = _apply_scale_change(J, ranks, Qv, w)
    rows = []
    for k in ranks:
        for e in out[k]:
            rows.append({key: sp.cancel(val / MU) for key, val in e.items()})
    return tuple(rows)


@functools.lru_cache(maxsize=None)
def _derive_ball_scalar(n: int) -> tuple:
    nu = sp.Symbol("nu")
    alpha = LAM + sp.Rational(n, 2)
    calc = WarpedScalar(n, alpha / 2, nu)
    B = assemble_indicial_Q(0, n)
    T = {(): {(0, 0): sp.Integer(1)}}
    acc: dict = {}
    for (tag, _), coef in B.block(0, 0).items():
        acc = _add(acc, _scale(calc.by_tag(tag, T)[()], coef))
    return ({key: sp.cancel(val / MU) for key, val in acc.items()},)


def _pole_order(expr, at=MU_CENTER) -> int:
    _, den = sp.fraction(sp.factor(expr))
    if den.free_symbols - {MU}:
        raise AssemblyError(f"unexpected denominator {den}")
    return sp.roots(sp.Poly(den, MU)).get(at, 0) if den.has(MU) else 0


def _conjugate_weight(raw: dict, weight: tuple) -> dict:
    """Coefficients acting on ``v`` where ``u_c = t^weight[c] v_c``, row ``r`` divided by ``t^weight[r]``."""
    t = 1 - MU / MU_CENTER
    out: dict = {}
    for (r, c, p), v in raw.items():
        w = t ** weight[c]
        ders = [w, sp.diff(w, MU), sp.diff(w, MU, 2)]
        for q in range(p + 1):
            key = (r, c, q)
            out[key] = out.get(key, 0) + v * sp.binomial(p, q) * ders[p - q] / t ** weight[r]
    out = {k: sp.cancel(v) for k, v in out.items()}
    return {k: v for k, v in out.items() if v != 0}


@functools.lru_cache(maxsize=None)
def reduced_operator(sys: ModeSystem) -> ReducedOperator:
    if sys.n == 1:
        rows = _derive_surface(sys.m)
        subs = {ELL: sys.ell}
    else:
        rows = _derive_ball_scalar(sys.n)
        subs = {sp.Symbol("nu"): sys.delta_h}
    raw = {}
    for r, row in enumerate(rows):
        for (c, p), v in row.items():
            v = sp.cancel(sp.sympify(v).subs(subs))
            if v != 0:
                raw[(r, c, p)] = v
    for key, v in raw.items():
        if _pole_order(v, 0):
            raise AssemblyError(f"coefficient {key} is singular at mu = 0")
    weight = tuple(K.count(1) for _, K in sys.components) if sys.n == 1 else (0,)
    conj = _conjugate_weight(raw, weight)
    # never below the weight, so that data rows stay regular at the centre
    powers = [max([_pole_order(v) for (r, _, _), v in conj.items() if r == row] + [weight[row]])
              for row in range(sys.size)]
    op = ReducedOperator(sys, raw, powers, weight, conj)
    for (r, c, p), v in conj.items():
        e = op.scaled(r, c, p)
        for q in range(3):
            cq = sp.expand(e.coeff(LAM, q))
            if cq != 0:
                op.poly[(r, c, p, q)] = [complex(x) for x in sp.Poly(cq, MU).all_coeffs()]
        if sp.Poly(e, LAM).degree() > 2:
            raise AssemblyError("reduced operator is not quadratic in lambda")
    # the centre row must not degenerate after scaling
    for r in range(sys.size):
        at_centre = [op.scaled(r, c, p).subs(MU, MU_CENTER) for (rr, c, p) in conj if rr == r]
        if all(sp.simplify(x) == 0 for x in at_centre):
            raise AssemblyError(f"row {r} degenerates at the centre")
    return op


def component_labels(sys: ModeSystem) -> list:
    names = "mp"  # mu, phi
    return [f"u{k}_" + ("".join(names[i] for i in K) or "0") for k, K in sys.components]


def rank_slices(sys: ModeSystem) -> dict:
    """Component index ranges of each rank in the reduced unknown vector."""
    out = {}
    for i, (k, _) in enumerate(sys.components):
        lo, hi = out.get(k, (i, i))
        out[k] = (min(lo, i), i + 1)
    return out


__all__ = ["MU_CENTER", "ModeError", "AssemblyError", "ModeSystem", "mode_reduce", "ReducedOperator",
           "reduced_operator", "component_labels", "rank_slices"]


@functools.lru_cache(maxsize=None)
def surface_operator(expr: tuple, k: int) -> tuple:
    """Rows of a physical operator on rank-k fields on H2 (no conjugation).

    ``expr`` is a tuple of ``(tag, coefficient)`` pairs, e.g.
    ``(("Lich", 1), ("Id", lam**2 + 7/4))``; all tags must map rank k to the
    same rank.  Rows are dicts ``(col, p) -> coefficient`` in ``mu`` and ``ell``.
    """
    calc = ModeCalculus(1 / (4 * MU ** 2), (1 - MU / MU_CENTER) ** 2 / MU, beta=0)
    u = [{(r, 0): sp.Integer(1)} for r in range(k + 1)]
    T = sorted_to_full(k, u)
    acc = None
    for tag, coef in expr:
        out = calc.by_tag(tag, T)
        k_out = calc.rank(out) if out else 0
        res = calc.to_sorted(out, k_out)
        res = [_scale(e, sp.sympify(coef)) for e in res]
        acc = res if acc is None else [_add(a, b) for a, b in zip(acc, res)]
    return tuple({key: sp.cancel(v) for key, v in row.items() if sp.cancel(v) != 0} for row in acc)
