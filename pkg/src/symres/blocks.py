"""Formal block structure of the conjugated d'Alembertian and its indicial family.

A block is a formal sum ``sum coeff * (s d_s)^p * OP`` with ``OP`` one of the
tags below; coefficients are sympy expressions in ``n`` and ``lambda``.  Block
indices are tensor ranks: ``blocks[(k_out, k_in)]`` maps ``u^(k_in)`` into the
rank ``k_out`` slot.  Printing follows the usual layout with ``u^(m)`` first.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import sympy as sp

N_SYM = sp.Symbol("n", positive=True)
LAM = sp.Symbol("lambda")
W_SYM = sp.Symbol("w")  # stands for the 1-form d(rho)/rho inside J

TAGS = ("Lich", "Rough", "d", "div", "Trace", "LefL", "LL", "Id")
_PRETTY = {"Lich": "Δ", "Rough": "∇*∇", "d": "d", "div": "div", "Trace": "Λ",
           "LefL": "L", "LL": "LΛ", "Id": "1"}
# rank shift produced by each tag
RANK_SHIFT = {"Lich": 0, "Rough": 0, "d": 1, "div": -1, "Trace": -2, "LefL": 2, "LL": 0, "Id": 0}
_ADJOINT = {"Lich": "Lich", "Rough": "Rough", "d": "div", "div": "d", "Trace": "LefL",
            "LefL": "Trace", "LL": "LL", "Id": "Id"}


class StateError(RuntimeError):
    """Operation applied to a BlockOperator of the wrong flavor."""


class ContinuationError(RuntimeError):
    """An intermediate resolvent in the decoupling chain is singular."""

    def __init__(self, k: int, msg: str = ""):
        super().__init__(f"singular resolvent at k={k}{': ' + msg if msg else ''}")
        self.k = k


class Flavor(str, enum.Enum):
    AMBIENT = "ambient_Q"
    INDICIAL = "indicial_Q"
    TRACEFREE = "indicial_Q_tracefree"


# ---------------------------------------------------------------------------
# constants


@dataclass(frozen=True)
class ConstantTable:
    m: int
    n: object
    a2: tuple  # a_k^2 = 1/(m-k)!
    b2: tuple  # b_k^2 = m-k
    c: tuple
    c_prime: tuple

    def a(self, k: int):
        return sp.sqrt(self.a2[k])

    def b(self, k: int):
        return sp.sqrt(self.b2[k])

    def bb(self, k: int):
        """``b_k b_{k+1} = sqrt((m-k)(m-k-1))``."""
        return sp.sqrt(self.b2[k] * self.b2[k + 1])

    def c_m_closed_form(self):
        n, m = self.n, self.m
        return (n ** 2 - 4 * m * (n + m - 2)) / sp.Integer(4)


def constants(m: int, n) -> ConstantTable:
    """Constant table for rank ``m`` over a boundary of dimension ``n`` (``n`` may be symbolic)."""
    if m < 0:
        raise ValueError("m must be >= 0")
    n = sp.sympify(n)
    ks = range(m + 1)
    c = tuple(sp.expand(n ** 2 / 4 + m * (n + 2 * k + 1) - k * (2 * n + 3 * k - 1)) for k in ks)
    cp = tuple(sp.expand(c[k] - (m - k) * (m - k - 1)) for k in ks)
    return ConstantTable(
        m=m, n=n,
        a2=tuple(sp.Rational(1, math.factorial(m - k)) for k in ks),
        b2=tuple(sp.Integer(m - k) for k in ks),
        c=c, c_prime=cp,
    )


# ---------------------------------------------------------------------------
# formal blocks


Term = tuple  # (tag, euler_power)


def _clean(block: Mapping[Term, sp.Expr]) -> dict:
    out = {}
    for key, v in block.items():
        v = sp.expand(v)
        if v != 0:
            out[key] = v
    return out


def _add_into(block: dict, key: Term, v):
    block[key] = sp.expand(block.get(key, 0) + v)
    if block[key] == 0:
        del block[key]


@dataclass
class BlockOperator:
    m: int
    n: object
    blocks: dict = field(default_factory=dict)  # (k_out, k_in) -> {(tag, p): coeff}
    flavor: Flavor = Flavor.AMBIENT

    def block(self, k_out: int, k_in: int) -> dict:
        return self.blocks.get((k_out, k_in), {})

    def bandwidth(self) -> int:
        return max((abs(r - c) for (r, c), b in self.blocks.items() if b), default=0)

    def subs(self, mapping: Mapping) -> "BlockOperator":
        nb = {key: _clean({t: sp.sympify(v).subs(mapping) for t, v in blk.items()})
              for key, blk in self.blocks.items()}
        return BlockOperator(self.m, sp.sympify(self.n).subs(mapping), nb, self.flavor)

    def equals(self, other: "BlockOperator") -> bool:
        if self.m != other.m:
            return False
        keys = set(self.blocks) | set(other.blocks)
        for key in keys:
            a, b = self.block(*key), other.block(*key)
            for t in set(a) | set(b):
                if sp.simplify(sp.expand(a.get(t, 0) - b.get(t, 0))) != 0:
                    return False
        return True

    # output ----------------------------------------------------------------
    def to_json(self) -> dict:
        rows = list(range(self.m, -1, -1))
        terms = []
        for r in rows:
            for c in rows:
                for (tag, p), v in sorted(self.block(r, c).items()):
                    terms.append({"row": r, "col": c, "tag": tag, "euler_power": p,
                                  "coeff_poly": sp.srepr(sp.nsimplify(v))})
        return {"m": self.m, "n": str(self.n), "flavor": self.flavor.value,
                "rows": rows, "cols": rows, "terms": terms}

    @classmethod
    def from_json(cls, d: Mapping) -> "BlockOperator":
        blocks: dict = {}
        for t in d["terms"]:
            v = _rebind(sp.sympify(t["coeff_poly"]))
            blk = blocks.setdefault((t["row"], t["col"]), {})
            _add_into(blk, (t["tag"], int(t["euler_power"])), v)
        n = _rebind(sp.sympify(d["n"], locals={"n": N_SYM}))
        return cls(int(d["m"]), n, blocks, Flavor(d["flavor"]))

    def pretty(self) -> str:
        rows = list(range(self.m, -1, -1))
        cells = [[_pretty_block(self.block(r, c)) for c in rows] for r in rows]
        width = max(len(x) for row in cells for x in row)
        lines = [f"{self.flavor.value}  m={self.m}  n={self.n}   columns " + ", ".join(f"u^({r})" for r in rows)]
        for r, row in zip(rows, cells):
            lines.append(f"u^({r}) | " + " | ".join(x.ljust(width) for x in row))
        return "\n".join(lines)


def _rebind(expr):
    """Map free symbols named n / lambda onto the package symbols."""
    names = {"n": N_SYM, "lambda": LAM, "w": W_SYM}
    return expr.subs({sym: names[sym.name] for sym in expr.free_symbols if sym.name in names})


def _pretty_block(blk: Mapping) -> str:
    if not blk:
        return "0"
    parts = []
    for (tag, p), v in sorted(blk.items(), key=lambda kv: (TAGS.index(kv[0][0]), -kv[0][1])):
        op = ("(s∂s)^%d " % p if p > 1 else "(s∂s) " if p == 1 else "") + ("" if tag == "Id" and p else _PRETTY[tag])
        coeff = sp.nsimplify(v)
        if coeff == 1:
            parts.append(op.strip())
        elif coeff == -1:
            parts.append("-" + op.strip())
        elif tag == "Id" and not p:
            parts.append(f"({coeff})")
        else:
            parts.append(f"({coeff}) {op.strip()}")
    return " + ".join(parts)


def assemble_ambient_Q(m: int, n=N_SYM) -> BlockOperator:
    """Pentadiagonal block form of Q in the Minkowski scale."""
    tab = constants(m, n)
    blocks: dict = {}
    for k in range(m + 1):
        diag = {("Lich", 0): sp.Integer(1), ("Id", 2): sp.Integer(1), ("Id", 0): -tab.c[k]}
        if k >= 2:
            diag[("LL", 0)] = sp.Integer(-1)
        blocks[(k, k)] = _clean(diag)
        if k + 1 <= m:
            blocks[(k + 1, k)] = {("d", 0): 2 * tab.b(k)}
        if k + 2 <= m:
            blocks[(k + 2, k)] = {("LefL", 0): -tab.bb(k)}
        if k - 1 >= 0:
            blocks[(k - 1, k)] = {("div", 0): -2 * tab.b(k - 1)}
        if k - 2 >= 0:
            blocks[(k - 2, k)] = {("Trace", 0): -tab.bb(k - 2)}
    return BlockOperator(m, tab.n, blocks, Flavor.AMBIENT)


def indicial_substitute(B: BlockOperator, lam=LAM) -> BlockOperator:
    """Replace every ``s d_s`` by ``-lambda``."""
    if B.flavor is not Flavor.AMBIENT:
        raise StateError("indicial substitution applies to the ambient operator only")
    nb = {}
    for key, blk in B.blocks.items():
        out: dict = {}
        for (tag, p), v in blk.items():
            _add_into(out, (tag, 0), v * (-lam) ** p)
        nb[key] = out
    return BlockOperator(B.m, B.n, nb, Flavor.INDICIAL)


def assemble_indicial_Q(m: int, n=N_SYM, lam=LAM) -> BlockOperator:
    return indicial_substitute(assemble_ambient_Q(m, n), lam)


def restrict_tracefree(B: BlockOperator, sign: int = +1) -> BlockOperator:
    """Eliminate L and Lambda blocks using ``Lambda u^(k) = sign b_{k-2} b_{k-1} u^(k-2)``.

    ``sign=+1`` is the relation that characterises the kernel of the
    Lorentzian trace; ``sign=-1`` is the opposite-sign variant whose diagonal
    constants are ``c_k - (m-k)(m-k-1)``.
    """
    if B.flavor is not Flavor.INDICIAL:
        raise StateError("restriction applies to the indicial family")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    tab = constants(B.m, B.n)
    nb = {key: dict(blk) for key, blk in B.blocks.items()}
    for (r, c), blk in B.blocks.items():
        for (tag, p), v in blk.items():
            if tag == "LefL" and r == c + 2:
                # L u^(c) = (sign / bb_c) L Lambda u^(r)
                del nb[(r, c)][(tag, p)]
                _add_into(nb.setdefault((r, r), {}), ("LL", p), v * sign / tab.bb(c))
            elif tag == "Trace" and c == r + 2:
                # Lambda u^(c) = sign bb_r u^(r)
                del nb[(r, c)][(tag, p)]
                _add_into(nb.setdefault((r, r), {}), ("Id", p), v * sign * tab.bb(r))
    nb = {key: blk for key, blk in nb.items() if blk}
    return BlockOperator(B.m, B.n, nb, Flavor.TRACEFREE)


def adjoint_pattern(B: BlockOperator) -> BlockOperator:
    """Formal adjoint for the pairing ``sum_k (-1)^(m-k) <u^(k), v^(k)>``.

    Block (j, i) of the adjoint is ``(-1)^(i-j)`` times the adjoint of block
    (i, j), with d and div exchanged, L and Lambda exchanged and coefficients
    complex conjugated.  For the indicial family the result equals the family at
    ``-conj(lambda)``.
    """
    if B.flavor is Flavor.AMBIENT:
        raise StateError("adjoint pattern is defined on indicial flavors")
    nb: dict = {}
    for (i, j), blk in B.blocks.items():
        out = nb.setdefault((j, i), {})
        for (tag, p), v in blk.items():
            _add_into(out, (_ADJOINT[tag], p), (-1) ** (i - j) * sp.conjugate(v))
    return BlockOperator(B.m, B.n, nb, B.flavor)


def diagonal_constants(B: BlockOperator) -> list:
    """Minus the ``Id`` coefficient on each diagonal block, ignoring lambda^2."""
    return [sp.expand(-(B.block(k, k).get(("Id", 0), 0) - LAM ** 2)) for k in range(B.m + 1)]


# ---------------------------------------------------------------------------
# change of scale


@dataclass(frozen=True)
class ScaleChange:
    """``(J u)^(k+j) = sum binom(m-k, j) a_k/a_{k+j} (d rho/rho)^j . u^(k)``.

    ``entries[(k_out, k_in)]`` is a polynomial in ``W_SYM`` (the 1-form d rho/rho).
    """

    m: int
    entries: dict

    def matrix(self) -> sp.Matrix:
        return sp.Matrix(self.m + 1, self.m + 1, lambda r, c: self.entries.get((r, c), 0))

    def compose(self, other: "ScaleChange") -> "ScaleChange":
        M = (self.matrix() * other.matrix()).applyfunc(sp.expand)
        return ScaleChange(self.m, {(r, c): M[r, c] for r in range(self.m + 1)
                                    for c in range(self.m + 1) if M[r, c] != 0})

    def inverse(self) -> "ScaleChange":
        """Back-substitution for a unipotent lower-triangular (in rank) matrix."""
        m = self.m
        inv: dict = {}
        for c in range(m + 1):
            inv[(c, c)] = sp.Integer(1)
            for r in range(c + 1, m + 1):
                acc = sum((self.entries.get((r, t), 0) * inv.get((t, c), 0) for t in range(c, r)), sp.Integer(0))
                val = sp.expand(-acc)
                if val != 0:
                    inv[(r, c)] = val
        return ScaleChange(m, inv)

    def coefficient(self, k_out: int, k_in: int):
        """Numeric factor multiplying ``(d rho/rho)^(k_out-k_in)``."""
        e = self.entries.get((k_out, k_in), 0)
        j = k_out - k_in
        return sp.expand(e / W_SYM ** j) if e != 0 else sp.Integer(0)

    def pretty(self) -> str:
        rows = list(range(self.m, -1, -1))
        M = self.matrix()
        cells = [[str(M[r, c]).replace("w", "(dρ/ρ)") for c in rows] for r in rows]
        width = max(len(x) for row in cells for x in row)
        return "\n".join(" | ".join(x.ljust(width) for x in row) for row in cells)


def build_scale_change(m: int) -> ScaleChange:
    ent = {}
    for k in range(m + 1):
        for j in range(0, m - k + 1):
            a_ratio = sp.sqrt(sp.Rational(math.factorial(m - k - j), math.factorial(m - k)))
            ent[(k + j, k)] = sp.binomial(m - k, j) * a_ratio * W_SYM ** j
    return ScaleChange(m, ent)


# ---------------------------------------------------------------------------
# binding symbols to matrices and the decoupling recursion


def bind(B: BlockOperator, ops: Callable[[str, int], object], lam_value=None, dense: bool = True) -> dict:
    """Realise every block as a matrix.

    ``ops(tag, k_in)`` returns the matrix of the symbol acting on rank ``k_in``.
    The returned dict maps ``(k_out, k_in)`` to dense complex arrays, or keeps
    sparse inputs sparse when ``dense=False``.
    """
    out = {}
    for (r, c), blk in B.blocks.items():
        acc = None
        for (tag, p), v in blk.items():
            if p:
                raise StateError("Euler operator cannot be realised on the base")
            if lam_value is not None:
                v = sp.sympify(v).subs(LAM, lam_value)
            coeff = complex(sp.N(sp.sympify(v).subs(N_SYM, B.n)))
            M = ops(tag, c)
            if dense:
                M = M.toarray() if hasattr(M, "toarray") else np.asarray(M)
            acc = coeff * M if acc is None else acc + coeff * M
        if acc is not None:
            out[(r, c)] = acc
    return out


@dataclass
class DecouplingResult:
    components: list  # u^(0..m)
    resolvents: list  # dense R^(0..m)
    lower_norm: float
    f_norm: float
    residual: float
    tol: float

    @property
    def verdict(self) -> bool:
        return self.lower_norm <= self.tol * self.f_norm and self.residual <= self.tol * max(self.f_norm, 1e-300)


def _default_inverse(A: np.ndarray) -> np.ndarray:
    return np.linalg.inv(A)


def decouple(mats: Mapping, m: int, f: np.ndarray, resolvent_factory: Callable = _default_inverse,
             tol: float = 1e-8, norm: Callable = np.linalg.norm) -> DecouplingResult:
    """Solve the tridiagonal system with right-hand side (f at rank m, zero below).

    ``mats`` holds the bound blocks of a trace-free restricted operator.  The
    chain ``R^(k) = (D_k - U_{k-1} R^(k-1) Dn_{k-1})^{-1}`` reduces to
    ``(D_k + 4 b_{k-1}^2 d R^(k-1) div)^{-1}`` for the standard blocks.
    """
    D = [mats[(k, k)] for k in range(m + 1)]
    R = []
    for k in range(m + 1):
        A = D[k].astype(complex)
        if k > 0:
            A = A - mats[(k, k - 1)] @ R[k - 1] @ mats[(k - 1, k)]
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > 1e14:
            raise ContinuationError(k, f"condition number {cond:.3e}")
        R.append(resolvent_factory(A))
    u = [None] * (m + 1)
    u[m] = R[m] @ f
    for k in range(m - 1, -1, -1):
        u[k] = -R[k] @ (mats[(k, k + 1)] @ u[k + 1])
    res_vec = [sum((mats[(k, c)] @ u[c] for c in range(m + 1) if (k, c) in mats), 0) for k in range(m + 1)]
    res_vec[m] = res_vec[m] - f
    residual = math.sqrt(sum(norm(r) ** 2 for r in res_vec))
    lower = sum(norm(u[k]) for k in range(m))
    return DecouplingResult(u, R, lower, norm(f), residual, tol)


def dump_json(B: BlockOperator) -> str:
    return json.dumps(B.to_json(), indent=1, sort_keys=True)


# ---------------------------------------------------------------------------
# golden fixtures


def load_golden(path=None) -> dict:
    """Parse the hand-transcribed rank-2 fixture into block operators and J."""
    from importlib import resources

    if path is None:
        text = resources.files("symres").joinpath("data/golden_m2.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    raw = json.loads(text)
    names = {"n": N_SYM, "lam": LAM, "w": W_SYM}
    consts = {k: sp.sympify(v, locals=names) for k, v in raw["constants"].items()}
    names = {**names, **consts}
    out: dict = {"constants": consts}
    flavors = {"ambient": Flavor.AMBIENT, "indicial": Flavor.INDICIAL,
               "indicial_tracefree": Flavor.TRACEFREE}
    for key, flavor in flavors.items():
        grid = raw[key]
        m = len(grid) - 1
        blocks: dict = {}
        for i, row in enumerate(grid):
            for j, cell in enumerate(row):
                blk: dict = {}
                for tag, p, coeff in cell:
                    _add_into(blk, (tag, int(p)), sp.sympify(coeff, locals=names))
                if blk:
                    blocks[(m - i, m - j)] = blk
        out[key] = BlockOperator(m, N_SYM, blocks, flavor)
    Jgrid = raw["J"]
    m = len(Jgrid) - 1
    ent = {}
    for i, row in enumerate(Jgrid):
        for j, v in enumerate(row):
            v = sp.sympify(v, locals=names)
            if v != 0:
                ent[(m - i, m - j)] = v
    out["J"] = ScaleChange(m, ent)
    return out


def scale_change_equal(a: ScaleChange, b: ScaleChange) -> bool:
    return a.m == b.m and sp.simplify(a.matrix() - b.matrix()) == sp.zeros(a.m + 1, a.m + 1)
