"""Exact and numerical consistency checks shared by the CLI and the acceptance runner."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy as sp

from .blocks import (LAM, N_SYM, adjoint_pattern, assemble_ambient_Q, assemble_indicial_Q, bind,
                     build_scale_change, constants, load_golden, restrict_tracefree, scale_change_equal)
from .fibre import (FibreSpec, RankError, SymTensor, check_tracefree_relation, lefschetz_L, lefschetz_trace,
                    lorentz_decompose, sym_basis, trace_F)
from .geometry import Chart, Discretization, HyperbolicSpace
from .surd import Surd


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail}


def _to_sympy(c):
    if isinstance(c, Surd):
        return c.to_sympy()
    if isinstance(c, Fraction):
        return sp.Rational(c.numerator, c.denominator)
    return sp.sympify(c)


def _vector(u: SymTensor, basis) -> list:
    return [_to_sympy(u.coeffs.get(b, 0)) for b in basis]


def _indices(fibre: FibreSpec, k: int) -> list:
    return list(itertools.combinations_with_replacement(range(fibre.dim), k))


def _relation_map(u: SymTensor, sign: int) -> list:
    d = lorentz_decompose(u)
    E = d.fibre_E
    m = d.m
    out = []
    for k in range(2, m + 1):
        bb = Surd.sqrt((m - k + 2) * (m - k + 1)) * sign
        diff = lefschetz_trace(d.components[k]) - d.components[k - 2].scale(bb)
        out += _vector(diff, _indices(E, k - 2))
    return out


def tracefree_biconditional(dim_E: int, m: int, sign: int = +1) -> Check:
    """``trace_F u = 0`` iff the component relation holds, as an equality of kernels on Sym^m F*."""
    F = FibreSpec.lorentzian(dim_E)
    basis = sym_basis(F, m)
    if m < 2:
        # no trace and no relation: both conditions are vacuous
        ok = all(check_tracefree_relation(lorentz_decompose(b), sign) for b in basis)
        return Check(f"trace biconditional dim_E={dim_E} m={m}", ok, {"dim": len(basis)})
    T = sp.Matrix([_vector(trace_F(b), _indices(F, m - 2)) for b in basis]).T
    R = sp.Matrix([_relation_map(b, sign) for b in basis]).T
    kerT, kerR = T.nullspace(), R.nullspace()
    fwd = all(sp.simplify(R * v) == sp.zeros(R.rows, 1) for v in kerT)
    back = all(sp.simplify(T * v) == sp.zeros(T.rows, 1) for v in kerR)
    return Check(f"trace biconditional dim_E={dim_E} m={m}", fwd and back,
                 {"dim": len(basis), "ker_trace": len(kerT), "ker_relation": len(kerR), "sign": sign})


def lefschetz_commutator(dim: int, k: int) -> Check:
    """``[Lambda, L] = 2(N + 2k)`` on every basis tensor of rank k."""
    E = FibreSpec.euclidean(dim)
    ok = True
    for u in sym_basis(E, k):
        lhs = lefschetz_trace(lefschetz_L(u))
        try:
            lhs = lhs - lefschetz_L(lefschetz_trace(u))
        except RankError:
            pass
        ok &= lhs == u.scale(2 * (dim + 2 * k))
    return Check(f"[Λ,L] dim={dim} k={k}", bool(ok))


def fibre_suite(m_max: int = 3, dim_max: int = 3) -> list:
    out = [tracefree_biconditional(d, m) for d in range(1, dim_max + 1) for m in range(m_max + 1)]
    out += [lefschetz_commutator(d, k) for d in range(1, dim_max + 1) for k in range(m_max + 1)]
    return out


def constant_checks(m_max: int = 6, n_max: int = 10) -> list:
    n = N_SYM
    t = constants(2, n)
    expected = {"c_2": n * (n - 8) / 4, "c_1": (n ** 2 + 16) / 4, "c_0": (n ** 2 + 8 * n + 8) / 4,
                "c_0'": (n ** 2 + 8 * n) / 4}
    got = {"c_2": t.c[2], "c_1": t.c[1], "c_0": t.c[0], "c_0'": t.c_prime[0]}
    out = [Check(f"constants(2,n) {k}", sp.expand(got[k] - v) == 0, {"got": str(got[k])})
           for k, v in expected.items()]
    bad = [(m, nn) for m in range(m_max + 1) for nn in range(1, n_max + 1)
           if constants(m, nn).c[m] != sp.Rational(nn ** 2 - 4 * m * (nn + m - 2), 4)]
    out.append(Check(f"c_m closed form m<={m_max} n<={n_max}", not bad, {"failures": bad}))
    return out


def golden_checks() -> list:
    g = load_golden()
    return [Check("golden ambient m=2", g["ambient"].equals(assemble_ambient_Q(2))),
            Check("golden indicial m=2", g["indicial"].equals(assemble_indicial_Q(2))),
            Check("golden trace-free m=2", g["indicial_tracefree"].equals(
                restrict_tracefree(assemble_indicial_Q(2), sign=-1))),
            Check("golden J m=2", scale_change_equal(g["J"], build_scale_change(2)))]


def adjoint_symbol_checks(m_max: int = 4) -> list:
    out = []
    for m in range(m_max + 1):
        target = assemble_indicial_Q(m, lam=-sp.conjugate(LAM))
        out.append(Check(f"adjoint pattern m={m}", adjoint_pattern(assemble_indicial_Q(m)).equals(target)))
    return out


def adjoint_defect(m: int = 2, lam: complex = 0.7 + 0.4j, N: int = 128, seed: int = 0) -> float:
    """``|<Q_lam u, v>_s - <u, Q_{-conj lam} v>_s|`` relative to the product of norms, on H2.

    The pairing is ``sum_k (-1)^(m-k) <u^(k), v^(k)>``; fields are compactly
    supported random tensors in the upper half-plane.
    """
    D = Discretization(HyperbolicSpace(2), Chart((-1, 0.5), (1, 2.5), (N, N)))
    rng = np.random.default_rng(seed)
    u = [D.random_field(k, rng) for k in range(m + 1)]
    v = [D.random_field(k, rng) for k in range(m + 1)]
    ops = lambda tag, k: D.by_tag(tag, k).matrix
    B = assemble_indicial_Q(m, 2)
    A1 = bind(B, ops, lam_value=lam, dense=False)
    A2 = bind(B, ops, lam_value=-np.conj(lam), dense=False)

    def apply(A, w):
        return [sum((A[(k, c)] @ w[c] for c in range(m + 1) if (k, c) in A), np.zeros(len(w[k]), complex))
                for k in range(m + 1)]

    def pair(a, b):
        return sum((-1) ** (m - k) * np.vdot(b[k], D.mass(k) @ a[k]) for k in range(m + 1))

    Qu, Qv = apply(A1, u), apply(A2, v)
    lhs, rhs = pair(Qu, v), pair(u, Qv)
    scale = np.sqrt(sum(abs(D.inner(x, x, k)) for k, x in enumerate(Qu))) * \
        np.sqrt(sum(abs(D.inner(x, x, k)) for k, x in enumerate(v)))
    return float(abs(lhs - rhs) / scale)


__all__ = ["Check", "tracefree_biconditional", "lefschetz_commutator", "fibre_suite", "constant_checks",
           "golden_checks", "adjoint_symbol_checks", "adjoint_defect"]
