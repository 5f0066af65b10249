import json
import math

import numpy as np
import pytest
import sympy as sp

from symres.blocks import (
    LAM, N_SYM, W_SYM, BlockOperator, ContinuationError, Flavor, StateError,
    adjoint_pattern, assemble_ambient_Q, assemble_indicial_Q, bind,
    build_scale_change, constants, decouple, diagonal_constants,
    indicial_substitute, load_golden, restrict_tracefree, scale_change_equal,
)

n = N_SYM


def test_constants_rank_two_symbolic():
    t = constants(2, n)
    assert sp.expand(t.c[2] - n * (n - 8) / 4) == 0
    assert sp.expand(t.c[1] - (n ** 2 + 16) / 4) == 0
    assert sp.expand(t.c[0] - (n ** 2 + 8 * n + 8) / 4) == 0
    assert sp.expand(t.c_prime[0] - (n ** 2 + 8 * n) / 4) == 0
    assert t.c_prime[1] == t.c[1] and t.c_prime[2] == t.c[2]


def test_constants_scalar():
    t = constants(0, n)
    assert sp.expand(t.c[0] - n ** 2 / 4) == 0
    assert t.a2 == (1,) and t.b2 == (0,)


def test_constants_rank_two_n_one():
    t = constants(2, 1)
    assert t.c[2] == sp.Rational(-7, 4)
    assert t.c_m_closed_form() == sp.Rational(-7, 4)
    # closed form of the scalar-rank-m Laplacian shift
    assert sp.Rational(1 - 8, 4) == t.c[2]


@pytest.mark.parametrize("m", range(7))
def test_c_m_closed_form(m):
    for nv in range(1, 11):
        t = constants(m, nv)
        assert t.c[m] == sp.Rational(nv ** 2 - 4 * m * (nv + m - 2), 4)


@pytest.mark.parametrize("m", range(7))
def test_band_structure(m):
    Q = assemble_indicial_Q(m)
    assert Q.bandwidth() == min(m, 2)
    T = restrict_tracefree(Q)
    assert T.bandwidth() == min(m, 1)
    T2 = restrict_tracefree(Q, sign=-1)
    assert T2.bandwidth() == min(m, 1)
    for k in range(m + 1):
        blk = Q.block(k, k)
        assert blk[("Lich", 0)] == 1
        assert sp.expand(blk[("Id", 0)] - (LAM ** 2 - constants(m, n).c[k])) == 0
        assert blk.get(("LL", 0), 0) == (-1 if k >= 2 else 0)


def test_scalar_block():
    B = assemble_ambient_Q(0)
    assert set(B.blocks) == {(0, 0)}
    assert B.block(0, 0) == {("Lich", 0): 1, ("Id", 2): 1, ("Id", 0): -n ** 2 / 4}


def test_rank_three_lefschetz_block():
    B = assemble_ambient_Q(3)
    # u^(1) feeds rank 3 with -b_1 b_2 L, b_1 b_2 = sqrt(2*1)
    assert B.block(3, 1) == {("LefL", 0): -sp.sqrt(2)}
    assert B.block(1, 3) == {("Trace", 0): -sp.sqrt(2)}


def test_indicial_substitution():
    B = assemble_ambient_Q(2)
    Q = indicial_substitute(B)
    assert Q.flavor is Flavor.INDICIAL
    for blk in Q.blocks.values():
        assert all(p == 0 for (_, p) in blk)
    Q0 = indicial_substitute(B, 0)
    for k in range(3):
        assert Q0.block(k, k)[("Id", 0)] == -constants(2, n).c[k]
    # off-diagonal symbols are untouched
    for key, blk in B.blocks.items():
        if key[0] != key[1]:
            assert Q.block(*key) == blk
    with pytest.raises(StateError):
        indicial_substitute(Q)


def test_golden_rank_two():
    g = load_golden()
    assert g["ambient"].equals(assemble_ambient_Q(2))
    assert g["indicial"].equals(assemble_indicial_Q(2))
    assert scale_change_equal(g["J"], build_scale_change(2))


def test_tracefree_printed_rule_matches_golden():
    g = load_golden()
    T = restrict_tracefree(assemble_indicial_Q(2), sign=-1)
    assert g["indicial_tracefree"].equals(T)
    assert not g["indicial_tracefree"].equals(restrict_tracefree(assemble_indicial_Q(2)))


def test_tracefree_rank_one_is_unchanged():
    Q = assemble_indicial_Q(1)
    T = restrict_tracefree(Q)
    assert T.blocks == Q.blocks


@pytest.mark.parametrize("m", [2, 3, 4, 5])
def test_tracefree_constants(m):
    Q = assemble_indicial_Q(m)
    c = constants(m, n)
    printed = diagonal_constants(restrict_tracefree(Q, sign=-1))
    corrected = restrict_tracefree(Q, sign=+1)
    for k in range(m + 1):
        assert sp.expand(printed[k] - c.c_prime[k]) == 0
        shift = (m - k) * (m - k - 1)
        assert sp.expand(diagonal_constants(corrected)[k] - (c.c[k] + shift)) == 0
        assert corrected.block(k, k).get(("LL", 0), 0) == (-2 if k >= 2 else 0)
    if m == 3:
        assert sp.expand(printed[0] - (c.c[0] - 6)) == 0


def test_corrected_rank_two_k0_constant():
    T = restrict_tracefree(assemble_indicial_Q(2))
    assert sp.factor(diagonal_constants(T)[0]) == (n + 4) ** 2 / 4


def test_tracefree_needs_indicial():
    with pytest.raises(StateError):
        restrict_tracefree(assemble_ambient_Q(2))


# --- change of scale -------------------------------------------------------

def test_scale_change_small():
    J0 = build_scale_change(0)
    assert J0.matrix() == sp.Matrix([[1]])
    J2 = build_scale_change(2)
    assert J2.entries[(2, 0)] == W_SYM ** 2 / sp.sqrt(2)
    assert J2.entries[(1, 0)] == sp.sqrt(2) * W_SYM


@pytest.mark.parametrize("m", range(6))
def test_scale_change_inverse(m):
    J = build_scale_change(m)
    Jinv = J.inverse()
    assert J.compose(Jinv).matrix() == sp.eye(m + 1)
    assert Jinv.compose(J).matrix() == sp.eye(m + 1)
    # ds/s = dt/t + drho/rho, so the inverse uses (-drho/rho)
    for (r, c), v in Jinv.entries.items():
        j = r - c
        ratio = sp.sqrt(sp.Rational(math.factorial(m - c - j), math.factorial(m - c)))
        assert sp.simplify(v - sp.binomial(m - c, j) * ratio * (-W_SYM) ** j) == 0


# --- adjoint pattern -------------------------------------------------------

@pytest.mark.parametrize("m", range(5))
@pytest.mark.parametrize("tracefree", [False, True])
def test_adjoint_pattern_symbolic(m, tracefree):
    Q = assemble_indicial_Q(m)
    if tracefree:
        Q = restrict_tracefree(Q)
    A = adjoint_pattern(Q)
    target = assemble_indicial_Q(m, lam=-sp.conjugate(LAM))
    if tracefree:
        target = restrict_tracefree(target)
    assert A.equals(target)


def test_adjoint_selfadjoint_on_imaginary_axis():
    t = sp.Symbol("t", real=True)
    Q = assemble_indicial_Q(2, lam=sp.I * t)
    assert adjoint_pattern(Q).equals(Q)
    Q0 = assemble_indicial_Q(0, n=3, lam=sp.I * t)
    assert adjoint_pattern(Q0).equals(Q0)


def test_adjoint_at_complex_point():
    lam = 2 + sp.I
    A = adjoint_pattern(assemble_indicial_Q(3, n=2, lam=lam))
    assert A.equals(assemble_indicial_Q(3, n=2, lam=-2 + sp.I))
    assert not A.equals(assemble_indicial_Q(3, n=2, lam=lam))


# --- serialisation ---------------------------------------------------------

def test_json_roundtrip():
    for B in (assemble_ambient_Q(3), restrict_tracefree(assemble_indicial_Q(2))):
        back = BlockOperator.from_json(json.loads(json.dumps(B.to_json())))
        assert back.equals(B) and back.flavor == B.flavor


def test_pretty_layout():
    text = assemble_ambient_Q(2).pretty()
    lines = text.splitlines()
    assert lines[1].startswith("u^(2)") and lines[3].startswith("u^(0)")
    assert "LΛ" in lines[1] and "(-sqrt(2)) L" in lines[1]


# --- decoupling ------------------------------------------------------------

def _random_ops(seed, sizes):
    rng = np.random.default_rng(seed)
    cache = {}

    def ops(tag, k):
        if (tag, k) not in cache:
            shift = {"d": 1, "div": -1, "Lich": 0, "Id": 0, "LL": 0}[tag]
            out = k + shift
            if tag == "Id":
                cache[(tag, k)] = np.eye(sizes[k])
            elif tag == "Lich":
                A = rng.standard_normal((sizes[k], sizes[k]))
                cache[(tag, k)] = A @ A.T + sizes[k] * np.eye(sizes[k])
            else:
                cache[(tag, k)] = rng.standard_normal((sizes[out], sizes[k]))
        return cache[(tag, k)]
    return ops


def test_decouple_matches_direct_solve_rank_one():
    sizes = {0: 5, 1: 7}
    T = restrict_tracefree(assemble_indicial_Q(1, n=1))
    ops = _random_ops(3, sizes)
    mats = bind(T, ops, lam_value=2)
    f = np.random.default_rng(1).standard_normal(sizes[1])
    res = decouple(mats, 1, f)
    # dense oracle: assemble the full block system in the order (u^(0), u^(1))
    big = np.block([[mats[(0, 0)], mats[(0, 1)]], [mats[(1, 0)], mats[(1, 1)]]])
    sol = np.linalg.solve(big, np.concatenate([np.zeros(sizes[0]), f]))
    assert np.allclose(res.components[0], sol[:sizes[0]])
    assert np.allclose(res.components[1], sol[sizes[0]:])
    # u^(0) = 2 b_0 R^(0) div u^(1)
    div = ops("div", 1)
    assert np.allclose(res.components[0], 2 * res.resolvents[0] @ div @ res.components[1])
    assert res.residual < 1e-10


def test_decouple_zero_input():
    sizes = {0: 4, 1: 5, 2: 6}
    T = restrict_tracefree(assemble_indicial_Q(2, n=1))
    mats = bind(T, _random_ops(5, sizes), lam_value=3)
    res = decouple(mats, 2, np.zeros(6))
    assert all(np.all(u == 0) for u in res.components)


def test_decouple_reports_singular_level():
    sizes = {0: 3, 1: 3}
    mats = {(0, 0): np.zeros((3, 3)), (1, 1): np.eye(3), (0, 1): np.eye(3), (1, 0): np.eye(3)}
    with pytest.raises(ContinuationError) as err:
        decouple(mats, 1, np.ones(3))
    assert err.value.k == 0
