import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symres.fibre import (
    FibreError, FibreSpec, LorentzDecomposition, RankError, SymTensor,
    check_tracefree_relation, curvature_endomorphism, hook_basis, hook_contract,
    inner_product, lefschetz_L, lefschetz_trace, lift_to_F, lorentz_compose,
    lorentz_decompose, metric, sym_basis, sym_product, trace_F,
)
from symres.surd import Surd

import oracles


def rand_tensor(r, fibre, rank, lo=-4, hi=4):
    return SymTensor(fibre, rank, {K: Fraction(r.randint(lo, hi), r.randint(1, 3))
                                   for K in itertools.combinations_with_replacement(range(fibre.dim), rank)})


FIBRES = [FibreSpec.euclidean(d) for d in (1, 2, 3)] + [FibreSpec.lorentzian(d) for d in (1, 2)]


# --- worked examples -----------------------------------------------------

def test_scalar_action():
    E = FibreSpec.euclidean(2)
    v = SymTensor.basis(E, (0, 1), 3)
    assert SymTensor.scalar(E) * v == v


def test_product_of_two_basis_covectors():
    E = FibreSpec.euclidean(2)
    p = SymTensor.basis(E, (0,)) * SymTensor.basis(E, (1,))
    assert p.coeffs == {(0, 1): 1}
    full = p.full()
    assert full[0, 1] == 1 and full[1, 0] == 1 and full[0, 0] == 0


def test_half_sum_of_squares_is_identity_metric():
    E = FibreSpec.euclidean(3)
    g = sum((SymTensor.basis(E, (i,)) * SymTensor.basis(E, (i,)) for i in range(3)),
            SymTensor.zero(E, 2)).scale(Fraction(1, 2))
    assert g == metric(E)
    assert (g.full().astype(float) == np.eye(3)).all()


def test_hook_examples():
    E = FibreSpec.euclidean(2)
    e0, e1 = SymTensor.basis(E, (0,)), SymTensor.basis(E, (1,))
    assert hook_contract(e0, e0 * e0) == e0.scale(2)
    assert hook_contract(e1, e0).is_zero()
    F = FibreSpec.lorentzian(2)
    f = SymTensor.basis(F, (0,))
    assert hook_contract(f, f * f) == f.scale(-2)
    with pytest.raises(RankError):
        hook_contract(e0, SymTensor.scalar(E))


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_lefschetz_examples(d):
    E = FibreSpec.euclidean(d)
    one = SymTensor.scalar(E)
    assert lefschetz_trace(lefschetz_L(one)) == SymTensor.scalar(E, 2 * d)
    assert lefschetz_trace(metric(E)) == SymTensor.scalar(E, d)


def test_trace_of_traceless_matrix_vanishes():
    E = FibreSpec.euclidean(3)
    A = np.array([[1, 2, 0], [2, -3, 5], [0, 5, 2]], dtype=object)
    u = SymTensor.from_full(E, A)
    assert lefschetz_trace(u).is_zero()
    with pytest.raises(RankError):
        lefschetz_trace(SymTensor.basis(E, (1,)))


def test_inner_product_examples():
    E = FibreSpec.euclidean(2)
    e0 = SymTensor.basis(E, (0,))
    assert inner_product(e0, e0) == 1
    assert inner_product(e0 * e0, e0 * e0) == 2
    F = FibreSpec.lorentzian(1)
    f = SymTensor.basis(F, (0,))
    assert inner_product(f * f, f * f) == 2
    with pytest.raises(RankError):
        inner_product(e0, e0 * e0)


def test_fibre_mismatch():
    with pytest.raises(FibreError):
        SymTensor.basis(FibreSpec.euclidean(2), (0,)) * SymTensor.basis(FibreSpec.euclidean(3), (0,))


# --- brute-force oracles ---------------------------------------------------

@pytest.mark.parametrize("fibre", FIBRES, ids=str)
@pytest.mark.parametrize("k", [1, 2, 3])
def test_product_matches_permutation_sum(fibre, k):
    r = oracles.rng(k + 10 * fibre.dim)
    for _ in range(5):
        vecs = [oracles.random_covector(r, fibre.dim) for _ in range(k)]
        prod = SymTensor.scalar(fibre)
        for v in vecs:
            prod = prod * SymTensor.covector(fibre, v)
        assert (prod.full() == oracles.sym_product_of_covectors(vecs)).all()


@pytest.mark.parametrize("fibre", FIBRES, ids=str)
@pytest.mark.parametrize("k", [1, 2, 3])
def test_inner_product_matches_permutation_sum(fibre, k):
    r = oracles.rng(7 * k + fibre.dim)
    sig = oracles.signature(fibre.dim, fibre.lorentzian_fibre)
    for _ in range(5):
        us = [oracles.random_covector(r, fibre.dim) for _ in range(k)]
        vs = [oracles.random_covector(r, fibre.dim) for _ in range(k)]
        U = SymTensor.scalar(fibre)
        V = SymTensor.scalar(fibre)
        for a, b in zip(us, vs):
            U = U * SymTensor.covector(fibre, a)
            V = V * SymTensor.covector(fibre, b)
        assert inner_product(U, V) == oracles.inner_of_decomposables(us, vs, sig)


@pytest.mark.parametrize("fibre", FIBRES, ids=str)
@pytest.mark.parametrize("k", [1, 2, 3])
def test_hook_and_trace_match_full_contractions(fibre, k):
    r = oracles.rng(3 * k + fibre.dim)
    sig = oracles.signature(fibre.dim, fibre.lorentzian_fibre)
    v = rand_tensor(r, fibre, k + 1)
    u = oracles.random_covector(r, fibre.dim)
    got = hook_contract(SymTensor.covector(fibre, u), v).full()
    assert (got == oracles.hook_full(u, v.full(), sig)).all()
    if k + 1 >= 2:
        got = lefschetz_trace(v).full()
        assert (np.asarray(got) == np.asarray(oracles.trace_full(v.full(), sig))).all()


def test_full_roundtrip():
    r = oracles.rng(1)
    for fibre in FIBRES:
        for k in range(4):
            u = rand_tensor(r, fibre, k)
            assert SymTensor.from_full(fibre, u.full()) == u


# --- algebraic properties -------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2), st.integers(0, 2), st.integers(0, 1), st.integers(0, 10**6))
def test_product_commutative_associative(d, p, q, s, seed):
    E = FibreSpec.euclidean(d)
    r = oracles.rng(seed)
    u, v, w = rand_tensor(r, E, p), rand_tensor(r, E, q), rand_tensor(r, E, s)
    assert u * v == v * u
    assert (u * v) * w == u * (v * w)
    assert (u * v).rank == p + q


@pytest.mark.parametrize("fibre", FIBRES, ids=str)
def test_adjointness(fibre):
    r = oracles.rng(5 + fibre.dim)
    for k in range(0, 4):
        w = rand_tensor(r, fibre, k)
        v = rand_tensor(r, fibre, k + 1)
        u = SymTensor.covector(fibre, oracles.random_covector(r, fibre.dim))
        assert inner_product(u * w, v) == inner_product(w, hook_contract(u, v))
        v2 = rand_tensor(r, fibre, k + 2)
        assert inner_product(lefschetz_L(w), v2) == inner_product(w, lefschetz_trace(v2))


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_lefschetz_commutator(d, k):
    """[Lambda, L] = 2(N + 2k) on rank k."""
    E = FibreSpec.euclidean(d)
    for u in sym_basis(E, k):
        lhs = lefschetz_trace(lefschetz_L(u))
        if k >= 2:
            lhs = lhs - lefschetz_L(lefschetz_trace(u))
        assert lhs == u.scale(2 * (d + 2 * k))


# --- curvature endomorphism -----------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("m", [1, 2, 3])
def test_q_of_space_form(n, m):
    """Curvature -1: q(R) = -(m(n+m-1) - L Lambda), so -m(n+m-1) on trace-free tensors."""
    E = FibreSpec.euclidean(n + 1)
    R = oracles.constant_curvature_tensor(n + 1, -1)
    r = oracles.rng(m + n)
    for _ in range(3):
        u = rand_tensor(r, E, m)
        expect = u.scale(-m * (n + m - 1))
        if m >= 2:
            expect = expect + lefschetz_L(lefschetz_trace(u))
        assert curvature_endomorphism(u, R) == expect


def test_q_on_one_forms_is_ricci():
    E = FibreSpec.euclidean(3)
    R = oracles.constant_curvature_tensor(3, Fraction(-1))
    for u in sym_basis(E, 1):
        assert curvature_endomorphism(u, R) == u.scale(-2)


# --- Minkowski-scale decomposition ----------------------------------------

def test_decompose_m1():
    F = FibreSpec.lorentzian(2)
    alpha, w = Fraction(3), [Fraction(1), Fraction(-2)]
    u = SymTensor.covector(F, [alpha] + w)
    d = lorentz_decompose(u)
    assert d.components[0] == SymTensor.scalar(F.base(), alpha)
    assert d.components[1] == SymTensor.covector(F.base(), w)
    assert inner_product(u, u) == -alpha ** 2 + sum(x * x for x in w)


def test_decompose_m2_f_squared():
    F = FibreSpec.lorentzian(2)
    f = SymTensor.basis(F, (0,))
    u = (f * f).scale(Surd.sqrt(Fraction(1, 2)))
    d = lorentz_decompose(u)
    assert d.components[0] == SymTensor.scalar(F.base(), 1)
    assert d.components[1].is_zero() and d.components[2].is_zero()


@pytest.mark.parametrize("dim_E", [1, 2, 3])
@pytest.mark.parametrize("m", [0, 1, 2, 3, 4])
def test_roundtrip_and_signed_inner_product(dim_E, m):
    F = FibreSpec.lorentzian(dim_E)
    r = oracles.rng(100 * m + dim_E)
    u, v = rand_tensor(r, F, m), rand_tensor(r, F, m)
    du, dv = lorentz_decompose(u), lorentz_decompose(v)
    assert lorentz_compose(du) == u
    signed = sum(((-1) ** (m - k) * inner_product(du.components[k], dv.components[k])
                  for k in range(m + 1)), Fraction(0))
    assert inner_product(u, v) == signed


def test_decompose_requires_lorentzian():
    with pytest.raises(FibreError):
        lorentz_decompose(SymTensor.basis(FibreSpec.euclidean(2), (0,)))


def test_tracefree_relation_examples():
    E = FibreSpec.euclidean(2)
    m = 2
    # u^(2) = c g with Lambda u^(2) = 2c; relation (+ sign) needs u^(0) = 2c / sqrt2
    c = Fraction(3)
    u2 = metric(E).scale(c)
    u0 = SymTensor.scalar(E, Surd.sqrt(2) * c)
    d = LorentzDecomposition(m, [u0, SymTensor.zero(E, 1), u2])
    assert check_tracefree_relation(d)
    assert trace_F(lorentz_compose(d)).is_zero()
    assert not check_tracefree_relation(d, sign=-1)
    zero = LorentzDecomposition(3, [SymTensor.zero(E, k) for k in range(4)])
    assert check_tracefree_relation(zero)


def test_tracefree_relation_witness():
    E = FibreSpec.euclidean(2)
    r = oracles.rng(9)
    d = LorentzDecomposition(3, [rand_tensor(r, E, k) for k in range(4)])
    assert not trace_F(lorentz_compose(d)).is_zero()
    w = check_tracefree_relation(d)
    assert not w and w.violated_k == 2


def test_json_roundtrip():
    F = FibreSpec.lorentzian(2)
    r = oracles.rng(4)
    u = rand_tensor(r, F, 3)
    d = lorentz_decompose(u)
    blob = json.dumps(d.to_json())
    back = LorentzDecomposition.from_json(json.loads(blob))
    assert lorentz_compose(back) == u
    assert SymTensor.from_json(json.loads(json.dumps(u.to_json()))) == u


def test_float_backend_decomposition():
    F = FibreSpec.lorentzian(2)
    r = oracles.rng(8)
    u = rand_tensor(r, F, 2).map_coeffs(float)
    back = lorentz_compose(lorentz_decompose(u))
    assert (back - u).norm_inf() < 1e-14


def test_lift_to_F_keeps_E_part():
    E = FibreSpec.euclidean(2)
    u = SymTensor.basis(E, (0, 1), 2)
    d = lorentz_decompose(lift_to_F(u))
    assert d.components[2] == u
