import numpy as np
import pytest
from hypothesis import given, strategies as st

from qfpc import basis as B
from qfpc.basis import (EMPTY, STAR1, STAR2, Trunc, enumerate_basis, fix_count, idempotent,
                        underlying_dim)
from qfpc.corpus import corpus_generate, load_program
from qfpc.cpm import ChoiMap
from qfpc.denote import Denoter, denote, interp_closure, program_value
from qfpc.errors import IllTyped, NotBangContext, TypeMismatch
from qfpc.matrix import (MorphMatrix, add_m, bang_m, compose_m, contraction, cod_support,
                         dereliction, identity, max_distance, proj_len, promote_m,
                         reassociate, symmetry, tensor_m, unitor_l, unitor_r, weakening)
from qfpc.operational import explore, initial_closure, step
from qfpc.syntax import (QUBIT, UNIT, App, Ket0, Meas, TBang, TSum, TTensor, Unit, Var,
                         nat_type, parse, parse_with_defs, unitary)
from qfpc.operational import QuantumClosure

from conftest import EPS

BOOL = TSum(UNIT, UNIT)
seeds = st.integers(0, 2**31 - 1)


def scalar_entries(m):
    return {(B.show(a), B.show(b)): complex(e.superop[0, 0]) for (a, b), e in m.entries.items()
            if e.superop.shape == (1, 1)}


# ---------------------------------------------------------------- bases

def test_enumerate_basis_examples():
    tr = Trunc(2, 3)
    assert enumerate_basis(QUBIT, tr) == [STAR2]
    assert enumerate_basis(BOOL, tr) == [B.InlB(STAR1), B.InrB(STAR1)]
    nat = enumerate_basis(nat_type(), tr)
    z = B.FoldB(B.InlB(STAR1))
    one = B.FoldB(B.InrB(z))
    two = B.FoldB(B.InrB(one))
    assert set(nat) == {z, one, two} and len(nat) == 3


def test_bang_basis_is_sorted_and_bounded():
    for p in enumerate_basis(TBang(BOOL), Trunc(3, 1)):
        items = B.seq_items(p)
        assert len(items) <= 3
        assert list(items) == B.sort_points(items)


def test_underlying_dim_examples():
    assert underlying_dim(STAR2) == 2
    assert underlying_dim(B.LolliB(STAR2, STAR2)) == 4
    assert underlying_dim(EMPTY) == 1
    assert underlying_dim(B.SeqB([STAR2, STAR2, STAR2])) == 8


def test_fix_count():
    a, b = B.InlB(STAR1), B.InrB(STAR1)
    assert fix_count([a, a]) == 2
    assert fix_count([a, a, b]) == 2
    assert fix_count([a, b]) == 1


# ---------------------------------------------------- structural matrices

def test_identity_and_weakening():
    tr = Trunc(2, 2)
    m = identity(QUBIT, tr)
    assert list(m.entries) == [(STAR2, STAR2)]
    assert m.entry(STAR2, STAR2).allclose(ChoiMap.identity(2))
    u = weakening(QUBIT, tr)
    assert list(u.entries) == [(EMPTY, STAR1)]
    assert u.entry(B.SeqB([STAR2]), STAR1).allclose(ChoiMap.zero(2, 1))


def test_compose_examples():
    tr = Trunc(1, 1)
    new = denote(Ket0(), {}, tr)
    meas = denote(App(Meas(), Var("x")), {"x": QUBIT}, tr)
    ent = scalar_entries(compose_m(meas, new))
    assert ent.get(("*", "inl *")) == pytest.approx(1)
    assert abs(ent.get(("*", "inr *"), 0)) < EPS
    h = denote(App(unitary("H"), Var("x")), {"x": QUBIT}, tr)
    ent = scalar_entries(compose_m(meas, compose_m(h, new)))
    assert ent[("*", "inl *")] == pytest.approx(0.5)
    assert ent[("*", "inr *")] == pytest.approx(0.5)
    assert max_distance(compose_m(identity(QUBIT, tr), h), h) < EPS
    with pytest.raises(TypeMismatch):
        compose_m(new, meas)


def test_tensor_examples():
    tr = Trunc(1, 1)
    new = denote(Ket0(), {}, tr)
    nn = tensor_m(new, new)
    (e,) = nn.entries.values()
    assert np.allclose(e.choi, np.diag([1, 0, 0, 0]))
    idq = identity(QUBIT, tr)
    assert max_distance(tensor_m(idq, idq), identity(TTensor(QUBIT, QUBIT), tr)) < EPS
    zero = MorphMatrix(UNIT, QUBIT, {}, tr)
    assert not tensor_m(new, zero).entries


def test_bang_m_examples():
    tr = Trunc(3, 2)
    for A in (QUBIT, BOOL):
        assert max_distance(bang_m(identity(A, tr)), identity(TBang(A), tr)) < EPS
    r = 0.3
    g = MorphMatrix(UNIT, UNIT, {(STAR1, STAR1): ChoiMap.from_superop(np.array([[r]]), 1, 1)}, tr)
    bg = bang_m(g)
    assert bg.entry(B.SeqB([STAR1, STAR1]), B.SeqB([STAR1, STAR1])).superop[0, 0] == pytest.approx(r * r)
    assert bg.entry(EMPTY, EMPTY).superop[0, 0] == pytest.approx(1)


def test_promote_m_examples():
    tr = Trunc(3, 2)
    a = B.InlB(STAR1)
    x = MorphMatrix(UNIT, BOOL, {(STAR1, a): ChoiMap.from_superop(np.array([[0.5]]), 1, 1)}, tr)
    p = promote_m(x)
    assert p.entry(STAR1, B.SeqB([a])).superop[0, 0] == pytest.approx(0.5)
    assert p.entry(STAR1, EMPTY).superop[0, 0] == pytest.approx(1)
    assert p.entry(STAR1, B.SeqB([a, a])).superop[0, 0] == pytest.approx(0.25 / 2)
    bad = identity(QUBIT, tr)
    with pytest.raises(NotBangContext):
        promote_m(bad)


def test_proj_len_examples():
    tr = Trunc(3, 2)
    p0 = proj_len(QUBIT, 0, tr)
    assert list(p0.entries) == [(EMPTY, EMPTY)]
    assert max_distance(proj_len(QUBIT, None, tr), identity(TBang(QUBIT), tr)) < EPS
    for alpha in range(4):
        p = proj_len(BOOL, alpha, tr)
        assert max_distance(compose_m(p, p), p) < EPS


# --------------------------------------------------- laws at !A, L <= 3

LAW_CASES = [(QUBIT, L) for L in (1, 2, 3)] + [(BOOL, L) for L in (1, 2, 3)]


@pytest.mark.parametrize("A,L", LAW_CASES, ids=[f"{a}-L{l}" for a, l in LAW_CASES])
def test_comonoid_laws(A, L):
    from qfpc.laws import comonoid_law_errors
    errs = comonoid_law_errors(A, Trunc(L, 2))
    assert max(errs.values()) < EPS, errs


def test_orthogonality_and_idempotents():
    from qfpc.laws import orthogonality_error
    for A in (QUBIT, BOOL, TBang(QUBIT), TBang(BOOL), TTensor(QUBIT, TBang(BOOL))):
        assert orthogonality_error(A, Trunc(3, 2)) < EPS


def test_resolution_of_identity():
    from qfpc.laws import resolution_error, sample_denotations
    for m in sample_denotations(Trunc(3, 2)):
        assert resolution_error(m) < EPS


# ------------------------------------------------------------- programs

def test_program_examples():
    assert program_value(Unit()) == pytest.approx(1)
    assert program_value(load_program("coin"), Trunc(1, 1)) == pytest.approx(0.5)
    assert program_value(load_program("fair_coin"), Trunc(1, 1)) == pytest.approx(1)
    assert program_value(load_program("half_diverge"), Trunc(3, 4)) == pytest.approx(0.5)
    with pytest.raises(IllTyped):
        denote(parse("x (*) x"), {"x": QUBIT})


@pytest.mark.parametrize("name", ["coin", "bell", "ghz", "deutsch", "finitary_dup",
                                  "exhausted_dup", "dup_closure", "retry_fn", "geom3",
                                  "entangled_closure", "teleport", "swap_pair"])
def test_finitary_adequacy_shipped(name):
    from qfpc.syntax import max_annotation
    t = load_program(name)
    r = explore(initial_closure(t), budget=100_000)
    assert r.quiesced
    v = program_value(t, Trunc(max(1, max_annotation(t)), 4))
    assert abs(v - r.lower) < EPS


def test_teleport_is_identity():
    src = open(__import__("qfpc.corpus", fromlist=["x"]).program_path("teleport")).read()
    _, defs = parse_with_defs(src)
    m = denote(App(defs["teleport"], Var("x")), {"x": QUBIT}, Trunc(2, 2))
    assert max_distance(m, identity(QUBIT, Trunc(2, 2))) < EPS


def test_interp_closure_examples():
    assert interp_closure(initial_closure(Unit())) == pytest.approx(1)
    t = load_program("coin")
    (S1,) = step(initial_closure(t))
    assert len(S1.regs) == 1
    assert interp_closure(S1, Trunc(1, 1)) == pytest.approx(program_value(t, Trunc(1, 1)))
    Z = QuantumClosure(S1.regs, np.zeros((2, 2), complex), S1.store, S1.term)
    assert interp_closure(Z) == 0


def test_geometric_values_increase_with_truncation():
    t = load_program("geom")
    vals = [program_value(t, Trunc(L, 6)) for L in range(1, 5)]
    for L, v in enumerate(vals, start=1):
        assert v == pytest.approx(1 - 2.0 ** -(L + 1), abs=EPS)
    assert all(a <= b + EPS for a, b in zip(vals, vals[1:]))


@given(seeds)
def test_generated_values_in_unit_interval(seed):
    (t,) = corpus_generate(seed=seed, count=1)
    d = Denoter(Trunc(2, 2))
    v = program_value(t, denoter=d)
    assert -EPS <= v <= 1 + EPS
    r = explore(initial_closure(t), budget=10_000)
    assert abs(v - r.lower) < EPS
