import pytest
from hypothesis import given, strategies as st

from qfpc.corpus import GenConfig, corpus_generate, load_program, program_names
from qfpc.errors import InfiniteAnnotation, ShapeError, SyntaxError
from qfpc.syntax import (INF, QUBIT, UNIT, App, Bang, Der, Lam, LetTensor, Match, Seq,
                         TBang, TLolli, TMu, TSum, TVar, Unit, Var, annotate, children,
                         desugar_fix, diverge, fv, is_finitary, is_value, nat_type, parse,
                         parse_type, pretty, pretty_type, size, subst_term, subst_type,
                         types_equal)
from qfpc.typecheck import Context, check_judgment, type_of

seeds = st.integers(0, 2**31 - 1)


def test_parse_examples():
    assert parse("()") == Unit()
    t = parse("let x (*) y = a in b")
    assert isinstance(t, LetTensor) and (t.x, t.y) == ("x", "y")
    assert t.bound == Var("a") and t.body == Var("b")
    assert parse("lam x: qubit. x") == Lam("x", QUBIT, Var("x"))


def test_parse_annotations_and_sugar():
    assert parse("bang ()") == Bang(Unit(), INF)
    assert parse("bang[3] ()") == Bang(Unit(), 3)
    t = parse("match meas new with inl x -> x | inr y -> y")
    assert isinstance(t, Match)
    assert isinstance(parse("(); ()"), Seq)
    assert types_equal(parse_type("uX.(unit + X)"), nat_type())


def test_syntax_error_position():
    with pytest.raises(SyntaxError) as e:
        parse("lam x:qubit.\n  (x")
    assert e.value.line == 2
    assert "')'" in e.value.expected or ")" in e.value.expected


def test_subst_examples():
    assert subst_term(Var("x"), Unit(), "x") == Unit()
    body = TSum(UNIT, TVar("X"))
    nat = TMu("X", body)
    assert types_equal(subst_type(body, nat, "X"), TSum(UNIT, nat))
    out = subst_term(Lam("y", UNIT, Var("x")), Var("y"), "x")
    assert isinstance(out, Lam) and out.var != "y"
    assert out.body == Var("y")


def test_desugar_fix():
    A = UNIT
    body = parse("bang lam x:unit. (der[!(unit -o unit)] f) x")
    t = desugar_fix("f", A, A, body)
    assert fv(t) == frozenset()
    assert types_equal(type_of(t), TBang(TLolli(A, A)))
    unused = parse("bang lam x:unit. x")
    assert types_equal(type_of(desugar_fix("f", A, A, unused)), TBang(TLolli(A, A)))
    with pytest.raises(ShapeError):
        desugar_fix("f", A, A, parse("lam x:unit. x"))
    assert type_of(load_program("fix_coin")) == UNIT


def test_size_examples():
    assert size(Unit()) == 1
    assert size(Bang(Unit(), 2)) == 5
    assert size(Bang(Unit(), 0)) == 1
    with pytest.raises(InfiniteAnnotation):
        size(Bang(Unit()))


def test_values():
    assert is_value(parse("lam x:unit. x"))
    assert is_value(parse("inl[unit + unit] ()"))
    assert is_value(parse("bang (der[!unit] c)"))
    assert not is_value(parse("(lam x:unit. x) ()"))


def test_annotate_makes_finitary():
    t = diverge(UNIT)
    assert not is_finitary(t)
    assert is_finitary(annotate(t, 2))


def test_pretty_round_trip_generated():
    progs = corpus_generate(seed=7, count=500, cfg=GenConfig(depth=5, p_bang=0.4))
    for t in progs:
        assert parse(pretty(t)) == t


def test_pretty_round_trip_shipped():
    for name in program_names():
        t = load_program(name)
        assert parse(pretty(t)) == t, name


@given(seeds)
def test_subst_identity_and_free_vars(seed):
    (t,) = corpus_generate(seed=seed, count=1)
    sub = _open_subterms(t)
    for u in sub:
        for x in fv(u):
            assert subst_term(u, Var(x), x) == u
            v = Var("zz")
            r = subst_term(u, v, x)
            assert fv(r) <= (fv(u) - {x}) | fv(v)
            assert "zz" in fv(r)


def _open_subterms(t, acc=None):
    acc = [] if acc is None else acc
    if fv(t):
        acc.append(t)
    for c in children(t):
        _open_subterms(c, acc)
    return acc[:30]


type_src = st.recursive(
    st.sampled_from(["unit", "qubit"]),
    lambda inner: st.one_of(
        st.tuples(inner, inner).map(lambda p: f"({p[0]} -o {p[1]})"),
        st.tuples(inner, inner).map(lambda p: f"({p[0]} (*) {p[1]})"),
        st.tuples(inner, inner).map(lambda p: f"({p[0]} + {p[1]})"),
        inner.map(lambda a: f"!{a}"),
        inner.map(lambda a: f"uX.(unit + {a} (*) X)"),
    ),
    max_leaves=6,
)


@given(type_src)
def test_type_pretty_round_trip(src):
    a = parse_type(src)
    assert types_equal(parse_type(pretty_type(a)), a)
