import pytest
from hypothesis import given, strategies as st

from qfpc.corpus import corpus_generate, load_program, program_names
from qfpc.errors import LinearVariableReused, NotUnitType, TypeCheckError
from qfpc.operational import explore, initial_closure
from qfpc.syntax import (QUBIT, UNIT, Meas, TBang, TLolli, TSum, TTensor, parse,
                         types_equal)
from qfpc.typecheck import Context, check_judgment, check_program, closure_context, typecheck

from violations import VIOLATIONS

seeds = st.integers(0, 2**31 - 1)


def test_examples():
    ty, used = typecheck(Context(), parse("lam x:qubit. x"))
    assert types_equal(ty, TLolli(QUBIT, QUBIT)) and used == frozenset()
    assert types_equal(check_judgment(Context(), Meas()), TLolli(QUBIT, TSum(UNIT, UNIT)))
    with pytest.raises(LinearVariableReused):
        check_judgment(Context.of(x=QUBIT), parse("x (*) x"))


def test_program_examples():
    assert check_program(parse("()"))
    assert check_program(parse("match meas new with inl x -> x | inr y -> y"))
    with pytest.raises(NotUnitType):
        check_program(parse("lam x:qubit. x"))


def test_reports_consumed_names():
    ctx = Context.of(a=QUBIT, b=QUBIT, c=TBang(UNIT))
    ty, used = typecheck(ctx, parse("a (*) (der[!unit] c; b)"))
    assert types_equal(ty, TTensor(QUBIT, QUBIT))
    assert used == {"a", "b"}


@pytest.mark.parametrize("name,src,cls", VIOLATIONS, ids=[v[0] for v in VIOLATIONS])
def test_rejections(name, src, cls):
    with pytest.raises(cls) as e:
        check_program(parse(src))
    assert type(e.value) is cls
    assert isinstance(e.value, TypeCheckError)


def test_violation_classes_distinct_enough():
    assert len(VIOLATIONS) == 15
    assert len({c for _, _, c in VIOLATIONS}) >= 7


def test_shipped_programs_typecheck():
    for name in program_names():
        assert check_program(load_program(name)), name


def _closures(t, budget=200):
    out = []
    explore(initial_closure(t), budget=budget,
            on_step=lambda S, res: out.extend(res.branches))
    return out


@given(seeds)
def test_subject_reduction_generated(seed):
    (t,) = corpus_generate(seed=seed, count=1)
    for S in _closures(t):
        assert types_equal(check_judgment(closure_context(S.regs, S.store), S.term), UNIT)


@pytest.mark.parametrize("name", ["teleport", "fix_coin", "nat_add", "entangled_closure", "geom"])
def test_subject_reduction_shipped(name):
    for S in _closures(load_program(name), budget=150):
        assert types_equal(check_judgment(closure_context(S.regs, S.store), S.term), UNIT)


@given(seeds)
def test_weakening_by_bang_vars(seed):
    (t,) = corpus_generate(seed=seed, count=1)
    base = typecheck(Context(), t)
    extra = Context(bang_vars={"zz1": TBang(QUBIT), "zz2": TBang(TSum(UNIT, UNIT))})
    ty, used = typecheck(extra, t)
    assert types_equal(ty, base[0]) and used == base[1]
    # determinism
    assert typecheck(Context(), t) == base
