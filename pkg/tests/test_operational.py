import numpy as np
import pytest
from hypothesis import given, strategies as st

from qfpc.corpus import GenConfig, corpus_generate, load_program
from qfpc.errors import IllTyped, Stuck
from qfpc.operational import (QuantumClosure, StoreEntry, canonicalize, closure_size,
                              decompose, explore, initial_closure, plug, step, step_rule,
                              termination_probability)
from qfpc.syntax import (App, Lam, Seq, StoreRef, UNIT, Unit, annotate, parse, size)

from conftest import EPS, rand_density

seeds = st.integers(0, 2**31 - 1)


def closure(regs, state, term, store=()):
    return QuantumClosure(tuple(regs), np.asarray(state, dtype=complex), tuple(store), term)


def test_decompose_examples():
    t = parse("(lam x:unit. x) ()")
    frames, r = decompose(t)
    assert frames == () and r == t
    t = parse("((lam x:unit. x) ()); ()")
    frames, r = decompose(t)
    assert len(frames) == 1 and frames[0][0] == "first"
    assert r == parse("(lam x:unit. x) ()")
    assert plug(frames, Unit()) == Seq(Unit(), Unit())
    assert decompose(Unit()) is None


def test_step_new():
    S = initial_closure(parse("match meas new with inl x -> x | inr y -> y"))
    (B,) = step(S)
    assert len(B.regs) == 1
    assert np.allclose(B.state, np.diag([1, 0]))


def test_step_meas_on_plus():
    plus = np.full((2, 2), 0.5)
    S = closure(["q"], plus, parse("match meas q with inl x -> x | inr y -> y"))
    res = step_rule(S)
    assert res.rule == "meas"
    a, b = res.branches
    assert a.regs == () and b.regs == ()
    assert a.weight == pytest.approx(0.5) and b.weight == pytest.approx(0.5)
    assert "inl" in str(a.term) and "inr" in str(b.term)


def test_step_exhausted_bang_zeroes():
    store = (StoreEntry("c", Unit(), 0),)
    S = closure([], np.ones((1, 1)), App(parse("der[!unit]"), StoreRef("c")), store)
    res = step_rule(S)
    assert res.rule == "der-exhausted"
    assert res.branches[0].weight == 0


def test_step_der_decrements():
    store = (StoreEntry("c", Unit(), 2),)
    S = closure([], np.ones((1, 1)), App(parse("der[!unit]"), StoreRef("c")), store)
    (B,) = step(S)
    assert B.store[0].alpha == 1 and B.term == Unit()


def test_step_on_value_is_stuck():
    with pytest.raises(Stuck):
        step(initial_closure(Unit()))


def test_explore_examples():
    r = explore(initial_closure(Unit()))
    assert r.lower == 1 and r.steps == 0
    r = explore(initial_closure(load_program("fair_coin")), budget=12)
    assert r.lower == pytest.approx(1) and r.quiesced


def test_termination_probability_examples():
    assert termination_probability(Unit()) == (1, 1)
    t = load_program("half_diverge")
    lo, hi = termination_probability(t, budget=300, assume_diverges=True)
    assert lo == pytest.approx(0.5) and hi == pytest.approx(0.5)
    lo, hi = termination_probability(t, budget=300)
    assert lo == pytest.approx(0.5) and hi == pytest.approx(1.0)
    with pytest.raises(IllTyped):
        termination_probability(parse("new; ()"))


@pytest.mark.parametrize("k", [0, 1, 2, 4, 6])
def test_geometric_annotated_loop(k):
    t = annotate(load_program("geom"), k)
    r = explore(initial_closure(t), budget=100_000)
    assert r.quiesced
    assert r.lower == pytest.approx(1 - 2.0 ** -(k + 1), abs=EPS)


def test_geometric_loop_lower_monotone_in_budget():
    t = load_program("geom")
    lows = [explore(initial_closure(t), budget=b).lower for b in (10, 20, 40, 80, 160, 200)]
    assert all(a <= b + EPS for a, b in zip(lows, lows[1:]))
    assert lows[-1] >= 0.996


def test_trace_records():
    r = explore(initial_closure(load_program("coin")), record_trace=True)
    assert len(r.trace) == r.steps
    assert {"rule", "branch_weights", "term_summary"} <= set(r.trace[0])
    assert any(rec["rule"] == "meas" for rec in r.trace)


def test_canonicalize_examples(rng):
    t = parse("(match meas a with inl x -> x | inr y -> y); "
              "(match meas b with inl x -> x | inr y -> y)")
    rho = np.kron(np.diag([1.0, 0]), np.diag([0.25, 0.75]))
    S = closure(["a", "b"], rho, t)
    assert canonicalize(S) is S
    swapped = closure(["b", "a"], np.kron(np.diag([0.25, 0.75]), np.diag([1.0, 0])), t)
    C = canonicalize(swapped)
    assert C.regs == S.regs and np.allclose(C.state, S.state)


@given(seeds)
def test_canonicalize_idempotent(seed):
    rng = np.random.default_rng(seed)
    names = list(rng.permutation(["a", "b", "c"]))
    t = parse("(match meas c with inl x -> x | inr y -> y); (match meas a with inl x -> x | "
              "inr y -> y); (match meas b with inl x -> x | inr y -> y)")
    S = closure(names, rand_density(rng, 8), t)
    C = canonicalize(S)
    CC = canonicalize(C)
    assert CC.regs == C.regs == ("c", "a", "b") and np.allclose(CC.state, C.state)


def _steps(t, budget=400):
    out = []
    explore(initial_closure(t), budget=budget, on_step=lambda S, res: out.append((S, res)))
    return out


@given(seeds)
def test_mass_conservation(seed):
    (t,) = corpus_generate(seed=seed, count=1)
    for S, res in _steps(t):
        total = sum(B.weight for B in res.branches)
        if res.rule == "der-exhausted":
            assert total == 0
        else:
            assert abs(total - S.weight) <= EPS


@given(seeds)
def test_finitary_quiescence_and_size(seed):
    (t,) = corpus_generate(seed=seed, count=1, cfg=GenConfig(depth=5, p_bang=0.4))
    r = explore(initial_closure(t), budget=size(t))
    assert r.quiesced
    assert r.leaves["frontier"] == 0
    for S, res in _steps(t):
        for B in res.branches:
            assert B.weight == 0 or closure_size(B) < closure_size(S)


@given(seeds)
def test_step_is_deterministic(seed):
    (t,) = corpus_generate(seed=seed, count=1)
    for S, res in _steps(t, budget=30):
        again = step_rule(canonicalize(S))
        assert again.rule == res.rule
        assert [b.term for b in again.branches] == [b.term for b in res.branches]
        for x, y in zip(again.branches, res.branches):
            assert x.weight == pytest.approx(y.weight, abs=EPS)


def test_explore_mass_budget():
    t = load_program("fix_coin")
    r = explore(initial_closure(t), budget=50, assume_diverges=True)
    assert r.terminated_mass + r.frontier_mass + r.zero_mass <= 1 + EPS
