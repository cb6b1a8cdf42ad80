import pytest
from hypothesis import given, strategies as st

from qfpc.basis import Trunc
from qfpc.corpus import corpus_generate, program_names, program_path
from qfpc.denote import Denoter
from qfpc.syntax import parse
from qfpc.verify import (AuditPart, DenotationalPart, OperationalPart, VerifyReport, cmd_verify,
                         soundness_audit, verdict, verify_term)

from conftest import EPS

seeds = st.integers(0, 2**31 - 1)


def test_coin():
    r = cmd_verify(program_path("coin"))
    assert r.verdict == "pass"
    assert r.operational.lower == pytest.approx(0.5, abs=EPS)
    assert r.denotational.value == pytest.approx(0.5, abs=EPS)


def test_finitary_dup_exact():
    r = cmd_verify(program_path("finitary_dup"))
    assert r.verdict == "pass" and r.finitary
    assert abs(r.operational.lower - r.denotational.value) < EPS
    assert abs(r.operational.upper - r.denotational.value) < EPS


def test_unit():
    r = cmd_verify(program_path("unit"))
    assert r.verdict == "pass"
    assert r.operational.lower == r.operational.upper == r.denotational.value == 1


@pytest.mark.parametrize("name", program_names())
def test_all_shipped_pass(name):
    r = cmd_verify(program_path(name))
    assert r.verdict == "pass", r.text()
    o, d = r.operational, r.denotational
    assert o.lower - EPS <= d.value <= o.upper + EPS
    assert r.audit.max_deviation <= EPS


def test_infinitary_uses_approximant():
    r = cmd_verify(program_path("geom"))
    assert not r.finitary and r.approx == 4
    assert r.denotational.value == pytest.approx(1 - 2 ** -5)
    assert r.operational.source_upper >= r.denotational.value


def test_ill_typed_fails():
    r = verify_term(parse("lam x:qubit. x"), "bad")
    assert r.verdict == "fail" and r.typecheck.startswith("NotUnitType")


def test_json_round_trip():
    for name in ("coin", "geom", "nat_add"):
        r = cmd_verify(program_path(name))
        assert VerifyReport.from_json(r.to_json()) == r
    bad = verify_term(parse("x"), "bad")
    assert VerifyReport.from_json(bad.to_json()) == bad


def test_verdict_rule():
    op = OperationalPart(0.5, 0.75, 10, False)
    dp = DenotationalPart(0.6, 2, 2, True)
    ap = AuditPart(10, 0.0)
    assert verdict(op, dp, ap, EPS) == "pass"
    assert verdict(op, DenotationalPart(0.8, 2, 2, True), ap, EPS) == "fail"
    assert verdict(op, DenotationalPart(0.4, 2, 2, True), ap, EPS) == "fail"
    assert verdict(op, dp, AuditPart(10, 1e-6), EPS) == "fail"
    op.source_upper = 0.55
    assert verdict(op, dp, ap, EPS) == "fail"


@given(seeds)
def test_generated_programs_verify(seed):
    (t,) = corpus_generate(seed=seed, count=1)
    r = verify_term(t, "gen")
    assert r.verdict == "pass", r.text()


def test_audit_counts_steps():
    t = parse("match meas (U[H] new) with inl x -> x | inr y -> y")
    n, dev = soundness_audit(t, 3, Denoter(Trunc(1, 1)))
    assert n == 3 and dev < EPS
