"""One test per acceptance criterion, each at its stated tolerance."""
import time

import numpy as np
import pytest

from qfpc.basis import Trunc
from qfpc.corpus import (corpus_generate, load_program, program_names, program_path,
                         program_settings, program_source)
from qfpc.cpm import add, apply, theta0, theta1
from qfpc.denote import Denoter, denote, program_value
from qfpc.laws import comonoid_law_errors, orthogonality_error, resolution_error, sample_denotations
from qfpc.matrix import identity, max_distance
from qfpc.norms import bell_state, product_max, qprime_tensor_norm_lb, qprime_tensor_norm_ub
from qfpc.operational import explore, initial_closure
from qfpc.syntax import (QUBIT, UNIT, App, TBang, TSum, Var, annotate, is_finitary, max_annotation,
                         parse, parse_with_defs, size)
from qfpc.typecheck import check_program
from qfpc.verify import soundness_audit

from violations import VIOLATIONS

EPS = 1e-9
GENERATED = corpus_generate(seed=2024, count=50)


def _approximant(name):
    t = load_program(name)
    st = program_settings(program_source(name))
    if is_finitary(t):
        return t, Trunc(st.get("bang-len", max(1, max_annotation(t))), st.get("mu-depth", 8))
    k = st.get("approx", 3)
    return annotate(t, k), Trunc(st.get("bang-len", k), st.get("mu-depth", 8))


def test_ac1_coin(record_ac):
    t0 = time.perf_counter()
    t = load_program("coin")
    r = explore(initial_closure(t), budget=20)
    v = program_value(t, Trunc(1, 1))
    dt = time.perf_counter() - t0
    ok = (abs(r.lower - 0.5) <= EPS and r.steps <= 20 and r.quiesced
          and abs(v - 0.5) <= EPS and dt < 1.0)
    record_ac(1, ok, f"coin op={r.lower:.12f} in {r.steps} steps, den(L=1,D=1)={v:.12f}, {dt:.3f}s")
    assert ok


def test_ac2_soundness_audit(record_ac):
    t0 = time.perf_counter()
    worst, steps, count = 0.0, 0, 0
    for name in program_names():
        t, tr = _approximant(name)
        n, dev = soundness_audit(t, 200, Denoter(tr))
        worst, steps, count = max(worst, dev), steps + n, count + 1
    for t in GENERATED:
        n, dev = soundness_audit(t, 200, Denoter(Trunc(max(1, max_annotation(t)), 2)))
        worst, steps, count = max(worst, dev), steps + n, count + 1
    dt = time.perf_counter() - t0
    ok = worst <= EPS and dt < 300 and len(program_names()) >= 20
    record_ac(2, ok, f"{count} programs ({len(program_names())} corpus + {len(GENERATED)} generated), "
                     f"{steps} steps audited, max dev {worst:.2e}, {dt:.1f}s")
    assert ok


FINITARY = ["coin", "fair_coin", "bell", "ghz", "deutsch", "finitary_dup", "exhausted_dup",
            "dup_closure", "retry_fn", "teleport", "entangled_closure", "geom3"]


def test_ac3_finitary_adequacy(record_ac):
    worst, bad = 0.0, []
    for name in FINITARY:
        t = load_program(name)
        assert is_finitary(t)
        r = explore(initial_closure(t), budget=size(t))
        v = program_value(t, Trunc(max(1, max_annotation(t)), 4))
        worst = max(worst, abs(v - r.lower))
        if not (r.quiesced and r.leaves["frontier"] == 0 and abs(v - r.lower) <= EPS):
            bad.append(name)
    ok = not bad and len(FINITARY) >= 10
    record_ac(3, ok, f"{len(FINITARY)} finitary programs quiesce within size(t), "
                     f"max |op - den| {worst:.2e}" + (f", failing {bad}" if bad else ""))
    assert ok


def test_ac4_geometric_limit(record_ac):
    geom = load_program("geom")
    vals = [program_value(annotate(geom, k), Trunc(k, 10)) for k in range(9)]
    r8 = explore(initial_closure(annotate(geom, 8)), budget=100_000)
    mono = all(a <= b + EPS for a, b in zip(vals, vals[1:]))
    ok = mono and vals[8] >= 1 - 2 ** -8 - EPS and abs(vals[8] - r8.lower) <= EPS
    record_ac(4, ok, f"approximants nondecreasing={mono}, [[t_8]]={vals[8]:.12f}, "
                     f"op lower(t_8)={r8.lower:.12f}")
    assert ok


def test_ac5_soundness_bound(record_ac):
    worst = -np.inf
    for t in GENERATED:
        tr = Trunc(max(1, max_annotation(t)), 2)
        v = program_value(t, tr)
        r = explore(initial_closure(t), budget=10_000)
        worst = max(worst, r.lower - v)
    ok = worst <= EPS
    record_ac(5, ok, f"{len(GENERATED)} generated programs, max (op lower - den) {worst:.2e}")
    assert ok


def test_ac6_comonoid_suite(record_ac):
    t0 = time.perf_counter()
    worst = 0.0
    for A in (QUBIT, TSum(UNIT, UNIT)):
        for L in (1, 2, 3):
            tr = Trunc(L, 2)
            worst = max(worst, max(comonoid_law_errors(A, tr).values()))
            worst = max(worst, orthogonality_error(A, tr))
            worst = max(worst, orthogonality_error(TBang(A), tr))
    for m in sample_denotations(Trunc(3, 2)):
        worst = max(worst, resolution_error(m))
    dt = time.perf_counter() - t0
    ok = worst <= EPS and dt < 30
    record_ac(6, ok, f"comonoid/dereliction/orthogonality/resolution at !qubit, !(unit+unit), "
                     f"L<=3: max err {worst:.2e}, {dt:.1f}s")
    assert ok


def test_ac7_teleport(record_ac):
    _, defs = parse_with_defs(open(program_path("teleport")).read())
    tr = Trunc(2, 2)
    m = denote(App(defs["teleport"], Var("x")), {"x": QUBIT}, tr)
    d = max_distance(m, identity(QUBIT, tr))
    ok = d <= EPS
    record_ac(7, ok, f"teleport channel vs identity: Choi max-entry distance {d:.2e}")
    assert ok


def test_ac8_mass_conservation(record_ac):
    steps = []
    for t in GENERATED + [load_program(n) for n in program_names()]:
        explore(initial_closure(t), budget=300, on_step=lambda S, res: steps.append((S, res)))
    rng = np.random.default_rng(8)
    pick = rng.choice(len(steps), size=1000, replace=len(steps) < 1000)
    worst, exhausted, meas = 0.0, 0, 0
    for i in pick:
        S, res = steps[i]
        total = sum(b.weight for b in res.branches)
        if res.rule == "der-exhausted":
            exhausted += 1
            worst = max(worst, abs(total))
            continue
        if res.rule == "meas":
            meas += 1
        worst = max(worst, abs(total - S.weight))
    trace_map = add(theta0(), theta1())
    rho = np.array([[0.3, 0.2 - 0.1j], [0.2 + 0.1j, 0.6]])
    split_err = abs(apply(trace_map, rho)[0, 0] - np.trace(rho))
    ok = worst <= EPS and split_err <= EPS and meas > 0
    record_ac(8, ok, f"1000 sampled steps ({meas} meas, {exhausted} exhausted): max mass error "
                     f"{worst:.2e}; |theta0+theta1 - tr| {split_err:.2e}")
    assert ok


def test_ac9_norm_failure(record_ac):
    t0 = time.perf_counter()
    z = bell_state()
    lb, wit = qprime_tensor_norm_lb(z)
    pm, pairs = product_max(wit.W, 2, 2, grid=20)
    rng = np.random.default_rng(9)

    def rho(d=2):
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        r = g @ g.conj().T
        return r / np.trace(r).real

    plus = np.full((2, 2), 0.5)
    separable = [np.kron(np.diag([1.0, 0]), plus),
                 np.diag([0.5, 0, 0, 0.5]).astype(complex),
                 0.4 * np.kron(rho(), rho()) + 0.6 * np.kron(rho(), rho())]
    ubs = [qprime_tensor_norm_ub(s)[0] for s in separable]
    dt = time.perf_counter() - t0
    ok = lb > 1 and pm <= 1 + EPS and pairs >= 10_000 and max(ubs) <= 1 + EPS and dt < 120
    record_ac(9, ok, f"lb(Bell)={lb:.6f} (witness max on {pairs} product pairs {pm:.9f}), "
                     f"separable ub max {max(ubs):.12f}, {dt:.1f}s")
    assert ok


def test_ac10_typing_rejections(record_ac):
    wrong = []
    for name, src, cls in VIOLATIONS:
        try:
            check_program(parse(src))
            wrong.append(name)
        except cls as e:
            if type(e) is not cls:
                wrong.append(name)
        except Exception:
            wrong.append(name)
    ok = len(VIOLATIONS) == 15 and not wrong
    record_ac(10, ok, f"{len(VIOLATIONS) - len(wrong)}/{len(VIOLATIONS)} violations rejected "
                      "with the designated class" + (f", wrong: {wrong}" if wrong else ""))
    assert ok
