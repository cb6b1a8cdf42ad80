import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfpc.cpm import ChoiMap, GATES, compose, operator_norm, psi, scale, theta0
from qfpc.errors import NonMember, WitnessInvalid
from qfpc.norms import (ConeModule, _certify, bell_state, check_downward_closed, cq_module,
                        module_norm, product_max, qprime_tensor_norm_lb,
                        qprime_tensor_norm_ub, sup_spot_check)

from conftest import EPS, rand_density, rand_kraus

seeds = st.integers(0, 2**31 - 1)
L2 = cq_module(2)


def product_state(rng):
    return np.kron(rand_density(rng, 2), rand_density(rng, 2))


def test_module_norm_examples():
    assert module_norm(ChoiMap.identity(2), L2) == pytest.approx(1, abs=1e-8)
    assert module_norm(scale(0.5, ChoiMap.identity(2)), L2) == pytest.approx(0.5, abs=1e-8)
    assert module_norm(ChoiMap.zero(2, 2), L2) == 0


def test_module_norm_rejects_bad_module():
    never = ConeModule(ell=2, membership=lambda n, x: False)
    with pytest.raises(NonMember):
        module_norm(ChoiMap.identity(2), never, max_doublings=10)


@given(seeds, st.floats(0.01, 10))
def test_module_norm_homogeneous_and_bounded(seed, r):
    rng = np.random.default_rng(seed)
    x = ChoiMap.from_kraus(rand_kraus(rng, 2, 2, norm=rng.uniform(0.1, 3)))
    n = module_norm(x, L2)
    assert module_norm(scale(r, x), L2) == pytest.approx(r * n, rel=1e-8, abs=1e-8)
    assert operator_norm(x) <= L2.bound * n + 1e-8


@given(seeds)
def test_module_norm_monotone_under_cq_action(seed):
    rng = np.random.default_rng(seed)
    x = ChoiMap.from_kraus(rand_kraus(rng, 2, 2, norm=1.7))
    phi = ChoiMap.from_kraus(rand_kraus(rng, 3, 2, norm=rng.uniform(0.2, 1)))
    assert module_norm(compose(x, phi), L2) <= module_norm(x, L2) + 1e-8


def test_downward_closed_and_dual_spot_check(rng):
    for _ in range(5):
        x = ChoiMap.from_kraus(rand_kraus(rng, 2, 2, norm=rng.uniform(0.2, 1)))
        assert check_downward_closed(L2, x, rng=rng)
    state = ChoiMap.from_choi(0.7 * rand_density(rng, 2), 1, 2)
    sup, norm = sup_spot_check(state, L2, rng=rng)
    assert sup <= norm + 1e-8
    assert sup == pytest.approx(norm, abs=1e-6)


def test_ub_examples(rng):
    assert qprime_tensor_norm_ub(product_state(rng))[0] <= 1 + EPS
    sep = np.diag([0.5, 0, 0, 0.5]).astype(complex)
    assert qprime_tensor_norm_ub(sep)[0] <= 1 + EPS
    assert qprime_tensor_norm_ub(np.zeros((4, 4)))[0] == 0


def test_bell_bounds():
    z = bell_state()
    lb, wit = qprime_tensor_norm_lb(z)
    ub, _ = qprime_tensor_norm_ub(z)
    assert lb > 1.2
    assert lb <= ub + EPS
    assert wit.grid_pairs >= 10_000
    pm, _ = product_max(wit.W, 2, 2, grid=16)
    assert pm <= 1 + EPS
    assert np.trace(wit.W @ z).real == pytest.approx(lb)


def test_lb_examples(rng):
    assert qprime_tensor_norm_lb(product_state(rng), witness_search=False)[0] <= 1 + EPS
    assert qprime_tensor_norm_lb(np.zeros((4, 4)))[0] == 0


def test_invalid_witness_rejected(rng):
    W = np.diag([1.0, -1.0, 0, 0])
    with pytest.raises(WitnessInvalid):
        _certify(bell_state(), W, 2, 2, rng)


@settings(max_examples=4)
@given(seeds)
def test_lb_below_ub(seed):
    rng = np.random.default_rng(seed)
    z = rand_density(rng, 4, rank=2)
    lb, _ = qprime_tensor_norm_lb(z, witness_search=False, seed=seed)
    ub, _ = qprime_tensor_norm_ub(z, steps=50, seed=seed)
    assert lb <= ub + 1e-8


@settings(max_examples=30)
@given(seeds, st.integers(1, 4))
def test_separable_mixtures_certify_at_one(seed, k):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(k))
    z = sum(pi * product_state(rng) for pi in p)
    ub, cov = qprime_tensor_norm_ub(z, steps=0)
    assert ub <= 1 + EPS
    assert np.linalg.eigvalsh(cov.lam * cov.operator() - z)[0] > -1e-9


def test_werner_threshold():
    b = bell_state()
    B = np.outer(b, b.conj()) if b.ndim == 1 else b
    for p, sep in [(0.2, True), (1 / 3, True), (0.5, False)]:
        ub, _ = qprime_tensor_norm_ub(p * B + (1 - p) * np.eye(4) / 4, steps=0)
        assert (ub <= 1 + EPS) == sep


@settings(max_examples=10)
@given(seeds)
def test_lb_at_least_trace(seed):
    rng = np.random.default_rng(seed)
    z = 0.7 * rand_density(rng, 4)
    lb, wit = qprime_tensor_norm_lb(z, witness_search=False)
    assert lb >= 0.7 - EPS


def test_product_max_near_degenerate_rank_one():
    # Schmidt coefficients 0.70721 and 0.70700: alternation alone crawls here
    v = np.array([0.7069, 0.0072 + 0.0134j, 0.0146 + 0.0037j, -0.177 - 0.6845j])
    v = v / np.linalg.norm(v)
    s = np.linalg.svd(v.reshape(2, 2), compute_uv=False)
    pm, _ = product_max(np.outer(v, v.conj()), 2, 2, rng=5)
    assert pm == pytest.approx(s[0] ** 2, abs=1e-12)
