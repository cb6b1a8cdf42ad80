"""Norms on cones of CP maps.

Two families live here. Module norms ``inf{r | x in r.L_n}`` for a cone
module ``L`` given by a membership test, computed by bisection. And the
entanglement-free tensor norm of a bipartite state, for which an upper bound
comes from explicit product covers ``z <= sum_i x_i (x) y_i`` and a lower
bound from a positive witness ``W`` whose expectation on product states is
at most one.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .cpm import (DEFAULT_TOL, ChoiMap, compose, is_cp, is_superoperator,
                  operator_norm, scale, trace_norm)
from .errors import NonMember, NotPositive, WitnessInvalid


# ============================================================ module norms

@dataclass
class ConeModule:
    """A downward-closed cone family ``L_n`` inside ``CPM(n, ell)``.

    ``bound`` and ``unit`` witness boundedness (every member has operator
    norm at most ``bound``) and that ``unit * id`` is a member.
    ``support`` optionally returns ``sup_{y in L_1} tr(F y)`` for an effect
    ``F``; it is only needed for the dual spot check.
    """
    ell: int
    membership: Callable[[int, ChoiMap], bool]
    bound: float = 1.0
    unit: float = 1.0
    support: Optional[Callable[[np.ndarray], float]] = None

    def contains(self, x: ChoiMap) -> bool:
        return self.membership(x.dim_in, x)


def cq_module(ell: int) -> ConeModule:
    """Trace-non-increasing maps into ``ell``."""
    return ConeModule(
        ell=ell,
        membership=lambda n, x: is_superoperator(x),
        bound=1.0,
        unit=1.0,
        support=lambda F: float(np.linalg.eigvalsh((F + F.conj().T) / 2)[-1]),
    )


def module_norm(x: ChoiMap, L: ConeModule, tol: float = 1e-10, max_doublings: int = 80) -> float:
    """``inf{r >= 0 | x in r L_n}`` by bisection."""
    if x.dim_out != L.ell:
        raise ValueError(f"codomain {x.dim_out} differs from module object {L.ell}")
    if not np.any(np.abs(x.choi) > 0):
        return 0.0
    if not is_cp(x):
        raise NotPositive("module norms are defined on completely positive maps")
    hi = max(operator_norm(x, check=False) / max(L.unit, 1e-300), tol)
    for _ in range(max_doublings):
        if L.contains(scale(1.0 / hi, x)):
            break
        hi *= 2.0
    else:
        raise NonMember("map is in no tested multiple of the module")
    lo = 0.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if L.contains(scale(1.0 / mid, x)):
            hi = mid
        else:
            lo = mid
    return hi


def check_downward_closed(L: ConeModule, x: ChoiMap, samples: int = 5, rng=None) -> bool:
    """Spot check: members stay members under scaling by ``[0, 1]``."""
    rng = np.random.default_rng(rng)
    if not L.contains(x):
        return True
    return all(L.contains(scale(float(s), x)) for s in rng.uniform(0, 1, samples))


def sup_spot_check(x: ChoiMap, L: ConeModule, samples: int = 200, rng=None) -> Tuple[float, float]:
    """Dual characterisation at ``m = k = 1`` for a state ``x``.

    Returns ``(sup over sampled effects, module_norm(x))``. With effects
    ``F`` scaled so that ``sup_{y in L_1} tr(F y) = 1`` the supremum of
    ``tr(F x)`` can only approach the module norm from below.
    """
    if x.dim_in != 1 or L.support is None:
        raise ValueError("spot check needs a state and a module with a support function")
    rng = np.random.default_rng(rng)
    rho = x.choi
    d = L.ell
    effects = [np.eye(d)]
    for _ in range(samples):
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        effects.append(g @ g.conj().T)
    best = 0.0
    for F in effects:
        s = L.support(F)
        if s > 0:
            best = max(best, float(np.real(np.trace(F @ rho))) / s)
    return best, module_norm(x, L)


# ====================================================== tensor norm bounds

def _psd(z: np.ndarray):
    z = np.asarray(z, dtype=complex)
    z = (z + z.conj().T) / 2
    if np.linalg.eigvalsh(z)[0] < -DEFAULT_TOL.eps_num:
        raise NotPositive("state is not positive semidefinite")
    return z


def _unit(v):
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def schmidt(v: np.ndarray, n: int, m: int):
    """``v = sum_j s_j a_j (x) b_j``."""
    U, s, Vh = np.linalg.svd(v.reshape(n, m))
    return [(s[j], U[:, j], Vh[j, :]) for j in range(len(s)) if s[j] > 1e-15]


@dataclass
class Cover:
    """``sum_i w_i |a_i b_i><a_i b_i|`` scaled by ``lam`` dominates ``z``."""
    weights: np.ndarray
    left: List[np.ndarray]
    right: List[np.ndarray]
    lam: float = float("nan")

    @property
    def value(self) -> float:
        return float(self.lam * np.sum(self.weights))

    def operator(self) -> np.ndarray:
        return sum(w * np.outer(np.kron(a, b), np.kron(a, b).conj())
                   for w, a, b in zip(self.weights, self.left, self.right))


def cover_scale(z: np.ndarray, sigma: np.ndarray, eps: float = 1e-12) -> float:
    """Least ``lam`` with ``z <= lam * sigma``; ``inf`` if ``z`` leaks
    outside the support of ``sigma``."""
    w, V = np.linalg.eigh((sigma + sigma.conj().T) / 2)
    keep = w > eps * max(1.0, w[-1])
    Vk, wk = V[:, keep], w[keep]
    zk = Vk.conj().T @ z @ Vk
    leak = z - Vk @ zk @ Vk.conj().T
    if np.abs(leak).max() > 1e-9 * max(1.0, np.abs(z).max()):
        return float("inf")
    inv = 1.0 / np.sqrt(wk)
    M = (inv[:, None] * zk) * inv[None, :]
    return max(0.0, float(np.linalg.eigvalsh((M + M.conj().T) / 2)[-1]))


def _evaluate(z, cov: Cover) -> Cover:
    cov.lam = cover_scale(z, cov.operator())
    return cov


def _eig_cover(z, n, m) -> Cover:
    """Each eigenvector ``v`` is dominated by its Schmidt terms:
    ``|v><v| <= (sum s_j) sum s_j |a_j b_j><a_j b_j|``."""
    lam, V = np.linalg.eigh(z)
    w, L, R = [], [], []
    for val, v in zip(lam, V.T):
        if val <= 1e-14:
            continue
        terms = schmidt(v, n, m)
        tot = sum(s for s, _, _ in terms)
        for s, a, b in terms:
            w.append(val * tot * s)
            L.append(a)
            R.append(b)
    return Cover(np.array(w), L, R)


def _pt(z, n, m):
    return z.reshape(n, m, n, m).transpose(0, 3, 2, 1).reshape(n * m, n * m)


def _pt_cover(z, n, m) -> Cover:
    """Product terms from the positive part of the partial transpose."""
    zg = _pt(z, n, m)
    lam, V = np.linalg.eigh((zg + zg.conj().T) / 2)
    w, L, R = [], [], []
    for val, v in zip(lam, V.T):
        if val <= 1e-14:
            continue
        for s, a, b in schmidt(v, n, m):
            w.append(val * s * s)
            L.append(a)
            R.append(b.conj())
    return Cover(np.array(w), L, R)


def _marginal_cover(z, n, m) -> Cover:
    """``z <= lam * rho_A (x) rho_B`` written in eigenbases of the marginals."""
    t = z.reshape(n, m, n, m)
    ra = np.einsum("ijkj->ik", t)
    rb = np.einsum("ijil->jl", t)
    la, Va = np.linalg.eigh((ra + ra.conj().T) / 2)
    lb, Vb = np.linalg.eigh((rb + rb.conj().T) / 2)
    w, L, R = [], [], []
    for i, j in itertools.product(range(n), range(m)):
        if la[i] > 1e-14 and lb[j] > 1e-14:
            w.append(la[i] * lb[j])
            L.append(Va[:, i])
            R.append(Vb[:, j])
    tr = float(np.real(np.trace(z)))
    return Cover(np.array(w) / max(tr, 1e-300), L, R)


def _identity_cover(z, n, m) -> Cover:
    w, L, R = [], [], []
    for i, j in itertools.product(range(n), range(m)):
        w.append(1.0)
        L.append(np.eye(n)[:, i].astype(complex))
        R.append(np.eye(m)[:, j].astype(complex))
    return Cover(np.array(w), L, R)


def _takagi(A: np.ndarray):
    """``A = U diag(s) U^T`` for complex symmetric ``A``, ``s`` descending."""
    n = A.shape[0]
    M = np.block([[A.real, A.imag], [A.imag, -A.real]])
    w, V = np.linalg.eigh(M)
    idx = np.argsort(w)[::-1][:n]
    return np.maximum(w[idx], 0.0), V[:n, idx] + 1j * V[n:, idx]


def _closing_phases(s: np.ndarray) -> Optional[np.ndarray]:
    """Angles ``phi`` with ``sum_j s_j exp(i phi_j) = 0`` for four sorted
    lengths, or ``None`` when the largest exceeds the rest."""
    s1, s2, s3, s4 = s
    if s1 > s2 + s3 + s4 + 1e-12:
        return None

    def rel(a, b, r):
        # half-angle form; arccos loses half the digits near the ends
        if a * b <= 0:
            return 0.0
        c = max((r - a + b) * (r + a - b), 0.0)
        s = max((a + b - r) * (a + b + r), 0.0)
        return float(2 * np.arctan2(np.sqrt(s), np.sqrt(c)))

    r = max(s3 - s4, s1 - s2, 0.0)
    p2 = rel(s1, s2, r)
    P = s1 + s2 * np.exp(1j * p2)
    d = rel(s3, s4, r)
    Q = s3 + s4 * np.exp(1j * d)
    p3 = np.angle(-P) - np.angle(Q) if abs(Q) > 0 else 0.0
    return np.array([0.0, p2, p3, p3 + d])


_YY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))
_HAD4 = 0.5 * np.array([[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]])


def _wootters_cover(z, n, m) -> Cover:
    """Two-qubit states of zero concurrence split exactly into pure product
    states; the resulting cover has scale one. Empty otherwise."""
    if (n, m) != (2, 2):
        return Cover(np.zeros(0), [], [])
    lam, E = np.linalg.eigh(z)
    Vs = E * np.sqrt(np.maximum(lam, 0.0))[None, :]
    s, U = _takagi(Vs.T @ _YY @ Vs)
    phi = _closing_phases(s)
    if phi is None:
        return Cover(np.zeros(0), [], [])
    X = Vs @ U.conj() * np.exp(0.5j * phi)[None, :]
    w, L, R = [], [], []
    for k in range(4):
        v = X @ _HAD4[k]
        nv = float(np.vdot(v, v).real)
        if nv <= 1e-15:
            continue
        (s0, a, b), *_ = schmidt(v / np.sqrt(nv), n, m)
        w.append(nv)
        L.append(a)
        R.append(b)
    return Cover(np.array(w), L, R)


def _pack(cov: Cover) -> np.ndarray:
    parts = [np.log(np.maximum(cov.weights, 1e-300))]
    for a, b in zip(cov.left, cov.right):
        parts += [a.real, a.imag, b.real, b.imag]
    return np.concatenate(parts)


def _unpack(x, k, n, m) -> Cover:
    w = np.exp(x[:k])
    off = k
    L, R = [], []
    for _ in range(k):
        a = x[off:off + n] + 1j * x[off + n:off + 2 * n]
        off += 2 * n
        b = x[off:off + m] + 1j * x[off + m:off + 2 * m]
        off += 2 * m
        L.append(_unit(a))
        R.append(_unit(b))
    return Cover(w, L, R)


def _local_search(z, cov: Cover, n, m, steps: int) -> Cover:
    k = len(cov.weights)
    if k == 0 or steps <= 0:
        return cov

    def cost(x):
        c = _unpack(x, k, n, m)
        lam = cover_scale(z, c.operator())
        return lam * np.sum(c.weights) if np.isfinite(lam) else 1e6

    res = minimize(cost, _pack(cov), method="Nelder-Mead",
                   options={"maxiter": steps, "xatol": 1e-10, "fatol": 1e-12})
    cand = _evaluate(z, _unpack(res.x, k, n, m))
    return cand if cand.value < cov.value else cov


def qprime_tensor_norm_ub(z, dims: Tuple[int, int] = (2, 2), steps: int = 200,
                          seed: int = 0, extra: Sequence[Cover] = ()) -> Tuple[float, Cover]:
    """Upper bound on the entanglement-free tensor norm of ``z``.

    Every candidate cover gives a valid bound ``lam * sum_i w_i``; seeds are
    a two-qubit product decomposition, the eigenvector overcover, the
    partial-transpose cover, the product of marginals and the computational
    basis, followed by local search from the best one. For two qubits of zero concurrence the first seed is an
    exact pure product decomposition, so separable states certify at one.
    """
    z = _psd(z)
    n, m = dims
    if not np.any(np.abs(z) > 0):
        return 0.0, Cover(np.zeros(0), [], [], 0.0)
    seeds = [_wootters_cover(z, n, m), _eig_cover(z, n, m), _pt_cover(z, n, m), _marginal_cover(z, n, m),
             _identity_cover(z, n, m)] + list(extra)
    covers = [_evaluate(z, c) for c in seeds if len(c.weights)]
    covers = [c for c in covers if np.isfinite(c.value)]
    best = min(covers, key=lambda c: c.value)
    rng = np.random.default_rng(seed)
    if steps > 0 and len(best.weights) <= 8:
        best = _local_search(z, best, n, m, steps)
        jitter = Cover(best.weights * rng.uniform(0.9, 1.1, len(best.weights)),
                       [_unit(a + 0.05 * rng.normal(size=n)) for a in best.left],
                       [_unit(b + 0.05 * rng.normal(size=m)) for b in best.right])
        best = min([best, _local_search(z, _evaluate(z, jitter), n, m, steps)], key=lambda c: c.value)
    return best.value, best


# lower bound ----------------------------------------------------------------

def _bloch_grid(res: int) -> List[np.ndarray]:
    out = []
    for th in np.linspace(0, np.pi, res):
        for ph in np.linspace(0, 2 * np.pi, 2 * res, endpoint=False):
            out.append(np.array([np.cos(th / 2), np.exp(1j * ph) * np.sin(th / 2)]))
            if th in (0.0, np.pi):
                break
    return out


def _random_states(d: int, k: int, rng) -> List[np.ndarray]:
    g = rng.normal(size=(k, d)) + 1j * rng.normal(size=(k, d))
    return [_unit(v) for v in g]


def product_max(W: np.ndarray, n: int, m: int, grid: int = 12, restarts: int = 20,
                rng=None) -> Tuple[float, int]:
    """``max <xy|W|xy>`` over unit product vectors.

    Brute force over a grid of product pairs (Bloch grids for qubits,
    random states otherwise) followed by alternating refinement: with one
    factor fixed the optimum over the other is a top eigenvector.
    Returns ``(value, number of grid pairs)``.
    """
    rng = np.random.default_rng(rng)
    xs = _bloch_grid(grid) if n == 2 else _random_states(n, 12 * grid, rng)
    ys = _bloch_grid(grid) if m == 2 else _random_states(m, 12 * grid, rng)
    Wt = W.reshape(n, m, n, m)
    X = np.array(xs)
    Y = np.array(ys)
    vals = np.real(np.einsum("pi,qj,ijkl,pk,ql->pq", X.conj(), Y.conj(), Wt, X, Y, optimize=True))
    best = float(vals.max())
    order = np.dstack(np.unravel_index(np.argsort(-vals, axis=None), vals.shape))[0]
    starts = [(xs[p], ys[q]) for p, q in order[:restarts]]
    starts += list(zip(_random_states(n, restarts, rng), _random_states(m, restarts, rng)))
    best_x = starts[0][0]
    for x, y in starts:
        for _ in range(200):
            Ax = np.einsum("j,ijkl,l->ik", y.conj(), Wt, y)
            x = np.linalg.eigh((Ax + Ax.conj().T) / 2)[1][:, -1]
            By = np.einsum("i,ijkl,k->jl", x.conj(), Wt, x)
            ev, V = np.linalg.eigh((By + By.conj().T) / 2)
            y_new = V[:, -1]
            if abs(ev[-1] - best) < 1e-15 and np.allclose(abs(np.vdot(y_new, y)), 1):
                y = y_new
                break
            y = y_new
            if ev[-1] > best:
                best, best_x = float(ev[-1]), x
    if n == 2 and best_x is not None:
        best = max(best, _polish_qubit(Wt, best_x))
    lam, V = np.linalg.eigh((W + W.conj().T) / 2)
    if lam[-1] > 0 and lam[-2] <= 1e-14 * lam[-1]:
        # rank one: the maximum is the top Schmidt coefficient squared, exactly
        s = np.linalg.svd(V[:, -1].reshape(n, m), compute_uv=False)
        best = max(best, float(lam[-1] * s[0] ** 2))
    return best, len(xs) * len(ys)


def _polish_qubit(Wt, x) -> float:
    """Maximise ``lambda_max(<x|W|x>)`` over the Bloch sphere of ``x``;
    alternation crawls when the optimum is nearly degenerate."""
    def f(ang):
        v = np.array([np.cos(ang[0] / 2), np.exp(1j * ang[1]) * np.sin(ang[0] / 2)])
        Bm = np.einsum("i,ijkl,k->jl", v.conj(), Wt, v)
        return -float(np.linalg.eigvalsh((Bm + Bm.conj().T) / 2)[-1])

    x = x * np.exp(-1j * np.angle(x[0])) if abs(x[0]) > 0 else x
    a0 = np.array([2 * np.arccos(np.clip(abs(x[0]), 0, 1)), np.angle(x[1])])
    res = minimize(f, a0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 400})
    return -float(res.fun)


@dataclass
class Witness:
    W: np.ndarray
    product_max: float
    grid_pairs: int
    value: float


def _certify(z, W, n, m, rng) -> Witness:
    W = (W + W.conj().T) / 2
    if np.linalg.eigvalsh(W)[0] < -1e-12:
        raise WitnessInvalid("witness must be positive semidefinite")
    pm, pairs = product_max(W, n, m, rng=rng)
    if pm <= 0:
        raise WitnessInvalid("witness vanishes on product states")
    Wn = W / pm
    check, _ = product_max(Wn, n, m, grid=8, rng=rng)
    if check > 1 + DEFAULT_TOL.eps_num:
        raise WitnessInvalid(f"normalised witness reaches {check} on a product state")
    return Witness(Wn, pm, pairs, float(np.real(np.trace(Wn @ z))))


def qprime_tensor_norm_lb(z, dims: Tuple[int, int] = (2, 2), witness_search: bool = True,
                          seed: int = 0) -> Tuple[float, Optional[Witness]]:
    """Certified lower bound ``tr(W z)`` with ``W >= 0`` and
    ``<xy|W|xy> <= 1`` on product states.

    For any cover ``z <= sum_i x_i (x) y_i`` positivity of ``W`` gives
    ``tr(W z) <= sum_i tr(W (x_i (x) y_i)) <= sum_i tr x_i tr y_i``.
    Candidates are the identity (giving the trace), projectors onto the
    eigenvectors of ``z`` and ``z`` itself, optionally improved by searching
    over rank-one witnesses.
    """
    z = _psd(z)
    n, m = dims
    if not np.any(np.abs(z) > 0):
        return 0.0, None
    rng = np.random.default_rng(seed)
    lam, V = np.linalg.eigh(z)
    cands = [np.eye(n * m, dtype=complex), z] + [np.outer(v, v.conj()) for val, v in zip(lam, V.T) if val > 1e-14]
    best: Optional[Witness] = None
    for W in cands:
        w = _certify(z, W, n, m, rng)
        if best is None or w.value > best.value:
            best = w
    if witness_search:
        v0 = _unit(V[:, -1])

        def neg(x):
            v = _unit(x[:n * m] + 1j * x[n * m:])
            P = np.outer(v, v.conj())
            pm, _ = product_max(P, n, m, grid=4, restarts=3, rng=0)
            return -float(np.real(np.trace(P @ z))) / pm

        res = minimize(neg, np.concatenate([v0.real, v0.imag]), method="Nelder-Mead",
                       options={"maxiter": 300})
        v = _unit(res.x[:n * m] + 1j * res.x[n * m:])
        w = _certify(z, np.outer(v, v.conj()), n, m, rng)
        if w.value > best.value:
            best = w
    return best.value, best


def bell_state() -> np.ndarray:
    v = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    return np.outer(v, v.conj())


def norm_bounds(z, dims=(2, 2), steps: int = 200, seed: int = 0) -> dict:
    lb, wit = qprime_tensor_norm_lb(z, dims, seed=seed)
    ub, cov = qprime_tensor_norm_ub(z, dims, steps=steps, seed=seed)
    return {
        "lb": lb, "ub": ub, "gap": ub - lb,
        "trace": float(np.real(np.trace(z))),
        "trace_norm": trace_norm(z),
        "grid_pairs": None if wit is None else wit.grid_pairs,
        "cover_terms": len(cov.weights),
    }
