"""Small-step reduction of quantum closures and branch exploration.

A closure is ``<regs = rho | store | term>``. Register names and store
names contain ``#`` so they never clash with source variables. The joint
state ``rho`` is big-endian in the order of ``regs``.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .cpm import DEFAULT_TOL, Tolerance
from .errors import IllFormedClosure, Stuck
from .syntax import (BOOL as BOOL_T, INF, App, Bang, Der, Fold, Inl, Inr, Ket0, Lam, LetTensor,
                     Match, Meas, Seq, StoreRef, TBang, TensorIntro, Term,
                     TLolli, TMu, Unfold, Unit, Unitary, Var, children,
                     is_final, omega_body, pretty, size, subst_term)


@dataclass(frozen=True)
class StoreEntry:
    name: str
    body: Term
    alpha: Optional[int] = INF


@dataclass(frozen=True, eq=False)
class QuantumClosure:
    regs: Tuple[str, ...]
    state: np.ndarray
    store: Tuple[StoreEntry, ...]
    term: Term

    def __post_init__(self):
        d = 2 ** len(self.regs)
        if self.state.shape != (d, d):
            raise IllFormedClosure(
                f"state of shape {self.state.shape} for {len(self.regs)} registers")
        if len(set(self.regs)) != len(self.regs):
            raise IllFormedClosure("duplicate register names")

    @property
    def weight(self) -> float:
        return float(np.real(np.trace(self.state)))

    def lookup(self, name: str) -> StoreEntry:
        for e in self.store:
            if e.name == name:
                return e
        raise Stuck(f"store reference {name} is not bound")


def initial_closure(t: Term) -> QuantumClosure:
    return QuantumClosure((), np.ones((1, 1), dtype=complex), (), t)


# ------------------------------------------------------- evaluation contexts

# A context is a tuple of frames, outermost first. Each frame is
# (tag, node) and the hole sits in the child named by tag.
def decompose(t: Term):
    """Return ``(frames, redex)``, or ``None`` when ``t`` is a value."""
    frames = []
    while True:
        if is_final(t):
            if not frames:
                return None
            raise Stuck(f"value in redex position: {pretty(t)}")
        if isinstance(t, (Bang, Ket0)):
            return tuple(frames), t
        if isinstance(t, App):
            if not is_final(t.fn):
                frames.append(("fn", t))
                t = t.fn
            elif not is_final(t.arg):
                frames.append(("arg", t))
                t = t.arg
            else:
                return tuple(frames), t
        elif isinstance(t, Seq):
            if not is_final(t.first):
                frames.append(("first", t))
                t = t.first
            else:
                return tuple(frames), t
        elif isinstance(t, TensorIntro):
            if not is_final(t.left):
                frames.append(("left", t))
                t = t.left
            else:
                frames.append(("right", t))
                t = t.right
        elif isinstance(t, LetTensor):
            if not is_final(t.bound):
                frames.append(("bound", t))
                t = t.bound
            else:
                return tuple(frames), t
        elif isinstance(t, Match):
            if not is_final(t.scrut):
                frames.append(("scrut", t))
                t = t.scrut
            else:
                return tuple(frames), t
        else:
            raise Stuck(f"no reduction for {pretty(t)}")


def plug(frames, r: Term) -> Term:
    for tag, node in reversed(frames):
        if tag == "fn":
            r = App(r, node.arg, span=node.span)
        elif tag == "arg":
            r = App(node.fn, r, span=node.span)
        elif tag == "first":
            r = Seq(r, node.second, span=node.span)
        elif tag == "left":
            r = TensorIntro(r, node.right, span=node.span)
        elif tag == "right":
            r = TensorIntro(node.left, r, span=node.span)
        elif tag == "bound":
            r = LetTensor(node.x, node.y, r, node.body, span=node.span)
        elif tag == "scrut":
            r = Match(r, node.x, node.left, node.y, node.right, span=node.span)
    return r


# ------------------------------------------------------------ state updates

def _reg_index(S: QuantumClosure, v: Term) -> int:
    if not isinstance(v, Var) or v.name not in S.regs:
        raise Stuck(f"expected a register, found {pretty(v)}")
    return S.regs.index(v.name)


def _flatten_qubits(v: Term, n: int):
    out = []
    for _ in range(n - 1):
        if not isinstance(v, TensorIntro):
            raise Stuck(f"expected a {n}-qubit tuple, found {pretty(v)}")
        out.append(v.left)
        v = v.right
    out.append(v)
    return out


def apply_unitary(state: np.ndarray, n: int, targets, U: np.ndarray) -> np.ndarray:
    """Permute ``targets`` to the front, apply ``U (x) id``, permute back."""
    k = len(targets)
    rest = [i for i in range(n) if i not in targets]
    order = list(targets) + rest
    t = state.reshape((2,) * (2 * n))
    t = t.transpose(order + [n + i for i in order])
    t = t.reshape(2 ** k, 2 ** (n - k), 2 ** k, 2 ** (n - k))
    t = np.einsum("ai,ibjc,dj->abdc", U, t, U.conj()).reshape((2,) * (2 * n))
    inv = np.argsort(order).tolist()
    t = t.transpose(inv + [n + i for i in inv])
    return t.reshape(2 ** n, 2 ** n)


def measure_branch(state: np.ndarray, n: int, i: int, b: int) -> np.ndarray:
    """``(theta_b (x) id)`` after moving register ``i`` to the front."""
    t = state.reshape(2 ** i, 2, 2 ** (n - i - 1), 2 ** i, 2, 2 ** (n - i - 1))
    d = 2 ** (n - 1)
    return t[:, b, :, :, b, :].reshape(d, d)


def _fresh(prefix, taken):
    for k in itertools.count():
        name = f"{prefix}#{k}"
        if name not in taken:
            return name


@dataclass
class StepResult:
    rule: str
    branches: List[QuantumClosure]


def step_rule(S: QuantumClosure) -> StepResult:
    """One reduction step; two branches for ``meas``, one otherwise."""
    dec = decompose(S.term)
    if dec is None:
        raise Stuck("closure term is already a value")
    frames, r = dec

    def one(rule, term, regs=None, state=None, store=None):
        return StepResult(rule, [QuantumClosure(
            S.regs if regs is None else regs,
            S.state if state is None else state,
            S.store if store is None else store,
            plug(frames, term))])

    if isinstance(r, Bang):
        c = _fresh("c", {e.name for e in S.store})
        return one("alloc", StoreRef(c), store=S.store + (StoreEntry(c, r.body, r.alpha),))
    if isinstance(r, Ket0):
        q = _fresh("q", set(S.regs))
        state = np.kron(S.state, np.array([[1, 0], [0, 0]], dtype=complex))
        return one("new", Var(q), regs=S.regs + (q,), state=state)
    if isinstance(r, Seq):
        if not isinstance(r.first, Unit):
            raise Stuck(f"sequencing a non-unit value {pretty(r.first)}")
        return one("seq", r.second)
    if isinstance(r, LetTensor):
        if not isinstance(r.bound, TensorIntro):
            raise Stuck(f"let (*) on {pretty(r.bound)}")
        body = subst_term(r.body, r.bound.left, r.x)
        body = subst_term(body, r.bound.right, r.y)
        return one("let", body)
    if isinstance(r, Match):
        s = r.scrut
        if isinstance(s, App) and isinstance(s.fn, Inl):
            return one("match-inl", subst_term(r.left, s.arg, r.x))
        if isinstance(s, App) and isinstance(s.fn, Inr):
            return one("match-inr", subst_term(r.right, s.arg, r.y))
        raise Stuck(f"match on {pretty(s)}")
    if isinstance(r, App):
        f, v = r.fn, r.arg
        if isinstance(f, Lam):
            return one("beta", subst_term(f.body, v, f.var))
        if isinstance(f, Der):
            if not isinstance(v, StoreRef):
                raise Stuck(f"der applied to {pretty(v)}")
            e = S.lookup(v.name)
            if e.alpha is INF:
                return one("der", e.body)
            if e.alpha >= 1:
                store = tuple(StoreEntry(x.name, x.body, x.alpha - 1) if x.name == e.name else x
                              for x in S.store)
                return one("der", e.body, store=store)
            return one("der-exhausted", e.body, state=np.zeros_like(S.state))
        if isinstance(f, Unfold):
            if isinstance(v, App) and isinstance(v.fn, Fold):
                return one("unfold", v.arg)
            raise Stuck(f"unfold of {pretty(v)}")
        if isinstance(f, Unitary):
            qs = [_reg_index(S, q) for q in _flatten_qubits(v, f.arity)]
            if len(set(qs)) != len(qs):
                raise Stuck("unitary applied to a repeated register")
            state = apply_unitary(S.state, len(S.regs), qs, f.array)
            return one("unitary", v, state=state)
        if isinstance(f, Meas):
            i = _reg_index(S, v)
            n = len(S.regs)
            regs = S.regs[:i] + S.regs[i + 1:]
            out = []
            for b, inj in ((0, Inl), (1, Inr)):
                state = measure_branch(S.state, n, i, b)
                out.append(QuantumClosure(regs, state, S.store,
                                          plug(frames, App(inj(BOOL_T), Unit()))))
            return StepResult("meas", out)
    raise Stuck(f"no rule for redex {pretty(r)}")


def step(S: QuantumClosure) -> List[QuantumClosure]:
    return step_rule(S).branches


# -------------------------------------------------------------- canonical

def register_order(t: Term, regs) -> list:
    regset = set(regs)
    seen = []

    def go(u):
        if isinstance(u, Var) and u.name in regset and u.name not in seen:
            seen.append(u.name)
        for c in children(u):
            go(c)

    go(t)
    return seen + [q for q in regs if q not in seen]


def permute_state(state: np.ndarray, n: int, order) -> np.ndarray:
    """State of the registers listed by old index in ``order``."""
    if n == 0:
        return state
    t = state.reshape((2,) * (2 * n))
    t = t.transpose(list(order) + [n + i for i in order])
    return t.reshape(2 ** n, 2 ** n)


def canonicalize(S: QuantumClosure) -> QuantumClosure:
    order = register_order(S.term, S.regs)
    idx = [S.regs.index(q) for q in order]
    if idx == list(range(len(idx))):
        return S
    return QuantumClosure(tuple(order), permute_state(S.state, len(idx), idx), S.store, S.term)


def closure_size(S: QuantumClosure) -> int:
    """``size`` of the term plus what the store can still unfold into it.

    For finitary closures every step with a nonzero branch lowers this.
    """
    return size(S.term) + sum(e.alpha * (size(e.body) + 1) for e in S.store)


# -------------------------------------------------------- divergence marker

def _omega_states(T: TMu, S: QuantumClosure, t: Term) -> bool:
    w = omega_body(T.body.b)
    if w.fn.ty != T:
        return False
    lam = w.arg

    def is_loop_ref(c):
        if not isinstance(c, StoreRef):
            return False
        e = S.lookup(c.name)
        return e.alpha is INF and e.body == w

    if not isinstance(t, App):
        return False
    f, a = t.fn, t.arg
    if f == lam and is_loop_ref(a):
        return True
    if isinstance(f, App) and isinstance(f.fn, Unfold) and f.fn.ty == T:
        if f.arg == w and (a == Bang(w) or is_loop_ref(a)):
            return True
        if (isinstance(f.arg, App) and isinstance(f.arg.fn, Der) and is_loop_ref(f.arg.arg)
                and f.arg.arg == a):
            return True
    return False


def _omega_type_of(t: Term):
    """The loop's mu type if ``t`` could be one of its states."""
    while isinstance(t, App):
        if isinstance(t.fn, Unfold):
            return t.fn.ty
        if isinstance(t.fn, Lam) and isinstance(t.fn.ty, TBang) and isinstance(t.fn.ty.a, TMu):
            return t.fn.ty.a
        t = t.fn
    return None


def is_known_divergent(S: QuantumClosure) -> bool:
    """True when evaluation is focused inside the ``diverge`` loop."""
    t = S.term
    while True:
        T = _omega_type_of(t)
        if (isinstance(T, TMu) and isinstance(T.body, TLolli)
                and isinstance(T.body.a, TBang) and _omega_states(T, S, t)):
            return True
        dec = decompose(t)
        if dec is None or not dec[0]:
            return False
        tag, node = dec[0][0]
        t = getattr(node, tag)


# ------------------------------------------------------------- exploration

@dataclass
class Report:
    terminated_mass: float = 0.0
    frontier_mass: float = 0.0
    zero_mass: float = 0.0
    steps: int = 0
    max_depth: int = 0
    quiesced: bool = False
    leaves: dict = field(default_factory=lambda: {"value": 0, "zero": 0, "frontier": 0})
    trace: list = field(default_factory=list)
    frontier: list = field(default_factory=list, repr=False)

    @property
    def lower(self) -> float:
        return self.terminated_mass

    @property
    def upper(self) -> float:
        return self.terminated_mass + self.frontier_mass


def explore(S0: QuantumClosure, budget: int = 1000, prune: float = DEFAULT_TOL.eps_prune,
            record_trace: bool = False, assume_diverges: bool = False,
            keep_frontier: bool = False, on_step=None) -> Report:
    """Best-first expansion by branch weight.

    ``on_step(S, result)`` is called after every reduction step, in order.
    """
    rep = Report()
    counter = itertools.count()
    heap = [(-S0.weight, next(counter), 0, S0)]
    while heap:
        negw, _, depth, S = heap[0]
        w = -negw
        if is_final(S.term):
            heapq.heappop(heap)
            rep.terminated_mass += w
            rep.leaves["value"] += 1
            rep.max_depth = max(rep.max_depth, depth)
            continue
        if w < prune:
            heapq.heappop(heap)
            rep.frontier_mass += w
            rep.leaves["frontier"] += 1
            if keep_frontier:
                rep.frontier.append(S)
            continue
        if assume_diverges and is_known_divergent(S):
            heapq.heappop(heap)
            rep.zero_mass += w
            continue
        if rep.steps >= budget:
            break
        heapq.heappop(heap)
        res = step_rule(S)
        rep.steps += 1
        if on_step is not None:
            on_step(S, res)
        if record_trace:
            rep.trace.append({
                "rule": res.rule,
                "branch_weights": [b.weight for b in res.branches],
                "term_summary": _summary(S.term),
            })
        for B in res.branches:
            bw = B.weight
            if res.rule == "der-exhausted":
                rep.zero_mass += w
                rep.leaves["zero"] += 1
                rep.max_depth = max(rep.max_depth, depth + 1)
                continue
            if bw <= 0.0:
                rep.leaves["zero"] += 1
                rep.max_depth = max(rep.max_depth, depth + 1)
                continue
            heapq.heappush(heap, (-bw, next(counter), depth + 1, B))
    for negw, _, depth, S in heap:
        rep.frontier_mass += -negw
        rep.leaves["frontier"] += 1
        if keep_frontier:
            rep.frontier.append(S)
    rep.quiesced = rep.leaves["frontier"] == 0
    return rep


def _summary(t: Term, width: int = 80) -> str:
    s = pretty(t)
    return s if len(s) <= width else s[: width - 3] + "..."


def termination_probability(t: Term, budget: int = 1000,
                            prune: float = DEFAULT_TOL.eps_prune,
                            assume_diverges: bool = False):
    """``(lower, upper)`` bounds on the probability of reaching ``()``."""
    from .errors import IllTyped, TypeCheckError
    from .typecheck import check_program
    try:
        check_program(t)
    except TypeCheckError as e:
        raise IllTyped(str(e)) from e
    rep = explore(initial_closure(t), budget, prune, assume_diverges=assume_diverges)
    return rep.lower, rep.upper
