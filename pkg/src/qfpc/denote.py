"""Interpretation of typed terms as sparse matrices of CP maps.

``row(t, gamma)`` computes the column of the denotation of ``t`` at one
context basis element: ``gamma`` pairs every free name of ``t`` with a
basis element, sorted by name, and the result maps each output basis
element ``b`` to ``<b| [[t]] |gamma>`` as a :class:`~qfpc.tensors.Ten` with
one output leg ``'@'`` and one input leg per free name.

Entries are kept canonical (``E_b o entry = entry``), so composition is a
plain sum over the middle index. Lambdas that are not applied directly
enumerate their parameter over a finite domain: the full truncated basis
when it is small, otherwise the set of basis elements actually observed as
arguments. The latter is iterated to a fixpoint.
"""
from __future__ import annotations

import itertools
import math
from typing import Dict, Iterable, Optional

import numpy as np

from . import basis as B
from .basis import (EMPTY, STAR1, STAR2, BasisTooLarge, Trunc, conforms,
                    delta_entry, dim, enumerate_basis, fix_count, idempotent,
                    intern, key, seq_items, seq_splits, sort_points, struct)
from .cpm import kraus_to_superop
from .errors import IllTyped, ResourceLimit, TruncationTooSmall, TypeCheckError
from .syntax import (INF, App, Bang, Der, Fold, Inl, Inr, Ket0, Lam, LetTensor,
                     Match, Meas, Seq, StoreRef, TBang, TensorIntro, Term,
                     TLolli, TSum, TUnit, Type, Unfold, Unit, Unitary, Var, fv,
                     unfold_mu)
from .tensors import Ten, contract

CONST = (Inl, Inr, Der, Fold, Unfold, Unitary, Meas)

_THETA0 = kraus_to_superop([np.array([[1.0, 0.0]])]).astype(complex)
_THETA1 = kraus_to_superop([np.array([[0.0, 1.0]])]).astype(complex)
_PHI0 = np.array([[1, 0], [0, 0]], dtype=complex)


def _acc(out: dict, b: int, ten: Ten):
    prev = out.get(b)
    out[b] = ten if prev is None else prev + ten


def _qubit_point(n: int) -> int:
    p = STAR2
    for _ in range(n - 1):
        p = B.TensorB(STAR2, p)
    return p


def _sorted_choices(rows, lo=None):
    """Tuples ``(a_1, ..., a_k)`` with ``a_i`` in ``rows[i]``, non-decreasing."""
    if not rows:
        yield ()
        return
    first, rest = rows[0], rows[1:]
    for a in sort_points(first):
        if lo is not None and key(a) < key(lo):
            continue
        for tail in _sorted_choices(rest, a):
            yield (a,) + tail


class Denoter:
    """Row evaluator with memoisation shared across calls.

    Parameters
    ----------
    trunc : Trunc
        Sequence length and recursion depth bounds.
    enum_cap : int
        Types with at most this many truncated basis elements are
        enumerated in full when used as a lambda domain.
    max_dim : int
        Largest underlying dimension of a basis element the evaluator will
        materialise; beyond it :class:`ResourceLimit` is raised.
    """

    def __init__(self, trunc: Trunc = Trunc(), enum_cap: int = 64, strict: bool = False,
                 max_dim: int = 64):
        self.tr = trunc
        self.enum_cap = enum_cap
        self.max_dim = max_dim
        self.strict = strict
        self.memo: Dict = {}
        self.cand: set = set()
        self.cand_types: set = set()
        self.dirty = False
        self.hits: set = set()
        self._domain_full: Dict = {}
        self._delta: Dict = {}
        self._ident: Dict = {}
        self.iterations = 0
        self._taint = [False]

    # ------------------------------------------------------------ domains
    def domain(self, a: Type):
        full = self._domain_full.get(a)
        if full is None and a not in self.cand_types:
            try:
                full = enumerate_basis(a, self.tr, cap=self.enum_cap)
                self._domain_full[a] = full
            except BasisTooLarge:
                self.cand_types.add(a)
        if full is not None:
            return full
        self._taint[-1] = True
        return sort_points(p for p in self.cand if conforms(p, a))

    def observe(self, points: Iterable[int]):
        for p in points:
            if p not in self.cand:
                self.cand.add(p)
                if any(conforms(p, a) for a in self.cand_types):
                    self.dirty = True

    def fixpoint(self, fn):
        """Run ``fn`` until the observed argument sets stop growing."""
        while True:
            self.iterations += 1
            self.dirty = False
            r = fn()
            if not self.dirty:
                return r
            self.memo = {k: v for k, v in self.memo.items() if not v[1]}

    # ---------------------------------------------------------- helpers
    def _hit(self, what: str):
        self.hits.add(what)
        if self.strict:
            raise TruncationTooSmall(what)

    def _check_dim(self, p: int):
        if dim(p) > self.max_dim:
            raise ResourceLimit(f"basis element {B.show(p)} has dimension {dim(p)} > {self.max_dim}; "
                                "lower --bang-len or the bang annotations")

    def ident_ten(self, name: str, p: int) -> Ten:
        arr = self._ident.get(p)
        if arr is None:
            self._check_dim(p)
            d = dim(p)
            arr = Ten.from_superop(idempotent(p), ("@", d), [("x", d)]).arr
            self._ident[p] = arr
        d = dim(p)
        return Ten(arr, [("@", d, "o"), (name, d, "i")])

    def delta_ten(self, name: str, p: int, parts, outs) -> Ten:
        k = (p, tuple(parts))
        base = self._delta.get(k)
        if base is None:
            self._check_dim(p)
            items = seq_items(p)
            S = delta_entry(items, parts)
            D = dim(p)
            t = Ten.from_superop(S, ("$d", D), [("$in", D)])
            t = t.split("$d", [(f"$p{j}", dim(intern(("!", tuple(pt))))) for j, pt in enumerate(parts)])
            base = t
            self._delta[k] = base
        mapping = {f"$p{j}": n for j, (n, _) in enumerate(outs)}
        mapping["$in"] = name
        return base.rename(mapping)

    def splits(self, gamma, groups):
        """Distribute context entries over children.

        Yields ``(child_gammas, renames, coeffs, weak)``: names shared by
        several children are renamed ``name%j`` in child ``j`` and wired to
        ``name`` through contraction maps in ``coeffs``; ``weak`` lists
        names used by no child (their element must be the empty sequence).
        """
        options = []
        for name, p in gamma:
            owners = [j for j, g in enumerate(groups) if name in g]
            if not owners:
                if p != EMPTY:
                    return
                options.append([("weak", name)])
            elif len(owners) == 1:
                options.append([("own", owners[0], name, p)])
            else:
                options.append([("share", owners, name, p, parts)
                                for parts in seq_splits(seq_items(p), len(owners))])
        for combo in itertools.product(*options):
            child = [[] for _ in groups]
            ren = [{} for _ in groups]
            coeffs = []
            weak = []
            for o in combo:
                if o[0] == "weak":
                    weak.append(o[1])
                elif o[0] == "own":
                    child[o[1]].append((o[2], o[3]))
                else:
                    _, owners, name, p, parts = o
                    outs = []
                    for j, part in zip(owners, parts):
                        q = intern(("!", part))
                        child[j].append((name, q))
                        ren[j][name] = f"{name}%{j}"
                        outs.append((f"{name}%{j}", dim(q)))
                    coeffs.append((name, p, parts, outs))
            yield [tuple(c) for c in child], ren, coeffs, weak

    def finish(self, ten: Ten, coeffs, weak) -> Ten:
        for spec in coeffs:
            ten = contract(ten, self.delta_ten(*spec))
        for n in weak:
            ten = ten.add_unit_leg(n)
        return ten

    @staticmethod
    def bind(gamma, body: Term, binders):
        """Context for ``body``: drop unused names (must be empty sequences)
        and add ``binders``. Returns ``(gamma', weak)`` or ``None``."""
        f = fv(body)
        names = {n for n, _ in binders}
        g = []
        weak = []
        for n, p in gamma:
            if n in f and n not in names:
                g.append((n, p))
            elif p != EMPTY:
                return None
            else:
                weak.append(n)
        for n, p in binders:
            if n in f:
                g.append((n, p))
            elif p != EMPTY:
                return None
        g.sort(key=lambda e: e[0])
        return tuple(g), weak

    # -------------------------------------------------------------- rows
    def row(self, t: Term, gamma) -> Dict[int, Ten]:
        k = (t, gamma)
        hit = self.memo.get(k)
        if hit is not None:
            r, tainted = hit
            if tainted:
                self._taint[-1] = True
            return r
        self._taint.append(False)
        try:
            r = self._row(t, gamma)
        finally:
            tainted = self._taint.pop()
        self.memo[k] = (r, tainted)
        if tainted:
            self._taint[-1] = True
        return r

    def tainted(self, t: Term, gamma) -> bool:
        """Whether a memoised row read candidate-based domains."""
        return self.memo[(t, gamma)][1]

    def row_w(self, t: Term, gamma) -> Dict[int, Ten]:
        """Row at a context that may carry unused names."""
        res = self.bind(gamma, t, ())
        if res is None:
            return {}
        g, weak = res
        r = self.row(t, g)
        if not weak:
            return r
        out = {}
        for b, ten in r.items():
            for n in weak:
                ten = ten.add_unit_leg(n)
            out[b] = ten
        return out

    def _row(self, t: Term, gamma) -> Dict[int, Ten]:
        if isinstance(t, (Var, StoreRef)):
            (n, p), = gamma
            return {p: self.ident_ten(n, p)}
        if isinstance(t, Unit):
            return {STAR1: Ten.scalar()}
        if isinstance(t, Ket0):
            return {STAR2: Ten(_PHI0, [("@", 2, "o")])}
        if isinstance(t, Lam):
            return self.lam_rows(t, gamma)
        if isinstance(t, CONST):
            return self.const_rows(t)
        if isinstance(t, App):
            if isinstance(t.fn, Lam):
                return self.beta_rows(t, gamma)
            if isinstance(t.fn, CONST):
                return self.const_app_rows(t, gamma)
            return self.app_rows(t, gamma)
        if isinstance(t, Seq):
            return self.seq_rows(t, gamma)
        if isinstance(t, TensorIntro):
            return self.tensor_rows(t, gamma)
        if isinstance(t, LetTensor):
            return self.let_rows(t, gamma)
        if isinstance(t, Match):
            return self.match_rows(t, gamma)
        if isinstance(t, Bang):
            return self.bang_rows(t, gamma)
        raise TypeError(f"cannot interpret {t!r}")

    # constants ---------------------------------------------------------
    def const_col(self, c: Term, a: int):
        """``[(b, natural matrix of <b|c|a>)]``; ``None`` marks identity."""
        s = struct(a)
        if isinstance(c, Inl):
            return [(B.InlB(a), None)]
        if isinstance(c, Inr):
            return [(B.InrB(a), None)]
        if isinstance(c, Fold):
            fa = B.FoldB(a)
            if B.depth(fa) > self.tr.mu_depth:
                self._hit("mu_depth")
                return []
            return [(fa, None)]
        if isinstance(c, Unfold):
            return [(s[1], None)] if s[0] == "fold" else []
        if isinstance(c, Der):
            return [(s[1][0], None)] if s[0] == "!" and len(s[1]) == 1 else []
        if isinstance(c, Unitary):
            U = c.array
            if a != _qubit_point(c.arity):
                return []
            return [(a, np.kron(U, U.conj()))]
        if isinstance(c, Meas):
            if a != STAR2:
                return []
            return [(B.InlB(STAR1), _THETA0), (B.InrB(STAR1), _THETA1)]
        raise TypeError(c)

    def const_domain(self, c: Term) -> Type:
        from .typecheck import constant_type
        return constant_type(c).a

    def const_rows(self, c: Term):
        out = {}
        for a in self.domain(self.const_domain(c)):
            da = dim(a)
            for b, S in self.const_col(c, a):
                db = dim(b)
                if S is None:
                    S = idempotent(a)
                ten = Ten.from_superop(S, ("@", db), [("$a", da)])
                ten = ten.flip("$a", "o").merge(["$a", "@"], "@")
                _acc(out, B.LolliB(a, b), ten)
        return out

    def const_app_rows(self, t: App, gamma):
        out = {}
        c = t.fn
        for a, tu in self.row(t.arg, gamma).items():
            for b, S in self.const_col(c, a):
                if S is None:
                    _acc(out, b, tu)
                else:
                    cten = Ten.from_superop(S, ("@", dim(b)), [("$a", dim(a))])
                    _acc(out, b, contract(cten, tu.rename({"@": "$a"}, "o")))
        return out

    # lambda / application ------------------------------------------------
    def lam_rows(self, t: Lam, gamma):
        out = {}
        x, body = t.var, t.body
        used = x in fv(body)
        for a in self.domain(t.ty):
            if used:
                g2 = tuple(sorted(gamma + ((x, a),), key=lambda e: e[0]))
            elif a != EMPTY:
                continue
            else:
                g2 = gamma
            for b, tb in self.row(body, g2).items():
                if used:
                    tb = tb.rename({x: "$x"}, "i")
                else:
                    tb = tb.add_unit_leg("$x")
                tb = tb.flip("$x", "o").merge(["$x", "@"], "@")
                _acc(out, B.LolliB(a, b), tb)
        return out

    def beta_rows(self, t: App, gamma):
        out = {}
        lam, u = t.fn, t.arg
        x, body = lam.var, lam.body
        used = x in fv(body)
        for child, ren, coeffs, weak in self.splits(gamma, [fv(body) - {x}, fv(u)]):
            ru = self.row(u, child[1])
            self.observe(ru.keys())
            for a, tu in ru.items():
                if used:
                    g2 = tuple(sorted(child[0] + ((x, a),), key=lambda e: e[0]))
                elif a != EMPTY:
                    continue
                else:
                    g2 = child[0]
                rb = self.row(body, g2)
                if not rb:
                    continue
                tu2 = tu.rename(ren[1], "i")
                tu2 = tu2.rename({"@": "$x"}, "o") if used else tu2.drop_unit_leg("@", "o")
                for b, tb in rb.items():
                    if used:
                        tb = tb.rename({x: "$x"}, "i")
                    res = contract(tb.rename(ren[0], "i"), tu2)
                    _acc(out, b, self.finish(res, coeffs, weak))
        return out

    def app_rows(self, t: App, gamma):
        out = {}
        f, u = t.fn, t.arg
        for child, ren, coeffs, weak in self.splits(gamma, [fv(f), fv(u)]):
            rf = self.row(f, child[0])
            if not rf and not self.tainted(f, child[0]):
                continue
            ru = self.row(u, child[1])
            self.observe(ru.keys())
            for p, tf in rf.items():
                s = struct(p)
                a, b = s[1], s[2]
                tu = ru.get(a)
                if tu is None:
                    continue
                tf2 = tf.rename(ren[0], "i").split("@", [("$a", dim(a)), ("@", dim(b))])
                tf2 = tf2.flip("$a", "i")
                res = contract(tf2, tu.rename(ren[1], "i").rename({"@": "$a"}, "o"))
                _acc(out, b, self.finish(res, coeffs, weak))
        return out

    # structural ---------------------------------------------------------
    def seq_rows(self, t: Seq, gamma):
        out = {}
        for child, ren, coeffs, weak in self.splits(gamma, [fv(t.first), fv(t.second)]):
            t1 = self.row(t.first, child[0]).get(STAR1)
            if t1 is None:
                continue
            t1 = t1.rename(ren[0], "i").drop_unit_leg("@", "o")
            for b, t2 in self.row(t.second, child[1]).items():
                res = contract(t2.rename(ren[1], "i"), t1)
                _acc(out, b, self.finish(res, coeffs, weak))
        return out

    def tensor_rows(self, t: TensorIntro, gamma):
        out = {}
        for child, ren, coeffs, weak in self.splits(gamma, [fv(t.left), fv(t.right)]):
            rl = self.row(t.left, child[0])
            if not rl:
                continue
            rr = self.row(t.right, child[1])
            for a, tl in rl.items():
                tl2 = tl.rename(ren[0], "i").rename({"@": "$l"}, "o")
                for b, tr in rr.items():
                    tr2 = tr.rename(ren[1], "i").rename({"@": "$r"}, "o")
                    res = contract(tl2, tr2).merge(["$l", "$r"], "@")
                    _acc(out, B.TensorB(a, b), self.finish(res, coeffs, weak))
        return out

    def let_rows(self, t: LetTensor, gamma):
        out = {}
        x, y, body = t.x, t.y, t.body
        inner = fv(body) - {x, y}
        for child, ren, coeffs, weak in self.splits(gamma, [fv(t.bound), inner]):
            for p, ts in self.row(t.bound, child[0]).items():
                _, a, b = struct(p)
                res = self.bind(child[1], body, ((x, a), (y, b)))
                if res is None:
                    continue
                g2, w2 = res
                assert not w2
                rb = self.row(body, g2)
                if not rb:
                    continue
                ts2 = ts.rename(ren[0], "i").split("@", [("$x", dim(a)), ("$y", dim(b))])
                if x not in fv(body):
                    ts2 = ts2.drop_unit_leg("$x", "o")
                if y not in fv(body):
                    ts2 = ts2.drop_unit_leg("$y", "o")
                for c, tb in rb.items():
                    tb2 = tb.rename({x: "$x", y: "$y"}, "i").rename(ren[1], "i")
                    res2 = contract(tb2, ts2)
                    _acc(out, c, self.finish(res2, coeffs, weak))
        return out

    def match_rows(self, t: Match, gamma):
        out = {}
        inner = (fv(t.left) - {t.x}) | (fv(t.right) - {t.y})
        for child, ren, coeffs, weak in self.splits(gamma, [fv(t.scrut), inner]):
            for p, ts in self.row(t.scrut, child[0]).items():
                tag, a = struct(p)
                var, br = (t.x, t.left) if tag == "inl" else (t.y, t.right)
                res = self.bind(child[1], br, ((var, a),))
                if res is None:
                    continue
                g2, w2 = res
                rb = self.row(br, g2)
                if not rb:
                    continue
                ts2 = ts.rename(ren[0], "i").rename({"@": "$v"}, "o")
                if var not in fv(br):
                    ts2 = ts2.drop_unit_leg("$v", "o")
                for c, tb in rb.items():
                    tb2 = tb.rename({var: "$v"}, "i")
                    for n in w2:
                        tb2 = tb2.add_unit_leg(n)
                    tb2 = tb2.rename(ren[1], "i")
                    res2 = contract(tb2, ts2)
                    _acc(out, c, self.finish(res2, coeffs, weak))
        return out

    def bang_rows(self, t: Bang, gamma):
        out = {}
        L = self.tr.bang_len
        kmax = L if t.alpha is INF else min(t.alpha, L)
        names = [n for n, _ in gamma]
        if all(p == EMPTY for _, p in gamma):
            ten = Ten.scalar()
            for n in names:
                ten = ten.add_unit_leg(n)
            out[EMPTY] = ten
        for k in range(1, kmax + 1):
            per_var = [list(seq_splits(seq_items(p), k)) for _, p in gamma]
            for combo in itertools.product(*per_var):
                slot_rows = []
                for i in range(k):
                    g_i = tuple((n, intern(("!", combo[v][i]))) for v, n in enumerate(names))
                    slot_rows.append(self.row(t.body, g_i))
                if any(not r for r in slot_rows):
                    continue
                coeffs = []
                for v, (n, p) in enumerate(gamma):
                    parts = [combo[v][i] for i in range(k)]
                    outs = [(f"{n}%{i}", dim(intern(("!", parts[i])))) for i in range(k)]
                    coeffs.append(self.delta_ten(n, p, parts, outs))
                for choice in _sorted_choices(slot_rows):
                    if math.prod(dim(a) for a in choice) > self.max_dim:
                        self._check_dim(B.SeqB(choice))
                    ten = None
                    for i, ai in enumerate(choice):
                        ti = slot_rows[i][ai].rename({n: f"{n}%{i}" for n in names}, "i")
                        ti = ti.rename({"@": f"@{i}"}, "o")
                        ten = ti if ten is None else contract(ten, ti)
                    ten = ten.merge([f"@{i}" for i in range(k)], "@")
                    for c in coeffs:
                        ten = contract(ten, c)
                    _acc(out, B.SeqB(choice), ten.scale(1.0 / fix_count(choice)))
        if kmax < (float("inf") if t.alpha is INF else t.alpha):
            if any(len(seq_items(p)) == kmax for p in out):
                self._hit("bang_len")
        return out


# ====================================================================== API

def _ctx_order(ctx: Dict[str, Type]):
    return sorted(ctx)


def program_value(t: Term, trunc: Trunc = Trunc(), denoter: Optional[Denoter] = None) -> float:
    """Scalar denotation of a closed program."""
    D = denoter or Denoter(trunc)
    rows = D.fixpoint(lambda: D.row(t, ()))
    ten = rows.get(STAR1)
    return 0.0 if ten is None else ten.value()


def closure_term(S):
    """The closure's term with the store bound by let-chains."""
    from .typecheck import closure_context
    ctx = closure_context(S.regs, S.store)
    term = S.term
    for e in reversed(S.store):
        term = App(Lam(e.name, ctx.bang_vars[e.name], term), Bang(e.body, e.alpha))
    return term


def state_ten(rho: np.ndarray, regs) -> Ten:
    n = len(regs)
    a = np.asarray(rho, dtype=complex).reshape((2,) * (2 * n))
    order = []
    for j in range(n):
        order += [j, n + j]
    return Ten(a.transpose(order), [(q, 2, "o") for q in regs])


def interp_closure(S, trunc: Trunc = Trunc(), denoter: Optional[Denoter] = None) -> float:
    """``[[t]] o (y(rho) (x) [[!t_1]] (x) ...)`` as a number."""
    D = denoter or Denoter(trunc)
    if not np.any(S.state):
        return 0.0
    term = closure_term(S)
    gamma = tuple(sorted((q, STAR2) for q in S.regs))
    rows = D.fixpoint(lambda: D.row(term, gamma))
    ten = rows.get(STAR1)
    if ten is None:
        return 0.0
    return contract(ten, state_ten(S.state, S.regs)).value()


def interp_many(closures, trunc: Trunc = Trunc(), denoter: Optional[Denoter] = None):
    """Interpret several closures against one shared fixpoint."""
    D = denoter or Denoter(trunc)
    return D.fixpoint(lambda: [interp_closure(S, denoter=_NoFix(D)) for S in closures])


class _NoFix:
    """View of a denoter whose fixpoint is driven by an outer loop."""

    def __init__(self, D):
        self._D = D

    def __getattr__(self, name):
        return getattr(self._D, name)

    def fixpoint(self, fn):
        return fn()


def denote(t: Term, ctx: Optional[Dict[str, Type]] = None, trunc: Trunc = Trunc(),
           denoter: Optional[Denoter] = None, check: bool = True):
    """The matrix of ``ctx |- t`` over the truncated context basis."""
    from .matrix import MorphMatrix, context_type
    from .typecheck import Context, check_judgment
    ctx = dict(ctx or {})
    if check:
        try:
            cod = check_judgment(Context.of(**ctx), t)
        except TypeCheckError as e:
            raise IllTyped(str(e)) from e
    else:
        cod = None
    D = denoter or Denoter(trunc)
    names = _ctx_order(ctx)
    bases = [enumerate_basis(ctx[n], D.tr) for n in names]

    def run():
        entries = {}
        for combo in itertools.product(*bases):
            gamma = tuple(zip(names, combo))
            dom_point = _context_point(combo)
            for b, ten in D.row_w(t, gamma).items():
                S = ten.liouville("@", names)
                entries[(dom_point, b)] = S
        return entries

    raw = D.fixpoint(run)
    from .cpm import ChoiMap
    entries = {}
    for (a, b), S in raw.items():
        entries[(a, b)] = ChoiMap.from_superop(S, dim(a), dim(b))
    return MorphMatrix(context_type([ctx[n] for n in names]), cod, entries, D.tr,
                       hits=frozenset(D.hits))


def _context_point(points):
    if not points:
        return STAR1
    p = points[-1]
    for q in reversed(points[:-1]):
        p = B.TensorB(q, p)
    return p
