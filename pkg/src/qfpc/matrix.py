"""Sparse matrices of CP maps indexed by canonical basis elements.

A :class:`MorphMatrix` from ``A`` to ``B`` stores ``<b|f|a>`` for the
basis elements where it is nonzero. The constructors below give the
structural morphisms of the linear calculus (identity, symmetry, unitors,
sum injections, evaluation and currying, fold, and the comonoid structure of
``!``) at a fixed truncation; :mod:`qfpc.denote` computes the denotation of
terms in the same representation.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from . import basis as B
from .basis import (EMPTY, STAR1, Trunc, delta_entry, dim, enumerate_basis,
                    fix_count, idempotent, intern, seq_items, seq_splits,
                    sort_points, struct)
from .cpm import ChoiMap, matrix_to_json, superop_tensor
from .errors import NotBangContext, TypeMismatch
from .syntax import (UNIT, TBang, TLolli, TMu, TSum, TTensor, TUnit, Type,
                     pretty_type, types_equal, unfold_mu)
from .tensors import Ten, contract


@dataclass(frozen=True)
class MorphMatrix:
    dom_type: Type
    cod_type: Optional[Type]
    entries: Dict[Tuple[int, int], ChoiMap]
    trunc: Trunc = field(default_factory=Trunc)
    hits: frozenset = frozenset()

    def entry(self, a: int, b: int) -> ChoiMap:
        e = self.entries.get((a, b))
        return ChoiMap.zero(dim(a), dim(b)) if e is None else e

    def support(self):
        return sorted(self.entries, key=lambda ab: (B.key(ab[0]), B.key(ab[1])))

    def scalar(self) -> float:
        """Sole entry of a unit-to-unit matrix."""
        e = self.entries.get((STAR1, STAR1))
        return 0.0 if e is None else float(e.superop[0, 0].real)

    def pruned(self, eps: float = 1e-12) -> "MorphMatrix":
        keep = {k: v for k, v in self.entries.items() if np.max(np.abs(v.superop)) > eps}
        return MorphMatrix(self.dom_type, self.cod_type, keep, self.trunc, self.hits)

    def to_json(self) -> dict:
        return {
            "dom": pretty_type(self.dom_type),
            "cod": None if self.cod_type is None else pretty_type(self.cod_type),
            "bang_len": self.trunc.bang_len,
            "mu_depth": self.trunc.mu_depth,
            "entries": [{"a": B.show(a), "b": B.show(b),
                         "choi": matrix_to_json(self.entries[(a, b)].choi)}
                        for a, b in self.support()],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


def cod_support(f: MorphMatrix) -> set:
    return {b for _, b in f.entries}


def max_distance(f: MorphMatrix, g: MorphMatrix) -> float:
    """Largest entrywise difference of natural matrices over both supports."""
    worst = 0.0
    for k in set(f.entries) | set(g.entries):
        d = np.abs(f.entry(*k).superop - g.entry(*k).superop)
        worst = max(worst, float(d.max()) if d.size else 0.0)
    return worst


def context_type(types: Sequence[Type]) -> Type:
    """Right-nested tensor of ``types``; ``unit`` when empty."""
    if not types:
        return UNIT
    t = types[-1]
    for a in reversed(types[:-1]):
        t = TTensor(a, t)
    return t


def _from_superops(dom, cod, sup: dict, tr) -> MorphMatrix:
    ents = {(a, b): ChoiMap.from_superop(S, dim(a), dim(b)) for (a, b), S in sup.items()}
    return MorphMatrix(dom, cod, ents, tr)


def _basis(a: Type, tr: Trunc):
    return enumerate_basis(a, tr)


# ------------------------------------------------------------- structure

def identity(a: Type, tr: Trunc = Trunc()) -> MorphMatrix:
    return _from_superops(a, a, {(p, p): idempotent(p) for p in _basis(a, tr)}, tr)


def symmetry(a: Type, b: Type, tr: Trunc = Trunc(), dom=None) -> MorphMatrix:
    sup = {}
    for x in _basis(a, tr):
        for y in _basis(b, tr):
            if dom is not None and B.TensorB(x, y) not in dom:
                continue
            dx, dy = dim(x), dim(y)
            swap = B.perm_superop([dx, dy], [1, 0])
            Ein = superop_tensor(idempotent(x), dx, dx, idempotent(y), dy, dy)
            sup[(B.TensorB(x, y), B.TensorB(y, x))] = swap @ Ein
    return _from_superops(TTensor(a, b), TTensor(b, a), sup, tr)


def associator(a: Type, b: Type, c: Type, tr: Trunc = Trunc()) -> MorphMatrix:
    sup = {}
    for x, y, z in itertools.product(_basis(a, tr), _basis(b, tr), _basis(c, tr)):
        dx, dy, dz = dim(x), dim(y), dim(z)
        E = superop_tensor(superop_tensor(idempotent(x), dx, dx, idempotent(y), dy, dy),
                           dx * dy, dx * dy, idempotent(z), dz, dz)
        sup[(B.TensorB(B.TensorB(x, y), z), B.TensorB(x, B.TensorB(y, z)))] = E
    return _from_superops(TTensor(TTensor(a, b), c), TTensor(a, TTensor(b, c)), sup, tr)


def reassociate(f: MorphMatrix) -> MorphMatrix:
    """Post-compose with the associator by relabelling codomain points.

    Big-endian factor order is the same on both sides, so only the indices
    change; equal to ``compose_m(associator(..), f)`` on canonical ``f``.
    """
    ents = {}
    for (a, p), e in f.entries.items():
        s = struct(p)
        (x, y), z = struct(s[1])[1:], s[2]
        ents[(a, B.TensorB(x, B.TensorB(y, z)))] = e
    c = f.cod_type
    return MorphMatrix(f.dom_type, TTensor(c.a.a, TTensor(c.a.b, c.b)), ents, f.trunc, f.hits)


def unitor_l(a: Type, tr: Trunc = Trunc()) -> MorphMatrix:
    """``unit (x) A -> A``."""
    sup = {(B.TensorB(STAR1, p), p): idempotent(p) for p in _basis(a, tr)}
    return _from_superops(TTensor(UNIT, a), a, sup, tr)


def unitor_r(a: Type, tr: Trunc = Trunc()) -> MorphMatrix:
    """``A (x) unit -> A``."""
    sup = {(B.TensorB(p, STAR1), p): idempotent(p) for p in _basis(a, tr)}
    return _from_superops(TTensor(a, UNIT), a, sup, tr)


def inj(a: Type, b: Type, side: str, tr: Trunc = Trunc()) -> MorphMatrix:
    """Injection ``A -> A+B`` (``side='l'``) or ``B -> A+B``."""
    src = a if side == "l" else b
    mk = B.InlB if side == "l" else B.InrB
    sup = {(p, mk(p)): idempotent(p) for p in _basis(src, tr)}
    return _from_superops(src, TSum(a, b), sup, tr)


def proj(a: Type, b: Type, side: str, tr: Trunc = Trunc()) -> MorphMatrix:
    """Partial inverse of :func:`inj`; zero on the other summand."""
    src = a if side == "l" else b
    mk = B.InlB if side == "l" else B.InrB
    sup = {(mk(p), p): idempotent(p) for p in _basis(src, tr)}
    return _from_superops(TSum(a, b), src, sup, tr)


def fold_m(mu: TMu, tr: Trunc = Trunc()) -> MorphMatrix:
    sup = {}
    for p in _basis(mu, tr):
        inner = struct(p)[1]
        sup[(inner, p)] = idempotent(inner)
    return _from_superops(unfold_mu(mu), mu, sup, tr)


def unfold_m(mu: TMu, tr: Trunc = Trunc()) -> MorphMatrix:
    sup = {}
    for p in _basis(mu, tr):
        inner = struct(p)[1]
        sup[(p, inner)] = idempotent(inner)
    return _from_superops(mu, unfold_mu(mu), sup, tr)


def _ten(S, out_dim, ins):
    return Ten.from_superop(S, ("@", out_dim), ins)


def eval_m(a: Type, b: Type, tr: Trunc = Trunc()) -> MorphMatrix:
    """``(A -o B) (x) A -> B``: contraction of the function's input leg."""
    sup = {}
    for x in _basis(a, tr):
        for y in _basis(b, tr):
            f = B.LolliB(x, y)
            dx, dy = dim(x), dim(y)
            # the function point as an input leg, split into its two halves
            fn = _ten(idempotent(f), dx * dy, [("f", dx * dy)])
            fn = fn.split("@", [("$a", dx), ("@", dy)]).flip("$a", "i")
            arg = _ten(idempotent(x), dx, [("x", dx)]).rename({"@": "$a"}, "o")
            t = contract(fn, arg)
            sup[(B.TensorB(f, x), y)] = t.liouville("@", ["f", "x"])
    return _from_superops(TTensor(TLolli(a, b), a), b, sup, tr)


def curry_m(f: MorphMatrix, c: Type, a: Type) -> MorphMatrix:
    """``C (x) A -> B`` to ``C -> (A -o B)``."""
    sup = {}
    for (ca, b), e in f.entries.items():
        cp, ap = struct(ca)[1], struct(ca)[2]
        t = _ten(e.superop, dim(b), [("c", dim(cp)), ("x", dim(ap))])
        t = t.flip("x", "o").merge(["x", "@"], "@")
        S = t.liouville("@", ["c"])
        k = (cp, B.LolliB(ap, b))
        sup[k] = sup[k] + S if k in sup else S
    return _from_superops(c, TLolli(a, f.cod_type), sup, f.trunc)


def dereliction(a: Type, tr: Trunc = Trunc()) -> MorphMatrix:
    sup = {(intern(("!", (p,))), p): idempotent(p) for p in _basis(a, tr)}
    return _from_superops(TBang(a), a, sup, tr)


def weakening(a: Type, tr: Trunc = Trunc()) -> MorphMatrix:
    return _from_superops(TBang(a), UNIT, {(EMPTY, STAR1): np.ones((1, 1), complex)}, tr)


def contraction(a: Type, tr: Trunc = Trunc()) -> MorphMatrix:
    """``!A -> !A (x) !A`` restricted to the truncation."""
    sup = {}
    for p in _basis(TBang(a), tr):
        items = seq_items(p)
        for parts in seq_splits(items, 2):
            q1, q2 = intern(("!", parts[0])), intern(("!", parts[1]))
            sup[(p, B.TensorB(q1, q2))] = delta_entry(items, parts)
    return _from_superops(TBang(a), TTensor(TBang(a), TBang(a)), sup, tr)


def proj_len(a: Type, alpha, tr: Trunc = Trunc()) -> MorphMatrix:
    """Diagonal projection of ``!A`` onto sequences of length at most ``alpha``."""
    sup = {}
    for p in _basis(TBang(a), tr):
        if alpha is None or len(seq_items(p)) <= alpha:
            sup[(p, p)] = idempotent(p)
    return _from_superops(TBang(a), TBang(a), sup, tr)


# ------------------------------------------------------------ operations

def compose_m(g: MorphMatrix, f: MorphMatrix) -> MorphMatrix:
    """``g o f`` as a sparse sum over the middle index."""
    if f.cod_type is not None and g.dom_type is not None and not types_equal(f.cod_type, g.dom_type):
        raise TypeMismatch(pretty_type(g.dom_type), pretty_type(f.cod_type), None, "composition")
    by_mid: Dict[int, list] = {}
    for (b, c), e in g.entries.items():
        by_mid.setdefault(b, []).append((c, e))
    sup = {}
    for (a, b), e in f.entries.items():
        for c, e2 in by_mid.get(b, ()):
            S = e2.superop @ e.superop
            k = (a, c)
            sup[k] = sup[k] + S if k in sup else S
    out = _from_superops(f.dom_type, g.cod_type, sup, f.trunc)
    return MorphMatrix(out.dom_type, out.cod_type, out.entries, f.trunc, f.hits | g.hits)


def tensor_m(f: MorphMatrix, g: MorphMatrix, dom=None) -> MorphMatrix:
    """Entrywise Kronecker product; ``dom`` optionally restricts the rows
    to a set of domain basis elements of the product."""
    sup = {}
    for (a, b), e in f.entries.items():
        for (a2, b2), e2 in g.entries.items():
            if dom is not None and B.TensorB(a, a2) not in dom:
                continue
            S = superop_tensor(e.superop, dim(a), dim(b), e2.superop, dim(a2), dim(b2))
            sup[(B.TensorB(a, a2), B.TensorB(b, b2))] = S
    cod = None if f.cod_type is None or g.cod_type is None else TTensor(f.cod_type, g.cod_type)
    return _from_superops(TTensor(f.dom_type, g.dom_type), cod, sup, f.trunc)


def add_m(f: MorphMatrix, g: MorphMatrix) -> MorphMatrix:
    sup = {k: v.superop for k, v in f.entries.items()}
    for k, v in g.entries.items():
        sup[k] = sup[k] + v.superop if k in sup else v.superop
    return _from_superops(f.dom_type, f.cod_type, sup, f.trunc)


def _bang_factors(t: Type):
    """Split a context type into its ``!``-factors; ``[]`` for unit."""
    if isinstance(t, TUnit):
        return []
    out = []
    while isinstance(t, TTensor) and isinstance(t.a, TBang):
        out.append(t.a)
        t = t.b
    if not isinstance(t, TBang):
        raise NotBangContext(f"context {pretty_type(t)} is not a tensor of !-types")
    return out + [t]


def _split_point(p: int, n: int):
    if n == 0:
        return []
    out = []
    for _ in range(n - 1):
        s = struct(p)
        out.append(s[1])
        p = s[2]
    return out + [p]


def _join_point(points):
    if not points:
        return STAR1
    p = points[-1]
    for q in reversed(points[:-1]):
        p = B.TensorB(q, p)
    return p


def promote_m(h: MorphMatrix, tr: Optional[Trunc] = None, alpha=None) -> MorphMatrix:
    """``C -> !A`` from ``h : C -> A`` with ``C`` a tensor of ``!``-types.

    The row at ``[a_1 .. a_k]`` is ``(<a_1|h (x) .. (x) <a_k|h) o delta^(k)``
    scaled by ``1/#fix``; lengths above ``alpha`` (or the truncation) are
    dropped.
    """
    tr = tr or h.trunc
    factors = _bang_factors(h.dom_type)
    m = len(factors)
    kmax = tr.bang_len if alpha is None else min(alpha, tr.bang_len)
    rows: Dict[int, Dict[int, Ten]] = {}
    names = [f"c{j}" for j in range(m)]
    for (c, a), e in h.entries.items():
        comps = _split_point(c, m)
        t = Ten.from_superop(e.superop, ("@", dim(a)), [(n, dim(q)) for n, q in zip(names, comps)])
        rows.setdefault(c, {})[a] = t
    sup = {}
    cbasis = list(itertools.product(*[_basis(f, tr) for f in factors]))
    for comps in cbasis:
        c = _join_point(list(comps))
        if all(q == EMPTY for q in comps):
            sup[(c, EMPTY)] = np.ones((1, 1), complex)
        for k in range(1, kmax + 1):
            per = [seq_splits(seq_items(q), k) for q in comps]
            for combo in itertools.product(*per):
                slot = []
                for i in range(k):
                    ci = _join_point([intern(("!", combo[j][i])) for j in range(m)])
                    slot.append(rows.get(ci, {}))
                if any(not r for r in slot):
                    continue
                for choice in _sorted_choices(slot):
                    ten = None
                    for i, ai in enumerate(choice):
                        ti = slot[i][ai].rename({n: f"{n}%{i}" for n in names}, "i")
                        ti = ti.rename({"@": f"@{i}"}, "o")
                        ten = ti if ten is None else contract(ten, ti)
                    ten = ten.merge([f"@{i}" for i in range(k)], "@")
                    for j, (n, q) in enumerate(zip(names, comps)):
                        parts = [combo[j][i] for i in range(k)]
                        ten = contract(ten, _delta_ten(n, q, parts))
                    ten = ten.scale(1.0 / fix_count(choice))
                    out = B.SeqB(choice)
                    S = ten.liouville("@", names)
                    sup[(c, out)] = sup[(c, out)] + S if (c, out) in sup else S
    return _from_superops(h.dom_type, TBang(h.cod_type), sup, tr)


def _delta_ten(name, p, parts):
    S = delta_entry(seq_items(p), parts)
    t = Ten.from_superop(S, ("$d", dim(p)), [(name, dim(p))])
    return t.split("$d", [(f"{name}%{i}", dim(intern(("!", tuple(pt))))) for i, pt in enumerate(parts)])


def _sorted_choices(rows, lo=None):
    if not rows:
        yield ()
        return
    for a in sort_points(rows[0]):
        if lo is not None and B.key(a) < B.key(lo):
            continue
        for tail in _sorted_choices(rows[1:], a):
            yield (a,) + tail


def bang_m(g: MorphMatrix, tr: Optional[Trunc] = None) -> MorphMatrix:
    """``!g = (g o der)^!``."""
    tr = tr or g.trunc
    return promote_m(compose_m(g, dereliction(g.dom_type, tr)), tr)
