"""Canonical basis elements, their coefficient dimensions and idempotents.

Basis elements are interned as small integers. Their structure is one of

    ('*1',) ('*2',) ('x', a, b) ('-o', a, b) ('inl', a) ('inr', a)
    ('!', (a1, ..., ak))  ('fold', a)  ('&1', a) ('&2', a)

with children given by id. Sequences are kept sorted under the total
order :func:`key`. The idempotent ``E_a = <a|a>`` is identity on the basic
points and is derived through the type constructors; for sequences it is
the average over the label-preserving factor permutations.
"""
from __future__ import annotations

import itertools
import math
import threading
from collections import Counter
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .cpm import superop_tensor
from .syntax import (TBang, TLolli, TMu, TQubit, TSum, TTensor, TUnit, TVar,
                     Type, unfold_mu)


@dataclass(frozen=True)
class Trunc:
    """Finite stand-in for infinite bases: sequence length and mu depth."""
    bang_len: int = 4
    mu_depth: int = 16
    eps_conv: float = 1e-9

    def __post_init__(self):
        if self.bang_len < 0 or self.mu_depth < 0:
            raise ValueError("truncation bounds must be nonnegative")


class _Table:
    def __init__(self):
        self.structs: list = []
        self.ids: dict = {}
        self.lock = threading.Lock()
        self.dims: list = []
        self.depths: list = []
        self.keys: list = []

    def intern(self, s) -> int:
        i = self.ids.get(s)
        if i is not None:
            return i
        with self.lock:
            i = self.ids.get(s)
            if i is not None:
                return i
            tag = s[0]
            if tag == "*1":
                d, dep, k = 1, 0, ("*1",)
            elif tag == "*2":
                d, dep, k = 2, 0, ("*2",)
            elif tag in ("x", "-o"):
                d = self.dims[s[1]] * self.dims[s[2]]
                dep = max(self.depths[s[1]], self.depths[s[2]])
                k = (tag, self.keys[s[1]], self.keys[s[2]])
            elif tag == "!":
                d = math.prod(self.dims[a] for a in s[1])
                dep = max((self.depths[a] for a in s[1]), default=0)
                k = ("!", tuple(self.keys[a] for a in s[1]))
            else:
                d = self.dims[s[1]]
                dep = self.depths[s[1]] + (1 if tag == "fold" else 0)
                k = (tag, self.keys[s[1]])
            i = len(self.structs)
            self.structs.append(s)
            self.dims.append(d)
            self.depths.append(dep)
            self.keys.append(k)
            self.ids[s] = i
            return i


TABLE = _Table()
intern = TABLE.intern

STAR1 = intern(("*1",))
STAR2 = intern(("*2",))
EMPTY = intern(("!", ()))


def struct(p: int):
    return TABLE.structs[p]


def dim(p: int) -> int:
    return TABLE.dims[p]


def depth(p: int) -> int:
    return TABLE.depths[p]


def key(p: int):
    return TABLE.keys[p]


def sort_points(ps):
    return sorted(ps, key=key)


# constructors named after the basis rules
def Star1():
    return STAR1


def Star2():
    return STAR2


def TensorB(a, b):
    return intern(("x", a, b))


def LolliB(a, b):
    return intern(("-o", a, b))


def InlB(a):
    return intern(("inl", a))


def InrB(a):
    return intern(("inr", a))


def FoldB(a):
    return intern(("fold", a))


def SeqB(items: Sequence[int]):
    return intern(("!", tuple(sorted(items, key=key))))


def WithB(i, a):
    return intern((f"&{i}", a))


def seq_items(p: int):
    s = struct(p)
    if s[0] != "!":
        raise ValueError("not a sequence point")
    return s[1]


def underlying_dim(p: int) -> int:
    return dim(p)


def fix_count(items: Sequence[int]) -> int:
    """Number of permutations fixing the sequence."""
    return math.prod(math.factorial(m) for m in Counter(items).values())


def show(p: int) -> str:
    s = struct(p)
    tag = s[0]
    if tag == "*1":
        return "*"
    if tag == "*2":
        return "*2"
    if tag == "x":
        return f"({show(s[1])} (*) {show(s[2])})"
    if tag == "-o":
        return f"({show(s[1])} -o {show(s[2])})"
    if tag == "!":
        return "[" + ", ".join(show(a) for a in s[1]) + "]"
    return f"{tag} {show(s[1])}"


def to_tree(p: int):
    s = struct(p)
    if s[0] in ("*1", "*2"):
        return s
    if s[0] == "!":
        return ("!", tuple(to_tree(a) for a in s[1]))
    return (s[0],) + tuple(to_tree(a) for a in s[1:])


def from_tree(tr) -> int:
    tag = tr[0]
    if tag in ("*1", "*2"):
        return intern((tag,))
    if tag == "!":
        return SeqB([from_tree(a) for a in tr[1]])
    return intern((tag,) + tuple(from_tree(a) for a in tr[1:]))


# ------------------------------------------------------------- conformance

_unfold_cache: dict = {}


def unfold_cached(a: TMu) -> Type:
    r = _unfold_cache.get(a)
    if r is None:
        r = _unfold_cache[a] = unfold_mu(a)
    return r


_conf_cache: dict = {}


def conforms(p: int, a: Type) -> bool:
    """Whether ``p`` is a basis element of type ``a``."""
    k = (p, a)
    r = _conf_cache.get(k)
    if r is not None:
        return r
    s = struct(p)
    tag = s[0]
    if isinstance(a, TQubit):
        r = tag == "*2"
    elif isinstance(a, TUnit):
        r = tag == "*1"
    elif isinstance(a, TTensor):
        r = tag == "x" and conforms(s[1], a.a) and conforms(s[2], a.b)
    elif isinstance(a, TLolli):
        r = tag == "-o" and conforms(s[1], a.a) and conforms(s[2], a.b)
    elif isinstance(a, TSum):
        r = (tag == "inl" and conforms(s[1], a.a)) or (tag == "inr" and conforms(s[1], a.b))
    elif isinstance(a, TBang):
        r = tag == "!" and all(conforms(x, a.a) for x in s[1])
    elif isinstance(a, TMu):
        r = tag == "fold" and conforms(s[1], unfold_cached(a))
    else:
        r = False
    _conf_cache[k] = r
    return r


# ------------------------------------------------------------- enumeration

class BasisTooLarge(Exception):
    pass


def enumerate_basis(a: Type, tr: Trunc, cap: Optional[int] = None) -> List[int]:
    """All basis elements of ``a`` within the truncation, in the fixed order."""
    memo = {}

    def go(t, d):
        k = (t, d)
        if k in memo:
            return memo[k]
        if isinstance(t, TQubit):
            out = [STAR2]
        elif isinstance(t, TUnit):
            out = [STAR1]
        elif isinstance(t, (TTensor, TLolli)):
            mk = TensorB if isinstance(t, TTensor) else LolliB
            xs, ys = go(t.a, d), go(t.b, d)
            if cap is not None and len(xs) * len(ys) > cap:
                raise BasisTooLarge
            out = [mk(x, y) for x in xs for y in ys]
        elif isinstance(t, TSum):
            out = [InlB(x) for x in go(t.a, d)] + [InrB(y) for y in go(t.b, d)]
        elif isinstance(t, TBang):
            xs = sort_points(go(t.a, d))
            out = []
            for n in range(tr.bang_len + 1):
                if cap is not None and xs and math.comb(len(xs) + n - 1, n) > cap:
                    raise BasisTooLarge
                out.extend(intern(("!", c)) for c in itertools.combinations_with_replacement(xs, n))
        elif isinstance(t, TMu):
            out = [] if d == 0 else [FoldB(x) for x in go(unfold_cached(t), d - 1)]
        elif isinstance(t, TVar):
            raise ValueError(f"free type variable {t.name}")
        else:
            raise TypeError(t)
        if cap is not None and len(out) > cap:
            raise BasisTooLarge
        memo[k] = out
        return out

    return sort_points(go(a, tr.mu_depth))


# --------------------------------------------------------------- idempotents

def perm_unitary(dims: Sequence[int], sigma: Sequence[int]) -> np.ndarray:
    """Unitary moving tensor factor ``sigma[i]`` of the input to slot ``i``."""
    D = math.prod(dims) if dims else 1
    k = len(dims)
    if k == 0:
        return np.eye(1)
    V = np.eye(D).reshape(tuple(dims) + (D,))
    V = V.transpose(list(sigma) + [k])
    return V.reshape(D, D)


def perm_superop(dims, sigma) -> np.ndarray:
    V = perm_unitary(dims, sigma)
    return np.kron(V, V.conj())


_E_cache: dict = {}


def idempotent(p: int) -> np.ndarray:
    """Natural matrix of ``<p|p>``, shape ``(d*d, d*d)``."""
    E = _E_cache.get(p)
    if E is not None:
        return E
    s = struct(p)
    d = dim(p)
    tag = s[0]
    if tag in ("*1", "*2"):
        E = np.eye(d * d)
    elif tag in ("inl", "inr", "fold", "&1", "&2"):
        E = idempotent(s[1])
    elif tag == "x":
        a, b = s[1], s[2]
        E = superop_tensor(idempotent(a), dim(a), dim(a), idempotent(b), dim(b), dim(b))
    elif tag == "-o":
        a, b = s[1], s[2]
        da, db = dim(a), dim(b)
        EA = idempotent(a).reshape(da, da, da, da)
        EB = idempotent(b).reshape(db, db, db, db)
        # out ((u,a),(v,b)) <- in ((u',a'),(v',b')) : EB[a,b,a',b'] EA[u',v',u,v]
        E = np.einsum("ABCD,efgh->gAhBeCfD", EB, EA).reshape(d * d, d * d)
    elif tag == "!":
        items = s[1]
        if all(is_identity(a) for a in items) and d == 1:
            E = np.eye(1)
        else:
            dims = [dim(a) for a in items]
            base = _tensor_cache_free(items)
            acc = np.zeros((d * d, d * d), dtype=complex)
            perms = list(label_preserving_perms(items, items))
            for sigma in perms:
                acc += perm_superop(dims, sigma) @ base
            E = acc / len(perms)
    else:
        raise ValueError(tag)
    E = np.asarray(E, dtype=complex)
    _E_cache[p] = E
    return E


def _tensor_cache_free(items):
    """Natural matrix of the tensor product of the members' idempotents."""
    S = np.eye(1, dtype=complex)
    dcur = 1
    for a in items:
        S = superop_tensor(S, dcur, dcur, idempotent(a), dim(a), dim(a))
        dcur *= dim(a)
    return S


_is_id_cache: dict = {}


def is_identity(p: int) -> bool:
    r = _is_id_cache.get(p)
    if r is None:
        d = dim(p)
        r = bool(np.allclose(idempotent(p), np.eye(d * d), atol=1e-13))
        _is_id_cache[p] = r
    return r


def label_preserving_perms(src: Sequence[int], dst: Sequence[int]):
    """All ``sigma`` with ``dst[i] == src[sigma[i]]``."""
    if Counter(src) != Counter(dst):
        return
    pos = {}
    for j, a in enumerate(src):
        pos.setdefault(a, []).append(j)
    slots = {}
    for i, a in enumerate(dst):
        slots.setdefault(a, []).append(i)
    labels = list(pos)
    choices = [itertools.permutations(pos[a]) for a in labels]
    for combo in itertools.product(*choices):
        sigma = [0] * len(dst)
        for a, assignment in zip(labels, combo):
            for i, j in zip(slots[a], assignment):
                sigma[i] = j
        yield sigma


# ------------------------------------------------------ contraction entries

def seq_splits(items: Sequence[int], r: int):
    """Ordered splits of a sorted sequence into ``r`` sorted parts."""
    k = (tuple(items), r)
    out = _splits_cache.get(k)
    if out is None:
        out = _splits_cache[k] = list(_seq_splits(*k))
    return out


_splits_cache: dict = {}


def _seq_splits(items, r):
    counts = Counter(items)
    labels = sort_points(counts)

    def compositions(m, r):
        if r == 1:
            yield (m,)
            return
        for i in range(m + 1):
            for rest in compositions(m - i, r - 1):
                yield (i,) + rest

    per_label = [list(compositions(counts[a], r)) for a in labels]
    for combo in itertools.product(*per_label):
        parts = [[] for _ in range(r)]
        for a, comp in zip(labels, combo):
            for j, c in enumerate(comp):
                parts[j].extend([a] * c)
        yield [tuple(p) for p in parts]


_delta_cache: dict = {}


def delta_entry(items: Sequence[int], parts: Sequence[Sequence[int]]) -> np.ndarray:
    """Natural matrix of ``<b1 (x) ... (x) br| delta^(r) |a>``.

    ``items`` is the sorted input sequence, ``parts`` the sorted output
    sequences whose concatenation is a rearrangement of ``items``.
    Shape ``(D*D, D*D)`` with ``D`` the product of member dimensions; the
    output factors are in concatenation order.
    """
    items = tuple(items)
    parts = tuple(tuple(p) for p in parts)
    k = (items, parts)
    E = _delta_cache.get(k)
    if E is not None:
        return E
    concat = [a for p in parts for a in p]
    norm = math.prod(fix_count(p) for p in parts)
    D = math.prod(dim(a) for a in items) if items else 1
    if D == 1:
        E = np.full((1, 1), fix_count(items) / norm, dtype=complex)
    else:
        dims = [dim(a) for a in items]
        Etensor = _tensor_cache_free(concat)
        acc = np.zeros((D * D, D * D), dtype=complex)
        for sigma in label_preserving_perms(items, concat):
            acc += Etensor @ perm_superop(dims, sigma)
        E = acc / norm
    _delta_cache[k] = E
    return E
