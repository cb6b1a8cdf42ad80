"""Types and terms of the calculus, with parser, printer and substitution.

Concrete syntax (``#`` starts a comment)::

    types   A ::= qubit | unit | X | A -o B | A (*) B | A + B | !A | uX. A
                | qubit^n | Name            (alias from a ``type`` item)
    terms   t ::= x | () | lam x:A. t | t s | t; s | t (*) s
                | let x (*) y = t in s | let x : A = t in s
                | match t with inl x -> s | inr y -> s'
                | bang t | bang[k] t | der[!A] | fold[uX.A] | unfold[uX.A]
                | inl[A+B] | inr[A+B] | new | meas | U[H] | U[[[..],[..]]]
                | fix f : A -o B. bang lam x:A. t | diverge | diverge[A]
    file    ::= (type Name = A ;; | def name = t ;;)* t

``-o`` is right associative and binds loosest, then ``+`` then ``(*)``
(both right associative), then ``!``. ``uX. A`` extends as far right as
possible. In terms ``;`` binds loosest, then ``(*)``, then application.
``def`` items are closed macros, expanded at parse time.
"""
from __future__ import annotations

import ast
import itertools
import re
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .cpm import GATES, check_unitary
from .errors import InfiniteAnnotation, ShapeError, SyntaxError as QSyntaxError

INF = None  # bang annotation for the unannotated (infinitary) bang


def _cached_hash(self):
    try:
        return self.__dict__["_h"]
    except KeyError:
        h = hash((type(self).__name__,) + tuple(
            getattr(self, f.name) for f in fields(self) if f.compare))
        object.__setattr__(self, "_h", h)
        return h


def _node(cls):
    cls = dataclass(frozen=True)(cls)
    cls.__hash__ = _cached_hash
    return cls


# ===================================================================== types

class Type:
    def __str__(self):
        return pretty_type(self)


@_node
class TVar(Type):
    name: str


@_node
class TQubit(Type):
    pass


@_node
class TUnit(Type):
    pass


@_node
class TLolli(Type):
    a: Type
    b: Type


@_node
class TTensor(Type):
    a: Type
    b: Type


@_node
class TSum(Type):
    a: Type
    b: Type


@_node
class TBang(Type):
    a: Type


@_node
class TMu(Type):
    var: str
    body: Type


QUBIT = TQubit()
UNIT = TUnit()
BOOL = TSum(UNIT, UNIT)


def qubits(n: int) -> Type:
    """Right-nested ``qubit (*) (qubit (*) ...)``."""
    if n < 1:
        raise ValueError("qubit^n needs n >= 1")
    t = QUBIT
    for _ in range(n - 1):
        t = TTensor(QUBIT, t)
    return t


def nat_type() -> Type:
    return TMu("X", TSum(UNIT, TVar("X")))


def list_type(a: Type) -> Type:
    x = fresh_tyvar("X", ftv(a))
    return TMu(x, TSum(UNIT, TTensor(a, TVar(x))))


def ftv(a: Type) -> frozenset:
    if isinstance(a, TVar):
        return frozenset([a.name])
    if isinstance(a, (TQubit, TUnit)):
        return frozenset()
    if isinstance(a, TBang):
        return ftv(a.a)
    if isinstance(a, TMu):
        return ftv(a.body) - {a.var}
    return ftv(a.a) | ftv(a.b)


def fresh_tyvar(base: str, avoid) -> str:
    if base not in avoid:
        return base
    for i in itertools.count(1):
        cand = f"{base}{i}"
        if cand not in avoid:
            return cand


def subst_type(a: Type, b: Type, x: str) -> Type:
    """Capture-avoiding ``a[b/x]``."""
    if isinstance(a, TVar):
        return b if a.name == x else a
    if isinstance(a, (TQubit, TUnit)):
        return a
    if isinstance(a, TBang):
        return TBang(subst_type(a.a, b, x))
    if isinstance(a, TMu):
        if a.var == x or x not in ftv(a.body):
            return a
        if a.var in ftv(b):
            new = fresh_tyvar(a.var, ftv(b) | ftv(a.body) | {x})
            body = subst_type(a.body, TVar(new), a.var)
            return TMu(new, subst_type(body, b, x))
        return TMu(a.var, subst_type(a.body, b, x))
    return type(a)(subst_type(a.a, b, x), subst_type(a.b, b, x))


def unfold_mu(a: TMu) -> Type:
    return subst_type(a.body, a, a.var)


def type_key(a: Type, env=()):
    """Hashable de Bruijn form; equal keys iff alpha-equivalent types."""
    if isinstance(a, TVar):
        for i, v in enumerate(reversed(env)):
            if v == a.name:
                return ("bv", i)
        return ("fv", a.name)
    if isinstance(a, TQubit):
        return ("qubit",)
    if isinstance(a, TUnit):
        return ("unit",)
    if isinstance(a, TBang):
        return ("!", type_key(a.a, env))
    if isinstance(a, TMu):
        return ("mu", type_key(a.body, env + (a.var,)))
    tag = {TLolli: "-o", TTensor: "*", TSum: "+"}[type(a)]
    return (tag, type_key(a.a, env), type_key(a.b, env))


def types_equal(a: Type, b: Type) -> bool:
    return a is b or type_key(a) == type_key(b)


# ===================================================================== terms

class Term:
    def __str__(self):
        return pretty(self)


_span = dict(default=None, compare=False, repr=False)


@_node
class Var(Term):
    name: str
    span: tuple = field(**_span)


@_node
class StoreRef(Term):
    name: str
    span: tuple = field(**_span)


@_node
class Lam(Term):
    var: str
    ty: Type
    body: Term
    span: tuple = field(**_span)


@_node
class App(Term):
    fn: Term
    arg: Term
    span: tuple = field(**_span)


@_node
class Unit(Term):
    span: tuple = field(**_span)


@_node
class Seq(Term):
    first: Term
    second: Term
    span: tuple = field(**_span)


@_node
class TensorIntro(Term):
    left: Term
    right: Term
    span: tuple = field(**_span)


@_node
class LetTensor(Term):
    x: str
    y: str
    bound: Term
    body: Term
    span: tuple = field(**_span)


@_node
class Inl(Term):
    ty: Type  # the sum type A+B
    span: tuple = field(**_span)


@_node
class Inr(Term):
    ty: Type
    span: tuple = field(**_span)


@_node
class Match(Term):
    scrut: Term
    x: str
    left: Term
    y: str
    right: Term
    span: tuple = field(**_span)


@_node
class Bang(Term):
    body: Term
    alpha: Optional[int] = INF
    span: tuple = field(**_span)


@_node
class Der(Term):
    ty: Type  # !A
    span: tuple = field(**_span)


@_node
class Fold(Term):
    ty: Type  # uX.A
    span: tuple = field(**_span)


@_node
class Unfold(Term):
    ty: Type
    span: tuple = field(**_span)


@_node
class Ket0(Term):
    span: tuple = field(**_span)


@_node
class Unitary(Term):
    name: str
    matrix: tuple  # rows of complex entries
    span: tuple = field(**_span)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=complex)

    @property
    def arity(self) -> int:
        return int(round(np.log2(len(self.matrix))))


@_node
class Meas(Term):
    span: tuple = field(**_span)


CONSTANTS = (Inl, Inr, Der, Fold, Unfold, Unitary, Meas)


def unitary(name_or_matrix) -> Unitary:
    if isinstance(name_or_matrix, str):
        U = GATES[name_or_matrix]
        name = name_or_matrix
    else:
        U = check_unitary(name_or_matrix)
        name = ""
    return Unitary(name, tuple(tuple(complex(z) for z in row) for row in np.asarray(U)))


# --------------------------------------------------------- free variables

def fv(t: Term) -> frozenset:
    """Free term names (variables, registers and store references)."""
    d = t.__dict__
    if "_fv" in d:
        return d["_fv"]
    if isinstance(t, (Var, StoreRef)):
        r = frozenset([t.name])
    elif isinstance(t, Lam):
        r = fv(t.body) - {t.var}
    elif isinstance(t, App):
        r = fv(t.fn) | fv(t.arg)
    elif isinstance(t, Seq):
        r = fv(t.first) | fv(t.second)
    elif isinstance(t, TensorIntro):
        r = fv(t.left) | fv(t.right)
    elif isinstance(t, LetTensor):
        r = fv(t.bound) | (fv(t.body) - {t.x, t.y})
    elif isinstance(t, Match):
        r = fv(t.scrut) | (fv(t.left) - {t.x}) | (fv(t.right) - {t.y})
    elif isinstance(t, Bang):
        r = fv(t.body)
    else:
        r = frozenset()
    object.__setattr__(t, "_fv", r)
    return r


def all_names(t: Term) -> set:
    out = set()

    def go(u):
        if isinstance(u, (Var, StoreRef)):
            out.add(u.name)
        elif isinstance(u, Lam):
            out.add(u.var)
        elif isinstance(u, LetTensor):
            out.update((u.x, u.y))
        elif isinstance(u, Match):
            out.update((u.x, u.y))
        for c in children(u):
            go(c)

    go(t)
    return out


def children(t: Term):
    if isinstance(t, Lam):
        return (t.body,)
    if isinstance(t, App):
        return (t.fn, t.arg)
    if isinstance(t, Seq):
        return (t.first, t.second)
    if isinstance(t, TensorIntro):
        return (t.left, t.right)
    if isinstance(t, LetTensor):
        return (t.bound, t.body)
    if isinstance(t, Match):
        return (t.scrut, t.left, t.right)
    if isinstance(t, Bang):
        return (t.body,)
    return ()


def fresh_name(base: str, avoid) -> str:
    base = base.rstrip("'")
    cand = base + "'"
    while cand in avoid:
        cand += "'"
    return cand


def subst_term(t: Term, v: Term, x: str) -> Term:
    """Capture-avoiding ``t[v/x]``."""
    if x not in fv(t):
        return t
    return _subst(t, v, x, fv(v))


def _subst(t, v, x, fvv):
    if x not in fv(t):
        return t
    if isinstance(t, (Var, StoreRef)):
        return v
    if isinstance(t, Lam):
        var, body = _rebind1(t.var, t.body, fvv, x)
        return Lam(var, t.ty, _subst(body, v, x, fvv), span=t.span)
    if isinstance(t, App):
        return App(_subst(t.fn, v, x, fvv), _subst(t.arg, v, x, fvv), span=t.span)
    if isinstance(t, Seq):
        return Seq(_subst(t.first, v, x, fvv), _subst(t.second, v, x, fvv), span=t.span)
    if isinstance(t, TensorIntro):
        return TensorIntro(_subst(t.left, v, x, fvv), _subst(t.right, v, x, fvv), span=t.span)
    if isinstance(t, LetTensor):
        bound = _subst(t.bound, v, x, fvv)
        if x in (t.x, t.y) or x not in fv(t.body):
            return LetTensor(t.x, t.y, bound, t.body, span=t.span)
        a, body = _rebind1(t.x, t.body, fvv | {t.y}, x)
        b, body = _rebind1(t.y, body, fvv | {a}, x)
        return LetTensor(a, b, bound, _subst(body, v, x, fvv), span=t.span)
    if isinstance(t, Match):
        scrut = _subst(t.scrut, v, x, fvv)
        if t.x != x:
            a, left = _rebind1(t.x, t.left, fvv, x)
            left = _subst(left, v, x, fvv)
        else:
            a, left = t.x, t.left
        if t.y != x:
            b, right = _rebind1(t.y, t.right, fvv, x)
            right = _subst(right, v, x, fvv)
        else:
            b, right = t.y, t.right
        return Match(scrut, a, left, b, right, span=t.span)
    if isinstance(t, Bang):
        return Bang(_subst(t.body, v, x, fvv), t.alpha, span=t.span)
    raise TypeError(t)


def _rebind1(var, body, fvv, x):
    """Rename binder ``var`` in ``body`` if it would capture a name of ``fvv``."""
    if var in fvv and x in fv(body):
        new = fresh_name(var, fvv | fv(body) | {x} | all_names(body))
        return new, _subst(body, Var(new), var, frozenset([new]))
    return var, body


def rename_free(t: Term, mapping: dict) -> Term:
    """Rename free variables simultaneously (targets must be fresh)."""
    for old, new in mapping.items():
        t = subst_term(t, Var(new), old)
    return t


# ------------------------------------------------------------------ values

def is_value(t: Term) -> bool:
    """Values: x, lam, (), v (*) w, inl v, inr v, !t, fold v, constants."""
    if isinstance(t, (Var, StoreRef, Lam, Unit, Bang) + CONSTANTS):
        return True
    if isinstance(t, TensorIntro):
        return is_value(t.left) and is_value(t.right)
    if isinstance(t, App) and isinstance(t.fn, (Inl, Inr, Fold)):
        return is_value(t.arg)
    return False


def is_final(t: Term) -> bool:
    """A value with no bang left to allocate in evaluation position."""
    if isinstance(t, Bang):
        return False
    if isinstance(t, (Var, StoreRef, Lam, Unit) + CONSTANTS):
        return True
    if isinstance(t, TensorIntro):
        return is_final(t.left) and is_final(t.right)
    if isinstance(t, App) and isinstance(t.fn, (Inl, Inr, Fold)):
        return is_final(t.arg)
    return False


def is_finitary(t: Term) -> bool:
    if isinstance(t, Bang) and t.alpha is INF:
        return False
    return all(is_finitary(c) for c in children(t))


def annotate(t: Term, k: int) -> Term:
    """Replace every infinite bang annotation by ``k``."""
    if isinstance(t, Bang):
        return Bang(annotate(t.body, k), k if t.alpha is INF else t.alpha, span=t.span)
    if isinstance(t, Lam):
        return Lam(t.var, t.ty, annotate(t.body, k), span=t.span)
    if isinstance(t, App):
        return App(annotate(t.fn, k), annotate(t.arg, k), span=t.span)
    if isinstance(t, Seq):
        return Seq(annotate(t.first, k), annotate(t.second, k), span=t.span)
    if isinstance(t, TensorIntro):
        return TensorIntro(annotate(t.left, k), annotate(t.right, k), span=t.span)
    if isinstance(t, LetTensor):
        return LetTensor(t.x, t.y, annotate(t.bound, k), annotate(t.body, k), span=t.span)
    if isinstance(t, Match):
        return Match(annotate(t.scrut, k), t.x, annotate(t.left, k), t.y,
                     annotate(t.right, k), span=t.span)
    return t


def max_annotation(t: Term) -> int:
    best = 0
    if isinstance(t, Bang):
        if t.alpha is INF:
            raise InfiniteAnnotation("term has an infinite bang")
        best = t.alpha
    return max([best] + [max_annotation(c) for c in children(t)])


# -------------------------------------------------------------------- size

# Leaves weigh 1 except `new` and `meas` (2) and store references (0); see
# the decisions ledger: with these weights every finitary reduction step
# strictly lowers size(term) + sum of k*(size(body)+1) over the store.
def size(t: Term) -> int:
    if isinstance(t, Bang):
        if t.alpha is INF:
            raise InfiniteAnnotation("size is only defined for finitary terms")
        return 1 + t.alpha * (size(t.body) + 1)
    if isinstance(t, StoreRef):
        return 0
    if isinstance(t, (Ket0, Meas)):
        return 2
    kids = children(t)
    return 1 + sum(size(c) for c in kids)


# ============================================================ derived forms

def let_in(x: str, ty: Type, bound: Term, body: Term) -> Term:
    return App(Lam(x, ty, body), bound)


def desugar_fix(f: str, a: Type, b: Type, body: Term) -> Term:
    """Closed term of type !(A -o B) unrolling ``body`` through a mu type.

    ``body`` must be ``bang lam x:A. t`` and may use ``f : !(A -o B)``.
    """
    if not (isinstance(body, Bang) and isinstance(body.body, Lam)):
        raise ShapeError("fix body must have the shape bang lam x:A. t")
    fun = TLolli(a, b)
    x = fresh_tyvar("X", ftv(a) | ftv(b))
    T = TMu(x, TLolli(TBang(TVar(x)), TBang(fun)))
    y = fresh_name("y", fv(body) | all_names(body) | {f})
    unroll = Bang(App(Der(TBang(fun)),
                      App(App(Unfold(T), App(Der(TBang(T)), Var(y))), Var(y))))
    g = Lam(y, TBang(T), App(Lam(f, TBang(fun), body), unroll))
    return App(g, Bang(App(Fold(T), g)))


def omega_type(a: Type) -> TMu:
    x = fresh_tyvar("X", ftv(a))
    return TMu(x, TLolli(TBang(TVar(x)), a))


def omega_body(a: Type) -> Term:
    """``fold (lam y. (unfold (der y)) y)``, the self-applied loop body."""
    T = omega_type(a)
    lam = Lam("y", TBang(T), App(App(Unfold(T), App(Der(TBang(T)), Var("y"))), Var("y")))
    return App(Fold(T), lam)


def diverge(a: Type = UNIT, alpha=INF) -> Term:
    """A closed term of type ``a`` whose reduction never reaches a value."""
    T = omega_type(a)
    w = omega_body(a)
    return App(App(Unfold(T), w), Bang(w, alpha))


# =================================================================== printer

def pretty_type(a: Type, prec: int = 0) -> str:
    def par(s, p):
        return f"({s})" if prec > p else s

    if isinstance(a, TQubit):
        return "qubit"
    if isinstance(a, TUnit):
        return "unit"
    if isinstance(a, TVar):
        return a.name
    if isinstance(a, TLolli):
        return par(f"{pretty_type(a.a, 1)} -o {pretty_type(a.b, 0)}", 0)
    if isinstance(a, TMu):
        return par(f"u{a.var}. {pretty_type(a.body, 0)}", 0)
    if isinstance(a, TSum):
        return par(f"{pretty_type(a.a, 2)} + {pretty_type(a.b, 1)}", 1)
    if isinstance(a, TTensor):
        return par(f"{pretty_type(a.a, 3)} (*) {pretty_type(a.b, 2)}", 2)
    if isinstance(a, TBang):
        return par(f"!{pretty_type(a.a, 3)}", 3)
    raise TypeError(a)


def pretty(t: Term, prec: int = 0) -> str:
    def par(s, p):
        return f"({s})" if prec > p else s

    if isinstance(t, (Var, StoreRef)):
        return t.name
    if isinstance(t, Unit):
        return "()"
    if isinstance(t, Ket0):
        return "new"
    if isinstance(t, Meas):
        return "meas"
    if isinstance(t, Inl):
        return f"inl[{pretty_type(t.ty)}]"
    if isinstance(t, Inr):
        return f"inr[{pretty_type(t.ty)}]"
    if isinstance(t, Der):
        return f"der[{pretty_type(t.ty)}]"
    if isinstance(t, Fold):
        return f"fold[{pretty_type(t.ty)}]"
    if isinstance(t, Unfold):
        return f"unfold[{pretty_type(t.ty)}]"
    if isinstance(t, Unitary):
        if t.name and t.name in GATES and unitary(t.name).matrix == t.matrix:
            return f"U[{t.name}]"
        return "U[" + repr([list(r) for r in t.matrix]) + "]"
    if isinstance(t, Lam):
        return par(f"lam {t.var}:{pretty_type(t.ty)}. {pretty(t.body, 0)}", 0)
    if isinstance(t, LetTensor):
        return par(f"let {t.x} (*) {t.y} = {pretty(t.bound, 0)} in {pretty(t.body, 0)}", 0)
    if isinstance(t, Match):
        return par(f"match {pretty(t.scrut, 0)} with inl {t.x} -> {pretty(t.left, 0)}"
                   f" | inr {t.y} -> {pretty(t.right, 0)}", 0)
    if isinstance(t, Seq):
        return par(f"{pretty(t.first, 1)}; {pretty(t.second, 0)}", 0)
    if isinstance(t, TensorIntro):
        return par(f"{pretty(t.left, 2)} (*) {pretty(t.right, 1)}", 1)
    if isinstance(t, Bang):
        ann = "" if t.alpha is INF else f"[{t.alpha}]"
        return par(f"bang{ann} {pretty(t.body, 2)}", 1)
    if isinstance(t, App):
        return par(f"{pretty(t.fn, 2)} {pretty(t.arg, 3)}", 2)
    raise TypeError(t)


# ==================================================================== parser

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<sym>\(\*\)|;;|-o|->|[()\[\]\.:;|+!=^,])
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
""", re.VERBOSE)

KEYWORDS = {"lam", "let", "in", "match", "with", "inl", "inr", "bang", "der",
            "fold", "unfold", "new", "meas", "U", "fix", "diverge", "type",
            "def", "qubit", "unit"}


@dataclass
class Tok:
    kind: str  # sym | num | ident | eof
    text: str
    line: int
    col: int
    pos: int


class Parser:
    def __init__(self, src: str):
        self.src = src
        self.pos = 0
        self.line = 1
        self.col = 1
        self._peek = None
        self.aliases: dict = {}
        self.defs: dict = {}

    # -- lexing
    def _lex(self) -> Tok:
        while True:
            if self.pos >= len(self.src):
                return Tok("eof", "", self.line, self.col, self.pos)
            m = _TOKEN_RE.match(self.src, self.pos)
            if not m:
                raise QSyntaxError(self.line, self.col, "a token", self.src[self.pos])
            kind = m.lastgroup
            text = m.group()
            tok = Tok(kind, text, self.line, self.col, self.pos)
            self.pos = m.end()
            if kind == "nl":
                self.line += 1
                self.col = 1
                continue
            self.col += len(text)
            if kind in ("ws", "comment"):
                continue
            return tok

    def peek(self) -> Tok:
        if self._peek is None:
            self._peek = self._lex()
        return self._peek

    def next(self) -> Tok:
        t = self.peek()
        self._peek = None
        return t

    def at(self, text) -> bool:
        t = self.peek()
        return t.kind in ("sym", "ident") and t.text == text

    def expect(self, text, what=None) -> Tok:
        t = self.peek()
        if not self.at(text):
            raise QSyntaxError(t.line, t.col, what or repr(text), t.text or "end of input")
        return self.next()

    def ident(self, what="an identifier") -> Tok:
        t = self.peek()
        if t.kind != "ident" or t.text in KEYWORDS:
            raise QSyntaxError(t.line, t.col, what, t.text or "end of input")
        return self.next()

    def raw_bracket(self) -> str:
        """Raw text of a balanced ``[...]`` starting at the current position."""
        assert self._peek is None
        start = self.pos
        while start < len(self.src) and self.src[start] in " \t\r\n":
            start += 1
        if start >= len(self.src) or self.src[start] != "[":
            raise QSyntaxError(self.line, self.col, "'['")
        depth = 0
        i = start
        while i < len(self.src):
            if self.src[i] == "[":
                depth += 1
            elif self.src[i] == "]":
                depth -= 1
                if depth == 0:
                    break
            i += 1
        else:
            raise QSyntaxError(self.line, self.col, "']'", "end of input")
        text = self.src[start:i + 1]
        for ch in self.src[self.pos:i + 1]:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos = i + 1
        return text

    # -- types
    def type_(self, bound=()):
        left = self.sum_type(bound)
        if self.at("-o"):
            self.next()
            return TLolli(left, self.type_(bound))
        return left

    def sum_type(self, bound):
        left = self.tensor_type(bound)
        if self.at("+"):
            self.next()
            return TSum(left, self.sum_type(bound))
        return left

    def tensor_type(self, bound):
        left = self.prefix_type(bound)
        if self.at("(*)"):
            self.next()
            return TTensor(left, self.tensor_type(bound))
        return left

    def prefix_type(self, bound):
        t = self.peek()
        if self.at("!"):
            self.next()
            return TBang(self.prefix_type(bound))
        if (t.kind == "ident" and len(t.text) > 1 and t.text[0] == "u"
                and t.text[1].isupper()):
            self.next()
            self.expect(".", "'.' after mu binder")
            var = t.text[1:]
            return TMu(var, self.type_(bound + (var,)))
        return self.atom_type(bound)

    def atom_type(self, bound):
        t = self.peek()
        if self.at("("):
            self.next()
            a = self.type_(bound)
            self.expect(")")
            return a
        if t.kind == "ident":
            self.next()
            if t.text == "qubit":
                if self.at("^"):
                    self.next()
                    n = self.peek()
                    if n.kind != "num" or int(n.text) < 1:
                        raise QSyntaxError(n.line, n.col, "a positive qubit count", n.text)
                    self.next()
                    return qubits(int(n.text))
                return QUBIT
            if t.text == "unit":
                return UNIT
            if t.text in KEYWORDS:
                raise QSyntaxError(t.line, t.col, "a type", t.text)
            if t.text not in bound and t.text in self.aliases:
                return self.aliases[t.text]
            return TVar(t.text)
        raise QSyntaxError(t.line, t.col, "a type", t.text or "end of input")

    def bracket_type(self):
        self.expect("[")
        a = self.type_()
        self.expect("]")
        return a

    # -- terms
    def term(self, scope=frozenset()):
        t = self.peek()
        sp = (t.line, t.col)
        if self.at("lam"):
            self.next()
            x = self.ident("a variable").text
            self.expect(":")
            ty = self.type_()
            self.expect(".")
            return Lam(x, ty, self.term(scope | {x}), span=sp)
        if self.at("let"):
            self.next()
            x = self.ident("a variable").text
            if self.at(":"):
                self.next()
                ty = self.type_()
                self.expect("=")
                bound = self.term(scope)
                self.expect("in")
                body = self.term(scope | {x})
                return App(Lam(x, ty, body, span=sp), bound, span=sp)
            self.expect("(*)", "'(*)' or ':'")
            y = self.ident("a variable").text
            self.expect("=")
            bound = self.term(scope)
            self.expect("in")
            return LetTensor(x, y, bound, self.term(scope | {x, y}), span=sp)
        if self.at("match"):
            self.next()
            scrut = self.term(scope)
            self.expect("with")
            self.expect("inl")
            x = self.ident("a variable").text
            self.expect("->")
            left = self.term(scope | {x})
            self.expect("|")
            self.expect("inr")
            y = self.ident("a variable").text
            self.expect("->")
            right = self.term(scope | {y})
            return Match(scrut, x, left, y, right, span=sp)
        if self.at("fix"):
            self.next()
            f = self.ident("a variable").text
            self.expect(":")
            ty = self.type_()
            if not isinstance(ty, TLolli):
                raise QSyntaxError(sp[0], sp[1], "a function type A -o B after fix")
            self.expect(".")
            body = self.term(scope | {f})
            try:
                return desugar_fix(f, ty.a, ty.b, body)
            except ShapeError:
                raise QSyntaxError(sp[0], sp[1], "fix body of the form bang lam x:A. t")
        first = self.tensor_term(scope)
        if self.at(";"):
            self.next()
            return Seq(first, self.term(scope), span=sp)
        return first

    def tensor_term(self, scope):
        t = self.peek()
        left = self.bang_or_app(scope)
        if self.at("(*)"):
            self.next()
            return TensorIntro(left, self.tensor_term(scope), span=(t.line, t.col))
        return left

    def bang_or_app(self, scope):
        t = self.peek()
        if self.at("bang"):
            self.next()
            alpha = INF
            if self.at("["):
                self.next()
                n = self.peek()
                if n.kind != "num":
                    raise QSyntaxError(n.line, n.col, "a bang annotation", n.text)
                self.next()
                alpha = int(n.text)
                self.expect("]")
            if self.peek().text in ("lam", "let", "match", "fix") and self.peek().kind == "ident":
                body = self.term(scope)
            else:
                body = self.bang_or_app(scope)
            return Bang(body, alpha, span=(t.line, t.col))
        return self.app(scope)

    _ATOM_START = {"(", "new", "meas", "U", "inl", "inr", "der", "fold", "unfold", "diverge"}

    def starts_atom(self):
        t = self.peek()
        if t.kind == "sym":
            return t.text == "("
        if t.kind == "ident":
            return t.text in self._ATOM_START or t.text not in KEYWORDS
        return False

    def app(self, scope):
        t0 = self.peek()
        f = self.atom(scope)
        while self.starts_atom():
            f = App(f, self.atom(scope), span=(t0.line, t0.col))
        return f

    def atom(self, scope):
        t = self.peek()
        sp = (t.line, t.col)
        if self.at("("):
            self.next()
            if self.at(")"):
                self.next()
                return Unit(span=sp)
            inner = self.term(scope)
            self.expect(")")
            return inner
        if t.kind != "ident":
            raise QSyntaxError(t.line, t.col, "a term", t.text or "end of input")
        word = t.text
        if word == "new":
            self.next()
            return Ket0(span=sp)
        if word == "meas":
            self.next()
            return Meas(span=sp)
        if word in ("inl", "inr", "der", "fold", "unfold"):
            self.next()
            ty = self.bracket_type()
            return {"inl": Inl, "inr": Inr, "der": Der, "fold": Fold, "unfold": Unfold}[word](ty, span=sp)
        if word == "diverge":
            self.next()
            ty = UNIT
            if self.at("["):
                ty = self.bracket_type()
            return diverge(ty)
        if word == "U":
            self.next()
            raw = self.raw_bracket()
            inner = raw[1:-1].strip()
            if re.fullmatch(r"[A-Za-z]+", inner):
                if inner not in GATES:
                    raise QSyntaxError(sp[0], sp[1], f"a known gate name, one of {sorted(GATES)}", inner)
                return Unitary(inner, unitary(inner).matrix, span=sp)
            try:
                mat = ast.literal_eval(inner)
                u = unitary(np.array(mat, dtype=complex))
            except Exception:
                raise QSyntaxError(sp[0], sp[1], "a unitary matrix literal", inner)
            return Unitary("", u.matrix, span=sp)
        if word in KEYWORDS:
            raise QSyntaxError(t.line, t.col, "a term", word)
        self.next()
        if word not in scope and word in self.defs:
            return self.defs[word]
        return Var(word, span=sp)

    # -- files
    def program(self):
        while True:
            if self.at("type"):
                self.next()
                name = self.ident("a type name").text
                self.expect("=")
                self.aliases[name] = self.type_()
                self.expect(";;")
            elif self.at("def"):
                self.next()
                tok = self.ident("a definition name")
                self.expect("=")
                body = self.term()
                self.expect(";;")
                if fv(body):
                    raise QSyntaxError(tok.line, tok.col, "a closed definition",
                                       ", ".join(sorted(fv(body))))
                self.defs[tok.text] = body
            else:
                break
        t = self.term()
        end = self.peek()
        if end.kind != "eof":
            raise QSyntaxError(end.line, end.col, "end of input", end.text)
        return t


def parse(source: str) -> Term:
    return Parser(source).program()


def parse_type(source: str) -> Type:
    p = Parser(source)
    a = p.type_()
    end = p.peek()
    if end.kind != "eof":
        raise QSyntaxError(end.line, end.col, "end of type", end.text)
    return a


def parse_with_defs(source: str):
    """Program term together with its closed definitions by name."""
    p = Parser(source)
    t = p.program()
    return t, dict(p.defs)
