"""Algorithmic checking of linear typing judgements.

Every variable whose type has the form ``!A`` is unrestricted; all other
variables are linear. Subterms report the linear names they consume and
parents check that sibling sets are disjoint (output-directed splitting).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

from .errors import (BangBodyUsesLinear, FreeTypeVariable, LinearVariableReused,
                     LinearVariableUnused, NotUnitType, TypeMismatch,
                     UnboundVariable)
from .syntax import (BOOL, QUBIT, UNIT, App, Bang, Der, Fold, Inl, Inr, Ket0,
                     Lam, LetTensor, Match, Meas, Seq, StoreRef, TBang, TLolli,
                     TMu, TSum, TTensor, TUnit, Term, TensorIntro, Type, Unfold,
                     Unit, Unitary, Var, ftv, pretty_type, qubits, types_equal,
                     unfold_mu)


@dataclass
class Context:
    bang_vars: Dict[str, Type] = field(default_factory=dict)
    lin_vars: Dict[str, Type] = field(default_factory=dict)

    def __post_init__(self):
        both = set(self.bang_vars) & set(self.lin_vars)
        if both:
            raise ValueError(f"names bound twice: {sorted(both)}")
        for name, a in list(self.bang_vars.items()) + list(self.lin_vars.items()):
            if ftv(a):
                raise FreeTypeVariable(f"type of {name} has free type variables")
        for name, a in self.bang_vars.items():
            if not isinstance(a, TBang):
                raise ValueError(f"bang variable {name} must have a !-type")

    @classmethod
    def of(cls, **types):
        """Split ``name=Type`` pairs by whether the type is a !-type."""
        bang = {k: v for k, v in types.items() if isinstance(v, TBang)}
        lin = {k: v for k, v in types.items() if not isinstance(v, TBang)}
        return cls(bang, lin)

    def env(self):
        e = {k: (v, True) for k, v in self.bang_vars.items()}
        e.update({k: (v, False) for k, v in self.lin_vars.items()})
        return e


def _show(a):
    return pretty_type(a) if not isinstance(a, str) else a


def _closed(a: Type, t: Term):
    if ftv(a):
        raise FreeTypeVariable(
            f"type {pretty_type(a)} has free type variables {sorted(ftv(a))}", t.span)


def _disjoint(u1, u2, t):
    both = u1 & u2
    if both:
        raise LinearVariableReused(
            f"linear variable(s) {', '.join(sorted(both))} used more than once", t.span)
    return u1 | u2


def constant_type(t: Term) -> Type:
    if isinstance(t, (Inl, Inr)):
        _closed(t.ty, t)
        if not isinstance(t.ty, TSum):
            raise TypeMismatch("a sum type A+B", _show(t.ty), t.span, "injection annotation")
        return TLolli(t.ty.a if isinstance(t, Inl) else t.ty.b, t.ty)
    if isinstance(t, Der):
        _closed(t.ty, t)
        if not isinstance(t.ty, TBang):
            raise TypeMismatch("a !-type", _show(t.ty), t.span, "der annotation")
        return TLolli(t.ty, t.ty.a)
    if isinstance(t, (Fold, Unfold)):
        _closed(t.ty, t)
        if not isinstance(t.ty, TMu):
            raise TypeMismatch("a recursive type uX.A", _show(t.ty), t.span, "fold annotation")
        un = unfold_mu(t.ty)
        return TLolli(un, t.ty) if isinstance(t, Fold) else TLolli(t.ty, un)
    if isinstance(t, Unitary):
        n = t.arity
        return TLolli(qubits(n), qubits(n))
    if isinstance(t, Meas):
        return TLolli(QUBIT, BOOL)
    raise TypeError(t)


def _tc(t: Term, env) -> Tuple[Type, frozenset]:
    if isinstance(t, (Var, StoreRef)):
        if t.name not in env:
            raise UnboundVariable(f"unbound variable {t.name}", t.span)
        a, is_bang = env[t.name]
        return a, frozenset() if is_bang else frozenset([t.name])
    if isinstance(t, Unit):
        return UNIT, frozenset()
    if isinstance(t, Ket0):
        return QUBIT, frozenset()
    if isinstance(t, (Inl, Inr, Der, Fold, Unfold, Unitary, Meas)):
        return constant_type(t), frozenset()
    if isinstance(t, Lam):
        _closed(t.ty, t)
        inner = dict(env)
        inner[t.var] = (t.ty, isinstance(t.ty, TBang))
        b, used = _tc(t.body, inner)
        if not isinstance(t.ty, TBang) and t.var not in used:
            raise LinearVariableUnused(f"linear variable {t.var} is never used", t.span)
        return TLolli(t.ty, b), used - {t.var}
    if isinstance(t, App):
        f, uf = _tc(t.fn, env)
        a, ua = _tc(t.arg, env)
        if not isinstance(f, TLolli):
            raise TypeMismatch("a function type", _show(f), t.span, "application")
        if not types_equal(f.a, a):
            raise TypeMismatch(_show(f.a), _show(a), t.span, "argument")
        return f.b, _disjoint(uf, ua, t)
    if isinstance(t, Seq):
        a, ua = _tc(t.first, env)
        if not isinstance(a, TUnit):
            raise TypeMismatch("unit", _show(a), t.span, "left of ';'")
        b, ub = _tc(t.second, env)
        return b, _disjoint(ua, ub, t)
    if isinstance(t, TensorIntro):
        a, ua = _tc(t.left, env)
        b, ub = _tc(t.right, env)
        return TTensor(a, b), _disjoint(ua, ub, t)
    if isinstance(t, LetTensor):
        s, us = _tc(t.bound, env)
        if not isinstance(s, TTensor):
            raise TypeMismatch("a tensor type", _show(s), t.span, "let (*)")
        if t.x == t.y:
            raise LinearVariableReused(f"pattern binds {t.x} twice", t.span)
        inner = dict(env)
        inner[t.x] = (s.a, isinstance(s.a, TBang))
        inner[t.y] = (s.b, isinstance(s.b, TBang))
        b, ub = _tc(t.body, inner)
        for name, ty in ((t.x, s.a), (t.y, s.b)):
            if not isinstance(ty, TBang) and name not in ub:
                raise LinearVariableUnused(f"linear variable {name} is never used", t.span)
        return b, _disjoint(us, ub - {t.x, t.y}, t)
    if isinstance(t, Match):
        s, us = _tc(t.scrut, env)
        if not isinstance(s, TSum):
            raise TypeMismatch("a sum type", _show(s), t.span, "match")
        left_env = dict(env)
        left_env[t.x] = (s.a, isinstance(s.a, TBang))
        right_env = dict(env)
        right_env[t.y] = (s.b, isinstance(s.b, TBang))
        a, ua = _tc(t.left, left_env)
        b, ub = _tc(t.right, right_env)
        if not isinstance(s.a, TBang) and t.x not in ua:
            raise LinearVariableUnused(f"linear variable {t.x} is never used", t.span)
        if not isinstance(s.b, TBang) and t.y not in ub:
            raise LinearVariableUnused(f"linear variable {t.y} is never used", t.span)
        if not types_equal(a, b):
            raise TypeMismatch(_show(a), _show(b), t.span, "match branches")
        ua, ub = ua - {t.x}, ub - {t.y}
        if ua != ub:
            odd = sorted(ua ^ ub)
            raise LinearVariableUnused(
                f"linear variable(s) {', '.join(odd)} used in only one match branch", t.span)
        return a, _disjoint(us, ua, t)
    if isinstance(t, Bang):
        a, ua = _tc(t.body, env)
        if ua:
            raise BangBodyUsesLinear(
                f"bang body uses linear variable(s) {', '.join(sorted(ua))}", t.span)
        return TBang(a), frozenset()
    raise TypeError(f"unknown term {t!r}")


def typecheck(ctx: Context, t: Term) -> Tuple[Type, frozenset]:
    """Type of ``t`` under ``ctx`` and the linear names it consumes."""
    return _tc(t, ctx.env())


def check_judgment(ctx: Context, t: Term) -> Type:
    """Like :func:`typecheck` but also demands every linear name is used."""
    a, used = typecheck(ctx, t)
    missing = set(ctx.lin_vars) - used
    if missing:
        raise LinearVariableUnused(
            f"linear variable(s) {', '.join(sorted(missing))} never used", t.span)
    return a


def type_of(t: Term) -> Type:
    """Type of a closed term."""
    return check_judgment(Context(), t)


def check_program(t: Term) -> bool:
    a = type_of(t)
    if not isinstance(a, TUnit):
        raise NotUnitType(f"a program must have type unit, found {pretty_type(a)}", t.span)
    return True


def closure_context(regs, store) -> Context:
    """Register names as qubits, store names with the types of their bodies."""
    bang = {}
    for entry in store:
        body_ty = check_judgment(Context(dict(bang), {}), entry.body)
        bang[entry.name] = TBang(body_ty)
    return Context(bang, {q: QUBIT for q in regs})
