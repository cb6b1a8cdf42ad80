"""Entrywise checks of the algebraic laws the matrix calculus must satisfy.

Each function returns a max-entry error so callers can compare against a
tolerance of their choosing.
"""
from __future__ import annotations

from typing import Dict, List

from . import basis as B
from .basis import Trunc, enumerate_basis, idempotent
from .cpm import ChoiMap
from .denote import denote
from .matrix import (MorphMatrix, bang_m, cod_support, compose_m, contraction, dereliction,
                     identity, max_distance, proj_len, reassociate, symmetry, tensor_m,
                     unitor_l, unitor_r, weakening)
from .syntax import QUBIT, UNIT, TBang, TSum, Type, parse


def comonoid_law_errors(a: Type, tr: Trunc) -> Dict[str, float]:
    """Counit, coassociativity, cocommutativity and dereliction at ``!a``."""
    ba = TBang(a)
    d = contraction(a, tr)
    I = identity(ba, tr)
    u = weakening(a, tr)
    dom = cod_support(d)
    out = {}
    lhs = compose_m(unitor_l(ba, tr), compose_m(tensor_m(u, I, dom), d))
    rhs = compose_m(unitor_r(ba, tr), compose_m(tensor_m(I, u, dom), d))
    out["counit_left"] = max_distance(lhs, I)
    out["counit_right"] = max_distance(rhs, I)
    left = reassociate(compose_m(tensor_m(d, I, dom), d))
    right = compose_m(tensor_m(I, d, dom), d)
    out["coassociativity"] = max_distance(left, right)
    out["cocommutativity"] = max_distance(compose_m(symmetry(ba, ba, tr, dom), d), d)
    der = dereliction(a, tr)
    for alpha in range(tr.bang_len):
        lhs = compose_m(tensor_m(der, I, dom), compose_m(d, proj_len(a, alpha + 1, tr)))
        rhs = compose_m(tensor_m(der, proj_len(a, alpha, tr), dom), d)
        out[f"dereliction_{alpha}"] = max_distance(lhs, rhs)
    out["bang_identity"] = max_distance(bang_m(identity(a, tr)), I)
    return out


def orthogonality_error(a: Type, tr: Trunc) -> float:
    """``<a'|a>`` must vanish for ``a != a'`` and be idempotent for ``a = a'``."""
    pts = enumerate_basis(a, tr)
    err = 0.0
    for p in pts:
        E = ChoiMap.from_superop(idempotent(p), B.dim(p), B.dim(p))
        ket = MorphMatrix(None, a, {(p, p): E}, tr)
        for q in pts:
            F = ChoiMap.from_superop(idempotent(q), B.dim(q), B.dim(q))
            bra = MorphMatrix(a, None, {(q, q): F}, tr)
            m = compose_m(bra, ket)
            if p != q:
                err = max(err, max((float(abs(e.superop).max()) for e in m.entries.values()),
                                   default=0.0))
            else:
                S = m.entries[(p, p)].superop
                err = max(err, float(abs(S @ S - S).max()), float(abs(S - E.superop).max()))
    return err


def resolution_error(m: MorphMatrix) -> float:
    """``sum_b |b><b|`` composed on either side must leave ``m`` unchanged."""
    tr = m.trunc
    err = 0.0
    if m.cod_type is not None:
        err = max(err, max_distance(compose_m(identity(m.cod_type, tr), m), m))
    if m.dom_type is not None:
        err = max(err, max_distance(compose_m(m, identity(m.dom_type, tr)), m))
    return err


def sample_denotations(tr: Trunc) -> List[MorphMatrix]:
    """A small corpus of denotations over qubit, bool and bang types."""
    bool_t = TSum(UNIT, UNIT)
    out = [
        denote(parse("meas (U[H] x)"), {"x": QUBIT}, tr),
        denote(parse("U[CNOT] (x (*) y)"), {"x": QUBIT, "y": QUBIT}, tr),
        denote(parse("der[!qubit] c"), {"c": TBang(QUBIT)}, tr),
        denote(parse("match b with inl u -> inr[unit + unit] u | inr v -> inl[unit + unit] v"),
               {"b": bool_t}, tr),
        denote(parse("bang (der[!(unit + unit)] c)"), {"c": TBang(bool_t)}, tr),
        denote(parse("lam x:qubit. U[H] x"), {}, tr),
        contraction(QUBIT, tr),
        dereliction(bool_t, tr),
        bang_m(denote(parse("meas x"), {"x": QUBIT}, tr)),
    ]
    return out
