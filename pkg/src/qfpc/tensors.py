"""Completely positive maps with named tensor legs.

A :class:`Ten` is a CP map between tensor products of named spaces. Each
leg ``(name, d, kind)`` owns two consecutive array axes (row, column) of
size ``d``; ``kind`` is ``'o'`` for outputs and ``'i'`` for inputs. The
natural matrix of a map with one output leg of dimension ``m`` and input
legs ``d1..dk`` is recovered by :meth:`Ten.liouville`.

Composition contracts an output leg of one map with the input leg of the
same name of another, which makes wiring of contexts a matter of naming.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np


class Ten:
    __slots__ = ("arr", "legs")

    def __init__(self, arr: np.ndarray, legs):
        self.arr = arr
        self.legs = tuple(legs)

    # -- construction
    @classmethod
    def from_superop(cls, S, out, ins):
        """``out = (name, m)``, ``ins = [(name, d), ...]`` big-endian."""
        name, m = out
        k = len(ins)
        dims = [d for _, d in ins]
        a = np.asarray(S).reshape([m, m] + dims + dims)
        order = [0, 1]
        for j in range(k):
            order += [2 + j, 2 + k + j]
        legs = [(name, m, "o")] + [(n, d, "i") for n, d in ins]
        return cls(a.transpose(order), legs)

    @classmethod
    def scalar(cls, x=1.0):
        return cls(np.full((1, 1), x, dtype=complex), [("@", 1, "o")])

    # -- inspection
    def leg(self, name, kind):
        for i, (n, d, k) in enumerate(self.legs):
            if n == name and k == kind:
                return i
        raise KeyError((name, kind))

    def ins(self):
        return [(n, d) for n, d, k in self.legs if k == "i"]

    def outs(self):
        return [(n, d) for n, d, k in self.legs if k == "o"]

    def liouville(self, out="@", ins: Sequence[str] = None):
        """Natural matrix with input legs in the order ``ins``."""
        if ins is None:
            ins = [n for n, _, k in self.legs if k == "i"]
        io = self.leg(out, "o")
        idx = [self.leg(n, "i") for n in ins]
        if len(idx) + 1 != len(self.legs):
            raise ValueError("legs left unaccounted for")
        order = [2 * io, 2 * io + 1] + [2 * i for i in idx] + [2 * i + 1 for i in idx]
        m = self.legs[io][1]
        D = math.prod(self.legs[i][1] for i in idx)
        return self.arr.transpose(order).reshape(m * m, D * D)

    def value(self) -> float:
        if self.arr.size != 1:
            raise ValueError("not a scalar")
        return float(self.arr.reshape(-1)[0].real)

    # -- rewiring
    def rename(self, mapping: dict, kind=None):
        legs = [(mapping.get(n, n) if kind in (None, k) else n, d, k) for n, d, k in self.legs]
        return Ten(self.arr, legs)

    def flip(self, name, to_kind):
        legs = []
        for n, d, k in self.legs:
            if n == name and k != to_kind:
                legs.append((n, d, to_kind))
            else:
                legs.append((n, d, k))
        return Ten(self.arr, legs)

    def add_unit_leg(self, name, kind="i"):
        return Ten(self.arr.reshape(self.arr.shape + (1, 1)), self.legs + ((name, 1, kind),))

    def drop_unit_leg(self, name, kind):
        i = self.leg(name, kind)
        if self.legs[i][1] != 1:
            raise ValueError("only dimension-one legs can be dropped")
        shape = self.arr.shape[:2 * i] + self.arr.shape[2 * i + 2:]
        return Ten(self.arr.reshape(shape), self.legs[:i] + self.legs[i + 1:])

    def merge(self, names: Sequence[str], new: str, kind="o"):
        """Fuse legs ``names`` (big-endian) into one leg, placed first."""
        idx = [self.leg(n, kind) for n in names]
        rest = [i for i in range(len(self.legs)) if i not in idx]
        order = [2 * i for i in idx] + [2 * i + 1 for i in idx]
        for i in rest:
            order += [2 * i, 2 * i + 1]
        D = math.prod(self.legs[i][1] for i in idx)
        a = self.arr.transpose(order)
        a = a.reshape((D, D) + a.shape[2 * len(idx):])
        return Ten(a, [(new, D, kind)] + [self.legs[i] for i in rest])

    def split(self, name: str, parts, kind="o"):
        """Inverse of :meth:`merge`; ``parts = [(name, d), ...]``."""
        i = self.leg(name, kind)
        dims = [d for _, d in parts]
        k = len(parts)
        a = self.arr
        pre, post = a.shape[:2 * i], a.shape[2 * i + 2:]
        a = a.reshape(pre + tuple(dims) + tuple(dims) + post)
        base = 2 * i
        order = list(range(base))
        for j in range(k):
            order += [base + j, base + k + j]
        order += list(range(base + 2 * k, a.ndim))
        legs = self.legs[:i] + tuple((n, d, kind) for n, d in parts) + self.legs[i + 1:]
        return Ten(a.transpose(order), legs)

    def reorder(self, legs_order):
        """Permute legs to the given ``[(name, kind), ...]`` order."""
        idx = [self.leg(n, k) for n, k in legs_order]
        order = []
        for i in idx:
            order += [2 * i, 2 * i + 1]
        return Ten(self.arr.transpose(order), [self.legs[i] for i in idx])

    def scale(self, r):
        return Ten(self.arr * r, self.legs)

    def __add__(self, other: "Ten"):
        if other.legs != self.legs:
            other = other.reorder([(n, k) for n, _, k in self.legs])
        return Ten(self.arr + other.arr, self.legs)


def contract(A: Ten, B: Ten) -> Ten:
    """Feed the outputs of ``B`` into the same-named inputs of ``A``."""
    a_in = {n: i for i, (n, d, k) in enumerate(A.legs) if k == "i"}
    labels_a = list(range(2 * len(A.legs)))
    nxt = len(labels_a)
    labels_b = []
    matched_a, matched_b = set(), set()
    for j, (n, d, k) in enumerate(B.legs):
        if k == "o" and n in a_in:
            i = a_in[n]
            if A.legs[i][1] != d:
                raise ValueError(f"dimension mismatch on leg {n}")
            labels_b += [labels_a[2 * i], labels_a[2 * i + 1]]
            matched_a.add(i)
            matched_b.add(j)
        else:
            labels_b += [nxt, nxt + 1]
            nxt += 2
    out_labels = []
    legs = []
    for i, leg in enumerate(A.legs):
        if i not in matched_a:
            out_labels += [labels_a[2 * i], labels_a[2 * i + 1]]
            legs.append(leg)
    for j, leg in enumerate(B.legs):
        if j not in matched_b:
            out_labels += [labels_b[2 * j], labels_b[2 * j + 1]]
            legs.append(leg)
    seen = {}
    for n, _, k in legs:
        if (n, k) in seen:
            raise ValueError(f"leg {n}/{k} would appear twice")
        seen[(n, k)] = True
    arr = np.einsum(A.arr, labels_a, B.arr, labels_b, out_labels)
    return Ten(arr, legs)
