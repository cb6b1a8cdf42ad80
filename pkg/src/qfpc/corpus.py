"""Shipped example programs and a typed random program generator.

The generator builds closed programs of type ``unit`` top-down while
tracking which linear qubit names are still owed, so every output
typechecks by construction (and is re-checked anyway). Bangs are always
annotated, so generated programs are finitary.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional

import numpy as np

from .syntax import (QUBIT, UNIT, App, Bang, Der, Lam, LetTensor, Match, Meas,
                     Ket0, Seq, TBang, TLolli, TensorIntro, Term, Unit, Var,
                     parse, unitary)
from .typecheck import check_program

ONE_QUBIT = ("H", "X", "Z", "S", "T")
EXHAUSTED = "der[!unit] (bang[0] ())"


# ----------------------------------------------------------------- shipped

def program_names() -> List[str]:
    files = resources.files("qfpc") / "programs"
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".qfpc"))


def program_source(name: str) -> str:
    return (resources.files("qfpc") / "programs" / f"{name}.qfpc").read_text()


def program_path(name: str) -> str:
    return str(resources.files("qfpc") / "programs" / f"{name}.qfpc")


def load_program(name: str) -> Term:
    return parse(program_source(name))


def program_settings(source: str) -> Dict[str, int]:
    """Integer ``key=value`` pairs from ``# qfpc:`` header comments.

    Shipped programs use these to record truncation settings (``approx``,
    ``bang-len``, ``mu-depth``) that keep their denotation tractable.
    """
    out: Dict[str, int] = {}
    for line in source.splitlines():
        line = line.strip()
        if not line.startswith("#"):
            if line:
                break
            continue
        body = line.lstrip("#").strip()
        if not body.startswith("qfpc:"):
            continue
        for item in body[5:].split():
            key, _, val = item.partition("=")
            out[key] = int(val)
    return out


# --------------------------------------------------------------- generator

@dataclass
class GenConfig:
    depth: int = 4
    max_annotation: int = 2
    max_qubits: int = 3
    p_bang: float = 0.25
    p_exhausted: float = 0.1


QQ = TLolli(QUBIT, QUBIT)


@dataclass
class _Gen:
    rng: np.random.Generator
    cfg: GenConfig
    counter: int = 0
    fn_pool: List[str] = field(default_factory=list)
    unit_pool: List[str] = field(default_factory=list)

    def fresh(self, base: str) -> str:
        self.counter += 1
        return f"{base}{self.counter}"

    def coin(self, p: float) -> bool:
        return bool(self.rng.random() < p)

    def pick(self, xs):
        return xs[int(self.rng.integers(len(xs)))]

    def gate(self) -> Term:
        return unitary(self.pick(ONE_QUBIT))

    # qubit-valued term consuming exactly ``owed`` (zero or one name)
    def qubit(self, owed: List[str], depth: int) -> Term:
        base = Var(owed[0]) if owed else Ket0()
        if depth <= 0:
            return base
        r = self.rng.random()
        if r < 0.35:
            return App(self.gate(), self.qubit(owed, depth - 1))
        if r < 0.5 and self.fn_pool:
            f = self.pick(self.fn_pool)
            return App(App(Der(TBang(QQ)), Var(f)), self.qubit(owed, depth - 1))
        if r < 0.6:
            x = self.fresh("x")
            return App(Lam(x, QUBIT, App(self.gate(), Var(x))), self.qubit(owed, depth - 1))
        return base

    def tail(self, owed: List[str], depth: int) -> Term:
        if not owed and self.coin(self.cfg.p_exhausted):
            return parse(EXHAUSTED)
        return self.unit(owed, depth)

    # unit-valued term consuming exactly ``owed``
    def unit(self, owed: List[str], depth: int) -> Term:
        if depth <= 0 or (not owed and self.coin(0.15)):
            if not owed:
                if self.unit_pool and self.coin(0.5):
                    return App(Der(TBang(UNIT)), Var(self.pick(self.unit_pool)))
                return Unit()
            return self.measure_all(owed)
        choices = ["meas", "seq", "alloc"]
        if len(owed) >= 2:
            choices.append("entangle")
        if self.coin(self.cfg.p_bang):
            choices.append("bang")
        kind = self.pick(choices)
        if kind == "alloc" and len(owed) >= self.cfg.max_qubits:
            kind = "meas"
        if kind == "meas":
            if owed and self.coin(0.8):
                take, rest = [owed[0]], owed[1:]
            else:
                take, rest = [], owed
            x, y = self.fresh("u"), self.fresh("v")
            q = self.qubit(take, depth - 1)
            left = Seq(Var(x), self.tail(rest, depth - 1))
            right = Seq(Var(y), self.tail(rest, depth - 1))
            return Match(App(Meas(), q), x, left, y, right)
        if kind == "seq":
            k = int(self.rng.integers(len(owed) + 1))
            return Seq(self.unit(owed[:k], depth - 1), self.unit(owed[k:], depth - 1))
        if kind == "alloc":
            q = self.fresh("q")
            body = self.unit(owed + [q], depth - 1)
            return App(Lam(q, QUBIT, body), self.qubit([], depth - 1))
        if kind == "entangle":
            a, b = owed[0], owed[1]
            a2, b2 = self.fresh("a"), self.fresh("b")
            pair = App(unitary("CNOT"), TensorIntro(self.qubit([a], 1), self.qubit([b], 1)))
            return LetTensor(a2, b2, pair, self.unit([a2, b2] + owed[2:], depth - 1))
        # bang
        k = int(self.rng.integers(self.cfg.max_annotation + 1))
        if self.coin(0.5):
            f = self.fresh("f")
            x = self.fresh("x")
            fn = Lam(x, QUBIT, self.qubit([x], 2))
            self.fn_pool.append(f)
            body = self.unit(owed, depth - 1)
            self.fn_pool.remove(f)
            return App(Lam(f, TBang(QQ), body), Bang(fn, k))
        c = self.fresh("c")
        inner = self.unit([], min(depth - 1, 2))
        self.unit_pool.append(c)
        body = self.unit(owed, depth - 1)
        self.unit_pool.remove(c)
        return App(Lam(c, TBang(UNIT), body), Bang(inner, k))

    def measure_all(self, owed: List[str]) -> Term:
        t: Term = Unit()
        for q in reversed(owed):
            x, y = self.fresh("u"), self.fresh("v")
            t = Match(App(Meas(), Var(q)), x, Seq(Var(x), t), y, Seq(Var(y), t))
        return t


def corpus_generate(seed: int = 0, count: int = 1, cfg: Optional[GenConfig] = None) -> List[Term]:
    """``count`` closed, finitary programs of type ``unit``."""
    cfg = cfg or GenConfig()
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        g = _Gen(rng, cfg)
        q = g.fresh("q")
        t = App(Lam(q, QUBIT, g.unit([q], cfg.depth)), g.qubit([], 2))
        check_program(t)
        out.append(t)
    return out
