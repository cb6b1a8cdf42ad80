"""End-to-end check of one program: typing, both engines and a step audit.

Infinitary programs are analysed through their annotated approximant
``annotate(t, k)``, which is finitary, so operational and denotational
values can be compared exactly. The unannotated program is still explored
and its upper bound must dominate the approximant's value.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

from .basis import Trunc
from .corpus import program_settings
from .denote import Denoter, interp_many, program_value
from .errors import TypeCheckError
from .operational import explore, initial_closure
from .syntax import annotate, is_finitary, max_annotation, parse
from .typecheck import check_program


@dataclass
class VerifyOptions:
    max_steps: int = 10000
    audit_steps: int = 200
    approx: Optional[int] = None
    bang_len: Optional[int] = None
    mu_depth: Optional[int] = None
    eps: float = 1e-9
    prune: float = 1e-12
    assume_diverges: bool = True


@dataclass
class OperationalPart:
    lower: float
    upper: float
    steps: int
    quiesced: bool
    # bounds for the unannotated program when an approximant was analysed
    source_lower: Optional[float] = None
    source_upper: Optional[float] = None


@dataclass
class DenotationalPart:
    value: float
    bang_len: int
    mu_depth: int
    converged: bool
    hits: List[str] = field(default_factory=list)


@dataclass
class AuditPart:
    steps: int
    max_deviation: float


@dataclass
class VerifyReport:
    program: str
    typecheck: str
    finitary: bool
    approx: Optional[int]
    operational: Optional[OperationalPart]
    denotational: Optional[DenotationalPart]
    audit: Optional[AuditPart]
    eps: float
    verdict: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "VerifyReport":
        d = json.loads(s)
        parts = {"operational": OperationalPart, "denotational": DenotationalPart,
                 "audit": AuditPart}
        for k, c in parts.items():
            if d.get(k) is not None:
                d[k] = c(**d[k])
        return cls(**d)

    def text(self) -> str:
        lines = [f"program      {self.program}", f"typecheck    {self.typecheck}"]
        if self.approx is not None:
            lines.append(f"approximant  k={self.approx}")
        o, d, a = self.operational, self.denotational, self.audit
        if o is not None:
            lines.append(f"operational  lower={o.lower:.12g} upper={o.upper:.12g} "
                         f"steps={o.steps} quiesced={o.quiesced}")
            if o.source_upper is not None:
                lines.append(f"unannotated  lower={o.source_lower:.12g} upper={o.source_upper:.12g}")
        if d is not None:
            lines.append(f"denotation   value={d.value:.12g} L={d.bang_len} D={d.mu_depth} "
                         f"converged={d.converged}")
        if a is not None:
            lines.append(f"audit        steps={a.steps} max_dev={a.max_deviation:.3g}")
        lines.append(f"verdict      {self.verdict}")
        return "\n".join(lines)


def soundness_audit(t, k_steps: int, denoter: Denoter, prune: float = 1e-12):
    """Max ``|interp(S) - sum_i interp(S_i)|`` over the first explored steps."""
    pairs = []
    explore(initial_closure(t), budget=k_steps, prune=prune,
            on_step=lambda S, res: pairs.append((S, res.branches)))
    closures, index = [], {}
    for S, kids in pairs:
        for c in (S, *kids):
            if id(c) not in index:
                index[id(c)] = len(closures)
                closures.append(c)
    vals = interp_many(closures, denoter=denoter)
    dev = 0.0
    for S, kids in pairs:
        total = sum(vals[index[id(c)]] for c in kids)
        dev = max(dev, abs(vals[index[id(S)]] - total))
    return len(pairs), dev


def verify_term(t, name: str = "<term>", opts: Optional[VerifyOptions] = None,
                settings: Optional[Dict[str, int]] = None) -> VerifyReport:
    opts = opts or VerifyOptions()
    settings = settings or {}
    try:
        check_program(t)
    except TypeCheckError as e:
        return VerifyReport(name, f"{type(e).__name__}: {e}", False, None, None, None, None,
                            opts.eps, "fail")
    fin = is_finitary(t)
    k = None
    tl = t
    if not fin:
        k = opts.approx if opts.approx is not None else settings.get("approx", 3)
        tl = annotate(t, k)
    L = opts.bang_len if opts.bang_len is not None else settings.get(
        "bang-len", max(1, max_annotation(tl)))
    D = opts.mu_depth if opts.mu_depth is not None else settings.get("mu-depth", 8)

    r = explore(initial_closure(tl), budget=opts.max_steps, prune=opts.prune)
    op = OperationalPart(r.lower, r.upper, r.steps, r.quiesced)
    if not fin:
        rs = explore(initial_closure(t), budget=opts.max_steps, prune=opts.prune,
                     assume_diverges=opts.assume_diverges)
        op.source_lower, op.source_upper = rs.lower, rs.upper

    den = Denoter(Trunc(L, D))
    value = program_value(tl, denoter=den)
    dp = DenotationalPart(value, L, D, not den.hits, sorted(den.hits))
    n, dev = soundness_audit(tl, opts.audit_steps, den, opts.prune)
    ap = AuditPart(n, dev)

    return VerifyReport(name, "ok", fin, k, op, dp, ap, opts.eps, verdict(op, dp, ap, opts.eps))


def verdict(op: OperationalPart, dp: DenotationalPart, ap: AuditPart, eps: float) -> str:
    """``pass`` iff lower <= value <= upper and the audit stayed within ``eps``."""
    ok = op.lower <= dp.value + eps and dp.value <= op.upper + eps and ap.max_deviation <= eps
    if op.source_upper is not None:
        ok = ok and dp.value <= op.source_upper + eps
    return "pass" if ok else "fail"


def cmd_verify(path: str, opts: Optional[VerifyOptions] = None) -> VerifyReport:
    """Verify the program stored at ``path``.

    Raises ``OSError`` when the file cannot be read and
    :class:`~qfpc.errors.SyntaxError` when it does not parse.
    """
    with open(path) as f:
        src = f.read()
    t = parse(src)
    name = os.path.splitext(os.path.basename(path))[0]
    return verify_term(t, name, opts, program_settings(src))
