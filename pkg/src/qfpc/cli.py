"""``qfpc`` command line.

Exit codes: 0 success, 1 domain failure (ill-typed program, failed
verification, numerical error), 2 usage error (bad flags, missing file).
A FILE argument that does not exist but names a shipped program by its
stem (``examples/coin.qfpc`` -> ``coin``) falls back to that program.
"""
from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from . import corpus
from .basis import Trunc
from .cpm import ChoiMap, matrix_from_json, operator_norm
from .denote import Denoter, denote, program_value
from .errors import QFPCError, TypeCheckError
from .operational import explore, initial_closure
from .syntax import (App, TLolli, max_annotation, parse_type, parse_with_defs, pretty,
                     types_equal, Var)
from .typecheck import type_of
from .verify import VerifyOptions, verify_term


def _emit(ctx, payload: dict, text: str):
    if ctx.obj["json"]:
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        click.echo(text)


def _resolve(path: str) -> str:
    if os.path.exists(path):
        return path
    stem = os.path.splitext(os.path.basename(path))[0]
    if stem in corpus.program_names():
        click.echo(f"note: {path} not found, using shipped program {stem}", err=True)
        return corpus.program_path(stem)
    raise click.BadParameter(f"file {path!r} does not exist", param_hint="FILE")


def _load(ctx, path: str):
    path = _resolve(path)
    with open(path) as f:
        src = f.read()
    try:
        term, defs = parse_with_defs(src)
    except QFPCError as e:
        _fail(ctx, e, path)
    return path, src, term, defs


def _fail(ctx, err: Exception, path: str = ""):
    span = getattr(err, "span", None)
    where = path + (f":{span[0]}:{span[1]}" if span else "")
    payload = {"ok": False, "error": type(err).__name__, "message": str(err), "file": path,
               "span": list(span) if span else None}
    if ctx.obj["json"]:
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        click.echo(f"{where}: {type(err).__name__}: {err}", err=True)
    ctx.exit(1)


def _json_flag(f):
    return click.option("--json", "json_", is_flag=True, help="Machine-readable output.")(f)


def _set_json(ctx, json_, seed=None):
    if json_:
        ctx.obj["json"] = True
    if seed is not None:
        ctx.obj["seed"] = seed


def _seed_flag(f):
    return click.option("--seed", type=int, default=None, help="Overrides the global seed.")(f)


@click.group()
@click.option("--json", "json_", is_flag=True, help="Machine-readable output for every command.")
@click.option("--eps", type=float, default=1e-9, show_default=True, help="Numerical tolerance.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def main(ctx, json_, eps, seed):
    """Quantum FPC interpreter, denotational evaluator and verifier."""
    ctx.ensure_object(dict)
    ctx.obj.update(json=json_, eps=eps, seed=seed)


@main.command()
@click.argument("file")
@_json_flag
@click.pass_context
def check(ctx, file, json_):
    """Typecheck a closed program of type unit."""
    _set_json(ctx, json_)
    path, _, term, _ = _load(ctx, file)
    try:
        ty = type_of(term)
        if not types_equal(ty, parse_type("unit")):
            from .errors import NotUnitType
            raise NotUnitType(f"program has type {ty}, expected unit")
    except (TypeCheckError, QFPCError) as e:
        _fail(ctx, e, path)
    _emit(ctx, {"ok": True, "file": path, "type": str(ty)}, f"{path}: ok : {ty}")


@main.command()
@click.argument("file")
@click.option("--max-steps", type=int, default=1000, show_default=True)
@click.option("--prune", type=float, default=1e-12, show_default=True)
@click.option("--trace", is_flag=True, help="Print step records as JSON.")
@click.option("--assume-diverges", is_flag=True,
              help="Count known-divergent closures as zero instead of frontier mass.")
@_json_flag
@click.pass_context
def run(ctx, file, max_steps, prune, trace, assume_diverges, json_):
    """Explore the reduction tree and report termination bounds."""
    _set_json(ctx, json_)
    path, _, term, _ = _load(ctx, file)
    try:
        type_of(term)
        r = explore(initial_closure(term), budget=max_steps, prune=prune,
                    record_trace=trace, assume_diverges=assume_diverges)
    except QFPCError as e:
        _fail(ctx, e, path)
    payload = {"file": path, "lower": r.lower, "upper": r.upper, "steps": r.steps,
               "quiesced": r.quiesced, "zero_mass": r.zero_mass,
               "frontier_mass": r.frontier_mass, "leaves": r.leaves}
    text = (f"lower {r.lower:.12g}\nupper {r.upper:.12g}\nsteps {r.steps}\n"
            f"quiesced {r.quiesced}")
    if trace:
        payload["trace"] = r.trace
        text += "\n" + json.dumps(r.trace)
    _emit(ctx, payload, text)


def _matrix_for(term, defs, type_src, def_name, trunc):
    """Denote ``x:A |- t x`` when ``t : A -o B`` is asked for, else ``|- t``."""
    if def_name is not None:
        if def_name not in defs:
            raise click.BadParameter(f"no def named {def_name!r}", param_hint="--def")
        term = defs[def_name]
    want = parse_type(type_src)
    ty = type_of(term)
    if not types_equal(ty, want):
        from .errors import TypeMismatch
        raise TypeMismatch(str(want), str(ty), None, "--dump-matrix")
    if isinstance(want, TLolli):
        x = "x$in"
        return denote(App(term, Var(x)), {x: want.a}, trunc)
    return denote(term, {}, trunc)


@main.command("denote")
@click.argument("file")
@click.option("--bang-len", type=int, default=None,
              help="Longest !-sequence kept (default: program header or 4).")
@click.option("--mu-depth", type=int, default=None,
              help="Deepest fold kept (default: program header or 8).")
@click.option("--dump-matrix", "dump_type", default=None, metavar="TYPE",
              help="Print the sparse matrix of a term of this type; for A -o B the "
                   "channel A -> B is printed.")
@click.option("--def", "def_name", default=None, help="Use this def instead of the main term.")
@_json_flag
@click.pass_context
def denote_cmd(ctx, file, bang_len, mu_depth, dump_type, def_name, json_):
    """Compute the denotation at a finite truncation."""
    _set_json(ctx, json_)
    path, src, term, defs = _load(ctx, file)
    st = corpus.program_settings(src)
    L = bang_len if bang_len is not None else st.get("bang-len", max(4, max_annotation(term)))
    D = mu_depth if mu_depth is not None else st.get("mu-depth", 8)
    trunc = Trunc(L, D)
    try:
        if dump_type is not None:
            m = _matrix_for(term, defs, dump_type, def_name, trunc)
            click.echo(m.dumps())
            return
        type_of(term)
        d = Denoter(trunc)
        v = program_value(term, denoter=d)
    except QFPCError as e:
        _fail(ctx, e, path)
    payload = {"file": path, "value": v, "bang_len": L, "mu_depth": D,
               "converged": not d.hits, "hits": sorted(d.hits)}
    hits = ", ".join(sorted(d.hits)) or "none"
    _emit(ctx, payload, f"value {v:.12g}\ntruncation L={L} D={D}\nhits {hits}")


@main.command()
@click.argument("file")
@click.option("--audit-steps", type=int, default=200, show_default=True)
@click.option("--max-steps", type=int, default=10000, show_default=True)
@click.option("--approx", type=int, default=None,
              help="Annotation used for infinitary programs (default: header or 3).")
@click.option("--bang-len", type=int, default=None)
@click.option("--mu-depth", type=int, default=None)
@_json_flag
@click.pass_context
def verify(ctx, file, audit_steps, max_steps, approx, bang_len, mu_depth, json_):
    """Typecheck, run both engines, audit steps and compare."""
    _set_json(ctx, json_)
    path, src, term, _ = _load(ctx, file)
    opts = VerifyOptions(max_steps=max_steps, audit_steps=audit_steps, approx=approx,
                         bang_len=bang_len, mu_depth=mu_depth, eps=ctx.obj["eps"])
    name = os.path.splitext(os.path.basename(path))[0]
    try:
        rep = verify_term(term, name, opts, corpus.program_settings(src))
    except QFPCError as e:
        _fail(ctx, e, path)
    if ctx.obj["json"]:
        click.echo(rep.to_json())
    else:
        click.echo(rep.text())
    if rep.verdict != "pass":
        ctx.exit(1)


# ------------------------------------------------------------------ norms

def _read_json(path):
    if not os.path.exists(path):
        raise click.BadParameter(f"file {path!r} does not exist", param_hint="--file")
    with open(path) as f:
        return json.load(f)


@main.group()
def norm():
    """Module norms and the entanglement-free tensor norm bounds."""


def _qprime_report(ctx, z, dims, steps):
    from .norms import norm_bounds
    b = norm_bounds(z, dims, steps=steps, seed=ctx.obj["seed"])
    text = (f"lb {b['lb']:.12g}\nub {b['ub']:.12g}\ngap {b['gap']:.3g}\n"
            f"trace {b['trace']:.12g}\ngrid pairs {b['grid_pairs']}")
    _emit(ctx, b, text)


@norm.command()
@click.option("--steps", type=int, default=200, show_default=True)
@_json_flag
@_seed_flag
@click.pass_context
def bell(ctx, steps, json_, seed):
    """Bounds for the Bell projector; lb > 1 shows the norm is not multiplicative."""
    from .norms import bell_state
    _set_json(ctx, json_, seed)
    _qprime_report(ctx, bell_state(), (2, 2), steps)


@norm.command()
@click.option("--file", "file_", required=True, help="JSON with 'state' and optional 'dims'.")
@click.option("--steps", type=int, default=200, show_default=True)
@_json_flag
@_seed_flag
@click.pass_context
def qprime(ctx, file_, steps, json_, seed):
    """Lower and upper bounds on the tensor norm of a bipartite state."""
    _set_json(ctx, json_, seed)
    obj = _read_json(file_)
    if isinstance(obj, dict):
        z = matrix_from_json(obj["state"])
        dims = tuple(obj.get("dims") or ())
    else:
        z, dims = matrix_from_json(obj), ()
    if not dims:
        d = int(round(np.sqrt(z.shape[0])))
        dims = (d, d)
    if dims[0] * dims[1] != z.shape[0]:
        raise click.BadParameter(f"dims {dims} do not match a {z.shape[0]}-dim state")
    try:
        _qprime_report(ctx, z, dims, steps)
    except QFPCError as e:
        _fail(ctx, e, file_)


@norm.command()
@click.option("--file", "file_", required=True,
              help="JSON with 'choi', 'dim_in', 'dim_out'.")
@click.option("--tol", type=float, default=1e-10, show_default=True)
@_json_flag
@click.pass_context
def module(ctx, file_, tol, json_):
    """Norm of a CP map in the module of trace-non-increasing maps."""
    from .norms import cq_module, module_norm
    _set_json(ctx, json_)
    obj = _read_json(file_)
    try:
        x = ChoiMap.from_choi(matrix_from_json(obj["choi"]), obj["dim_in"], obj["dim_out"])
        v = module_norm(x, cq_module(x.dim_out), tol)
        op = operator_norm(x)
    except (KeyError, TypeError) as e:
        raise click.BadParameter(f"malformed Choi file: {e}", param_hint="--file")
    except QFPCError as e:
        _fail(ctx, e, file_)
    _emit(ctx, {"module_norm": v, "operator_norm": op},
          f"module norm {v:.12g}\noperator norm {op:.12g}")


# -------------------------------------------------------------------- gen

@main.command()
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--depth", type=int, default=4, show_default=True)
@click.option("--out", "out_dir", default=None, help="Write gen_<i>.qfpc files here.")
@_json_flag
@_seed_flag
@click.pass_context
def gen(ctx, count, depth, out_dir, json_, seed):
    """Generate random well-typed finitary programs."""
    _set_json(ctx, json_, seed)
    progs = corpus.corpus_generate(ctx.obj["seed"], count, corpus.GenConfig(depth=depth))
    srcs = [pretty(t) for t in progs]
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for i, s in enumerate(srcs):
            with open(os.path.join(out_dir, f"gen_{i}.qfpc"), "w") as f:
                f.write(s + "\n")
    _emit(ctx, {"seed": ctx.obj["seed"], "programs": srcs}, "\n\n".join(srcs))


if __name__ == "__main__":
    sys.exit(main())
