"""Approximants of the geometric program against the operational lower bound."""
import argparse

from qfpc.basis import Trunc
from qfpc.corpus import load_program
from qfpc.denote import program_value
from qfpc.operational import explore, initial_closure
from qfpc.syntax import annotate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kmax", type=int, default=8)
    args = ap.parse_args()
    geom = load_program("geom")
    print(f"{'k':>3}{'[[t_k]]':>16}{'1-2^-(k+1)':>16}{'op lower t_k':>16}{'steps':>8}")
    for k in range(args.kmax + 1):
        tk = annotate(geom, k)
        v = program_value(tk, Trunc(k, 10))
        r = explore(initial_closure(tk), budget=100_000)
        print(f"{k:>3}{v:>16.12f}{1 - 2.0 ** -(k + 1):>16.12f}{r.lower:>16.12f}{r.steps:>8d}")
    print("\nunannotated program, operational lower bound by step budget")
    for budget in (10, 50, 100, 200, 400):
        r = explore(initial_closure(geom), budget=budget)
        print(f"{budget:>6}  lower={r.lower:.12f}  upper={r.upper:.12f}")


if __name__ == "__main__":
    main()
