"""Verify every shipped program plus a batch of generated ones and tabulate."""
import argparse
import time

from qfpc.corpus import corpus_generate, load_program, program_names, program_settings, program_source
from qfpc.verify import VerifyOptions, verify_term


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--generated", type=int, default=50)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--audit-steps", type=int, default=200)
    args = ap.parse_args()
    opts = VerifyOptions(audit_steps=args.audit_steps)

    jobs = [(n, load_program(n), program_settings(program_source(n))) for n in program_names()]
    jobs += [(f"gen{i:03d}", t, {}) for i, t in
             enumerate(corpus_generate(seed=args.seed, count=args.generated))]
    print(f"{'program':<20}{'lower':>12}{'value':>12}{'upper':>12}{'audit':>8}{'dev':>10}  verdict")
    worst, fails, t0 = 0.0, 0, time.perf_counter()
    for name, t, st in jobs:
        r = verify_term(t, name, opts, st)
        o, d, a = r.operational, r.denotational, r.audit
        worst = max(worst, a.max_deviation)
        fails += r.verdict != "pass"
        print(f"{name:<20}{o.lower:>12.8f}{d.value:>12.8f}{o.upper:>12.8f}"
              f"{a.steps:>8d}{a.max_deviation:>10.1e}  {r.verdict}")
    print(f"\n{len(jobs)} programs, {fails} failures, max audit deviation {worst:.2e}, "
          f"{time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
