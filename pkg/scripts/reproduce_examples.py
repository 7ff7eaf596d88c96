"""Synthesize, bound and verify each builtin example and print a table against
the values reported alongside the data.

Synthesis failures are reported in the table; the frequency and simulation
columns then fall back to the reported ka with k = alpha = sqrt(ka).
"""
import argparse
import math
import time
import warnings

from esfts.core import ControllerParams, FtsError
from esfts.dlmi import scan_gain
from esfts.examples import NAMES, get_example
from esfts.frequency import frequency_bound
from esfts.geometry import shrunk_gamma
from esfts.sim import monte_carlo_verify


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--examples", nargs="+", default=list(NAMES), choices=NAMES)
    ap.add_argument("--runs", type=int, default=5)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    warnings.simplefilter("ignore")

    print(f"{'ex':4} {'ka':>16} {'omega_2nd':>18} {'omega_1st':>18} {'eta':>6} {'nominal':>8} {'flip':>5}")
    for name in args.examples:
        ex = get_example(name)
        t = time.perf_counter()
        try:
            res = scan_gain(ex.problem, shrunk_gamma(ex.problem, ex.grid), ex.grid)
            ka, ka_txt = res.ka, f"{res.ka:.2f}"
        except FtsError as e:
            ka, ka_txt = ex.reported_ka, type(e).__name__[:10]
        syn_time = time.perf_counter() - t
        fb = frequency_bound(ex.problem, ka, ex.grid)
        s = math.sqrt(ka)
        rep = monte_carlo_verify(ex.problem, ControllerParams(s, s, fb.omega_2nd), ka,
                                 runs=args.runs, seed=args.seed)
        print(f"{name:4} {ka_txt:>8} / {ex.reported_ka:<5.2f} {fb.omega_2nd:8.1f} / {ex.reported_omega_2nd:<7g}"
              f" {fb.omega_1st:8.1f} / {ex.reported_omega_1st:<7g} {fb.eta:6.3f}"
              f" {rep.nominal.passes}/{rep.nominal.runs:<6} {rep.sign_flip.passes}/{rep.sign_flip.runs}"
              f"   (synthesis {syn_time:.1f}s)")


if __name__ == "__main__":
    main()
