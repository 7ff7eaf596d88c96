"""max |x - xbar| against dither frequency for one example and initial state,
with the log-log slope between successive frequencies (leading order -1/2)."""
import argparse
import math

from esfts.core import ControllerParams
from esfts.examples import NAMES, get_example
from esfts.frequency import frequency_bound
from esfts.sim import convergence_study, sample_initial_states


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--example", default="ex1", choices=NAMES)
    ap.add_argument("--ka", type=float, help="default: the reported value")
    ap.add_argument("--factors", type=float, nargs="+", default=[1, 2, 4, 8, 16, 32])
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    ex = get_example(args.example)
    ka = args.ka if args.ka is not None else ex.reported_ka
    w0 = frequency_bound(ex.problem, ka, ex.grid).omega_2nd
    s = math.sqrt(ka)
    x0 = sample_initial_states(ex.problem.R, 1, args.seed)[0]
    rows = convergence_study(ex.problem, ControllerParams(s, s, w0), [f * w0 for f in args.factors], x0, ka)
    print(f"{'omega':>10} {'max|x-xbar|':>12} {'slope':>7}")
    prev = None
    for w, d in rows:
        slope = "" if prev is None else f"{math.log(d / prev[1]) / math.log(w / prev[0]):7.3f}"
        print(f"{w:10.1f} {d:12.5g} {slope}")
        prev = (w, d)


if __name__ == "__main__":
    main()
