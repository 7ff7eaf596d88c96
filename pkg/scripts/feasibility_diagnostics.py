"""Why a builtin example does or does not synthesize at its reported ka.

For each ka on the scan grid this prints
  * the exact worst case of x'Gamma x over admissible x0 for the averaged loop,
    max_t lambda_max(R^{-1/2} Phi' Gamma Phi R^{-1/2}), and the same for Gamma_bar;
  * the discretized DLMI margin with the shrunk ellipsoid Gamma_bar (when the
    shrinkage is admissible) and with the unshrunk Gamma.
A worst case >= 1 means no certificate of any kind exists at that ka.
"""
import argparse
import warnings

import numpy as np

from esfts.core import FtsError, MatrixSchedule, eval_schedule
from esfts.dlmi import assemble_lmi, scan_values, solve_feasibility
from esfts.examples import NAMES, get_example
from esfts.frequency import transition_matrices
from esfts.geometry import ShrunkSpec, shrunk_gamma, shrunk_gamma_exact


def worst_case(p, ka, grid, G):
    _, Phi = transition_matrices(p, ka, grid)
    lam, V = np.linalg.eigh(p.R)
    Rm = V @ np.diag(lam ** -0.5) @ V.T
    M = Rm @ np.swapaxes(Phi, 1, 2) @ G @ Phi @ Rm
    return float(np.max(np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, 1, 2)))[:, -1]))


def unshrunk(p, grid):
    nodes = grid.nodes
    G = eval_schedule(p.Gamma, nodes)
    return ShrunkSpec(grid=grid, r=np.ones(nodes.size), gamma_min=np.zeros(nodes.size),
                      GammaBar=MatrixSchedule.sampled(nodes, G), interp_error=0.0)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--example", default="ex1", choices=NAMES)
    ap.add_argument("--ka-max", type=float, default=0.2)
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--no-dlmi", action="store_true", help="skip the SDP solves")
    args = ap.parse_args()
    warnings.simplefilter("ignore")

    ex = get_example(args.example)
    p, grid = ex.problem, ex.grid
    fine = grid.refine(10)
    G = eval_schedule(p.Gamma, fine.nodes)
    Gb = shrunk_gamma_exact(p, fine.nodes)
    try:
        spec = shrunk_gamma(p, grid)
    except FtsError as e:
        spec = None
        print(f"shrunk ellipsoid not admissible: {e}")
    plain = unshrunk(p, grid)
    print(f"{'ka':>5} {'worst v':>9} {'worst vbar':>11} {'margin(shrunk)':>15} {'margin(plain)':>14}")
    for ka in scan_values(args.step, args.ka_max):
        row = f"{ka:5.2f} {worst_case(p, ka, fine, G):9.4f} {worst_case(p, ka, fine, Gb):11.4f}"
        if not args.no_dlmi:
            ms = "-" if spec is None else f"{solve_feasibility(assemble_lmi(p, spec, ka, grid)).margin:.3e}"
            mp = solve_feasibility(assemble_lmi(p, plain, ka, grid)).margin
            row += f" {ms:>15} {mp:14.3e}"
        print(row, flush=True)


if __name__ == "__main__":
    main()
