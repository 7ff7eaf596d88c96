"""Command-line front end: synth, bound, simulate, verify, demo.

Exit codes: 0 success, 2 validation, 3 synthesis infeasible, 4 verification
failure, 5 I/O. Every failure prints a one-line cause on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

from .core import (ConfigError, ControllerParams, FtsError, FtsProblem, TimeGrid, VerificationError,
                   default_split, validate_problem)
from .dlmi import BACKENDS, assemble_lmi, scan_gain
from .examples import NAMES, get_example
from .frequency import frequency_bound
from .geometry import shrunk_gamma
from .reports import write_ellipse_csv, write_report, write_trajectory_csv
from .sim import (monte_carlo_verify, sample_initial_states, simulate_averaged, simulate_closed_loop,
                  simulate_open_loop, trajectory_metrics)

EXIT_IO = 5
DEFAULT_GRID_N = 100


@dataclass
class RunConfig:
    problem: FtsProblem
    grid: TimeGrid
    args: argparse.Namespace
    reported_ka: float | None = None

    @property
    def out(self) -> Path:
        return Path(self.args.out)


def _load(args) -> RunConfig:
    if (args.problem is None) == (args.example is None):
        raise ConfigError("give exactly one of --problem or --example")
    reported = None
    if args.example is not None:
        ex = get_example(args.example)
        p, n, reported = ex.problem, ex.grid_n, ex.reported_ka
    else:
        try:
            raw = json.loads(Path(args.problem).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{args.problem}: invalid JSON ({e})") from e
        p = FtsProblem.from_dict(raw, name=Path(args.problem).stem)
        n = int(raw.get("grid_n", DEFAULT_GRID_N))
    if args.delta is not None:
        p = p.replace(Delta=args.delta)
    if getattr(args, "flip_b", False):
        p = p.flipped()
    n = args.grid_n if args.grid_n is not None else n
    grid = TimeGrid(p.t0, p.T, n)
    return RunConfig(validate_problem(p, grid), grid, args, reported)


def _split(args, ka):
    if args.k is None:
        return default_split(ka)
    return args.k, ka / args.k


def _synthesize(cfg: RunConfig) -> dict:
    a = cfg.args
    spec = shrunk_gamma(cfg.problem, cfg.grid)
    if a.sdp_text:
        cfg.out.mkdir(parents=True, exist_ok=True)
        (cfg.out / "sdp_ka0.txt").write_text(assemble_lmi(cfg.problem, spec, 0.0, cfg.grid).to_text())
    res = scan_gain(cfg.problem, spec, cfg.grid, step=a.scan_step, ka_max=a.ka_max, backend=a.backend)
    d = res.to_dict()
    if a.k is not None and res.ka > 0:
        d["k"], d["alpha"] = _split(a, res.ka)
    return d


def _gain(cfg: RunConfig) -> tuple[dict, str]:
    """ka from --ka, from a saved synthesis report, or by running the scan."""
    a = cfg.args
    if a.ka is not None:
        if a.ka == "reported":
            if cfg.reported_ka is None:
                raise ConfigError("--ka reported needs --example")
            ka = cfg.reported_ka
        else:
            try:
                ka = float(a.ka)
            except ValueError as e:
                raise ConfigError(f"--ka expects a number or 'reported', got {a.ka!r}") from e
        k, alpha = _split(a, ka)
        return {"ka": ka, "k": k, "alpha": alpha}, "override"
    if getattr(a, "synthesis", None):
        d = json.loads(Path(a.synthesis).read_text())
        d = d.get("synthesis", d)
        return {key: d[key] for key in ("ka", "k", "alpha")}, "file"
    return _synthesize(cfg), "scan"


def _bound(cfg: RunConfig, syn: dict) -> dict:
    split = (syn["k"], syn["alpha"])
    fb = frequency_bound(cfg.problem, syn["ka"], cfg.grid, split, eta_method="transition")
    alt = frequency_bound(cfg.problem, syn["ka"], cfg.grid, split, eta_method="exp_of_integral")
    d = fb.to_dict()
    d["eta_exp_of_integral"] = alt.eta
    d["omega_2nd_exp_of_integral"] = alt.omega_2nd
    d["omega_1st_exp_of_integral"] = alt.omega_1st
    return d


def _controller(cfg, syn, bound) -> ControllerParams:
    omega = cfg.args.omega if cfg.args.omega is not None else bound["omega_2nd"]
    return ControllerParams(syn["k"], syn["alpha"], omega, cfg.args.phase)


def _write_trajectories(cfg, c, ka, x0):
    p, spp = cfg.problem, cfg.args.steps_per_period
    x = simulate_closed_loop(p, c, x0, spp)
    xb = simulate_averaged(p, ka, x0, x.dt)
    xo = simulate_open_loop(p, x0, x.dt)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(cfg.out / "traj_closed_loop.csv", x, p, "Gamma")
    write_trajectory_csv(cfg.out / "traj_averaged.csv", xb, p, "GammaBar")
    write_trajectory_csv(cfg.out / "traj_open_loop.csv", xo, p, "Gamma")
    write_ellipse_csv(cfg.out / "plotdata_ellipses.csv", cfg.problem)
    return trajectory_metrics(x, xb, p)


def _base_report(cfg, command):
    return {"command": command, "problem": cfg.problem.name, "grid": {"t0": cfg.grid.t0, "T": cfg.grid.T,
                                                                     "N": cfg.grid.N},
            "Delta": cfg.problem.Delta}


def cmd_synth(cfg: RunConfig) -> int:
    rep = _base_report(cfg, "synth")
    rep["synthesis"] = _synthesize(cfg)
    write_report(cfg.out, rep)
    write_ellipse_csv(cfg.out / "plotdata_ellipses.csv", cfg.problem)
    print(f"{cfg.problem.name}: ka = {rep['synthesis']['ka']:g} (margin {rep['synthesis']['margin']:.3g})")
    return 0


def cmd_bound(cfg: RunConfig) -> int:
    rep = _base_report(cfg, "bound")
    syn, src = _gain(cfg)
    rep["synthesis"], rep["ka_source"] = syn, src
    rep["bound"] = b = _bound(cfg, syn)
    write_report(cfg.out, rep)
    print(f"{cfg.problem.name}: ka = {syn['ka']:g}, omega_2nd = {b['omega_2nd']:.1f}, "
          f"omega_1st = {b['omega_1st']:.1f}, eta = {b['eta']:.4g}, kappa = {b['kappa']:.4g}")
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    a = cfg.args
    rep = _base_report(cfg, "simulate")
    syn, src = _gain(cfg)
    rep["synthesis"], rep["ka_source"] = syn, src
    rep["bound"] = b = _bound(cfg, syn)
    c = _controller(cfg, syn, b)
    if a.x0 is not None:
        x0 = [float(v) for v in a.x0.split(",")]
        if len(x0) != cfg.problem.n:
            raise ConfigError(f"--x0 needs {cfg.problem.n} comma-separated values")
    else:
        x0 = sample_initial_states(cfg.problem.R, 1, a.seed)[0].tolist()
    m = _write_trajectories(cfg, c, syn["ka"], x0)
    rep["omega"], rep["x0"], rep["metrics"] = c.omega, x0, m.__dict__
    write_report(cfg.out, rep)
    print(f"{cfg.problem.name}: omega = {c.omega:.1f}, max v = {m.max_v:.4f}, "
          f"max |x - xbar| = {m.max_dist:.4g} (Delta {cfg.problem.Delta:g})")
    return 0


def _verify(cfg: RunConfig, rep: dict, syn: dict) -> int:
    a = cfg.args
    rep["bound"] = b = _bound(cfg, syn)
    c = _controller(cfg, syn, b)
    vr = monte_carlo_verify(cfg.problem, c, syn["ka"], a.runs, a.seed, a.steps_per_period,
                            flip_b=True, jobs=a.jobs)
    rep["verification"] = vr.to_dict()
    worst = vr.nominal.per_run[vr.nominal.worst_run]
    _write_trajectories(cfg, c, syn["ka"], worst["x0"])
    write_report(cfg.out, rep)
    flip = vr.sign_flip
    print(f"{cfg.problem.name}: omega = {c.omega:.1f}, nominal {vr.nominal.passes}/{vr.nominal.runs}, "
          f"sign flip {flip.passes}/{flip.runs}, worst max v = {vr.nominal.worst_max_v:.4f}, "
          f"worst max |x - xbar| = {vr.nominal.worst_max_dist:.4g}")
    if not vr.passed:
        for label, suite in (("nominal", vr.nominal), ("sign flip", flip)):
            for i, e in enumerate(suite.per_run):
                if not (e["fts_ok"] and e["dist_ok"]):
                    raise VerificationError(
                        f"{label} run {i} failed: max v = {e['max_v']:.4g}, "
                        f"max |x - xbar| = {e['max_dist']:.4g} (Delta {cfg.problem.Delta:g})")
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    rep = _base_report(cfg, "verify")
    syn, src = _gain(cfg)
    rep["synthesis"], rep["ka_source"] = syn, src
    return _verify(cfg, rep, syn)


def cmd_demo(cfg: RunConfig) -> int:
    rep = _base_report(cfg, "demo")
    syn, src = _gain(cfg)
    rep["synthesis"], rep["ka_source"] = syn, src
    print(f"{cfg.problem.name}: ka = {syn['ka']:g} ({src})")
    return _verify(cfg, rep, syn)


COMMANDS = {"synth": cmd_synth, "bound": cmd_bound, "simulate": cmd_simulate,
            "verify": cmd_verify, "demo": cmd_demo}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_argument_group("problem")
    src.add_argument("--problem", metavar="PATH", help="problem JSON file")
    src.add_argument("--example", choices=NAMES, help="builtin example")
    src.add_argument("--grid-n", type=int, help="number of DLMI sub-intervals")
    src.add_argument("--delta", type=float, help="override the distance budget Delta")
    src.add_argument("--flip-b", action="store_true", help="negate the plant input matrix B")
    syn = common.add_argument_group("synthesis")
    syn.add_argument("--scan-step", type=float, default=0.01)
    syn.add_argument("--ka-max", type=float, default=10.0)
    syn.add_argument("--backend", choices=sorted(BACKENDS), default="clarabel")
    syn.add_argument("--ka", help="skip the scan: a number, or 'reported' for a builtin example")
    syn.add_argument("--k", type=float, help="dither gain k; alpha = ka / k (default k = alpha)")
    syn.add_argument("--synthesis", metavar="PATH", help="reuse ka, k, alpha from a report.json")
    syn.add_argument("--sdp-text", action="store_true", help="also write the assembled SDP at ka = 0")
    sim = common.add_argument_group("simulation")
    sim.add_argument("--omega", type=float, help="dither frequency (default omega_2nd)")
    sim.add_argument("--phase", type=float, default=0.0)
    sim.add_argument("--runs", type=int, default=5)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--x0", help="comma-separated initial state for simulate")
    sim.add_argument("--steps-per-period", type=int, default=40)
    sim.add_argument("--jobs", type=int, default=1)
    common.add_argument("--out", default="out", metavar="DIR")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="esfts", description=__doc__.splitlines()[0])
    ap.add_argument("--dump-example", metavar="NAME", choices=NAMES,
                    help="print a builtin example as problem JSON and exit")
    sub = ap.add_subparsers(dest="command")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.dump_example:
        d = get_example(args.dump_example)
        obj = d.problem.to_dict()
        obj["name"], obj["grid_n"] = d.problem.name, d.grid_n
        print(json.dumps(obj, indent=2))
        return 0
    if args.command is None:
        ap.print_help()
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        warnings.showwarning = lambda m, c, *_: print(f"warning: {c.__name__}: {m}", file=sys.stderr)
        try:
            return COMMANDS[args.command](_load(args))
        except FtsError as e:
            print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
            return e.exit_code
        except OSError as e:
            print(f"error: I/O: {e}", file=sys.stderr)
            return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
