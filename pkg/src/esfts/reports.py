"""CSV and JSON writers for trajectories, ellipse outlines and run reports."""
from __future__ import annotations

import csv
import datetime as _dt
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import FtsProblem, dumps, eval_schedule
from .geometry import shrunk_gamma_exact
from .sim import Trajectory, quad_form


def write_trajectory_csv(path, traj: Trajectory, p: FtsProblem, weight: str = "Gamma") -> None:
    """Write t, x1..xn and the quadratic form (v for Gamma, vbar for Gamma_bar), decimated."""
    tr = traj.decimated()
    if weight == "Gamma":
        G, col = eval_schedule(p.Gamma, tr.times), "v"
    else:
        G, col = shrunk_gamma_exact(p, tr.times), "vbar"
    v = quad_form(G, tr.states)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(p.n)] + [col])
        for t, x, q in zip(tr.times, tr.states, v):
            w.writerow([repr(float(t))] + [repr(float(a)) for a in x] + [repr(float(q))])


def ellipse_points(M: np.ndarray, count: int = 361) -> np.ndarray:
    """Boundary of {x : x' M x = 1} in the plane."""
    lam, V = np.linalg.eigh(0.5 * (M + M.T))
    th = np.linspace(0.0, 2.0 * np.pi, count)
    circle = np.stack([np.cos(th), np.sin(th)], axis=1)
    return circle @ (V / np.sqrt(lam)).T


def write_ellipse_csv(path, p: FtsProblem) -> bool:
    """Outlines of Gamma and Gamma_bar at t0 and t0 + T and of R; 2-D problems only."""
    if p.n != 2:
        return False
    curves = [("R", p.t0, p.R)]
    for t in (p.t0, p.t1):
        curves.append(("Gamma", t, eval_schedule(p.Gamma, t)))
        curves.append(("GammaBar", t, shrunk_gamma_exact(p, t)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "t", "x1", "x2"])
        for label, t, M in curves:
            for x in ellipse_points(M):
                w.writerow([label, repr(float(t)), repr(float(x[0])), repr(float(x[1]))])
    return True


def write_report(out_dir, report: dict, argv=None) -> Path:
    """report.json is deterministic; the timestamp goes to metadata.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(dumps(report))
    meta = {"created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "version": __version__, "argv": list(sys.argv if argv is None else argv)}
    (out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")
    return path
