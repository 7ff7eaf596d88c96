"""Discretized DLMI synthesis of the extremum-seeking gain product.

Q(t) is piecewise linear on a uniform grid, so Qdot is constant on each
interval. For interval k and each of its two endpoints tau the constraint

    -Qdot_k + Abar(tau) Q(tau) + Q(tau) Abar(tau)' + m I <= 0,
    Abar = A - ka B B' Pi,

is imposed, together with Q_k + m I <= inv(Gamma_bar(tau_k)) at every node
and inv(R) + m I <= Q_0. The margin m is maximized; a strictly positive
optimum certifies the strict inequalities.

The ``Abar Q + Q Abar'`` ordering follows from substituting L = K Q with
K = -ka B' Pi into the state-feedback FTS condition.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .averaging import closed_loop_matrix
from .core import (AssemblyError, DomainError, FtsProblem, MatrixSchedule, SolverError,
                   SynthesisFailedError, TimeGrid, default_split, eval_schedule)
from .geometry import COND_MAX, ShrunkSpec

log = logging.getLogger(__name__)

STRICT_MARGIN = 1e-7
RESIDUAL_TOL = 1e-7
REPAIR_MAX = 1e-4


def sym_basis(n: int) -> list[np.ndarray]:
    """Basis of symmetric n x n matrices; coordinates are the upper-triangle entries."""
    out = []
    for j in range(n):
        for i in range(j + 1):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            out.append(E)
    return out


def sym_coords(Q: np.ndarray) -> np.ndarray:
    n = Q.shape[0]
    return np.array([Q[i, j] for j in range(n) for i in range(j + 1)])


def from_coords(q: np.ndarray, n: int) -> np.ndarray:
    Q = np.zeros((n, n))
    it = iter(q)
    for j in range(n):
        for i in range(j + 1):
            Q[i, j] = Q[j, i] = next(it)
    return Q


@dataclass(frozen=True, eq=False)
class Block:
    """Affine matrix constraint const + sum_l z[idx[l]] * coeffs[l] <= 0."""

    tag: tuple
    const: np.ndarray
    idx: np.ndarray
    coeffs: np.ndarray

    def value(self, z: np.ndarray) -> np.ndarray:
        return self.const + np.tensordot(z[self.idx], self.coeffs, axes=1)


@dataclass(frozen=True, eq=False)
class SdpProblem:
    """Maximize z[margin_index] subject to every block being negative semidefinite.

    Variables are ``n_nodes`` symmetric n x n matrices stored by their upper
    triangles, followed by the scalar margin.
    """

    n: int
    n_nodes: int
    blocks: list[Block]

    @property
    def per_node(self) -> int:
        return self.n * (self.n + 1) // 2

    @property
    def n_vars(self) -> int:
        return self.n_nodes * self.per_node + 1

    @property
    def margin_index(self) -> int:
        return self.n_vars - 1

    def node_slice(self, k: int) -> slice:
        return slice(k * self.per_node, (k + 1) * self.per_node)

    def unpack(self, z: np.ndarray) -> tuple[np.ndarray, float]:
        Q = np.stack([from_coords(z[self.node_slice(k)], self.n) for k in range(self.n_nodes)])
        return Q, float(z[self.margin_index])

    def pack(self, Q: Sequence[np.ndarray], m: float) -> np.ndarray:
        return np.concatenate([sym_coords(q) for q in Q] + [[m]])

    def margin_is_shift(self) -> bool:
        """True when every block contains the margin as +m*I."""
        I = np.eye(self.n)
        for blk in self.blocks:
            hit = np.nonzero(blk.idx == self.margin_index)[0]
            if hit.size != 1 or not np.array_equal(blk.coeffs[hit[0]], I):
                return False
        return True

    def residual(self, z: np.ndarray) -> float:
        """Largest eigenvalue over all blocks at ``z`` (<= 0 means every block holds)."""
        return max(float(np.linalg.eigvalsh(b.value(z))[-1]) for b in self.blocks)

    def to_text(self) -> str:
        """Plain-text dump: each block lists its constant and per-variable coefficient matrices."""
        fmt = lambda M: "\n".join(" ".join(f"{v:.17g}" for v in row) for row in M)  # noqa: E731
        lines = [f"sdp n={self.n} nodes={self.n_nodes} vars={self.n_vars} "
                 f"maximize z[{self.margin_index}] blocks={len(self.blocks)}",
                 "# constraint per block: const + sum_i z[i] * coef_i <= 0 (negative semidefinite)"]
        for b, blk in enumerate(self.blocks):
            lines.append(f"block {b} {' '.join(str(t) for t in blk.tag)}")
            lines.append("const")
            lines.append(fmt(blk.const))
            for i, C in zip(blk.idx, blk.coeffs):
                lines.append(f"coef {int(i)}")
                lines.append(fmt(C))
            lines.append("end")
        return "\n".join(lines) + "\n"


def _safe_inv(M: np.ndarray, what: str) -> np.ndarray:
    lam = np.linalg.eigvalsh(M)
    if lam[0] <= 0 or lam[-1] / lam[0] > COND_MAX:
        raise AssemblyError(f"{what} is singular or ill-conditioned")
    Mi = np.linalg.inv(M)
    return 0.5 * (Mi + Mi.T)


def assemble_lmi(p: FtsProblem, spec: ShrunkSpec, ka: float, grid: TimeGrid) -> SdpProblem:
    if ka < 0:
        raise DomainError("ka must be non-negative")
    if spec.grid != grid:
        raise AssemblyError("shrunk spec was built on a different grid")
    n, N, h = p.n, grid.N, grid.h
    nodes = grid.nodes
    Abar = closed_loop_matrix(p, ka, nodes)
    Gbar = spec.at_nodes()
    basis = np.stack(sym_basis(n))
    d = basis.shape[0]
    I = np.eye(n)
    mi = (N + 1) * d

    def node_idx(k):
        return np.arange(k * d, (k + 1) * d)

    blocks = []
    for k in range(N):
        for end, j in (("left", k), ("right", k + 1)):
            lyap = np.einsum("ab,lbc->lac", Abar[j], basis)
            lyap = lyap + np.swapaxes(lyap, 1, 2)
            ck = basis / h
            ck1 = -basis / h
            if j == k:
                ck = ck + lyap
            else:
                ck1 = ck1 + lyap
            idx = np.concatenate([node_idx(k), node_idx(k + 1), [mi]])
            coeffs = np.concatenate([ck, ck1, I[None]])
            blocks.append(Block(("interval", k, end), np.zeros((n, n)), idx, coeffs))
    for k in range(N + 1):
        Gi = _safe_inv(Gbar[k], f"Gamma_bar at node {k}")
        blocks.append(Block(("cap", k), -Gi, np.concatenate([node_idx(k), [mi]]),
                            np.concatenate([basis, I[None]])))
    Ri = _safe_inv(p.R, "R")
    blocks.append(Block(("initial",), Ri, np.concatenate([node_idx(0), [mi]]),
                        np.concatenate([-basis, I[None]])))
    return SdpProblem(n=n, n_nodes=N + 1, blocks=blocks)


# --------------------------------------------------------------------------
# solving

@dataclass
class FeasibilityResult:
    feasible: bool
    Q: np.ndarray
    margin: float
    residual: float
    status: str
    solve_time: float


def _svec_index(n: int):
    """Row order and scaling of the scaled upper-triangle vectorization (column-major)."""
    rows, cols, scale = [], [], []
    for j in range(n):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
            scale.append(1.0 if i == j else math.sqrt(2.0))
    return np.array(rows), np.array(cols), np.array(scale)


def _solve_clarabel(sdp: SdpProblem) -> tuple[np.ndarray, str]:
    import clarabel

    n = sdp.n
    ri, ci, sc = _svec_index(n)
    t = ri.size
    b = np.empty(len(sdp.blocks) * t)
    data, rr, cc = [], [], []
    for bi, blk in enumerate(sdp.blocks):
        off = bi * t
        b[off:off + t] = -blk.const[ri, ci] * sc
        vals = blk.coeffs[:, ri, ci] * sc  # (len(idx), t)
        nz = np.nonzero(vals)
        data.append(vals[nz])
        rr.append(off + nz[1])
        cc.append(blk.idx[nz[0]])
    A = sp.csc_matrix((np.concatenate(data), (np.concatenate(rr), np.concatenate(cc))),
                      shape=(b.size, sdp.n_vars))
    q = np.zeros(sdp.n_vars)
    q[sdp.margin_index] = -1.0
    P = sp.csc_matrix((sdp.n_vars, sdp.n_vars))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = 1e-10
    settings.tol_gap_rel = 1e-10
    settings.tol_feas = 1e-10
    settings.max_iter = 300
    cones = [clarabel.PSDTriangleConeT(n)] * len(sdp.blocks)
    sol = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
    status = str(sol.status)
    if "Solved" not in status:
        raise SolverError(f"clarabel returned {status} after {sol.iterations} iterations")
    return np.array(sol.x), status


def _solve_cvxpy(sdp: SdpProblem) -> tuple[np.ndarray, str]:
    import cvxpy as cp

    z = cp.Variable(sdp.n_vars)
    cons = []
    for blk in sdp.blocks:
        expr = blk.const
        for i, C in zip(blk.idx, blk.coeffs):
            expr = expr + z[int(i)] * C
        cons.append(expr << 0)
    prob = cp.Problem(cp.Maximize(z[sdp.margin_index]), cons)
    prob.solve()
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise SolverError(f"cvxpy returned status {prob.status}")
    return np.array(z.value), prob.status


BACKENDS = {"clarabel": _solve_clarabel, "cvxpy": _solve_cvxpy}


def solve_feasibility(sdp: SdpProblem, backend: str = "clarabel") -> FeasibilityResult:
    """Maximize the margin; feasible iff the optimum exceeds 1e-7.

    The returned point is re-checked block by block with a symmetric
    eigensolver; a residual above 1e-7 is a :class:`SolverError`.
    """
    try:
        solver = BACKENDS[backend]
    except KeyError:
        raise SolverError(f"unknown backend {backend!r}; choose from {sorted(BACKENDS)}") from None
    t0 = time.perf_counter()
    z, status = solver(sdp)
    elapsed = time.perf_counter() - t0
    if z is None or not np.all(np.isfinite(z)):
        raise SolverError(f"{backend} returned a non-finite solution ({status})")
    res = sdp.residual(z)
    if res > RESIDUAL_TOL and res < REPAIR_MAX and sdp.margin_is_shift():
        # every block carries +m*I, so lowering m by the violation restores feasibility exactly
        log.debug("lowering margin by solver residual %.3g (%s)", res, status)
        z = z.copy()
        z[sdp.margin_index] -= res
        res = sdp.residual(z)
    if res > RESIDUAL_TOL:
        raise SolverError(f"{backend} solution violates a block by {res:.3g} (> {RESIDUAL_TOL:g}); "
                          f"status {status}")
    Q, m = sdp.unpack(z)
    return FeasibilityResult(feasible=m > STRICT_MARGIN, Q=Q, margin=m, residual=res,
                             status=status, solve_time=elapsed)


# --------------------------------------------------------------------------
# gain scan

@dataclass
class SynthesisResult:
    ka: float
    k: float
    alpha: float
    Q: np.ndarray
    margin: float
    K: MatrixSchedule
    shrunk: ShrunkSpec
    grid: TimeGrid
    residual: float = 0.0
    scan: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ka": self.ka, "k": self.k, "alpha": self.alpha, "margin": self.margin,
            "residual": self.residual,
            "grid": {"t0": self.grid.t0, "T": self.grid.T, "N": self.grid.N},
            "Q": self.Q.tolist(),
            "K": self.K.to_dict(),
            "r": self.shrunk.r.tolist(),
            "scan": [{"ka": a, "margin": m} for a, m in self.scan],
        }


def scan_values(step: float, ka_max: float) -> list[float]:
    if not step > 0:
        raise DomainError("scan step must be positive")
    count = int(math.floor(ka_max / step + 1e-9))
    return [round(i * step, 12) for i in range(count + 1)]


def scan_gain(p: FtsProblem, spec: ShrunkSpec, grid: TimeGrid, step: float = 0.01,
              ka_max: float = 10.0, backend: str = "clarabel",
              split: tuple[float, float] | None = None) -> SynthesisResult:
    """Smallest ka in {0, step, 2 step, ...} whose discretized DLMI is feasible.

    The scan is strictly sequential from zero; feasibility is not assumed to
    be monotone in ka.
    """
    trace = []
    for ka in scan_values(step, ka_max):
        sdp = assemble_lmi(p, spec, ka, grid)
        res = solve_feasibility(sdp, backend)
        trace.append((ka, res.margin))
        log.info("ka = %.4g margin = %.3e (%.2fs)", ka, res.margin, res.solve_time)
        if res.feasible:
            K, k, alpha = extract_gain(p, ka, grid, split)
            return SynthesisResult(ka=ka, k=k, alpha=alpha, Q=res.Q, margin=res.margin, K=K,
                                   shrunk=spec, grid=grid, residual=res.residual, scan=trace)
    best = max(trace, key=lambda x: x[1])
    raise SynthesisFailedError(
        f"no feasible ka <= {ka_max:g} (step {step:g}); best margin {best[1]:.3g} at ka = {best[0]:g}")


def extract_gain(p: FtsProblem, ka: float, grid: TimeGrid,
                 split: tuple[float, float] | None = None) -> tuple[MatrixSchedule, float, float]:
    """K(t) = -ka B(t)' Pi(t) on the grid, plus the (k, alpha) split with k * alpha = ka."""
    if ka < 0:
        raise DomainError("ka must be non-negative")
    if split is None:
        k, alpha = default_split(ka)
    else:
        k, alpha = map(float, split)
        if k <= 0 or alpha <= 0 or abs(k * alpha - ka) > 1e-9 * max(ka, 1.0):
            raise DomainError(f"split k = {k}, alpha = {alpha} does not multiply to ka = {ka}")
    nodes = grid.nodes
    B = eval_schedule(p.B, nodes)
    Pi = eval_schedule(p.Pi, nodes)
    K = -ka * np.swapaxes(B, 1, 2) @ Pi
    return MatrixSchedule.sampled(nodes, K), k, alpha


def certificate_residual(p: FtsProblem, result: SynthesisResult) -> float:
    """Re-assemble the blocks at result.ka and return max eigenvalue with the margin removed.

    For a valid certificate this is <= -(margin - 1e-7).
    """
    sdp = assemble_lmi(p, result.shrunk, result.ka, result.grid)
    z = sdp.pack(result.Q, 0.0)
    return sdp.residual(z)
