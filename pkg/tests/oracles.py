"""Independent reference computations shared by the unit and acceptance tests."""
import numpy as np
from scipy.spatial.distance import cdist


def random_spd(rng, n, lo=0.5, hi=4.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    M = Q @ np.diag(rng.uniform(lo, hi, n)) @ Q.T
    return 0.5 * (M + M.T)


def _sphere(n, count):
    if n == 2:
        th = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    i = np.arange(count) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / count)
    th = np.pi * (1.0 + 5 ** 0.5) * i
    return np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=1)


def _patch(d, width, count):
    """Unit directions in a square tangent patch of half-width ``width`` around d."""
    basis = np.linalg.svd(d[None, :])[2][1:]
    g = np.linspace(-width, width, count)
    coords = np.stack(np.meshgrid(*([g] * basis.shape[0])), axis=-1).reshape(-1, basis.shape[0])
    P = d + coords @ basis
    return P / np.linalg.norm(P, axis=1, keepdims=True)


def _closest_pair(U, W, to_outer, to_inner):
    X, Y = to_outer(U), to_inner(W)
    D = cdist(X, Y)
    i, j = np.unravel_index(np.argmin(D), D.shape)
    return float(D[i, j]), U[i], W[j]


def brute_force_distance(G, r, rounds=4):
    """Nearest pair between sampled boundaries of {x'Gx = 1} and {y'Gy = r^2}.

    An all-pairs scan on a coarse direction set is followed by all-pairs scans
    on successively narrower patches around the best pair found so far.
    """
    n = G.shape[0]
    lam, V = np.linalg.eigh(G)
    M = V / np.sqrt(lam)
    outer = lambda U: U @ M.T  # noqa: E731
    inner = lambda U: r * (U @ M.T)  # noqa: E731
    U = _sphere(n, 4000 if n == 2 else 3000)
    best, du, dw = _closest_pair(U, U, outer, inner)
    width = 0.1 if n == 3 else 0.01
    for _ in range(rounds):
        cnt = 400 if n == 2 else 50
        best, du, dw = _closest_pair(_patch(du, width, cnt), _patch(dw, width, cnt), outer, inner)
        width /= 8.0
    return best


def scalar_threshold(a, b, g, rho, T, Delta, N):
    """Smallest ka for which the one-state discretized conditions are feasible.

    With Gbar = g / r^2 and abar = a - ka b^2 g, a linear Q on each step must
    satisfy Q_{k+1} (1 - 2 abar h) >= Q_k, Q_0 >= 1/rho and Q_N <= 1/Gbar.
    For abar > 0 this reads (1 - 2 abar h)^(-N) < rho / Gbar.
    """
    r = 1.0 - Delta * np.sqrt(g)
    Gbar = g / r ** 2
    h = T / N
    abar_max = (1.0 - (Gbar / rho) ** (1.0 / N)) / (2.0 * h)
    return (a - abar_max) / (b * b * g)
