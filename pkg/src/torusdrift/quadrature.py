"""Gauss-Legendre quadrature on the unit cell and along lines.

All integrals in the package go through these helpers so that refinement
policy (double the resolution until two successive passes agree to a
relative tolerance) is applied uniformly.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import TorusDriftError

#: hard cap on tensor-grid size, to keep refinement from exploding in high d
MAX_TENSOR_POINTS = 1 << 22


@lru_cache(maxsize=32)
def gauss_legendre_01(n: int):
    """Nodes and weights of n-point Gauss-Legendre quadrature on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def tensor_nodes(dim: int, n: int):
    """Tensor Gauss-Legendre nodes on [0,1]^dim as an (n^dim, dim) array."""
    if n**dim > MAX_TENSOR_POINTS:
        raise TorusDriftError(
            f"tensor quadrature grid {n}^{dim} exceeds cap {MAX_TENSOR_POINTS}"
        )
    x, w = gauss_legendre_01(n)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = grids[0].copy().ravel()
    wts[:] = 1.0
    for axis in range(dim):
        wts *= np.meshgrid(*([w] * dim), indexing="ij")[axis].ravel()
    return pts, wts


def tensor_integral(f, dim: int, n: int) -> float:
    """Integrate f over [0,1]^dim with an n-per-axis Gauss-Legendre grid."""
    pts, wts = tensor_nodes(dim, n)
    return float(np.dot(wts, f(pts)))


def refine_tensor_integral(f, dim: int, n0: int = 64, rel_tol: float = 1e-12,
                           max_doublings: int = 6) -> float:
    """Refine tensor quadrature by doubling n until two passes agree.

    Agreement is relative: |I_k - I_{k-1}| <= rel_tol * max(|I_k|, 1e-300).
    """
    n = n0
    prev = tensor_integral(f, dim, n)
    for _ in range(max_doublings):
        n *= 2
        if n**dim > MAX_TENSOR_POINTS:
            break
        cur = tensor_integral(f, dim, n)
        if abs(cur - prev) <= rel_tol * max(abs(cur), 1e-300):
            return cur
        prev = cur
    return prev


def refined_line_minimum(f, lo: float, hi: float, per_unit: float,
                         n_polish: int = 3) -> float:
    """Minimum of a smooth function on [lo, hi]: grid scan plus polish.

    ``f`` maps an array of parameters to an array of values.  The few
    smallest interior dips are each polished by bounded minimization, so a
    tangential zero between grid points is not shadowed by a slightly
    deeper sampled dip elsewhere.
    """
    n = int(min(4_000_000, max(64, np.ceil((hi - lo) * per_unit))))
    s = np.linspace(lo, hi, n)
    vals = np.asarray(f(s))
    spacing = (hi - lo) / max(n - 1, 1)
    interior = (vals[1:-1] <= vals[:-2]) & (vals[1:-1] <= vals[2:])
    dips = np.flatnonzero(interior) + 1
    order = dips[np.argsort(vals[dips])][:n_polish] if len(dips) else []
    best = float(np.min(vals))
    for i in [int(np.argmin(vals))] + [int(j) for j in order]:
        res = minimize_scalar(lambda u: float(np.asarray(f(np.atleast_1d(u)))[0]),
                              method="bounded",
                              bounds=(s[i] - spacing, s[i] + spacing),
                              options={"xatol": 1e-12})
        best = min(best, float(res.fun))
    return best


class LineQuadrature:
    """Cumulative composite Gauss-Legendre integral of f along [base, top].

    Panels of equal width are laid over the interval; the cumulative
    integral at panel edges is tabulated once, so that F(u) for any u in
    the interval costs one partial-panel quadrature.  Refinement doubles
    the panel count until the total integral is stable to ``rel_tol``.
    """

    def __init__(self, f, base: float, top: float, *, nodes: int = 16,
                 panels_per_unit: float = 4.0, rel_tol: float = 1e-12,
                 max_doublings: int = 6):
        if not top > base:
            raise ValueError("empty integration interval")
        self.f = f
        self.base = float(base)
        self.top = float(top)
        self.nodes = nodes
        length = self.top - self.base
        n_panels = max(4, int(np.ceil(panels_per_unit * length)))
        total = self._tabulate(n_panels)
        for _ in range(max_doublings):
            n_panels *= 2
            if n_panels * nodes > 200_000_000:
                break
            new_total = self._tabulate(n_panels)
            if abs(new_total - total) <= rel_tol * max(abs(new_total), 1e-300):
                total = new_total
                break
            total = new_total
        self.total = total

    def _tabulate(self, n_panels: int) -> float:
        x, w = gauss_legendre_01(self.nodes)
        edges = np.linspace(self.base, self.top, n_panels + 1)
        width = edges[1] - edges[0]
        # all panel nodes at once: (n_panels, nodes)
        pts = edges[:-1, None] + width * x[None, :]
        vals = self.f(pts.ravel()).reshape(n_panels, self.nodes)
        panel_ints = width * vals @ w
        self.edges = edges
        self.cum = np.concatenate([[0.0], np.cumsum(panel_ints)])
        return float(self.cum[-1])

    def integral_from_base(self, u: float) -> float:
        """F(u) = integral of f over [base, u], for u within the interval."""
        u = float(u)
        if u <= self.base:
            return 0.0
        if u >= self.top:
            return float(self.cum[-1])
        i = int(np.searchsorted(self.edges, u, side="right") - 1)
        lo = self.edges[i]
        x, w = gauss_legendre_01(self.nodes)
        pts = lo + (u - lo) * x
        return float(self.cum[i] + (u - lo) * np.dot(w, self.f(pts)))
