"""Quadrature grids on boxes.

Midpoint grids are what the risk computations use.  Tree estimates are
piecewise constant against the base density, so integrating them on a grid
refined by their own cut points is exact up to the base-density rule.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Tensor grid of query points with per-point quadrature weights."""

    points: np.ndarray
    weights: np.ndarray
    shape: tuple

    @property
    def dim(self):
        return self.points.shape[1]

    def integrate(self, values):
        return float(np.dot(np.asarray(values, dtype=float).ravel(), self.weights))


def _tensor(axes, widths):
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    w = np.ones(1)
    for wj in widths:
        w = np.multiply.outer(w, wj).ravel()
    return Grid(pts, w, tuple(a.size for a in axes))


def midpoint_grid(cells, lower, upper):
    """Cell midpoints of a uniform grid with ``cells`` cells per axis."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    axes, widths = [], []
    for lo, hi in zip(lower, upper):
        h = (hi - lo) / cells
        axes.append(lo + (np.arange(cells) + 0.5) * h)
        widths.append(np.full(cells, h))
    return _tensor(axes, widths)


def refined_grid(cuts, cells, lower, upper):
    """Midpoint grid on the union of a uniform grid and per-axis ``cuts``."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    axes, widths = [], []
    for j, (lo, hi) in enumerate(zip(lower, upper)):
        c = np.asarray(cuts[j], dtype=float)
        c = c[(c > lo) & (c < hi)]
        edges = np.unique(np.concatenate([np.linspace(lo, hi, cells + 1), c]))
        axes.append(0.5 * (edges[:-1] + edges[1:]))
        widths.append(np.diff(edges))
    return _tensor(axes, widths)


def gauss_legendre_grid(panels, order, lower, upper):
    """Composite Gauss-Legendre rule with ``panels`` equal panels per axis."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    x, w = np.polynomial.legendre.leggauss(order)
    axes, widths = [], []
    for lo, hi in zip(lower, upper):
        h = (hi - lo) / panels
        left = lo + np.arange(panels) * h
        axes.append((left[:, None] + 0.5 * h * (x + 1.0)[None, :]).ravel())
        widths.append(np.tile(0.5 * h * w, panels))
    return _tensor(axes, widths)


def bin_probabilities(pdf, bins, order=8, lower=(0.0, 0.0), upper=(1.0, 1.0)):
    """Integral of ``pdf`` over each cell of a ``bins``-per-axis grid (C order)."""
    g = gauss_legendre_grid(bins, order, lower, upper)
    vals = pdf(g.points) * g.weights
    d = len(lower)
    shape = []
    for _ in range(d):
        shape += [bins, order]
    vals = vals.reshape(shape)
    return vals.sum(axis=tuple(range(1, 2 * d, 2)))
