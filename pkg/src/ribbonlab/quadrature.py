"""Gauss-Legendre rules used throughout (1D composite and tensor products)."""

import numpy as np


def gauss_legendre(order, a=-1.0, b=1.0):
    """Nodes and weights of the `order`-point rule on [a, b]."""
    x, wt = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * wt


def composite_gauss(a, b, panels=64, order=5):
    """Composite rule with `panels` equal panels; weights sum to b - a."""
    edges = np.linspace(a, b, panels + 1)
    x, wt = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * wt[None, :]).ravel()
    return nodes, weights


def midline_average(fvals, weights, length):
    """Average over (0, L) from values at composite nodes."""
    return float(np.dot(fvals, weights) / length)
