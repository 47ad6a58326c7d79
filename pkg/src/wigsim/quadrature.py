"""Composite Gauss-Legendre rules on intervals and squares."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_rule(lo: float, hi: float, panels: int, order: int):
    """Nodes and weights of ``panels`` equal Gauss-Legendre panels covering [lo, hi]."""
    x, w = _legendre(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def bin_rules(centers, width: float, order: int):
    """Per-bin Gauss-Legendre nodes: arrays of shape (len(centers), order)."""
    x, w = _legendre(order)
    centers = np.asarray(centers, dtype=float)
    nodes = centers[:, None] + 0.5 * width * x[None, :]
    weights = np.broadcast_to(0.5 * width * w, nodes.shape)
    return nodes, weights


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor rule on the square ``center +- half_width``."""

    center: tuple
    half_width: float
    panels: int = 40
    order: int = 8

    def nodes(self):
        cq, cp = self.center
        q, wq = composite_rule(cq - self.half_width, cq + self.half_width, self.panels, self.order)
        p, wp = composite_rule(cp - self.half_width, cp + self.half_width, self.panels, self.order)
        Q, P = np.meshgrid(q, p, indexing="ij")
        W = np.outer(wq, wp)
        return Q, P, W

    def refined(self, factor: int = 2) -> QuadratureSpec:
        return QuadratureSpec(self.center, self.half_width, self.panels * factor, self.order)


def integrate_square(f, center, half_width, panels=40, order=8):
    """Integral of the vectorised ``f(q, p)`` over the square ``center +- half_width``."""
    Q, P, W = QuadratureSpec(tuple(center), half_width, panels, order).nodes()
    return float(np.sum(f(Q, P) * W))


def integrate_rect(f, q_lo, q_hi, p_lo, p_hi, panels=8, order=8):
    q, wq = composite_rule(q_lo, q_hi, panels, order)
    p, wp = composite_rule(p_lo, p_hi, panels, order)
    Q, P = np.meshgrid(q, p, indexing="ij")
    return float(np.sum(f(Q, P) * np.outer(wq, wp)))


@lru_cache(maxsize=None)
def _hermite(order: int):
    x, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / np.sqrt(2 * np.pi)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gaussian_rule(mean, cov, order: int):
    """Nodes (order^2, 2) and weights with ``sum w f(x) ~ E[f(X)]`` for ``X ~ N(mean, cov)``.

    Tensor Gauss-Hermite rule mapped through the Cholesky factor of ``cov``; exact
    for polynomials of degree below ``2 * order`` in each coordinate.
    """
    x, w = _hermite(order)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    L = np.linalg.cholesky(np.asarray(cov, dtype=float))
    Z = np.column_stack([X1.ravel(), X2.ravel()])
    nodes = np.asarray(mean, dtype=float) + Z @ L.T
    return nodes, np.outer(w, w).ravel()
