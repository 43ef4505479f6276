"""Quadrature grids shared by the numeric modules."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _leggauss(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(lo: float, hi: float, order: int):
    x, w = _leggauss(order)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def gauss_legendre_panels(lo: float, hi: float, panels: int, order: int):
    """Composite Gauss-Legendre rule with equal panels on [lo, hi]."""
    edges = np.linspace(lo, hi, panels + 1)
    x, w = _leggauss(order)
    half = 0.5 * np.diff(edges)
    nodes = edges[:-1, None] + half[:, None] * (x[None, :] + 1.0)
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def polar_grid(radius: float, n_r: int, n_theta: int, center: complex = 0.0, r_panels: int = 1):
    """Tensor polar rule for the area measure dA = r dr dtheta / pi on a disk.

    Radial direction: Gauss-Legendre (optionally composite); angular direction:
    the trapezoid rule, spectrally accurate for periodic integrands.
    """
    r, wr = gauss_legendre_panels(0.0, radius, r_panels, n_r) if r_panels > 1 else gauss_legendre(0.0, radius, n_r)
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    z = center + (r[:, None] * np.exp(1j * theta[None, :]))
    w = (r * wr)[:, None] * np.full(n_theta, 2.0 / n_theta)[None, :]
    return z.ravel(), w.ravel()


def square_grid(half_width: float, order: int, center: complex = 0.0, panels: int = 1):
    """Tensor Gauss-Legendre rule on a square, weights for dA = dx dy / pi."""
    x, w = gauss_legendre_panels(-half_width, half_width, panels, order)
    z = center + x[:, None] + 1j * x[None, :]
    ww = w[:, None] * w[None, :] / np.pi
    return z.ravel(), ww.ravel()
