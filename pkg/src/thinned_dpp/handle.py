"""Evaluable correlation kernels with metadata."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .quadrature import gauss_legendre_panels, polar_grid


@dataclass(frozen=True)
class KernelHandle:
    """A correlation kernel K(z, w) with respect to dx (1D) or dA = dx dy / pi (2D).

    ``basis`` is set for finite-rank projection kernels, returning the matrix
    of basis functions so that K(z, w) = sum_k phi_k(z) conj(phi_k(w)).
    ``window`` is the region carrying the mass of the one-point function:
    an interval (lo, hi) in 1D and (center, radius) in 2D.
    """

    dimension: int
    family: str
    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    diagonal: Callable[[np.ndarray], np.ndarray]
    rank: Optional[int] = None
    basis: Optional[Callable[[np.ndarray], np.ndarray]] = None
    window: Any = None
    density: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __call__(self, z, w):
        return self.evaluator(np.asarray(z), np.asarray(w))

    @property
    def is_real(self) -> bool:
        return self.dimension == 1

    def matrix(self, nodes: np.ndarray) -> np.ndarray:
        """Kernel matrix K(x_i, x_j) on a node set."""
        nodes = np.asarray(nodes)
        if self.basis is not None:
            phi = self.basis(nodes)
            return phi @ phi.conj().T
        return self.evaluator(nodes[:, None], nodes[None, :])

    def window_rule(self, order: int = 400):
        """A default quadrature rule covering the kernel's one-point mass."""
        if self.window is None:
            raise ValueError(f"kernel {self.family!r} has no finite window")
        if self.dimension == 1:
            lo, hi = self.window
            return gauss_legendre_panels(lo, hi, max(1, order // 40), 40)
        center, radius = self.window
        return polar_grid(radius, order // 4, order // 2, center=center)

    def trace(self, order: int = 400) -> float:
        x, w = self.window_rule(order)
        return float(np.sum(w * np.real(self.diagonal(x))))

    def hermitian_residual(self, z, w) -> float:
        z = np.asarray(z)
        w = np.asarray(w)
        a = self(z, w)
        b = np.conj(self(w, z))
        return float(np.max(np.abs(a - b)))

    def reproducing_residual(self, z, w, rule=None) -> float:
        """max |int K(z, x) K(x, w) dmu(x) - K(z, w)| over the given pairs."""
        z = np.atleast_1d(np.asarray(z))
        w = np.atleast_1d(np.asarray(w))
        x, wt = rule if rule is not None else self.window_rule()
        left = self(z[:, None], x[None, :])
        right = self(x[:, None], w[None, :])
        integral = np.einsum("ij,j,ji->i", left, wt, right)
        return float(np.max(np.abs(integral - self(z, w))))
