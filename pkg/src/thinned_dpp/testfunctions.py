"""Test functions for linear statistics on the line and in the plane.

Fourier convention: f^(u) = int f(x) exp(-2 pi i x u) dx.
Chebyshev coefficients: c_k(f) = (2/pi) int_{-1}^{1} f(x) T_k(x) / sqrt(1 - x^2) dx.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial as _NpPoly
from scipy import special

from .quadrature import gauss_legendre_panels

CHEB_NODES = 256


class TestFunction:
    """Interface shared by all variants.

    1D variants implement ``derivative``; 2D variants implement ``dz`` and
    ``dzbar`` (Wirtinger derivatives). ``support`` is ``(center, radius)``
    for compactly supported functions and ``None`` otherwise.
    """

    __test__ = False  # keep pytest from collecting this class
    dimension: int = 1

    def __call__(self, x):
        raise NotImplementedError

    def derivative(self, x):
        raise NotImplementedError

    def dz(self, z):
        raise NotImplementedError

    def dzbar(self, z):
        # real-valued f: dbar f = conj(d f)
        return np.conj(self.dz(z))

    def fourier(self, u):
        return _fourier_by_quadrature(self, u)

    @property
    def support(self) -> Optional[tuple]:
        return None

    def effective_radius(self, tol: float = 1e-16) -> float:
        """Radius around the center outside which |f| < tol."""
        if self.support is not None:
            return float(self.support[1])
        raise NotImplementedError

    @property
    def center(self):
        return 0.0

    def chebyshev(self, kmax: int = 64) -> np.ndarray:
        """c_0..c_kmax by 256-node Gauss-Chebyshev quadrature."""
        if self.dimension != 1:
            raise ValueError("Chebyshev coefficients are for 1D functions")
        j = np.arange(CHEB_NODES)
        theta = np.pi * (j + 0.5) / CHEB_NODES
        fx = np.asarray(self(np.cos(theta)), dtype=float)
        k = np.arange(kmax + 1)
        return (2.0 / CHEB_NODES) * np.cos(k[:, None] * theta[None, :]) @ fx

    def rescaled(self, L: float, x0=0.0) -> "Rescaled":
        """z -> f(L (z - x0))."""
        return Rescaled(self, float(L), x0)

    def __neg__(self):
        return Scaled(self, -1.0)

    def scaled(self, c: float) -> "Scaled":
        return Scaled(self, float(c))


def _fourier_by_quadrature(f: TestFunction, u, order: int = 400):
    if f.dimension != 1:
        raise ValueError("Fourier transform implemented for 1D functions")
    c = float(np.real(f.center))
    R = f.effective_radius()
    x, w = gauss_legendre_panels(c - R, c + R, 8, order // 8)
    u = np.asarray(u, dtype=float)
    return np.exp(-2j * np.pi * np.multiply.outer(u, x)) @ (w * f(x))


@dataclass(frozen=True, eq=False)
class Polynomial(TestFunction):
    """1D polynomial sum_j c_j x^j."""

    coefficients: tuple[float, ...]

    def __init__(self, coefficients: Sequence[float]):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in coefficients))

    @property
    def poly(self) -> _NpPoly:
        return _NpPoly(self.coefficients)

    @property
    def degree(self) -> int:
        return self.poly.degree() if any(self.coefficients) else 0

    def __call__(self, x):
        return self.poly(np.asarray(x, dtype=float))

    def derivative(self, x):
        return self.poly.deriv()(np.asarray(x, dtype=float))

    def chebyshev(self, kmax: Optional[int] = None) -> np.ndarray:
        kmax = self.degree if kmax is None else kmax
        return super().chebyshev(kmax)

    def fourier(self, u):
        raise ValueError("polynomials have no Fourier transform")

    def __repr__(self):
        return f"Polynomial({self.coefficients})"


@dataclass(frozen=True, eq=False)
class PolynomialZ(TestFunction):
    """Real polynomial in z and conj(z): sum c_{jk} z^j conj(z)^k, with c_{kj} = conj(c_{jk})."""

    terms: tuple  # ((j, k, c), ...)
    dimension: int = 2

    def __init__(self, terms: dict):
        t = tuple(sorted((int(j), int(k), complex(c)) for (j, k), c in terms.items()))
        object.__setattr__(self, "terms", t)
        object.__setattr__(self, "dimension", 2)

    @classmethod
    def real_part(cls):
        return cls({(1, 0): 0.5, (0, 1): 0.5})

    @classmethod
    def modulus_squared(cls):
        return cls({(1, 1): 1.0})

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for j, k, c in self.terms:
            out += c * z**j * np.conj(z) ** k
        return np.real(out)

    def dz(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for j, k, c in self.terms:
            if j:
                out += c * j * z ** (j - 1) * np.conj(z) ** k
        return out

    def gradient(self, z):
        d = self.dz(z)
        # f_x = 2 Re(df), f_y = -2 Im(df)
        return 2 * np.real(d), -2 * np.imag(d)


@dataclass(frozen=True, eq=False)
class GaussianBump(TestFunction):
    """amplitude * exp(-a |x - center|^2) on the line (dimension 1) or plane (2)."""

    a: float = np.pi
    center: complex = 0.0
    amplitude: float = 1.0
    dimension: int = 1

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("width parameter must be positive")

    def __call__(self, x):
        x = np.asarray(x)
        return self.amplitude * np.exp(-self.a * np.abs(x - self.center) ** 2)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return -2 * self.a * (x - np.real(self.center)) * self(x)

    def dz(self, z):
        z = np.asarray(z, dtype=complex)
        return -self.a * np.conj(z - self.center) * self(z)

    def fourier(self, u):
        if self.dimension != 1:
            raise ValueError("Fourier transform implemented for 1D functions")
        u = np.asarray(u, dtype=float)
        c = float(np.real(self.center))
        return self.amplitude * np.sqrt(np.pi / self.a) * np.exp(-(np.pi**2) * u**2 / self.a - 2j * np.pi * u * c)

    def effective_radius(self, tol: float = 1e-16) -> float:
        return float(np.sqrt(max(np.log(abs(self.amplitude) / tol), 1.0) / self.a))


@dataclass(frozen=True, eq=False)
class SmoothBump(TestFunction):
    """amplitude * (1 - |x - center|^2 / radius^2)^4 inside the ball, 0 outside (C^3)."""

    radius: float = 1.0
    center: complex = 0.0
    amplitude: float = 1.0
    dimension: int = 1

    def _s(self, x):
        return np.abs(np.asarray(x) - self.center) ** 2 / self.radius**2

    def __call__(self, x):
        s = self._s(x)
        return self.amplitude * np.where(s < 1, (1 - np.minimum(s, 1)) ** 4, 0.0)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        s = self._s(x)
        inner = -8 * (x - np.real(self.center)) / self.radius**2 * (1 - np.minimum(s, 1)) ** 3
        return self.amplitude * np.where(s < 1, inner, 0.0)

    def dz(self, z):
        z = np.asarray(z, dtype=complex)
        s = self._s(z)
        inner = -4 * np.conj(z - self.center) / self.radius**2 * (1 - np.minimum(s, 1)) ** 3
        return self.amplitude * np.where(s < 1, inner, 0.0)

    @property
    def support(self):
        return (self.center, self.radius)

    def fourier(self, u):
        # int_{-1}^{1} (1 - x^2)^4 e^{-i w x} dx = sqrt(pi) 4! (2/w)^{9/2} J_{9/2}(w)
        if self.dimension != 1:
            raise ValueError("Fourier transform implemented for 1D functions")
        u = np.asarray(u, dtype=float)
        w = 2 * np.pi * np.abs(u) * self.radius
        small = w < 1e-2
        ws = np.where(small, 1.0, w)
        big = np.sqrt(np.pi) * 24.0 * (2.0 / ws) ** 4.5 * special.jv(4.5, ws)
        # even series: 256/315 (1 - w^2/22 + w^4/1144)
        series = 256.0 / 315.0 * (1 - w**2 / 22 + w**4 / 1144)
        val = np.where(small, series, big)
        c = float(np.real(self.center))
        return self.amplitude * self.radius * val * np.exp(-2j * np.pi * u * c)


@dataclass(frozen=True, eq=False)
class Rescaled(TestFunction):
    """f_N(z) = f(L (z - x0))."""

    base: TestFunction
    L: float
    x0: complex = 0.0

    @property
    def dimension(self):
        return self.base.dimension

    def __call__(self, x):
        return self.base(self.L * (np.asarray(x) - self.x0))

    def derivative(self, x):
        return self.L * self.base.derivative(self.L * (np.asarray(x) - self.x0))

    def dz(self, z):
        return self.L * self.base.dz(self.L * (np.asarray(z) - self.x0))

    @property
    def center(self):
        return self.x0 + self.base.center / self.L

    @property
    def support(self):
        if self.base.support is None:
            return None
        c, r = self.base.support
        return (self.x0 + c / self.L, r / self.L)

    def effective_radius(self, tol: float = 1e-16) -> float:
        return self.base.effective_radius(tol) / self.L

    def fourier(self, u):
        # f(L(x - x0))^ (u) = e^{-2 pi i x0 u} f^(u / L) / L
        u = np.asarray(u, dtype=float)
        return np.exp(-2j * np.pi * np.real(self.x0) * u) * self.base.fourier(u / self.L) / self.L


@dataclass(frozen=True, eq=False)
class Scaled(TestFunction):
    base: TestFunction
    c: float

    @property
    def dimension(self):
        return self.base.dimension

    def __call__(self, x):
        return self.c * self.base(x)

    def derivative(self, x):
        return self.c * self.base.derivative(x)

    def dz(self, z):
        return self.c * self.base.dz(z)

    def fourier(self, u):
        return self.c * self.base.fourier(u)

    @property
    def center(self):
        return self.base.center

    @property
    def support(self):
        return self.base.support

    def effective_radius(self, tol: float = 1e-16) -> float:
        return self.base.effective_radius(tol)


def from_spec(text: str, dimension: int = 1) -> TestFunction:
    """Parse a compact description: ``poly:0,0,1``, ``gauss:a[,center]``, ``bump:radius[,center]``,
    ``re``, ``abs2``."""
    kind, _, args = text.strip().partition(":")
    vals = [float(v) for v in args.split(",") if v.strip()] if args else []
    kind = kind.lower()
    if kind == "poly":
        return Polynomial(vals)
    if kind == "gauss":
        a = vals[0] if vals else np.pi
        return GaussianBump(a=a, center=vals[1] if len(vals) > 1 else 0.0, dimension=dimension)
    if kind == "bump":
        r = vals[0] if vals else 1.0
        return SmoothBump(radius=r, center=vals[1] if len(vals) > 1 else 0.0, dimension=dimension)
    if kind == "re":
        return PolynomialZ.real_part()
    if kind == "abs2":
        return PolynomialZ.modulus_squared()
    raise ValueError(f"unknown test function {text!r}")
