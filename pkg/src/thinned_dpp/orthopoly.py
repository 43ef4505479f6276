"""Orthonormal polynomials for the weight exp(-2 N V(x)) on the real line.

Recurrence coefficients, Jacobi matrices, the weighted functions
phi_k = P_k exp(-N V), the Christoffel-Darboux kernel, and equilibrium
measures of the built-in even potentials.
"""

from __future__ import annotations

import logging
from math import comb
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import optimize, sparse
from scipy.special import logsumexp

from .handle import KernelHandle
from .quadrature import gauss_legendre, gauss_legendre_panels

log = logging.getLogger(__name__)

_LOG_TINY = np.log(1e-300)
_RESCALE = 1e150


class GridInsufficientError(RuntimeError):
    """Recurrence coefficients moved under grid refinement."""


class NormalizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Potential1D:
    """Even polynomial potential V(x) = sum_j c_j x^j.

    Built-in catalog: ``quadratic`` (V = x^2) and ``quartic`` (V = x^2 + t x^4);
    ``custom`` accepts any even polynomial that is convex on the line.
    """

    kind: str
    coefficients: tuple[float, ...]
    t: float = 0.0
    nu: float = 0.5

    @classmethod
    def quadratic(cls) -> "Potential1D":
        return cls("quadratic", (0.0, 0.0, 1.0))

    @classmethod
    def quartic(cls, t: float) -> "Potential1D":
        if t < 0:
            raise ValueError("quartic potential requires t >= 0")
        return cls("quartic", (0.0, 0.0, 1.0, 0.0, float(t)), t=float(t))

    @classmethod
    def custom(cls, coefficients: Sequence[float]) -> "Potential1D":
        c = tuple(float(v) for v in coefficients)
        if any(c[j] != 0 for j in range(1, len(c), 2)):
            raise ValueError("custom potentials must be even polynomials")
        pot = cls("custom", c)
        if not pot.is_convex():
            raise ValueError("custom potential is not convex on the real line")
        return pot

    @classmethod
    def from_name(cls, name: str, t: float = 0.0, coefficients: Optional[Sequence[float]] = None):
        name = name.lower()
        if name == "quadratic":
            return cls.quadratic()
        if name in ("quartic", "quarticconvex"):
            return cls.quartic(t)
        if name == "custom":
            return cls.custom(coefficients or ())
        raise ValueError(f"unknown 1D potential {name!r}")

    @property
    def poly(self) -> Polynomial:
        return Polynomial(self.coefficients)

    def __call__(self, x):
        return self.poly(np.asarray(x, dtype=float))

    def derivative(self, x):
        return self.poly.deriv()(np.asarray(x, dtype=float))

    def is_convex(self) -> bool:
        d2 = self.poly.deriv(2)
        xs = np.linspace(-50, 50, 20001)
        return bool(np.all(d2(xs) >= -1e-12))

    def check_growth(self, xmax: float = 1e6) -> bool:
        """V(x) >= (1 + nu) log|x| on a log-spaced grid of large |x|."""
        xs = np.logspace(1, np.log10(xmax), 200)
        return bool(np.all(self(xs) >= (1 + self.nu) * np.log(xs)) and np.all(self(-xs) >= (1 + self.nu) * np.log(xs)))

    @property
    def is_even(self) -> bool:
        return all(c == 0 for c in self.coefficients[1::2])

    @property
    def label(self) -> str:
        return "quadratic" if self.kind == "quadratic" else f"{self.kind}(t={self.t:g})" if self.kind == "quartic" else "custom"


@dataclass(frozen=True)
class JacobiMatrix:
    """Recurrence coefficients x P_k = a_k P_{k+1} + b_k P_k + a_{k-1} P_{k-1}.

    ``a`` and ``b`` have length ``size``; the truncated matrix is size x size
    with a[:-1] on the off-diagonals. ``log_mu0`` is log of the total weight
    int exp(-2 N V), which fixes P_0.
    """

    a: np.ndarray
    b: np.ndarray
    N: int
    log_mu0: float
    potential: Potential1D = field(default_factory=Potential1D.quadratic)

    def __post_init__(self):
        if np.any(self.a <= 0):
            raise ValueError("recurrence coefficients a_k must be positive")
        if self.a.shape != self.b.shape:
            raise ValueError("a and b must have equal length")

    @property
    def size(self) -> int:
        return len(self.a)

    def matrix(self, dim: Optional[int] = None, fmt: str = "dense"):
        dim = self.size if dim is None else dim
        if dim > self.size:
            raise ValueError(f"requested dimension {dim} exceeds stored size {self.size}")
        off = self.a[: dim - 1]
        if fmt == "dense":
            return np.diag(self.b[:dim]) + np.diag(off, 1) + np.diag(off, -1)
        return sparse.diags([off, self.b[:dim], off], [-1, 0, 1], format=fmt)


def hermite_recurrence(N: int, size: int) -> JacobiMatrix:
    """Closed-form coefficients for V(x) = x^2: a_k = sqrt((k+1)/(4N)), b_k = 0."""
    if size < N:
        raise ValueError("size must be >= N")
    k = np.arange(size, dtype=float)
    a = np.sqrt((k + 1) / (4.0 * N))
    return JacobiMatrix(a=a, b=np.zeros(size), N=N, log_mu0=0.5 * np.log(np.pi / (2.0 * N)), potential=Potential1D.quadratic())


@dataclass(frozen=True)
class StieltjesGrid:
    panels: int = 64
    order: int = 40
    radius: Optional[float] = None

    def refined(self) -> "StieltjesGrid":
        return StieltjesGrid(self.panels * 2, self.order, self.radius)


def _weight_radius(V: Potential1D, N: int, degree: int) -> float:
    """Radius beyond which x^(2 degree) exp(-2 N V) is below 1e-300 of its peak."""
    xs = np.linspace(1e-6, 60.0, 60001)
    logf = 2 * degree * np.log(xs) - 2 * N * (V(xs) - V(0.0))
    peak = logf.max()
    below = np.nonzero((logf < peak + _LOG_TINY) & (xs > xs[np.argmax(logf)]))[0]
    if len(below) == 0:
        raise GridInsufficientError("weight does not decay on [0, 60]")
    return float(xs[below[0]])


def _stieltjes_once(V: Potential1D, N: int, size: int, grid: StieltjesGrid):
    R = grid.radius if grid.radius is not None else _weight_radius(V, N, size)
    x, w = gauss_legendre_panels(-R, R, grid.panels, grid.order)
    logw = np.log(w) - 2 * N * V(x)
    log_mu0 = float(logsumexp(logw))
    q = np.exp(0.5 * (logw - log_mu0))
    a = np.empty(size)
    b = np.empty(size)
    Q = np.empty((size + 1, len(x)))
    Q[0] = q
    prev = np.zeros_like(q)
    a_prev = 0.0
    for k in range(size):
        cur = Q[k]
        b[k] = np.dot(x * cur, cur)
        r = (x - b[k]) * cur - a_prev * prev
        # two passes of Gram-Schmidt against the previous vectors to stop drift
        for _ in range(2):
            r -= Q[: k + 1].T @ (Q[: k + 1] @ r)
        a[k] = np.linalg.norm(r)
        Q[k + 1] = r / a[k]
        prev, a_prev = cur, a[k]
    return a, b, log_mu0


def stieltjes_coeffs(
    V: Potential1D,
    N: int,
    size: int,
    grid: Optional[StieltjesGrid] = None,
    check: bool = True,
    tol: float = 1e-9,
) -> JacobiMatrix:
    """Recurrence coefficients by the discretized Stieltjes procedure.

    The weight exp(-2 N V) is discretized with composite Gauss-Legendre
    panels and the monic recurrence is run on normalized vectors. With
    ``check`` the computation is repeated on a grid with twice the panels
    and any coefficient moving by more than ``tol`` raises
    :class:`GridInsufficientError`.
    """
    grid = grid or StieltjesGrid()
    a, b, log_mu0 = _stieltjes_once(V, N, size, grid)
    if check:
        a2, b2, _ = _stieltjes_once(V, N, size, grid.refined())
        drift = max(np.max(np.abs(a - a2)), np.max(np.abs(b - b2)))
        if drift > tol:
            raise GridInsufficientError(f"Stieltjes coefficients moved by {drift:.3e} under grid doubling")
        log.debug("stieltjes N=%d size=%d grid drift %.2e", N, size, drift)
    if V.is_even:
        b = np.where(np.abs(b) < 1e-13, 0.0, b)
    return JacobiMatrix(a=a, b=b, N=N, log_mu0=log_mu0, potential=V)


def jacobi_for(V: Potential1D, N: int, size: int) -> JacobiMatrix:
    """Closed form for the quadratic potential, Stieltjes otherwise."""
    if V.kind == "quadratic":
        return hermite_recurrence(N, size)
    return stieltjes_coeffs(V, N, size)


def _phi_scaled(J: JacobiMatrix, x: np.ndarray, count: int, derivative: bool = False):
    """Forward recurrence for phi_0..phi_{count-1} with running log-scaling.

    Returns (values, log_scale[, derivs]) with phi_k(x) = values[:, k] * exp(log_scale)
    for each x; the scale is shared by all k at a given x.
    """
    if count > J.size + 1:
        raise ValueError(f"need {count - 1} recurrence coefficients, have {J.size}")
    V = J.potential
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    vals = np.empty((n, count))
    logs = -J.N * V(x) - 0.5 * J.log_mu0
    cur = np.ones(n)
    prev = np.zeros(n)
    if derivative:
        ders = np.empty((n, count))
        dcur = -J.N * V.derivative(x)
        dprev = np.zeros(n)
    for k in range(count):
        vals[:, k] = cur
        if derivative:
            ders[:, k] = dcur
        if k == count - 1:
            break
        a_prev = J.a[k - 1] if k > 0 else 0.0
        nxt = ((x - J.b[k]) * cur - a_prev * prev) / J.a[k]
        if derivative:
            dnxt = (cur + (x - J.b[k]) * dcur - a_prev * dprev) / J.a[k]
            dprev, dcur = dcur, dnxt
        prev, cur = cur, nxt
        big = np.abs(cur) > _RESCALE
        if np.any(big):
            s = np.where(big, np.abs(cur), 1.0)
            cur = cur / s
            prev = prev / s
            vals[:, : k + 1] /= s[:, None]
            if derivative:
                dcur = dcur / s
                dprev = dprev / s
                ders[:, : k + 1] /= s[:, None]
            logs = logs + np.log(s)
    if derivative:
        return vals, logs, ders
    return vals, logs


def phi_functions(J: JacobiMatrix, x, count: Optional[int] = None) -> np.ndarray:
    """phi_k(x) = P_k(x) exp(-N V(x)) for k < count (default N); shape (len(x), count)."""
    count = J.N if count is None else count
    x = np.asarray(x, dtype=float)
    vals, logs = _phi_scaled(J, x, count)
    return (vals * np.exp(logs)[:, None]).reshape(x.shape + (count,))


def phi_derivatives(J: JacobiMatrix, x, count: Optional[int] = None):
    count = J.N if count is None else count
    x = np.asarray(x, dtype=float)
    vals, logs, ders = _phi_scaled(J, x, count, derivative=True)
    scale = np.exp(logs)[:, None]
    return (vals * scale).reshape(x.shape + (count,)), (ders * scale).reshape(x.shape + (count,))


def _support_window(J: JacobiMatrix) -> tuple[float, float]:
    # the one-point density of size N lives inside the spectrum of the N+1 truncation
    ev = np.linalg.eigvalsh(J.matrix(min(J.size, J.N + 1)))
    pad = 0.6 * (ev[-1] - ev[0]) / 2 + 0.2
    return float(ev[0] - pad), float(ev[-1] + pad)


CD_SPLIT = 1e-6


def cd_kernel(J: JacobiMatrix) -> KernelHandle:
    """Christoffel-Darboux form of K(x, y) = sum_{k<N} phi_k(x) phi_k(y).

    Off the diagonal the two-term CD quotient is used; for |x - y| below
    ``CD_SPLIT`` the derivative form at the midpoint.
    """
    N = J.N
    if J.size < N:
        raise ValueError("need recurrence coefficients through index N-1")
    aN = J.a[N - 1]

    def diag(x):
        x = np.asarray(x, dtype=float)
        phi, dphi = phi_derivatives(J, x.ravel(), N + 1)
        val = aN * (dphi[:, N] * phi[:, N - 1] - dphi[:, N - 1] * phi[:, N])
        return val.reshape(x.shape)

    def evaluate(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        shape = x.shape
        xf, yf = x.ravel(), y.ravel()
        # evaluate phi only on the distinct abscissae to keep matrix builds cheap
        ux, ix = np.unique(np.concatenate([xf, yf]), return_inverse=True)
        phi = phi_functions(J, ux, N + 1)
        px, py = phi[ix[: xf.size]], phi[ix[xf.size :]]
        d = xf - yf
        near = np.abs(d) < CD_SPLIT
        out = np.empty(xf.size)
        far = ~near
        out[far] = aN * (px[far, N] * py[far, N - 1] - py[far, N] * px[far, N - 1]) / d[far]
        if np.any(near):
            out[near] = diag(0.5 * (xf[near] + yf[near]))
        return out.reshape(shape)

    return KernelHandle(
        dimension=1,
        family=f"cd[{J.potential.label}]",
        evaluator=evaluate,
        diagonal=diag,
        rank=N,
        basis=lambda x: phi_functions(J, np.asarray(x, dtype=float).ravel(), N),
        window=_support_window(J),
        meta={"N": N, "jacobi": J},
    )


def direct_kernel(J: JacobiMatrix, x, y) -> np.ndarray:
    """The plain sum over k < N, used to cross-check the CD form."""
    px = phi_functions(J, np.atleast_1d(x), J.N)
    py = phi_functions(J, np.atleast_1d(y), J.N)
    return np.sum(px * py, axis=-1)


def orthonormality_residual(J: JacobiMatrix, count: Optional[int] = None, order: int = 600) -> float:
    count = J.N if count is None else count
    lo, hi = _support_window(JacobiMatrix(J.a, J.b, max(count, 1), J.log_mu0, J.potential))
    x, w = gauss_legendre_panels(lo, hi, max(1, order // 40), 40)
    phi = phi_functions(J, x, count)
    G = phi.T @ (w[:, None] * phi)
    return float(np.max(np.abs(G - np.eye(count))))


@dataclass(frozen=True)
class EquilibriumMeasure1D:
    """Equilibrium density on [-edge, edge] with integrated density F(x) = int_0^x rho."""

    potential: Potential1D
    edge: float
    density_poly: Polynomial  # rho(x) = density_poly(x) * sqrt(edge^2 - x^2) / pi

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) < self.edge
        root = np.sqrt(np.clip(self.edge**2 - x**2, 0.0, None))
        return np.where(inside, self.density_poly(x) * root / np.pi, 0.0)

    __call__ = density

    @property
    def support(self) -> tuple[float, float]:
        return (-self.edge, self.edge)

    def in_bulk(self, x) -> bool:
        return bool(abs(x) < self.edge and self.density(x) > 0)

    def ids(self, x):
        """Integrated density of states F_V(x) = int_0^x rho(s) ds."""
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, -self.edge, self.edge)
        if self.potential.kind == "quadratic" and self.edge == 1.0:
            return (xc * np.sqrt(1 - xc**2) + np.arcsin(xc)) / np.pi
        # x = edge sin(theta): the integrand becomes a trigonometric polynomial
        th_hi = np.arcsin(xc / self.edge)
        s, w = gauss_legendre(0.0, 1.0, 64)
        th = th_hi[..., None] * s
        integrand = self.density_poly(self.edge * np.sin(th)) * (self.edge * np.cos(th)) ** 2 / np.pi
        return np.sum(integrand * w, axis=-1) * th_hi

    def ids_inverse(self, y):
        """G_V, the inverse of the integrated density of states."""
        y = float(y)
        lo, hi = self.ids(-self.edge), self.ids(self.edge)
        if not lo < y < hi:
            raise ValueError(f"value {y} outside the IDS range ({float(lo)}, {float(hi)})")
        return optimize.brentq(lambda s: float(self.ids(s)) - y, -self.edge, self.edge, xtol=1e-15, rtol=1e-15)

    def moment(self, k: int) -> float:
        x, w = gauss_legendre(0.0, np.pi, 200)
        xx = -self.edge * np.cos(x)
        return float(np.sum(w * xx**k * self.density_poly(xx) * (self.edge * np.sin(x)) ** 2 / np.pi))

    def integrate(self, f, order: int = 400) -> float:
        """int f(x) rho(x) dx by Gauss quadrature in the angle variable."""
        th, w = gauss_legendre(0.0, np.pi, order)
        xx = -self.edge * np.cos(th)
        return float(np.sum(w * f(xx) * self.density_poly(xx) * (self.edge * np.sin(th)) ** 2 / np.pi))


def _polynomial_part(V: Potential1D, edge: float) -> Polynomial:
    # polynomial part of V'(x) / sqrt(x^2 - edge^2) at infinity
    dv = V.poly.deriv().coef
    out = np.zeros(max(len(dv) - 1, 1))
    for i, c in enumerate(dv):
        if c == 0:
            continue
        j = 0
        while i - 1 - 2 * j >= 0:
            out[i - 1 - 2 * j] += c * comb(2 * j, j) * (edge**2 / 4.0) ** j
            j += 1
    return Polynomial(out)


def equilibrium_1d(V: Potential1D) -> EquilibriumMeasure1D:
    """Equilibrium measure of a convex even polynomial potential (one-cut).

    rho(x) = M(x) sqrt(b^2 - x^2) / pi with M the polynomial part of
    V'(x)/sqrt(x^2 - b^2); the edge b is fixed by unit mass.
    """
    if V.kind == "quadratic":
        return EquilibriumMeasure1D(V, 1.0, Polynomial([2.0]))

    def mass(b):
        return EquilibriumMeasure1D(V, b, _polynomial_part(V, b)).moment(0) - 1.0

    b = optimize.brentq(mass, 1e-3, 50.0, xtol=1e-15)
    mu = EquilibriumMeasure1D(V, b, _polynomial_part(V, b))
    if abs(mu.moment(0) - 1.0) > 1e-3:
        raise NormalizationError("equilibrium density does not integrate to one")
    xs = np.linspace(-b, b, 2001)
    if np.any(mu.density_poly(xs) < -1e-12):
        raise NormalizationError("negative equilibrium density: potential is not one-cut")
    return mu


def one_point_density(kernel: KernelHandle, x) -> np.ndarray:
    """u_N(x) = K(x, x) / N."""
    return np.asarray(kernel.diagonal(np.asarray(x, dtype=float))) / kernel.rank


def density_moments(kernel: KernelHandle, k: int, order: int = 800) -> float:
    """int x^k K(x, x) / N dx by quadrature on the kernel window."""
    if k > 12:
        raise ValueError("moment order above 12 is not supported")
    x, w = kernel.window_rule(order)
    return float(np.sum(w * x**k * kernel.diagonal(x)) / kernel.rank)


def right_limit_trend(V: Potential1D, Ns: Sequence[int] = (50, 100, 200), spread: int = 3) -> list[float]:
    """max_{|j| <= spread} |a_{N+j} - a_N| for each N on the ladder."""
    out = []
    for N in Ns:
        J = jacobi_for(V, N, N + spread + 1)
        window = J.a[N - spread : N + spread + 1]
        out.append(float(np.max(np.abs(window - J.a[N]))))
    return out
