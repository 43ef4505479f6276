"""Planar kernels: finite radial log-gases, infinite Ginibre, approximate
Bergman kernels with their gauge transform, the sine kernel, and decay
diagnostics.

Area measure throughout: dA = r dr dtheta / pi.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import factorial
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import optimize
from scipy.special import gammaln, logsumexp

from .handle import KernelHandle
from .quadrature import gauss_legendre_panels, polar_grid

log = logging.getLogger(__name__)

DEFAULT_KAPPA = 4.0
GAUGE_DEGREE = 8


class NormalizationInstability(RuntimeError):
    pass


class OutsideBulkError(ValueError):
    pass


@dataclass(frozen=True)
class Potential2D:
    """Radial potential V(z) = g(|z|^2) with g(s) = sum_m c_m s^m, c_m >= 0, c_1 > 0."""

    kind: str
    coefficients: tuple[float, ...]  # c_0, c_1, ... in powers of s = |z|^2
    nu: float = 0.5

    def __post_init__(self):
        c = self.coefficients
        if len(c) < 2 or c[1] <= 0 or any(v < 0 for v in c[1:]):
            raise ValueError("radial potential needs c_1 > 0 and c_m >= 0")

    @classmethod
    def quadratic(cls) -> "Potential2D":
        return cls("quadratic", (0.0, 1.0))

    @classmethod
    def radial(cls, coefficients: Sequence[float]) -> "Potential2D":
        c = (0.0,) + tuple(float(v) for v in coefficients)
        if len(c) == 2 and c[1] == 1.0:
            return cls.quadratic()
        return cls("radial", c)

    @classmethod
    def from_name(cls, name: str, coefficients: Optional[Sequence[float]] = None):
        name = name.lower()
        if name == "quadratic":
            return cls.quadratic()
        if name in ("radial", "radialpolynomial"):
            return cls.radial(coefficients or (1.0,))
        raise ValueError(f"unknown 2D potential {name!r}")

    @property
    def g(self) -> Polynomial:
        return Polynomial(self.coefficients)

    @property
    def h(self) -> Polynomial:
        """Laplacian profile: Delta V(z) = h(|z|^2) with Delta = d dbar."""
        g1 = self.g.deriv()
        return g1 + Polynomial([0.0, 1.0]) * g1.deriv()

    def __call__(self, z):
        return self.g(np.abs(np.asarray(z)) ** 2)

    def laplacian(self, z):
        return self.h(np.abs(np.asarray(z)) ** 2)

    def check_growth(self, rmax: float = 1e3) -> bool:
        r = np.logspace(1, np.log10(rmax), 200)
        return bool(np.all(self.g(r**2) >= (1 + self.nu) * np.log(r)))

    @property
    def label(self) -> str:
        if self.kind == "quadratic":
            return "quadratic"
        return "radial(" + ",".join(f"{c:g}" for c in self.coefficients[1:]) + ")"


@dataclass(frozen=True)
class EquilibriumMeasure2D:
    """Density 2 Delta V on the droplet disk |z| <= radius."""

    potential: Potential2D
    radius: float

    @classmethod
    def of(cls, V: Potential2D) -> "EquilibriumMeasure2D":
        # mass of 2h on the disk of radius R is 2 R^2 g'(R^2)
        g1 = V.g.deriv()
        R2 = optimize.brentq(lambda s: 2 * s * g1(s) - 1.0, 0.0, 1e3, xtol=1e-15)
        return cls(V, float(np.sqrt(R2)))

    def density(self, z):
        z = np.asarray(z)
        return np.where(np.abs(z) <= self.radius, 2.0 * self.potential.laplacian(z), 0.0)

    __call__ = density

    def in_bulk(self, z, margin: float = 0.0) -> bool:
        return bool(abs(z) < self.radius - margin and self.potential.laplacian(z) > 0)

    def mass(self, n_r: int = 200) -> float:
        z, w = polar_grid(self.radius, n_r, 8)
        return float(np.sum(w * self.density(z)))


def radial_log_norms(V: Potential2D, N: int, count: Optional[int] = None, panels: int = 64, order: int = 40, check: bool = True) -> np.ndarray:
    """log c_k^2 = -log int_0^inf s^k exp(-2 N g(s)) ds for k < count.

    Closed form for the quadratic potential; composite Gauss-Legendre
    in log space otherwise, with a panel-doubling stability check.
    """
    count = N if count is None else count
    k = np.arange(count)
    if V.kind == "quadratic":
        return (k + 1) * np.log(2.0 * N) - gammaln(k + 1)

    def once(npan):
        # the integrand peaks near the root of 2 N s g'(s) = k; cover well past the largest
        g1 = V.g.deriv()
        s_peak = optimize.brentq(lambda s: 2 * N * s * g1(s) - max(count - 1, 1), 0.0, 1e4)
        S = s_peak
        while 2 * N * (V.g(S) - V.g(s_peak)) - (count - 1) * np.log(max(S / s_peak, 1.0)) < 760:
            S *= 1.25
        s, w = gauss_legendre_panels(0.0, S, npan, order)
        logint = k[:, None] * np.log(s)[None, :] - 2 * N * V.g(s)[None, :] + np.log(w)[None, :]
        return -logsumexp(logint, axis=1)

    out = once(panels)
    if check:
        ref = once(2 * panels)
        jitter = float(np.max(np.abs(np.expm1(out - ref))))
        if jitter > 1e-8:
            raise NormalizationInstability(f"radial normalization moved by {jitter:.2e} under refinement")
    return out


def _radial_basis(V: Potential2D, N: int, log_c2: np.ndarray):
    half = 0.5 * log_c2
    k = np.arange(len(log_c2))

    def basis(z):
        z = np.asarray(z, dtype=complex).ravel()
        r = np.abs(z)
        # r = 0 only feeds k >= 1, where exp(k * log 1e-300) underflows to 0
        logr = np.log(np.maximum(r, 1e-300))
        logmod = half[None, :] + k[None, :] * logr[:, None] - N * V.g(r**2)[:, None]
        logmod[:, 0] = half[0] - N * V.g(r**2)
        phase = np.exp(1j * k[None, :] * np.angle(z)[:, None])
        return np.exp(logmod) * phase

    return basis


def ginibre_finite(V: Potential2D, N: int) -> KernelHandle:
    """Rank-N kernel sum_{k<N} c_k^2 (z conj w)^k exp(-N(V(z)+V(w)))."""
    log_c2 = radial_log_norms(V, N)
    basis = _radial_basis(V, N, log_c2)

    def evaluate(z, w):
        z, w = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(w, dtype=complex))
        shape = z.shape
        out = np.empty(z.size, dtype=complex)
        zf, wf = z.ravel(), w.ravel()
        step = max(1, 2_000_000 // max(N, 1))
        for i in range(0, z.size, step):
            out[i : i + step] = np.sum(basis(zf[i : i + step]) * np.conj(basis(wf[i : i + step])), axis=1)
        return out.reshape(shape)

    def diag(z):
        z = np.asarray(z, dtype=complex)
        b = basis(z.ravel())
        return np.sum(np.abs(b) ** 2, axis=1).reshape(z.shape)

    eq = EquilibriumMeasure2D.of(V)
    return KernelHandle(
        dimension=2,
        family=f"ginibre[{V.label}]",
        evaluator=evaluate,
        diagonal=diag,
        rank=N,
        basis=basis,
        window=(0.0, eq.radius + 7.0 / np.sqrt(N)),
        meta={"N": N, "potential": V, "log_c2": log_c2, "radius": eq.radius},
    )


def ginibre_infinite(rho: float) -> KernelHandle:
    """K(z, w) = rho exp(rho (2 z conj(w) - |z|^2 - |w|^2) / 2)."""
    if rho <= 0:
        raise ValueError("density must be positive")

    def evaluate(z, w):
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        return rho * np.exp(0.5 * rho * (2 * z * np.conj(w) - np.abs(z) ** 2 - np.abs(w) ** 2))

    def diag(z):
        return np.full(np.shape(z), float(rho))

    return KernelHandle(2, f"ginibre-infinite[rho={rho:g}]", evaluate, diag, density=float(rho), meta={"rho": rho})


def sine_kernel(rho: float) -> KernelHandle:
    """sin(pi rho (x - y)) / (pi (x - y)) with diagonal rho."""
    if rho <= 0:
        raise ValueError("density must be positive")

    def evaluate(x, y):
        return rho * np.sinc(rho * (np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))

    def diag(x):
        return np.full(np.shape(x), float(rho))

    return KernelHandle(1, f"sine[rho={rho:g}]", evaluate, diag, density=float(rho), meta={"rho": rho})


@dataclass(frozen=True)
class BergmanData:
    """Polarized data of a radial potential at a base point x0."""

    potential: Potential2D
    x0: complex
    gauge_coefficients: np.ndarray  # a_k0 for k = 1..GAUGE_DEGREE
    truncation_remainder: float

    def phi(self, z, w):
        """Polarization Phi(z, conj w) = g(z conj w)."""
        return self.potential.g(np.asarray(z) * np.conj(np.asarray(w)))

    def b0(self, z, w):
        return 2.0 * self.potential.h(np.asarray(z) * np.conj(np.asarray(w)))

    def b1(self, z, w):
        # (1/2) d/ds [s h'(s) / h(s)] at s = z conj(w)
        h = self.potential.h
        h1, h2 = h.deriv(), h.deriv(2)
        s = np.asarray(z) * np.conj(np.asarray(w))
        hs = h(s)
        return 0.5 * ((h1(s) + s * h2(s)) / hs - s * h1(s) ** 2 / hs**2)

    def gauge(self, u):
        """h(u) = -2 Im sum_k a_k0 u^k."""
        u = np.asarray(u, dtype=complex)
        poly = Polynomial(np.concatenate([[0.0], self.gauge_coefficients]))
        return -2.0 * np.imag(poly(u))

    @property
    def local_density(self) -> float:
        return float(2.0 * self.potential.laplacian(self.x0))


def bergman_data(V: Potential2D, x0: complex) -> BergmanData:
    eq = EquilibriumMeasure2D.of(V)
    if not eq.in_bulk(x0):
        raise OutsideBulkError(f"x0={x0} is not in the bulk (droplet radius {eq.radius:.6g})")
    s0 = abs(x0) ** 2
    g = V.g
    coef = np.array(
        [g.deriv(k)(s0) * np.conj(x0) ** k / factorial(k) for k in range(1, GAUGE_DEGREE + 1)],
        dtype=complex,
    )
    nxt = g.deriv(GAUGE_DEGREE + 1)(s0) * abs(x0) ** (GAUGE_DEGREE + 1) / factorial(GAUGE_DEGREE + 1)
    return BergmanData(V, complex(x0), coef, float(abs(nxt)))


def bergman_approx(V: Potential2D, N: int, x0: complex = 0.0):
    """Approximate Bergman kernel (N b0 + b1) exp(N (2 Phi - V(z) - V(w)))."""
    data = bergman_data(V, x0)

    def evaluate(z, w):
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        expo = N * (2 * data.phi(z, w) - V(z) - V(w))
        return (N * data.b0(z, w) + data.b1(z, w)) * np.exp(expo)

    def diag(z):
        return np.real(evaluate(z, z))

    K = KernelHandle(2, f"bergman[{V.label}]", evaluate, diag, rank=N, meta={"N": N, "x0": x0, "potential": V})
    return K, data


def gauge_rescale(B: KernelHandle, data: BergmanData) -> KernelHandle:
    """B~(u, v) = B(x0+u, x0+v) exp(i N h(u)) / exp(i N h(v))."""
    N = B.meta["N"]
    x0 = data.x0

    def evaluate(u, v):
        u = np.asarray(u, dtype=complex)
        v = np.asarray(v, dtype=complex)
        return B(x0 + u, x0 + v) * np.exp(1j * N * (data.gauge(u) - data.gauge(v)))

    def diag(u):
        return np.real(evaluate(u, u))

    return KernelHandle(2, f"gauged-{B.family}", evaluate, diag, rank=N, meta={**B.meta, "gauged": True})


def mesoscopic_radius(N: int, kappa: float = DEFAULT_KAPPA) -> float:
    """epsilon_N = kappa N^{-1/2} log N."""
    return kappa * np.log(N) / np.sqrt(N)


def _disk_points(center: complex, radius: float, n_r: int = 6, n_theta: int = 12) -> np.ndarray:
    r = radius * np.linspace(0.0, 1.0, n_r)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    pts = center + (r[1:, None] * np.exp(1j * th[None, :])).ravel()
    return np.concatenate([[center], pts])


def bergman_gap(V: Potential2D, N: int, x0: complex = 0.0, radius: float = 0.1) -> float:
    """sup |K_N - B_N| over pairs in the disk D(x0, radius)."""
    K = ginibre_finite(V, N)
    B, _ = bergman_approx(V, N, x0)
    pts = _disk_points(x0, radius)
    zz, ww = np.meshgrid(pts, pts, indexing="ij")
    return float(np.max(np.abs(K(zz, ww) - B(zz, ww))))


def gauge_ratio_error(V: Potential2D, N: int, x0: complex, kappa: float = DEFAULT_KAPPA) -> float:
    """max |B~(u, v) / K^inf_{N rho(x0)}(u, v) - 1| over |u|, |v| <= epsilon_N."""
    data = bergman_data(V, x0)
    rho = N * data.local_density
    pts = _disk_points(0.0, mesoscopic_radius(N, kappa))
    u, v = np.meshgrid(pts, pts, indexing="ij")
    z, w = x0 + u, x0 + v
    # ratio in log form: both kernels underflow far off the diagonal
    log_ratio = (
        N * (2 * data.phi(z, w) - V(z) - V(w))
        + 1j * N * (data.gauge(u) - data.gauge(v))
        - 0.5 * rho * (2 * u * np.conj(v) - np.abs(u) ** 2 - np.abs(v) ** 2)
    )
    pref = (N * data.b0(z, w) + data.b1(z, w)) / rho
    with np.errstate(over="ignore"):
        return float(np.max(np.abs(pref * np.exp(log_ratio) - 1.0)))


def local_rescaled(K: KernelHandle, x0: complex, u, v, N: Optional[int] = None):
    """K(x0 + u/sqrt(N), x0 + v/sqrt(N)) / N."""
    N = K.rank if N is None else N
    s = 1.0 / np.sqrt(N)
    return K(x0 + s * np.asarray(u), x0 + s * np.asarray(v)) / N


@dataclass
class DecayReport:
    family: str
    N: Optional[int]
    rate: float  # c in log|K| ~ A - c sqrt(N) d
    rate_residual: float
    gaussian_rate: float  # gamma in log|K| ~ A - gamma d^2
    gaussian_residual: float
    rows: list = field(default_factory=list)  # (N, distance, |K|, fitted rate)
    tail_ratio: Optional[float] = None  # K(z,z)/N at |z| = 2 R_V
    localization_mass: Optional[float] = None
    kappa: float = DEFAULT_KAPPA

    @property
    def flagged(self) -> bool:
        return not self.rate > 0

    @property
    def localized(self) -> Optional[bool]:
        if self.localization_mass is None or self.N is None:
            return None
        return self.localization_mass < 1e-3 / self.N


def decay_diagnostics(
    K: KernelHandle,
    center: complex = 0.0,
    set_radius: float = 0.2,
    N: Optional[int] = None,
    max_distance: Optional[float] = None,
    kappa: float = DEFAULT_KAPPA,
    localization: bool = True,
) -> DecayReport:
    """Fit the off-diagonal decay of |K(z, w)| for z in a compact set.

    For 1D kernels the oscillating modulus is replaced by its running
    maximum over a short offset window before fitting.
    """
    N = N if N is not None else K.rank
    scale = np.sqrt(N) if N else 1.0
    if max_distance is None:
        if K.dimension == 2:
            dens = K.density or float(np.real(K.diagonal(np.array([center])))[0])
            max_distance = 5.0 / np.sqrt(dens)
        else:
            max_distance = 0.5
    d = np.linspace(max_distance / 20, max_distance, 20)
    base = _disk_points(center, set_radius, 3, 6) if K.dimension == 2 else center + np.linspace(-set_radius, set_radius, 7)
    if K.dimension == 2:
        dirs = np.exp(2j * np.pi * np.arange(8) / 8)
        zz = base[:, None, None] * np.ones((1, 8, len(d)))
        ww = base[:, None, None] + dirs[None, :, None] * d[None, None, :]
        mod = np.abs(K(zz, ww)).max(axis=(0, 1))
    else:
        jitter = np.linspace(0.0, 1.0, 16) * (d[1] - d[0])
        zz = base[:, None, None] * np.ones((1, len(jitter), len(d)))
        ww = base[:, None, None] + d[None, None, :] + jitter[None, :, None]
        mod = np.abs(K(zz, ww)).max(axis=(0, 1))
    y = np.log(np.maximum(mod, 1e-300))
    A1 = np.column_stack([np.ones_like(d), -scale * d])
    sol1, res1, *_ = np.linalg.lstsq(A1, y, rcond=None)
    A2 = np.column_stack([np.ones_like(d), -(d**2)])
    sol2, res2, *_ = np.linalg.lstsq(A2, y, rcond=None)
    resid = lambda A, s: float(np.sqrt(np.mean((A @ s - y) ** 2)))
    rep = DecayReport(
        family=K.family,
        N=N,
        rate=float(sol1[1]),
        rate_residual=resid(A1, sol1),
        gaussian_rate=float(sol2[1]),
        gaussian_residual=resid(A2, sol2),
        rows=[(N, float(di), float(mi), float(sol1[1])) for di, mi in zip(d, mod)],
        kappa=kappa,
    )
    if rep.flagged:
        log.warning("non-positive fitted decay rate for %s", K.family)
    if K.dimension == 2 and K.rank is not None and "radius" in K.meta:
        R = K.meta["radius"]
        rep.tail_ratio = float(np.real(K.diagonal(np.array([2 * R + 0j])))[0] / N)
        if localization:
            rep.localization_mass = localization_mass(K, center, set_radius, kappa)
    return rep


def localization_mass(K: KernelHandle, center: complex, set_radius: float, kappa: float = DEFAULT_KAPPA) -> float:
    """int_{z in S} int_{|z - w| > eps_N} |K(z, w)| dA(w) dA(z) with S = D(center, set_radius)."""
    N = K.rank
    eps = mesoscopic_radius(N, kappa)
    zs, zw = polar_grid(set_radius, 6, 12, center=center)
    lo, hi = K.window
    ws, ww = polar_grid(hi, 48, 160, r_panels=3)
    if K.basis is not None:
        mod = np.abs(K.basis(zs) @ K.basis(ws).conj().T)
    else:
        mod = np.abs(K(zs[:, None], ws[None, :]))
    far = np.abs(zs[:, None] - ws[None, :]) > eps
    return float(zw @ np.sum(np.where(far, mod * ww[None, :], 0.0), axis=1))
