"""Limiting objects the cumulant ladders are compared against."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import combi
from .kernels import EquilibriumMeasure2D, Potential2D, ginibre_infinite
from .orthopoly import EquilibriumMeasure1D, Potential1D, equilibrium_1d
from .quadrature import gauss_legendre, gauss_legendre_panels, polar_grid
from .testfunctions import GaussianBump, Polynomial, Rescaled, Scaled, TestFunction

SETTINGS = ("macro-2D", "meso-2D", "macro-1D", "meso-1D")


def _disk_of(f: TestFunction, tol: float = 1e-17):
    if f.support is not None:
        c, r = f.support
        return complex(c), float(r)
    return complex(f.center), f.effective_radius(tol)


def h1_variance(f: TestFunction, n_r: int = 64, n_theta: int = 64, tol: float = 1e-8) -> float:
    """int |d f|^2 dA over the support of f, refined until two grids agree to ``tol``."""
    if f.dimension != 2:
        raise ValueError("h1_variance needs a 2D test function")
    c, R = _disk_of(f)
    prev = None
    for _ in range(6):
        z, w = polar_grid(R, n_r, n_theta, center=c, r_panels=4)
        val = float(np.sum(w * np.abs(f.dz(z)) ** 2))
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        prev = val
        n_r, n_theta = 2 * n_r, 2 * n_theta
    raise RuntimeError("h1_variance did not converge under grid doubling")


def gradient_form_h1(f: TestFunction, n_r: int = 128, n_theta: int = 128) -> float:
    """(1/4) int |grad f|^2 dA, the real-gradient form of the same quantity."""
    c, R = _disk_of(f)
    z, w = polar_grid(R, n_r, n_theta, center=c, r_panels=4)
    if hasattr(f, "gradient"):
        fx, fy = f.gradient(z)
    else:
        h = 1e-5
        fx = (f(z + h) - f(z - h)) / (2 * h)
        fy = (f(z + 1j * h) - f(z - 1j * h)) / (2 * h)
    return float(0.25 * np.sum(w * (fx**2 + fy**2)))


def chebyshev_variance(f: Union[TestFunction, Sequence[float]], return_remainder: bool = False):
    """(1/4) sum_{k >= 1} k c_k(f)^2 with Chebyshev coefficients on [-1, 1]."""
    if not isinstance(f, TestFunction):
        f = Polynomial(f)
    if isinstance(f, Polynomial):
        c = f.chebyshev()
        remainder = 0.0
    else:
        c = f.chebyshev(255)
        k = np.arange(len(c))
        terms = 0.25 * k * c**2
        small = np.nonzero(terms[1:] < 1e-12)[0]
        # stop once the terms have dropped below 1e-12 for good
        cut = len(c)
        for i in small + 1:
            if np.all(terms[i:] < 1e-12):
                cut = i
                break
        remainder = float(np.sum(terms[cut:]))
        c = c[:cut]
    k = np.arange(len(c))
    val = float(0.25 * np.sum(k[1:] * c[1:] ** 2))
    return (val, remainder) if return_remainder else val


def h_half_variance(f: TestFunction, tol: float = 1e-6) -> float:
    """int_0^inf u |f^(u)|^2 du.

    Closed form for Gaussian bumps (translates and dilates included);
    otherwise composite Gauss-Legendre on [0, U] with a node-doubling check.
    """
    if f.dimension != 1:
        raise ValueError("h_half_variance needs a 1D test function")
    amp = _gaussian_amplitude(f)
    if amp is not None:
        return amp**2 / (4 * np.pi)
    R = f.effective_radius()
    # |f^| decays at least like u^-4 for the C^3 bumps; 400/R covers it to ~1e-9
    U = 400.0 / R
    prev = None
    for panels in (200, 400, 800):
        u, w = gauss_legendre_panels(0.0, U, panels, 16)
        val = float(np.sum(w * u * np.abs(f.fourier(u)) ** 2))
        if prev is not None and abs(val - prev) < tol * max(abs(val), 1e-300):
            return val
        prev = val
    raise RuntimeError("h_half_variance: refinement check failed")


def _gaussian_amplitude(f: TestFunction) -> Optional[float]:
    # translation and dilation leave int_0^inf u |f^|^2 unchanged; scaling multiplies by c^2
    if isinstance(f, GaussianBump):
        return f.amplitude
    if isinstance(f, Rescaled):
        return _gaussian_amplitude(f.base)
    if isinstance(f, Scaled):
        a = _gaussian_amplitude(f.base)
        return None if a is None else abs(f.c) * a
    return None


def sine_variance(f: TestFunction) -> float:
    """int |u| |f^(u)|^2 du = 2 h_half_variance(f), the sine-process variance limit."""
    return 2.0 * h_half_variance(f)


Intensity = Union[float, EquilibriumMeasure1D, EquilibriumMeasure2D]


def poisson_cumulant(f: TestFunction, eta: Intensity, n: int, order: int = 400) -> float:
    """n-th cumulant of the centered Poisson linear statistic: int f^n eta dmu (0 for n = 1)."""
    if n < 1:
        raise ValueError("order must be >= 1")
    if n == 1:
        return 0.0
    if isinstance(eta, EquilibriumMeasure1D):
        return eta.integrate(lambda x: f(x) ** n, order)
    if isinstance(eta, EquilibriumMeasure2D):
        z, w = polar_grid(eta.radius, order // 4, order // 2, r_panels=2)
        return float(np.sum(w * f(z) ** n * eta.density(z)))
    c = float(eta)
    if f.dimension == 1:
        ctr = float(np.real(f.center))
        R = f.effective_radius()
        x, w = gauss_legendre_panels(ctr - R, ctr + R, 8, order // 8)
        return c * float(np.sum(w * f(x) ** n))
    ctr, R = _disk_of(f)
    z, w = polar_grid(R, order // 4, order // 2, center=ctr, r_panels=4)
    return c * float(np.sum(w * f(z) ** n))


def gaussian_part(f: TestFunction, setting: str) -> float:
    if setting in ("macro-2D", "meso-2D"):
        return h1_variance(f)
    if setting == "macro-1D":
        return chebyshev_variance(f)
    if setting == "meso-1D":
        return sine_variance(f)
    raise ValueError(f"unknown setting {setting!r}; expected one of {SETTINGS}")


def crossover_cumulant(
    f: TestFunction,
    n: int,
    tau: float,
    setting: str,
    V: Union[Potential1D, Potential2D, None] = None,
) -> float:
    """delta_2(n) * Gaussian variance + tau (-1)^n int f^n (intensity).

    Macroscopic settings use the equilibrium density of V (quadratic by
    default); mesoscopic settings use Lebesgue measure.
    """
    if n < 2:
        raise ValueError("crossover cumulants are defined for n >= 2")
    gauss = gaussian_part(f, setting) if n == 2 else 0.0
    if tau == 0:
        return gauss
    if setting == "macro-1D":
        eta = equilibrium_1d(V or Potential1D.quadratic())
    elif setting == "macro-2D":
        eta = EquilibriumMeasure2D.of(V or Potential2D.quadratic())
    elif setting in ("meso-1D", "meso-2D"):
        eta = 1.0
    else:
        raise ValueError(f"unknown setting {setting!r}")
    return gauss + tau * (-1) ** n * poisson_cumulant(f, eta, n)


# -- loop integral of the infinite Ginibre kernel ------------------------------------

@dataclass(frozen=True)
class LoopPolynomial:
    """Polynomial of degree <= 2 in w_1..w_n and their conjugates.

    ``terms`` maps a tuple of factors to a coefficient; a factor is
    ``(j, False)`` for w_j and ``(j, True)`` for conj(w_j), 1-based.
    """

    n: int
    terms: tuple

    @classmethod
    def parse(cls, text: str, n: int) -> "LoopPolynomial":
        """Parse products like ``w1*wb2`` or ``2*wb1*w2 + w1*w1``; ``wb`` marks a conjugate."""
        terms = {}
        for chunk in text.replace("-", "+-").split("+"):
            chunk = chunk.strip()
            if not chunk:
                continue
            coef, factors = 1.0, []
            if chunk.startswith("-"):
                coef, chunk = -1.0, chunk[1:]
            for tok in chunk.split("*"):
                tok = tok.strip()
                if tok.startswith("wb"):
                    factors.append((int(tok[2:]), True))
                elif tok.startswith("w"):
                    factors.append((int(tok[1:]), False))
                else:
                    coef *= float(tok)
            key = tuple(sorted(factors))
            terms[key] = terms.get(key, 0.0) + coef
        return cls(n, tuple(sorted(terms.items())))

    @property
    def degree(self) -> int:
        return max((len(k) for k, _ in self.terms), default=0)

    def __post_init__(self):
        for key, _ in self.terms:
            if any(not 1 <= j <= self.n for j, _ in key):
                raise ValueError(f"variable index outside 1..{self.n}")

    def factor_values(self, key, w: Sequence[np.ndarray]):
        out = 1.0
        for j, conj in key:
            out = out * (np.conj(w[j - 1]) if conj else w[j - 1])
        return out


def ginibre_loop_integral(H: Union[LoopPolynomial, str], n: int, rho: float = 1.0) -> float:
    """Closed form sum_{1 <= r <= s <= n} d_s dbar_r H at w = 0.

    This is the value of the loop integral of H against the cyclic product
    of infinite Ginibre kernels with both end points pinned at 0, for H
    vanishing at the origin. It does not depend on rho.
    """
    if isinstance(H, str):
        H = LoopPolynomial.parse(H, n)
    if H.degree > 2:
        raise ValueError("loop polynomial must have degree <= 2")
    total = 0.0
    for key, c in H.terms:
        if len(key) != 2:
            continue
        (i, ci), (j, cj) = key
        if ci == cj:
            continue  # w_i w_j or conj(w_i) conj(w_j): no mixed derivative
        s = j if ci else i  # holomorphic index
        r = i if ci else j  # anti-holomorphic index
        if r <= s:
            total += c
    return float(np.real(total))


def loop_integral_quadrature(H: Union[LoopPolynomial, str], n: int, rho: float, n_r: int = 48, n_theta: int = 48) -> complex:
    """Direct quadrature of the loop integral for n = 2."""
    if isinstance(H, str):
        H = LoopPolynomial.parse(H, n)
    if n != 2:
        raise ValueError("direct quadrature implemented for n = 2")
    K = ginibre_infinite(rho)
    R = np.sqrt(2 * 40.0 / rho)
    g, w = polar_grid(R, n_r, n_theta, r_panels=2)
    M = K(g[:, None], g[None, :])
    left = K(0.0, g) * w
    right = K(g, 0.0) * w
    total = 0j
    for key, c in H.terms:
        h1 = np.ones_like(g)
        h2 = np.ones_like(g)
        for j, conj in key:
            v = np.conj(g) if conj else g
            if j == 1:
                h1 = h1 * v
            else:
                h2 = h2 * v
        total += c * ((left * h1) @ M @ (h2 * right))
    return complex(total)


# -- sine-kernel main term -----------------------------------------------------------

def _psi(parts: Sequence[int], t: np.ndarray) -> np.ndarray:
    """Psi_u(k) = 2 max(0, partial sums of u at the composition boundaries).

    ``t`` holds the running sums u_1 + ... + u_j, j = 1..n-1, on its last axis.
    """
    cuts = list(itertools.accumulate(parts))[:-1]
    if not cuts:
        return np.zeros(t.shape[:-1])
    return 2.0 * np.maximum(0.0, np.max(t[..., [c - 1 for c in cuts]], axis=-1))


def _fourier_extent(f: TestFunction, rel: float = 1e-13) -> float:
    ref = max(1.0, float(np.abs(f.fourier(np.array([0.0])))[0]))
    u = 1.0
    while float(np.abs(f.fourier(np.array([u])))[0]) > rel * ref and u < 1e4:
        u *= 1.5
    # guard against a zero of f^ stopping the scan early
    while np.max(np.abs(f.fourier(np.linspace(u, 2 * u, 64)))) > rel * ref and u < 1e4:
        u *= 1.5
    return u


def _hyperplane_blocks(n: int, U: float, panels: int, order: int, block: int = 256):
    """Yield (t, weights) blocks of a rule on [-U, U]^(n-1), split along every kink of Psi."""
    half, hw = gauss_legendre_panels(0.0, U, panels, order)
    line = np.concatenate([-half[::-1], half])
    lw = np.concatenate([hw[::-1], hw])
    if n == 2:
        yield line[:, None], lw
        return
    # n = 3: kinks on t1 = 0, t2 = 0 and, in the positive quadrant, t1 = t2
    neg, nw = -half[::-1], hw[::-1]
    for a, aw, b, bw in ((line, lw, neg, nw), (neg, nw, half, hw)):
        for i in range(0, len(a), block):
            A, B = np.meshgrid(a[i : i + block], b, indexing="ij")
            yield np.stack([A.ravel(), B.ravel()], axis=1), np.outer(aw[i : i + block], bw).ravel()
    s, sw = gauss_legendre(0.0, 1.0, 2 * order)
    for flip in (False, True):
        # triangle 0 < small < big < U with small = big * s
        for i in range(0, len(half), block):
            big, S = np.meshgrid(half[i : i + block], s, indexing="ij")
            small = big * S
            cols = [small.ravel(), big.ravel()] if flip else [big.ravel(), small.ravel()]
            yield np.stack(cols, axis=1), (np.outer(hw[i : i + block], sw) * big).ravel()


def sine_main_term(f: TestFunction, n: int, ups: combi.UpsilonMap = combi.UPSILON0, panels: int = 24, order: int = 16, tol: float = 1e-9) -> float:
    """int_{u_1+...+u_n = 0} Re(prod f^(u_j)) sum_k Upsilon(k) Psi_u(k) d^{n-1}u.

    Coordinates are the running sums t_j = u_1 + ... + u_j; the rule is
    split along every kink of Psi so each piece has a smooth integrand.
    The sign is the one for which Upsilon_0 reproduces the sine-kernel
    cumulant.
    """
    if n not in (2, 3):
        raise ValueError("sine_main_term supports n in {2, 3}")
    weights = list(combi.iter_weighted(ups, n))
    U = (n - 1) * _fourier_extent(f, 1e-10)
    # f^ of a compactly supported f oscillates on the scale 1 / (support width)
    if f.support is not None:
        panels = max(panels, int(np.ceil(U * f.effective_radius())))
        panels = min(panels, 2000 if n == 2 else 96)

    def evaluate(pan):
        total = 0.0
        for t, w in _hyperplane_blocks(n, U, pan, order):
            prev = np.zeros(len(t))
            prod = np.ones(len(t), dtype=complex)
            for j in range(n - 1):
                prod = prod * f.fourier(t[:, j] - prev)
                prev = t[:, j]
            prod = prod * f.fourier(-prev)
            psi = sum(wk * _psi(parts, t) for parts, wk in weights)
            total += float(np.sum(w * np.real(prod) * psi))
        return total

    coarse = evaluate(panels)
    fine = evaluate(2 * panels)
    if abs(fine - coarse) > max(tol, 1e-6 * abs(fine)):
        raise RuntimeError(f"sine_main_term not converged: {coarse} vs {fine}")
    return fine


# -- integrated density of states -----------------------------------------------------

def ids_zeta(V: Union[Potential1D, EquilibriumMeasure1D], x0: float, alpha: float, N: int, x) -> np.ndarray:
    """zeta_N(x) = N^alpha (G(F(x0) + rho(x0) x / N^alpha) - x0) with G the inverse IDS."""
    mu = V if isinstance(V, EquilibriumMeasure1D) else equilibrium_1d(V)
    if not mu.in_bulk(x0):
        raise ValueError(f"x0={x0} is outside the bulk")
    L = float(N) ** alpha
    F0 = float(mu.ids(x0))
    r0 = float(mu.density(x0))
    lo, hi = float(mu.ids(-mu.edge)), float(mu.ids(mu.edge))
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    for i, xi in enumerate(xs):
        y = F0 + r0 * xi / L
        if not lo < y < hi:
            raise ValueError(f"zeta_N argument {xi} leaves the bulk image")
        out[i] = L * (mu.ids_inverse(y) - x0)
    return out if np.ndim(x) else out[0]


@dataclass(frozen=True)
class MesoscopicFrame:
    """Base point x0, exponent alpha and scale L_N = N^alpha."""

    x0: complex
    alpha: float
    dimension: int = 1

    def __post_init__(self):
        upper = 1.0 if self.dimension == 1 else 0.5
        if not 0 < self.alpha < upper:
            raise ValueError(f"alpha must lie in (0, {upper:g}) in dimension {self.dimension}")

    def scale(self, N: int) -> float:
        return float(N) ** self.alpha

    def rescale(self, f: TestFunction, N: int) -> Rescaled:
        return f.rescaled(self.scale(N), self.x0)

    def support_in_bulk(self, f: TestFunction, N: int, radius: float, margin: float = 0.0) -> bool:
        """True when the rescaled support (or 1e-16 effective radius) sits inside |z| < radius."""
        fN = self.rescale(f, N)
        return bool(abs(fN.center) + fN.effective_radius() < radius - margin)
