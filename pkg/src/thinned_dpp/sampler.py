"""Exact sampling of projection determinantal processes and Monte Carlo estimators.

Sampling follows the sequential algorithm of Hough, Krishnapur, Peres and
Virag: with orthonormal functions phi_0..phi_{N-1}, the next point has density
proportional to |Phi(x)|^2 minus the squared norm of its projection onto the
span of the already chosen points, where Phi(x) = (phi_k(x))_k. Candidates come
from an envelope of K(x, x) and are accepted with probability
residual(x) / envelope(x).

In the plane, radial kernels are sampled in the coordinate s = |z|^2 with a
uniform angle; the area measure dx dy / pi becomes ds dtheta / (2 pi), so the
density in s is K(z, z) itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .cumulants import CumulantRow
from .handle import KernelHandle

PROPOSAL_BUDGET = 10_000
DEFAULT_CHUNK = 500
MIN_MC_SAMPLES = 1000


class EnvelopeError(RuntimeError):
    """Rejection sampling exhausted its proposal budget."""


class InsufficientSamplesError(ValueError):
    pass


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream keyed by (seed, replica).

    Philox keyed through ``SeedSequence([seed, replica])``: distinct keys give
    independent streams, equal keys replay the same draws.
    """

    seed: int
    replica: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(self.seed), int(self.replica)])))

    def child(self, index: int) -> "RngStream":
        """Stream for the ``index``-th sub-task; keyed by (seed, replica, index)."""
        return _ChildStream(self.seed, self.replica, int(index))


@dataclass(frozen=True)
class _ChildStream(RngStream):
    index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence([int(self.seed), int(self.replica), int(self.index)])
        return np.random.Generator(np.random.Philox(ss))


@dataclass
class PointConfig:
    dimension: int
    points: np.ndarray
    model: str = ""
    N: int = 0
    seed: int = 0
    replica: int = 0

    def __len__(self):
        return len(self.points)

    def statistic(self, f: Callable) -> float:
        return float(np.sum(np.real(f(self.points)))) if len(self.points) else 0.0

    def count_in(self, window) -> int:
        return int(np.count_nonzero(_window_mask(window, self.points)))


# -- envelopes and sampling bases ----------------------------------------------


@dataclass
class PiecewiseEnvelope:
    """Piecewise-constant upper bound of a non-negative function on [lo, hi]."""

    edges: np.ndarray
    heights: np.ndarray

    @property
    def mass(self) -> float:
        return float(np.sum(self.heights * np.diff(self.edges)))

    def __call__(self, t):
        idx = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.heights) - 1)
        inside = (t >= self.edges[0]) & (t <= self.edges[-1])
        return np.where(inside, self.heights[idx], 0.0)

    def sample(self, gen: np.random.Generator, shape) -> np.ndarray:
        cells = np.diff(self.edges) * self.heights
        idx = gen.choice(len(cells), size=shape, p=cells / cells.sum())
        return self.edges[idx] + gen.random(shape) * np.diff(self.edges)[idx]

    @classmethod
    def build(cls, fn: Callable, lo: float, hi: float, cells: int = 400, sub: int = 8, safety: float = 1.25, audit: int = 4):
        """Cell heights are safety * max of ``fn`` over ``sub`` points per cell.

        The bound is audited on a grid ``audit`` times finer; a violation
        raises EnvelopeError.
        """
        edges = np.linspace(lo, hi, cells + 1)
        t = edges[:-1, None] + np.linspace(0, 1, sub + 1)[None, :] * np.diff(edges)[:, None]
        heights = safety * np.max(fn(t.ravel()).reshape(t.shape), axis=1)
        # neighbours guard against a peak between sub-samples
        heights = np.maximum(heights, np.maximum(np.r_[heights[1:], 0], np.r_[0, heights[:-1]]) / safety)
        env = cls(edges, heights)
        fine = np.linspace(lo, hi, cells * sub * audit + 1)
        if np.any(fn(fine) > env(fine)):
            raise EnvelopeError("envelope audit failed; increase cells or safety")
        return env


@dataclass
class SamplingBasis:
    """Orthonormal functions in a scalar sampling coordinate t.

    1D: t = x. 2D radial: t = |z|^2 with an independent uniform angle.
    ``phi(t, theta)`` returns an array (..., N). ``gamma_rate`` marks the
    quadratic Ginibre case, where |phi_k|^2 in t is the Gamma(k + 1, rate)
    density and the mixture over k is an exact proposal for K(z, z) / N.
    """

    dimension: int
    N: int
    phi: Callable
    model: str
    envelope: Optional[PiecewiseEnvelope] = None
    gamma_rate: Optional[float] = None

    def point(self, t, theta):
        return t if self.dimension == 1 else np.sqrt(t) * np.exp(1j * theta)


def sampling_basis(K: KernelHandle, cells: int = 400) -> SamplingBasis:
    """Sampling basis of a finite-rank kernel (1D Christoffel-Darboux or radial 2D Ginibre)."""
    if K.basis is None or K.rank is None:
        raise ValueError("HKPV needs a finite-rank kernel with an explicit basis")
    N = K.rank
    if K.dimension == 1:
        lo, hi = K.window
        env = PiecewiseEnvelope.build(lambda t: np.real(K.diagonal(t)), lo, hi, cells)
        return SamplingBasis(1, N, lambda t, th: K.basis(np.asarray(t, dtype=float).ravel()).reshape(np.shape(t) + (N,)), K.family, env)
    V = K.meta.get("potential")
    if V is None or V.kind not in ("quadratic", "radial"):
        raise ValueError("2D sampling needs a radial potential")

    def phi(t, th):
        z = np.sqrt(np.asarray(t, dtype=float)) * np.exp(1j * np.asarray(th, dtype=float))
        return K.basis(z.ravel()).reshape(np.shape(t) + (N,))

    if V.kind == "quadratic":
        return SamplingBasis(2, N, phi, K.family, gamma_rate=2.0 * N)
    R = K.window[1]
    env = PiecewiseEnvelope.build(lambda t: np.real(K.diagonal(np.sqrt(t).astype(complex))), 0.0, R * R, cells)
    return SamplingBasis(2, N, phi, K.family, env)


# -- HKPV ----------------------------------------------------------------------


def _propose(basis: SamplingBasis, gen, mask, count):
    """``count`` candidates per replica; returns (t, theta, proposal density / (K-bound))."""
    B = mask.shape[0]
    theta = gen.random((B, count)) * 2 * np.pi if basis.dimension == 2 else np.zeros((B, count))
    if basis.gamma_rate is not None:
        # index k uniform among retained functions, then |z|^2 ~ Gamma(k + 1, rate)
        u = gen.random((B, count))
        cum = np.cumsum(mask, axis=1)
        k = np.argmax(cum[:, None, :] > (u * cum[:, -1:])[:, :, None], axis=2)
        t = gen.gamma(k + 1.0, 1.0 / basis.gamma_rate)
        return t, theta, None
    return basis.envelope.sample(gen, (B, count)), theta, basis.envelope


def hkpv_batch(basis: SamplingBasis, rng: RngStream, count: int, p: float = 1.0, retained: Optional[np.ndarray] = None) -> list[PointConfig]:
    """``count`` independent samples, vectorized across replicas.

    ``retained`` (count x N booleans) restricts replica b to the projection
    onto {phi_k : retained[b, k]}; ``p < 1`` draws it as i.i.d. Bernoulli(p).
    """
    gen = rng.generator()
    N = basis.N
    if retained is None:
        retained = np.ones((count, N), dtype=bool) if p >= 1 else gen.random((count, N)) < p
    mask = retained.astype(float)
    ranks = retained.sum(axis=1)
    dtype = complex if basis.dimension == 2 else float
    vecs = np.zeros((count, N, N), dtype=dtype)
    ts = np.full((count, N), np.nan)
    ths = np.zeros((count, N))
    for i in range(int(ranks.max(initial=0))):
        todo = np.flatnonzero(ranks > i)
        proposals = np.zeros(todo.size, dtype=int)
        while todo.size:
            left = ranks[todo] - i
            if basis.gamma_rate is not None:
                rate = left / ranks[todo]
            else:
                rate = left / basis.envelope.mass
            c = int(min(128, max(4, np.ceil(2.0 / max(rate.min(), 1e-3)))))
            t, th, env = _propose(basis, gen, mask[todo], c)
            ph = basis.phi(t, th) * mask[todo][:, None, :]
            proj = np.einsum("bcn,bnj->bcj", ph, vecs[todo, :, :i].conj()) if i else np.zeros((todo.size, c, 0))
            resid = np.sum(np.abs(ph) ** 2, axis=2) - np.sum(np.abs(proj) ** 2, axis=2)
            if env is None:
                # proposal density is K_S(t) / |S|; accept with residual / K_S
                bound = np.sum(np.abs(ph) ** 2, axis=2)
            else:
                bound = env(t)
            ok = gen.random((todo.size, c)) * bound < resid
            hit = ok.any(axis=1)
            first = np.argmax(ok, axis=1)
            rows = todo[hit]
            sel = first[hit]
            if rows.size:
                tt = t[hit, sel]
                ts[rows, i] = tt
                ths[rows, i] = th[hit, sel]
                v = ph[hit, sel, :]
                if i:
                    v = v - np.einsum("bnj,bj->bn", vecs[rows, :, :i], proj[hit, sel, :])
                # second pass keeps the basis orthonormal to rounding
                if i:
                    v = v - np.einsum("bnj,bj->bn", vecs[rows, :, :i], np.einsum("bnj,bn->bj", vecs[rows, :, :i].conj(), v))
                vecs[rows, :, i] = v / np.linalg.norm(v, axis=1)[:, None]
            proposals[~hit] += c
            if np.any(proposals > PROPOSAL_BUDGET):
                raise EnvelopeError(f"no acceptance within {PROPOSAL_BUDGET} proposals at step {i}")
            keep = ~hit
            todo, proposals = todo[keep], proposals[keep]
    out = []
    for b in range(count):
        r = int(ranks[b])
        out.append(PointConfig(basis.dimension, basis.point(ts[b, :r], ths[b, :r]), basis.model, N, rng.seed, rng.replica * count + b))
    return out


def hkpv_sample(basis: SamplingBasis, rng: RngStream) -> PointConfig:
    """One exact sample of the rank-N projection process."""
    cfg = hkpv_batch(basis, rng, 1)[0]
    cfg.replica = rng.replica
    return cfg


def bernoulli_thin(config: PointConfig, p: float, rng: RngStream) -> PointConfig:
    """Keep each point independently with probability p."""
    if not 0 <= p <= 1:
        raise ValueError("retention p must be in [0, 1]")
    if p == 1:
        return config
    keep = rng.generator().random(len(config.points)) < p
    return PointConfig(config.dimension, config.points[keep], config.model, config.N, config.seed, config.replica)


def random_projection_sample(basis: SamplingBasis, p: float, rng: RngStream) -> PointConfig:
    """Bernoulli(p) selection of basis functions, then an exact sample of that projection."""
    if not 0 <= p <= 1:
        raise ValueError("retention p must be in [0, 1]")
    cfg = hkpv_batch(basis, rng, 1, p=p)[0]
    cfg.replica = rng.replica
    return cfg


def sample_replicas(
    basis: SamplingBasis, seed: int, replicas: int, p: float = 1.0, route: str = "thin", chunk: int = DEFAULT_CHUNK, workers: int = 1
) -> list[PointConfig]:
    """``replicas`` samples in chunks; chunk c uses the stream (seed, c).

    route "thin": sample the rank-N process and delete points with
    probability 1 - p; route "projection": random Bernoulli(p) projection.
    Output depends on (seed, chunk) only, not on ``workers``.
    """
    if route not in ("thin", "projection"):
        raise ValueError(f"unknown route {route!r}")
    jobs = [(c, min(chunk, replicas - c * chunk)) for c in range((replicas + chunk - 1) // chunk)]

    def run(job):
        c, size = job
        stream = RngStream(seed, c)
        if route == "projection":
            return hkpv_batch(basis, stream, size, p=p)
        configs = hkpv_batch(basis, stream, size)
        if p < 1:
            gen = stream.child(1).generator()
            for cfg in configs:
                keep = gen.random(len(cfg.points)) < p
                cfg.points = cfg.points[keep]
        return configs

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    out = [cfg for part in parts for cfg in part]
    for i, cfg in enumerate(out):
        cfg.replica = i
    return out


def linear_statistics(configs: Sequence[PointConfig], f: Callable) -> np.ndarray:
    return np.array([cfg.statistic(f) for cfg in configs])


def dump_points(configs: Sequence[PointConfig], path) -> None:
    """CSV with columns seed, replica, index, x[, y]."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        two = configs and configs[0].dimension == 2
        w.writerow(["seed", "replica", "index", "x", "y"] if two else ["seed", "replica", "index", "x"])
        for cfg in configs:
            for i, z in enumerate(cfg.points):
                w.writerow([cfg.seed, cfg.replica, i, repr(float(np.real(z))), repr(float(np.imag(z)))] if two else [cfg.seed, cfg.replica, i, repr(float(z))])


# -- Monte Carlo estimators ----------------------------------------------------


def _kstats(S1, S2, S3, S4, n):
    k1 = S1 / n
    k2 = (n * S2 - S1**2) / (n * (n - 1))
    k3 = (2 * S1**3 - 3 * n * S1 * S2 + n**2 * S3) / (n * (n - 1) * (n - 2))
    k4 = (-6 * S1**4 + 12 * n * S1**2 * S2 - 3 * n * (n - 1) * S2**2 - 4 * n * (n + 1) * S1 * S3 + n**2 * (n + 1) * S4) / (
        n * (n - 1) * (n - 2) * (n - 3)
    )
    return k1, k2, k3, k4


def k_statistics(samples, max_order: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Unbiased cumulant estimators k_1..k_max_order and their jackknife standard errors."""
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < MIN_MC_SAMPLES:
        raise InsufficientSamplesError(f"need at least {MIN_MC_SAMPLES} samples, got {n}")
    if not 1 <= max_order <= 4:
        raise ValueError("k-statistics are available for orders 1..4")
    shift = x.mean()
    y = x - shift
    S = [np.sum(y**r) for r in range(1, 5)]
    full = np.array(_kstats(*S, n))
    full[0] += shift
    # leave-one-out power sums
    loo = _kstats(*(S[r - 1] - y**r for r in range(1, 5)), n - 1)
    loo = np.array(loo)
    loo[0] += shift
    se = np.sqrt((n - 1) / n * np.sum((loo - loo.mean(axis=1, keepdims=True)) ** 2, axis=1))
    return full[:max_order], se[:max_order]


def mc_cumulants(samples, max_order: int = 4, model: str = "", N: int = 0, p: float = 1.0, q: float = 0.0, alpha=None, T_N=None, targets=None, regime: str = "none") -> list[CumulantRow]:
    """k-statistics as report rows tagged ``monte-carlo`` with jackknife standard errors."""
    k, se = k_statistics(samples, max_order)
    targets = targets or {}
    return [
        CumulantRow(model, N, n + 1, float(k[n]), "monte-carlo", p, q, alpha, T_N, float(se[n]), targets.get(n + 1), regime)
        for n in range(max_order)
    ]


def _window_mask(window, points):
    points = np.asarray(points)
    if callable(window):
        return np.asarray(window(points), dtype=bool)
    kind = window[0]
    if kind == "interval":
        return (np.real(points) >= window[1]) & (np.real(points) < window[2])
    if kind == "disk":
        return np.abs(points - window[1]) < window[2]
    if kind == "annulus":
        r = np.abs(points - window[1])
        return (r >= window[2]) & (r < window[3])
    raise ValueError(f"unknown window {window!r}")


def windows_disjoint(windows) -> bool:
    """Geometric disjointness for interval, disk and centred annulus windows; callables are trusted."""
    shapes = [w for w in windows if not callable(w)]
    for i, a in enumerate(shapes):
        for b in shapes[i + 1 :]:
            if a[0] == b[0] == "interval":
                if max(a[1], b[1]) < min(a[2], b[2]):
                    return False
            elif a[0] == b[0] == "disk":
                if abs(a[1] - b[1]) < a[2] + b[2]:
                    return False
            elif a[0] == b[0] == "annulus" and a[1] == b[1]:
                if max(a[2], b[2]) < min(a[3], b[3]):
                    return False
            elif {a[0], b[0]} == {"disk", "annulus"}:
                d, an = (a, b) if a[0] == "disk" else (b, a)
                dist = abs(d[1] - an[1])
                if dist + d[2] > an[2] and dist - d[2] < an[3]:
                    return False
    return True


def empirical_correlations(replicas: Sequence[PointConfig], windows, k: Sequence[int]) -> tuple[float, float]:
    """Mean of prod_j binom(count in A_j, k_j) over replicas, with its standard error."""
    from scipy.special import comb

    if len(windows) != len(k):
        raise ValueError("one multiplicity per window")
    if not windows_disjoint(windows):
        raise ValueError("windows must be pairwise disjoint")
    vals = np.ones(len(replicas))
    for win, kj in zip(windows, k):
        counts = np.array([np.count_nonzero(_window_mask(win, cfg.points)) for cfg in replicas])
        vals *= comb(counts, kj)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals)))


__all__ = [
    "DEFAULT_CHUNK",
    "EnvelopeError",
    "InsufficientSamplesError",
    "PROPOSAL_BUDGET",
    "PiecewiseEnvelope",
    "PointConfig",
    "RngStream",
    "SamplingBasis",
    "bernoulli_thin",
    "dump_points",
    "empirical_correlations",
    "hkpv_batch",
    "hkpv_sample",
    "k_statistics",
    "linear_statistics",
    "mc_cumulants",
    "random_projection_sample",
    "sample_replicas",
    "sampling_basis",
    "windows_disjoint",
]
