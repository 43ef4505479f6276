import numpy as np
import pytest
from scipy import special, stats

from thinned_dpp.quadrature import gauss_legendre_panels
from thinned_dpp.sampler import (
    EnvelopeError,
    InsufficientSamplesError,
    PiecewiseEnvelope,
    PointConfig,
    RngStream,
    bernoulli_thin,
    empirical_correlations,
    hkpv_sample,
    k_statistics,
    linear_statistics,
    mc_cumulants,
    random_projection_sample,
    sample_replicas,
    sampling_basis,
    windows_disjoint,
)

REPLICAS = 2000


@pytest.fixture(scope="module")
def gue_basis(gue20):
    return sampling_basis(gue20[1])


@pytest.fixture(scope="module")
def gin_basis(ginibre20):
    return sampling_basis(ginibre20)


@pytest.fixture(scope="module")
def gue_samples(gue_basis):
    return sample_replicas(gue_basis, 7, REPLICAS)


@pytest.fixture(scope="module")
def gin_samples(gin_basis):
    return sample_replicas(gin_basis, 7, REPLICAS)


def test_cardinality(gue_samples, gin_samples):
    assert all(len(c) == 20 for c in gue_samples)
    assert all(len(c) == 20 for c in gin_samples)
    assert all(np.unique(c.points).size == 20 for c in gue_samples[:50])


def test_reproducible_and_worker_independent(gue_basis):
    a = sample_replicas(gue_basis, 3, 600, p=0.7, chunk=250)
    b = sample_replicas(gue_basis, 3, 600, p=0.7, chunk=250, workers=2)
    assert all(np.array_equal(x.points, y.points) for x, y in zip(a, b))
    c = sample_replicas(gue_basis, 4, 10)
    assert not np.array_equal(a[0].points, c[0].points)
    one = hkpv_sample(gue_basis, RngStream(9, 2))
    assert np.array_equal(one.points, hkpv_sample(gue_basis, RngStream(9, 2)).points)


def test_gue_intensity_chi_square(gue20, gue_samples):
    K = gue20[1]
    edges = np.linspace(-1.3, 1.3, 27)
    expected = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre_panels(lo, hi, 1, 40)
        expected.append(REPLICAS * np.sum(w * np.real(K.diagonal(x))))
    pts = np.concatenate([c.points for c in gue_samples])
    observed, _ = np.histogram(pts, edges)
    expected = np.array(expected)
    assert abs(expected.sum() - REPLICAS * 20) < 1.0  # bins cover the bulk of the mass
    chi2 = np.sum((observed - expected) ** 2 / expected)
    assert stats.chi2.sf(chi2, len(observed) - 1) > 1e-3


def test_ginibre_radial_and_angular_law(gin_samples):
    N = 20
    pts = np.concatenate([c.points for c in gin_samples])
    r_edges = np.linspace(0, 0.9, 10)
    k = np.arange(N)
    cdf = np.array([special.gammainc(k + 1, 2 * N * r**2).sum() for r in r_edges])
    expected = REPLICAS * np.diff(cdf)
    observed, _ = np.histogram(np.abs(pts), r_edges)
    assert stats.chi2.sf(np.sum((observed - expected) ** 2 / expected), len(observed) - 1) > 1e-3
    ang, _ = np.histogram(np.angle(pts), np.linspace(-np.pi, np.pi, 9))
    assert stats.chisquare(ang).pvalue > 1e-3


def test_count_variance_in_window(gue20, gue_samples):
    # Var(count in A) = int_A K(x,x) - int_A int_A K^2
    K = gue20[1]
    x, w = gauss_legendre_panels(0.0, 2.0, 20, 20)
    d = np.real(K.diagonal(x))
    M = np.abs(K(x[:, None], x[None, :])) ** 2
    var = np.sum(w * d) - w @ M @ w
    counts = np.array([c.count_in(("interval", 0.0, 2.0)) for c in gue_samples])
    se = var * np.sqrt(2 / (REPLICAS - 1))
    assert abs(counts.var(ddof=1) - var) < 4 * se + 0.02


def test_thinning_mean_count(gue_basis):
    cfgs = sample_replicas(gue_basis, 11, 1000, p=0.6)
    n = np.array([len(c) for c in cfgs])
    assert abs(n.mean() - 12) < 4 * np.sqrt(20 * 0.6 * 0.4 / 1000)
    proj = [random_projection_sample(gue_basis, 0.6, RngStream(11, i)) for i in range(200)]
    assert all(len(c) <= 20 for c in proj)


def test_bernoulli_thin_edge_cases():
    cfg = PointConfig(1, np.arange(5.0))
    assert bernoulli_thin(cfg, 1.0, RngStream(0)) is cfg
    assert len(bernoulli_thin(cfg, 0.0, RngStream(0))) == 0
    with pytest.raises(ValueError):
        bernoulli_thin(cfg, 1.5, RngStream(0))


def test_envelope_bounds_and_audit():
    env = PiecewiseEnvelope.build(lambda t: np.exp(-t**2), -3, 3, cells=60)
    t = np.linspace(-3, 3, 5001)
    assert np.all(env(t) >= np.exp(-t**2))
    s = env.sample(np.random.default_rng(0), 1000)
    assert s.min() >= -3 and s.max() <= 3
    with pytest.raises(EnvelopeError):
        PiecewiseEnvelope.build(lambda t: np.where(np.abs(t - 0.05) < 0.02, 10.0, 0.0), -1, 1, cells=10, sub=2)


def test_k_statistics_match_scipy(rng):
    x = rng.normal(size=3000) ** 2
    k, se = k_statistics(x, 4)
    for n in range(1, 5):
        assert abs(k[n - 1] - stats.kstat(x, n)) < 1e-9 * max(1, abs(k[n - 1]))
    assert np.all(se > 0)


def test_k_statistics_constant_and_poisson(rng):
    k, se = k_statistics(np.full(2000, 3.0))
    assert k[0] == 3.0 and np.allclose(k[1:], 0) and np.allclose(se, 0)
    x = rng.poisson(5.0, size=50_000)
    k, se = k_statistics(x)
    assert np.all(np.abs(k - 5.0) < 4 * se)


def test_insufficient_samples():
    with pytest.raises(InsufficientSamplesError):
        k_statistics(np.zeros(999))


def test_mc_rows(rng):
    rows = mc_cumulants(rng.normal(size=1000), 2, model="m", N=5, targets={2: 1.0})
    assert [r.n for r in rows] == [1, 2] and rows[1].target == 1.0 and rows[0].method == "monte-carlo"


def test_linear_statistics():
    cfgs = [PointConfig(1, np.array([1.0, 2.0])), PointConfig(1, np.array([]))]
    assert np.array_equal(linear_statistics(cfgs, lambda x: x**2), [5.0, 0.0])


def test_windows_disjoint():
    assert windows_disjoint([("interval", 0, 1), ("interval", 1, 2)])
    assert not windows_disjoint([("interval", 0, 1.5), ("interval", 1, 2)])
    assert windows_disjoint([("disk", 0, 0.2), ("annulus", 0, 0.3, 0.5)])
    assert not windows_disjoint([("disk", 0, 0.4), ("annulus", 0, 0.3, 0.5)])
    assert not windows_disjoint([("disk", 0, 0.3), ("disk", 0.5, 0.3)])


def test_empirical_correlations(gue20, gue_samples):
    K = gue20[1]
    A, B = ("interval", -0.5, 0.0), ("interval", 0.0, 0.5)
    xa, wa = gauss_legendre_panels(-0.5, 0.0, 4, 20)
    xb, wb = gauss_legendre_panels(0.0, 0.5, 4, 20)
    one, se1 = empirical_correlations(gue_samples, [A], [1])
    assert abs(one - np.sum(wa * np.real(K.diagonal(xa)))) < 4 * se1
    # E[N_A N_B] = int_A int_B det [[K(x,x), K(x,y)], [K(y,x), K(y,y)]]
    two = np.sum(wa * np.real(K.diagonal(xa))) * np.sum(wb * np.real(K.diagonal(xb))) - wa @ (np.abs(K(xa[:, None], xb[None, :])) ** 2) @ wb
    val, se2 = empirical_correlations(gue_samples, [A, B], [1, 1])
    assert abs(val - two) < 4 * se2
    with pytest.raises(ValueError):
        empirical_correlations(gue_samples, [A, A], [1, 1])
