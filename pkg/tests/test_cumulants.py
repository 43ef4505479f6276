import numpy as np
import pytest

from thinned_dpp import orthopoly as op
from thinned_dpp.cumulants import (
    CSV_COLUMNS,
    CumulantReport,
    CumulantRow,
    RefinementError,
    ThinningRegime,
    TruncationError,
    exact_cumulant_1d,
    exact_size,
    path_cumulant_oracle,
    quadrature_cumulant,
    right_limit_cumulant,
    thinned_decomposition,
    verdict,
)
from thinned_dpp.kernels import ginibre_infinite
from thinned_dpp.testfunctions import GaussianBump, Polynomial


def _jacobi(N, Q, n):
    return op.hermite_recurrence(N, exact_size(N, Q, n))


def test_linear_statistic_variance_is_quarter():
    # for Q = x the variance is a_N^2 = 1/4 at every N
    for N in (5, 40):
        assert abs(exact_cumulant_1d(_jacobi(N, [0, 1], 2), [0, 1], n=2) - 0.25) < 1e-13


def test_mean_is_trace():
    N = 30
    J = _jacobi(N, [0, 0, 1], 1)
    m = exact_cumulant_1d(J, [0, 0, 1], n=1)
    # E sum x_i^2 = Tr(P_N J^2 P_N)
    A = np.asarray(J.matrix(J.size))
    assert abs(m - np.trace((A @ A)[:N, :N])) < 1e-12
    assert abs(exact_cumulant_1d(J, [0, 0, 1], n=1, p=0.7) - 0.7 * m) < 1e-12


@pytest.mark.parametrize("N", [1, 4, 9])
@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("p", [1.0, 0.6])
def test_exact_matches_path_oracle(N, n, p):
    Q = [0.3, -0.5, 1.0]
    J = _jacobi(N, Q, n)
    a, b = exact_cumulant_1d(J, Q, n=n, p=p), path_cumulant_oracle(J, Q, n=n, p=p)
    assert abs(a - b) <= 1e-9 * max(abs(b), 1e-3)


def test_exact_matches_quadrature(gue20):
    J, K = gue20
    for Q in ([0, 1], [0, 0, 1]):
        for n in (2, 3):
            e = exact_cumulant_1d(J, Q, n=n)
            qv = quadrature_cumulant(K, Polynomial(Q), n=n)
            assert abs(e - qv) <= 1e-6 * max(abs(e), 1e-6)


def test_truncation_error_when_jacobi_too_short():
    J = op.hermite_recurrence(20, 21)
    with pytest.raises(TruncationError):
        exact_cumulant_1d(J, [0, 0, 1], n=3)


def test_exact_rejects_bad_arguments():
    J = _jacobi(10, [0, 1], 2)
    with pytest.raises(ValueError):
        exact_cumulant_1d(J, [0, 1], n=2, p=0.0)
    with pytest.raises(ValueError):
        exact_cumulant_1d(J, [0, 1], n=7)


@pytest.mark.parametrize("Q,n,expected", [([0, 1], 2, 0.25), ([0, 0, 1], 2, 0.125), ([0, 1], 3, 0.0), ([0, 0, 0, 1], 2, 0.1875)])
def test_right_limit(Q, n, expected):
    assert abs(right_limit_cumulant(Q, n) - expected) < 1e-12


def test_quadrature_refinement_error():
    with pytest.raises(RefinementError):
        quadrature_cumulant(ginibre_infinite(1.0), GaussianBump(a=0.05, dimension=2), n=2, order=8, tol=1e-12)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("q", [0.0, 0.1, 0.5])
def test_decomposition_identity(gue20, n, q):
    _, K = gue20
    d = thinned_decomposition(K, Polynomial([0, 0, 1]), n, q)
    assert d.residual < 1e-10 * max(1.0, abs(d.direct))
    if q == 0:
        assert d.diagonal == 0 and d.cyclic == 0


def test_regime_schedules():
    r = ThinningRegime.parse("critical:2")
    assert r.q(100) == 0.02 and abs(r.T(100) - 2) < 1e-12
    assert ThinningRegime.parse("sub:1,2").q(10) == 0.01
    assert ThinningRegime.parse("super:1,0.5").T(100) == pytest.approx(10.0)
    assert ThinningRegime.parse("none").p(50) == 1.0
    with pytest.raises(ValueError):
        ThinningRegime("sub", 1.0, 0.5)
    with pytest.raises(ValueError):
        ThinningRegime("super", 1.0, 1.5)
    with pytest.raises(ValueError):
        ThinningRegime("critical", 2.0).q(1)


def test_verdict_rule():
    assert verdict([0.2, 0.22, 0.24, 0.249], 0.25, 0.03)
    assert not verdict([0.2, 0.249, 0.24, 0.2495], 0.25, 0.03)  # non-monotone tail
    assert not verdict([0.2, 0.21, 0.22], 0.25, 0.03)  # gap too large
    assert verdict([1e-3, 1e-4, 1e-5], 0.0, 1e-4)  # absolute for zero target
    with pytest.raises(ValueError):
        verdict([0.1, 0.2], 0.25, 0.03)


def test_report_csv_and_mean_scaling(tmp_path):
    rep = CumulantReport()
    rep.add(CumulantRow("gue", 10, 1, 5.0, "exact"))
    rep.add(CumulantRow("gue", 10, 1, 3.5, "exact", p=0.7, q=0.3))
    rep.add(CumulantRow("gue", 10, 1, 3.0, "exact", p=0.6, q=0.4))
    text = rep.to_csv(tmp_path / "c.csv")
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert (tmp_path / "c.csv").read_text() == text
    bad = rep.check_mean_scaling()
    assert len(bad) == 0
    rep.add(CumulantRow("gue", 10, 1, 3.3, "exact", p=0.7))
    assert len(rep.check_mean_scaling()) == 1
    with pytest.raises(ValueError):
        CumulantRow("gue", 10, 2, 0.1, "guess")
