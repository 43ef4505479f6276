import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thinned_dpp import orthopoly as op


def test_stieltjes_matches_hermite_closed_form():
    N = 30
    a = op.stieltjes_coeffs(op.Potential1D.quadratic(), N, N + 10)
    ref = op.hermite_recurrence(N, N + 10)
    assert np.max(np.abs(a.a - ref.a)) < 1e-10
    assert np.max(np.abs(a.b)) < 1e-10
    assert abs(a.log_mu0 - ref.log_mu0) < 1e-10


def test_quartic_recurrence_is_even_and_positive():
    J = op.jacobi_for(op.Potential1D.quartic(0.5), 20, 30)
    assert np.all(J.a > 0)
    assert np.max(np.abs(J.b)) < 1e-12
    assert op.orthonormality_residual(J) < 1e-8


def test_orthonormality_and_kernel_forms(gue20):
    J, K = gue20
    assert op.orthonormality_residual(J) < 1e-10
    x = np.linspace(-0.9, 0.9, 7)
    y = np.linspace(-0.8, 1.0, 7)
    cd = K(x[:, None], y[None, :])
    direct = op.direct_kernel(J, x[:, None], y[None, :])
    assert np.max(np.abs(cd - direct)) < 1e-10
    # diagonal of the CD form is the derivative formula
    assert np.max(np.abs(K.diagonal(x) - op.direct_kernel(J, x, x))) < 1e-10


def test_kernel_trace_and_reproducing(gue20):
    _, K = gue20
    assert abs(K.trace() - 20) < 1e-8
    assert K.reproducing_residual(np.array([0.1, -0.3]), np.array([0.2, 0.5])) < 1e-10
    assert K.hermitian_residual(np.array([0.1, 0.4]), np.array([-0.2, 0.3])) < 1e-14


def test_phi0_closed_form():
    J = op.hermite_recurrence(10, 12)
    x = np.array([-0.5, 0.0, 0.7])
    phi0 = op.phi_functions(J, x)[:, 0]
    expected = np.exp(-10 * x**2) / np.sqrt(np.sqrt(np.pi / 20))
    assert np.allclose(phi0, expected, rtol=1e-12)


def test_phi_no_overflow_far_out():
    J = op.hermite_recurrence(100, 101)
    vals = op.phi_functions(J, np.array([3.0, 10.0]))
    assert np.all(np.isfinite(vals))


def test_density_moments_approach_semicircle():
    J = op.hermite_recurrence(100, 102)
    K = op.cd_kernel(J)
    assert abs(op.density_moments(K, 2) - 0.25) < 1e-3
    assert abs(op.density_moments(K, 0) - 1.0) < 1e-10


def test_semicircle_closed_forms(semicircle):
    assert semicircle.support == (-1.0, 1.0)
    assert abs(semicircle.moment(0) - 1) < 1e-12
    assert abs(semicircle.moment(2) - 0.25) < 1e-12
    assert abs(semicircle.moment(6) - 5 / 64) < 1e-12
    assert abs(float(semicircle.ids(0.0))) < 1e-15
    assert abs(semicircle.ids_inverse(float(semicircle.ids(0.37))) - 0.37) < 1e-12


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0])
def test_quartic_equilibrium_edge_equation(t):
    mu = op.equilibrium_1d(op.Potential1D.quartic(t))
    b2 = mu.edge**2
    assert abs(b2 + 1.5 * t * b2**2 - 1) < 1e-9
    assert abs(mu.moment(0) - 1) < 1e-10


def test_quartic_density_matches_large_N_kernel():
    V = op.Potential1D.quartic(0.5)
    J = op.jacobi_for(V, 120, 122)
    K = op.cd_kernel(J)
    mu = op.equilibrium_1d(V)
    x = np.array([-0.3, 0.0, 0.4])
    assert np.max(np.abs(op.one_point_density(K, x) - mu.density(x))) < 0.02


def test_right_limit_trend_shrinks():
    tr = op.right_limit_trend(op.Potential1D.quadratic(), (50, 100, 200))
    assert tr[0] > tr[1] > tr[2]


def test_potential_validation():
    with pytest.raises(ValueError):
        op.Potential1D.custom([0, 0, -1])
    with pytest.raises(ValueError):
        op.Potential1D.from_name("cubic")


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.95, 0.95))
def test_ids_monotone_and_inverse(x):
    mu = op.equilibrium_1d(op.Potential1D.quadratic())
    F = float(mu.ids(x))
    assert abs(mu.ids_inverse(F) - x) < 1e-10
    assert float(mu.ids(x + 0.01)) > F
