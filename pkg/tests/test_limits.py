import numpy as np
import pytest

from thinned_dpp import orthopoly as op
from thinned_dpp.limits import (
    chebyshev_variance,
    crossover_cumulant,
    ginibre_loop_integral,
    gradient_form_h1,
    h1_variance,
    h_half_variance,
    ids_zeta,
    loop_integral_quadrature,
    poisson_cumulant,
    sine_main_term,
    sine_variance,
)
from thinned_dpp.testfunctions import GaussianBump, Polynomial, SmoothBump


def test_h1_closed_forms():
    # normalized area measure: gaussian gives 1/4, the C^3 bump 2/7
    assert abs(h1_variance(GaussianBump(a=np.pi, dimension=2)) - 0.25) < 1e-12
    assert abs(h1_variance(SmoothBump(dimension=2)) - 2 / 7) < 1e-10
    assert abs(gradient_form_h1(SmoothBump(dimension=2)) - 2 / 7) < 1e-7


def test_h1_rejects_1d():
    with pytest.raises(ValueError):
        h1_variance(GaussianBump())


@pytest.mark.parametrize("coeffs,expected", [([0, 1], 0.25), ([0, 0, 1], 0.125), ([0, 0, 0, 1], 0.1875)])
def test_chebyshev_variance_polynomials(coeffs, expected):
    assert abs(chebyshev_variance(coeffs) - expected) < 1e-12


def test_h_half_gaussian_and_quadrature_path():
    assert abs(h_half_variance(GaussianBump()) - 1 / (4 * np.pi)) < 1e-14
    # a translate still uses the closed form; the bump goes through quadrature
    assert abs(h_half_variance(GaussianBump(center=0.4)) - 1 / (4 * np.pi)) < 1e-14
    assert abs(sine_variance(GaussianBump()) - 1 / (2 * np.pi)) < 1e-14
    assert h_half_variance(SmoothBump()) > 0


def test_sine_main_term_matches_variance():
    f = GaussianBump()
    assert abs(sine_main_term(f, 2) - sine_variance(f)) < 1e-9
    assert abs(sine_main_term(f, 3)) < 1e-9


def test_poisson_cumulants():
    eta = op.equilibrium_1d(op.Potential1D.quadratic())
    # semicircle of radius 1: int x^6 = 5/64
    assert abs(poisson_cumulant(Polynomial([0, 0, 1]), eta, 3) - 5 / 64) < 1e-12
    assert poisson_cumulant(GaussianBump(), 1.0, 1) == 0.0
    assert abs(poisson_cumulant(GaussianBump(), 1.0, 2) - np.sqrt(0.5)) < 1e-12


def test_crossover_cumulant():
    f = Polynomial([0, 0, 1])
    assert abs(crossover_cumulant(f, 3, 1.0, "macro-1D") + 5 / 64) < 1e-12
    assert abs(crossover_cumulant(f, 2, 0.0, "macro-1D") - 0.125) < 1e-12
    with pytest.raises(ValueError):
        crossover_cumulant(f, 1, 1.0, "macro-1D")


@pytest.mark.parametrize("text", ["w1*wb2", "wb1*w2", "w1*wb1", "w1*w1"])
@pytest.mark.parametrize("rho", [1.0, 10.0])
def test_loop_integral_closed_form(text, rho):
    assert abs(loop_integral_quadrature(text, 2, rho) - ginibre_loop_integral(text, 2)) < 1e-6


def test_loop_integral_degree_limit():
    with pytest.raises(ValueError):
        ginibre_loop_integral("w1*w1*w2", 2)


def test_ids_zeta_fixes_center_and_is_near_identity():
    V = op.Potential1D.quadratic()
    z = ids_zeta(V, 0.0, 0.5, 10_000, [0.0, 0.3])
    assert abs(z[0]) < 1e-12
    assert abs(z[1] - 0.3) < 1e-3
    with pytest.raises(ValueError):
        ids_zeta(V, 2.0, 0.5, 100, [0.0])
