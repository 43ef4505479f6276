"""Cumulant laboratory for thinned determinantal point processes from beta = 2 log-gases."""

from . import combi, cumulants, kernels, limits, orthopoly, sampler
from .combi import UPSILON0, UpsilonMap, compositions, gamma_coeff
from .cumulants import (
    CumulantReport,
    CumulantRow,
    ThinningRegime,
    exact_cumulant_1d,
    path_cumulant_oracle,
    quadrature_cumulant,
    right_limit_cumulant,
    thinned_decomposition,
    verdict,
)
from .handle import KernelHandle
from .kernels import Potential2D, ginibre_finite, ginibre_infinite, sine_kernel
from .orthopoly import JacobiMatrix, Potential1D, cd_kernel, equilibrium_1d, jacobi_for
from .sampler import RngStream, hkpv_sample, mc_cumulants, sample_replicas, sampling_basis
from .testfunctions import GaussianBump, Polynomial, PolynomialZ, SmoothBump

__version__ = "0.1.0"

__all__ = [
    "CumulantReport",
    "CumulantRow",
    "GaussianBump",
    "JacobiMatrix",
    "KernelHandle",
    "Polynomial",
    "PolynomialZ",
    "Potential1D",
    "Potential2D",
    "RngStream",
    "SmoothBump",
    "ThinningRegime",
    "UPSILON0",
    "UpsilonMap",
    "cd_kernel",
    "combi",
    "compositions",
    "cumulants",
    "equilibrium_1d",
    "exact_cumulant_1d",
    "gamma_coeff",
    "ginibre_finite",
    "ginibre_infinite",
    "hkpv_sample",
    "jacobi_for",
    "kernels",
    "limits",
    "mc_cumulants",
    "orthopoly",
    "path_cumulant_oracle",
    "quadrature_cumulant",
    "right_limit_cumulant",
    "sample_replicas",
    "sampler",
    "sampling_basis",
    "sine_kernel",
    "thinned_decomposition",
    "verdict",
]
