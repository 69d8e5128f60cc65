"""Maxwell-Boltzmann statistics of the cloud at guide switch-on.

Covers the trapping-probability series, the per-level populations P(v0)
obtained from the phase-space density restricted to an energy shell, and the
Gauss-Hermite quadrature used to average observables over the initial
vertical position and velocity.

Everything here depends only on the dimensionless ratios sigma0/w0,
U0/(kB T0) and eps0/U0; tests pin that invariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss

from .core import CloudConfig, GuideConfig, PhysicalConstants


class SeriesConvergenceError(ArithmeticError):
    """Trapping series tail still above tolerance after n_terms."""

    def __init__(self, partial: float, tail: float, n_terms: int):
        self.partial = partial
        self.tail = tail
        super().__init__(
            f"series tail {tail:.3e} > tolerance after {n_terms} terms "
            f"(partial value {partial:.12f})")


class QuadratureError(ArithmeticError):
    """Level-population quadrature failed its self-convergence check."""


@dataclass(frozen=True)
class ThermalEnsemble:
    """Gaussian phase-space cloud: rms position and velocity widths."""

    sigma0: float   # m
    sigma_v: float  # m/s
    T0: float       # K

    @classmethod
    def from_config(cls, cloud: CloudConfig, consts: PhysicalConstants) -> "ThermalEnsemble":
        return cls(sigma0=cloud.sigma0,
                   sigma_v=math.sqrt(consts.k_B * cloud.T0 / consts.m),
                   T0=cloud.T0)


@dataclass(frozen=True)
class QuadratureSet:
    """Product Gauss-Hermite nodes over (z0, zdot0) with unit total weight."""

    z0: np.ndarray
    zdot0: np.ndarray
    weights: np.ndarray
    order: int

    def __len__(self) -> int:
        return self.z0.size


def trapping_probability(depth_ratio: float, size_ratio: float,
                         n_terms: int = 400, tol: float = 1e-12) -> tuple[float, float]:
    """1D probability that an atom is bound transversally at switch-on.

    Alternating series in the depth ratio U0/(kB T0):

        P = sum_n (-r)^n beta_n / ((2n+1) n!),
        beta_n = 2 / sqrt(1 + (4n+2) s^2) * sqrt(r / pi),

    with r the depth ratio and s = sigma0/w0. Terms near n ~ r reach ~e^r
    before cancelling, so for deep wells the terms are computed in extended
    precision; the returned float is exact to roundoff either way.

    Returns (value, tail) where tail is the magnitude of the last term.
    Raises SeriesConvergenceError if the tail is still above tol after
    n_terms (the exception carries the partial value).
    """
    if depth_ratio <= 0 or size_ratio <= 0:
        raise ValueError("depth_ratio and size_ratio must be positive")
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")

    use_mp = depth_ratio > 8.0
    if use_mp:
        mpmath.mp.dps = int(30 + 0.8 * depth_ratio)
        r = mpmath.mpf(depth_ratio)
        s2 = mpmath.mpf(size_ratio) ** 2
        pref = mpmath.sqrt(r / mpmath.pi)
        total = mpmath.mpf(0)
    else:
        r = depth_ratio
        s2 = size_ratio**2
        pref = math.sqrt(depth_ratio / math.pi)
        terms = []

    tail = math.inf
    for n in range(n_terms):
        if use_mp:
            beta = 2 / mpmath.sqrt(1 + (4 * n + 2) * s2) * pref
            term = (-r) ** n * beta / ((2 * n + 1) * mpmath.factorial(n))
            total += term
        else:
            beta = 2.0 / math.sqrt(1.0 + (4 * n + 2) * s2) * pref
            term = (-r) ** n * beta / ((2 * n + 1) * math.factorial(n))
            terms.append(term)
        tail = abs(float(term))
        if tail < tol and n > depth_ratio:
            break
    value = float(total) if use_mp else math.fsum(terms)
    if tail >= tol:
        raise SeriesConvergenceError(value, tail, n_terms)
    return value, tail


def trapping_probability_2d(depth_ratio: float, size_ratio: float,
                            n_terms: int = 400, tol: float = 1e-12) -> tuple[float, float]:
    """Squared 1D result: trapping along both transverse directions."""
    p, tail = trapping_probability(depth_ratio, size_ratio, n_terms, tol)
    return p * p, 2.0 * p * tail


_GL_NODES, _GL_WEIGHTS = leggauss(160)
_GL_NODES_FINE, _GL_WEIGHTS_FINE = leggauss(320)


def _population_integral(eps: float, rho: float, ensemble: ThermalEnsemble,
                         guide: GuideConfig, consts: PhysicalConstants,
                         nodes: np.ndarray, weights: np.ndarray) -> float:
    """One evaluation of the shell integral at a given quadrature order."""
    kT = consts.k_B * ensemble.T0
    U0, w0, sigma0 = guide.U0, guide.w0, ensemble.sigma0
    l0 = w0 * math.sqrt(0.5 * math.log(U0 / (-eps)))
    e_top = eps + U0   # kinetic energy at the well center

    def wq(x):
        return np.exp(-x**2 / (2.0 * sigma0**2)) / math.sqrt(2.0 * math.pi * sigma0**2)

    x_cap = 8.0 * sigma0
    if l0 <= x_cap:
        # Inner piece in x up to the point where the local kinetic energy
        # drops to e_top/2; outer piece in s = sqrt(E), which removes the
        # inverse-square-root turning-point singularity of the energy weight.
        e_mid = 0.5 * e_top
        x_mid = w0 * math.sqrt(0.5 * math.log(U0 / (e_mid - eps)))
        x_in = 0.5 * x_mid * (nodes + 1.0)
        e_in = eps + U0 * np.exp(-2.0 * x_in**2 / w0**2)
        inner = np.sum(weights * wq(x_in)
                       * np.exp(-e_in / kT) / np.sqrt(math.pi * e_in * kT)) * 0.5 * x_mid
        s_max = math.sqrt(e_mid)
        s = 0.5 * s_max * (nodes + 1.0)
        e_out = s**2
        depth = e_out - eps  # -V0 at the matching position, >= |eps|
        x_out = w0 * np.sqrt(0.5 * np.log(U0 / depth))
        dv_dx = 4.0 * x_out / w0**2 * depth
        outer = np.sum(weights * wq(x_out)
                       * (2.0 * np.exp(-e_out / kT) / math.sqrt(math.pi * kT))
                       / dv_dx) * 0.5 * s_max
        half = inner + outer
    else:
        # Near-threshold level: the turning point sits beyond the cloud.
        # Integrate to the cap; the discarded position weight is < 1e-12.
        x_in = 0.5 * x_cap * (nodes + 1.0)
        e_in = eps + U0 * np.exp(-2.0 * x_in**2 / w0**2)
        half = np.sum(weights * wq(x_in)
                      * np.exp(-e_in / kT) / np.sqrt(math.pi * e_in * kT)) * 0.5 * x_cap
    return 2.0 * half / rho


def level_population(v0: int, eps_v0: float, rho: float,
                     ensemble: ThermalEnsemble, guide: GuideConfig,
                     consts: PhysicalConstants) -> float:
    """Probability P(v0) that an atom lands in bound level v0 at switch-on.

    Integrates the position density times the kinetic-energy density on the
    energy shell eps_v0 between the turning points, divided by the smooth
    level density rho(eps_v0). The integrable 1/sqrt(E) endpoint
    singularity is removed by the E = s^2 substitution.

    Raises QuadratureError if doubling the quadrature order moves the
    result by more than 1e-8 relative.
    """
    if not -guide.U0 < eps_v0 < 0:
        raise ValueError(f"eps_v0={eps_v0} outside (-U0, 0)")
    if rho <= 0:
        raise ValueError("rho must be positive")
    coarse = _population_integral(eps_v0, rho, ensemble, guide, consts,
                                  _GL_NODES, _GL_WEIGHTS)
    fine = _population_integral(eps_v0, rho, ensemble, guide, consts,
                                _GL_NODES_FINE, _GL_WEIGHTS_FINE)
    scale = max(abs(fine), 1e-300)
    if abs(fine - coarse) > 1e-8 * scale:
        raise QuadratureError(
            f"population quadrature for v0={v0} changed by "
            f"{abs(fine - coarse) / scale:.2e} relative on refinement")
    return fine


def initial_condition_quadrature(ensemble: ThermalEnsemble, order: int) -> QuadratureSet:
    """Gauss-Hermite product rule for averaging over (z0, zdot0).

    Order 1 collapses to the single node (0, 0) with weight 1. Nodes map the
    physicists' Hermite abscissas onto the two Gaussians (scale sqrt(2) sigma);
    a rule of order q integrates polynomial moments up to degree 2q-1 exactly.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    h_nodes, h_weights = hermgauss(order)
    w1 = h_weights / math.sqrt(math.pi)
    z_nodes = math.sqrt(2.0) * ensemble.sigma0 * h_nodes
    v_nodes = math.sqrt(2.0) * ensemble.sigma_v * h_nodes
    z0, zdot0 = np.meshgrid(z_nodes, v_nodes, indexing="ij")
    w = np.outer(w1, w1)
    w = w / w.sum()
    return QuadratureSet(z0=z0.ravel(), zdot0=zdot0.ravel(),
                         weights=w.ravel(), order=order)
