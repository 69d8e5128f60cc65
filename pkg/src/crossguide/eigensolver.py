"""Bound states of the 1D Gaussian well by Numerov shooting.

Energies are bracketed by node counting (the forward-integrated solution at
energy eps has exactly v sign changes iff eps lies between eigenvalues v-1
and v), bisected to machine precision, and the eigenfunction is then built
by integrating from both grid edges toward the outermost classical turning
point, where the two stable (inward-growing) pieces are matched and the
result normalized. Level energies are seeded by the semiclassical phase
integral, which also provides the smooth density of states.

The sweeps run over the same grid the spectral propagation uses, so no
interpolation happens at the handoff. Dense-matrix diagonalization is
deliberately avoided: the default well holds ~1.2e4 levels on grids of up
to 2^20 points, and only selected levels are ever needed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq

from .core import GuideConfig, PhysicalConstants
from .potentials import vertical_potential


class GridTooSmallError(ValueError):
    """Grid does not contain the classical region plus 5 decay lengths."""


class LevelRangeError(IndexError):
    """Requested vibrational index is not a bound level."""


# ---------------------------------------------------------------------------
# Numerov kernels (psi'' = f psi with f = 2m(V - eps)/hbar^2)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _count_nodes(dx, eps, V, two_m_over_hbar2):
    """Sign changes of the solution grown from the left edge."""
    n = V.size
    h2 = dx * dx / 12.0
    nodes = 0
    psi_m = 0.0
    psi_0 = 1e-280
    f_m = two_m_over_hbar2 * (V[0] - eps)
    f_0 = two_m_over_hbar2 * (V[1] - eps)
    for i in range(1, n - 1):
        f_p = two_m_over_hbar2 * (V[i + 1] - eps)
        psi_p = (2.0 * psi_0 * (1.0 + 5.0 * h2 * f_0)
                 - psi_m * (1.0 - h2 * f_m)) / (1.0 - h2 * f_p)
        if (psi_p < 0.0 and psi_0 > 0.0) or (psi_p > 0.0 and psi_0 < 0.0):
            nodes += 1
        if abs(psi_p) > 1e250:
            psi_p *= 1e-250
            psi_0 *= 1e-250
        psi_m = psi_0
        psi_0 = psi_p
        f_m = f_0
        f_0 = f_p
    return nodes


@njit(cache=True)
def _sweep_fwd(dx, eps, V, two_m_over_hbar2, i_end, out):
    """Grow the solution from the left edge up to index i_end (inclusive)."""
    h2 = dx * dx / 12.0
    out[0] = 0.0
    out[1] = 1e-160
    f_m = two_m_over_hbar2 * (V[0] - eps)
    f_0 = two_m_over_hbar2 * (V[1] - eps)
    for i in range(1, i_end):
        f_p = two_m_over_hbar2 * (V[i + 1] - eps)
        out[i + 1] = (2.0 * out[i] * (1.0 + 5.0 * h2 * f_0)
                      - out[i - 1] * (1.0 - h2 * f_m)) / (1.0 - h2 * f_p)
        if abs(out[i + 1]) > 1e100:
            for j in range(i + 2):
                out[j] *= 1e-100
        f_m = f_0
        f_0 = f_p


@njit(cache=True)
def _sweep_bwd(dx, eps, V, two_m_over_hbar2, i_start, out):
    """Grow the solution from the right edge down to index i_start."""
    n = V.size
    h2 = dx * dx / 12.0
    out[n - 1] = 0.0
    out[n - 2] = 1e-160
    f_p = two_m_over_hbar2 * (V[n - 1] - eps)
    f_0 = two_m_over_hbar2 * (V[n - 2] - eps)
    for i in range(n - 2, i_start, -1):
        f_m = two_m_over_hbar2 * (V[i - 1] - eps)
        out[i - 1] = (2.0 * out[i] * (1.0 + 5.0 * h2 * f_0)
                      - out[i + 1] * (1.0 - h2 * f_p)) / (1.0 - h2 * f_m)
        if abs(out[i - 1]) > 1e100:
            for j in range(i - 1, n):
                out[j] *= 1e-100
        f_p = f_0
        f_0 = f_m


# ---------------------------------------------------------------------------
# Semiclassical phase integral
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = leggauss(240)


def turning_point(eps: float, guide: GuideConfig) -> float:
    """Right classical turning point l0 of the vertical well at energy eps."""
    return guide.w0 * np.sqrt(0.5 * np.log(guide.U0 / (-eps)))


def action_integral(eps: float, guide: GuideConfig, consts: PhysicalConstants) -> float:
    """Phase integral int p dx between the turning points at energy eps < 0.

    The substitution x = l0 sin(theta) makes the integrand smooth at both
    turning points; Gauss-Legendre then converges spectrally.
    """
    if not -guide.U0 < eps < 0:
        raise LevelRangeError(f"energy {eps} outside (-U0, 0)")
    l0 = turning_point(eps, guide)
    theta = 0.5 * np.pi * _GL_NODES
    x = l0 * np.sin(theta)
    kin = eps - vertical_potential(x, guide)
    p = np.sqrt(np.maximum(2.0 * consts.m * kin, 0.0))
    return float(np.sum(_GL_WEIGHTS * p * 0.5 * np.pi * l0 * np.cos(theta)))


def density_of_states(eps: float, guide: GuideConfig, consts: PhysicalConstants) -> float:
    """Smooth level density dv/deps (states per J) from the action derivative.

    Equals the classical oscillation period divided by 2 pi hbar.
    """
    if not -guide.U0 < eps < 0:
        raise LevelRangeError(f"energy {eps} outside (-U0, 0)")
    l0 = turning_point(eps, guide)
    theta = 0.5 * np.pi * _GL_NODES
    x = l0 * np.sin(theta)
    kin = eps - vertical_potential(x, guide)
    p = np.sqrt(np.maximum(2.0 * consts.m * kin, 0.0))
    inv_p = np.where(p > 0.0, consts.m / np.maximum(p, 1e-300), 0.0)
    half_period = float(np.sum(_GL_WEIGHTS * inv_p * 0.5 * np.pi * l0 * np.cos(theta)))
    return half_period / (np.pi * consts.hbar)


def count_bound_states(guide: GuideConfig, consts: PhysicalConstants,
                       method: str = "wkb") -> int:
    """Number of bound levels of the vertical well.

    method="wkb" uses the threshold phase integral, which is analytic for a
    Gaussian well: int p dx at eps -> 0- equals sqrt(2 m U0) w0 sqrt(pi).
    method="nodes" cross-checks by Numerov node counting just below
    threshold on an automatically built fine grid (slower, exact).
    """
    if method == "wkb":
        phi0 = np.sqrt(2.0 * consts.m * guide.U0) * guide.w0 * np.sqrt(np.pi)
        return int(np.floor(phi0 / (np.pi * consts.hbar) + 0.5))
    if method == "nodes":
        eps = -1e-9 * guide.U0
        lam_min = 2.0 * np.pi * consts.hbar / np.sqrt(2.0 * consts.m * guide.U0)
        half_width = 1.3 * turning_point(eps, guide) + 4.0 * guide.w0
        n = int(np.ceil(2.0 * half_width / (lam_min / 14.0)))
        x = np.linspace(-half_width, half_width, n)
        V = vertical_potential(x, guide)
        return int(_count_nodes(x[1] - x[0], eps, V,
                                2.0 * consts.m / consts.hbar**2))
    raise ValueError(f"unknown method {method!r}")


def wkb_energy(v: int, guide: GuideConfig, consts: PhysicalConstants) -> float:
    """Semiclassical energy of level v: int p dx = (v + 1/2) pi hbar."""
    n_max = count_bound_states(guide, consts)
    if not 0 <= v < n_max:
        raise LevelRangeError(f"v={v} outside the {n_max} bound levels")
    target = (v + 0.5) * np.pi * consts.hbar

    def f(eps):
        return action_integral(eps, guide, consts) - target

    lo = -guide.U0 * (1.0 - 1e-14)
    hi = -guide.U0 * 1e-15
    while f(hi) < 0.0:
        hi *= 1e-3
        if hi > -guide.U0 * 1e-300:
            raise LevelRangeError(f"v={v} has no semiclassical solution")
    return float(brentq(f, lo, hi, xtol=1e-45, rtol=8.9e-16, maxiter=300))


# ---------------------------------------------------------------------------
# Shooting solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenFunction:
    """Normalized bound state of the vertical well sampled on a grid."""

    v: int
    energy: float           # J
    psi: np.ndarray         # real samples, sum(psi^2) dx = 1
    x: np.ndarray
    dx: float

    def node_count(self) -> int:
        """Sign changes of the numerically significant part of psi."""
        body = self.psi[np.abs(self.psi) > 1e-12 * np.max(np.abs(self.psi))]
        return int(np.count_nonzero(np.diff(np.sign(body)) != 0))


@dataclass(frozen=True)
class EigenSpectrum:
    """Ordered bound-level energies with the well parameters they belong to."""

    energies: np.ndarray    # strictly increasing, all in (-U0, 0)
    U0: float
    w0: float
    m: float
    method: str = "wkb"
    levels: np.ndarray = field(default=None)  # v indices, defaults to 0..n-1

    def __post_init__(self):
        if self.levels is None:
            object.__setattr__(self, "levels", np.arange(len(self.energies)))
        e = self.energies
        if np.any(np.diff(e) <= 0) or np.any(e >= 0) or np.any(e <= -self.U0):
            raise ValueError("energies must increase strictly inside (-U0, 0)")


def _check_tails(eps: float, x: np.ndarray, V: np.ndarray,
                 consts: PhysicalConstants, n_decay: float = 5.0) -> None:
    """Require >= n_decay WKB decay lengths of forbidden region on each side."""
    kappa = np.sqrt(np.maximum(2.0 * consts.m * (V - eps), 0.0)) / consts.hbar
    dx = x[1] - x[0]
    allowed = np.where(V < eps)[0]
    if allowed.size == 0:
        raise GridTooSmallError("classically allowed region not on the grid")
    left = np.sum(kappa[: allowed[0]]) * dx
    right = np.sum(kappa[allowed[-1]:]) * dx
    if left < n_decay or right < n_decay:
        raise GridTooSmallError(
            f"forbidden region spans {left:.2f} / {right:.2f} decay lengths "
            f"(need >= {n_decay}); enlarge the grid")


def solve_level(v: int, guide: GuideConfig, consts: PhysicalConstants,
                x: np.ndarray, eps_hint: float | None = None) -> EigenFunction:
    """Solve bound level v of the vertical well on the given uniform grid.

    Node-counting bisection starting from the semiclassical bracket; the
    eigenfunction is matched at the outermost right turning point from two
    inward integrations and normalized to sum(psi^2) dx = 1.
    """
    n_max = count_bound_states(guide, consts)
    if not 0 <= v < n_max:
        raise LevelRangeError(f"v={v} outside the {n_max} bound levels")
    dx = float(x[1] - x[0])
    V = vertical_potential(x, guide)
    cm = 2.0 * consts.m / consts.hbar**2

    eps0 = eps_hint if eps_hint is not None else wkb_energy(v, guide, consts)
    _check_tails(eps0, x, V, consts)

    # Bracket [e_lo, e_hi] with node counts <= v and >= v+1.
    if v == 0:
        e_lo = -guide.U0 * (1.0 - 1e-14)
    else:
        e_lo = wkb_energy(v - 1, guide, consts)
        while _count_nodes(dx, e_lo, V, cm) > v:
            e_lo = 0.5 * (e_lo - guide.U0)
    e_hi = wkb_energy(v + 1, guide, consts) if v + 1 < n_max else -guide.U0 * 1e-13
    while _count_nodes(dx, e_hi, V, cm) < v + 1:
        e_hi *= 1e-2
        if e_hi > -guide.U0 * 1e-290:
            raise GridTooSmallError(f"level v={v} not representable on this grid")

    for _ in range(300):
        e_mid = 0.5 * (e_lo + e_hi)
        if _count_nodes(dx, e_mid, V, cm) <= v:
            e_lo = e_mid
        else:
            e_hi = e_mid
        if e_hi - e_lo < 4e-16 * abs(e_lo):
            break
    eps = 0.5 * (e_lo + e_hi)

    # Two-sided construction, matched at the outermost right turning point.
    allowed = np.where(V < eps)[0]
    i_m = int(allowed[-1]) if allowed.size else V.size // 2
    fwd = np.zeros_like(V)
    bwd = np.zeros_like(V)
    _sweep_fwd(dx, eps, V, cm, i_m, fwd)
    _sweep_bwd(dx, eps, V, cm, i_m, bwd)
    fwd[: i_m + 1] /= np.max(np.abs(fwd[: i_m + 1]))
    bwd[i_m:] /= np.max(np.abs(bwd[i_m:]))
    if fwd[i_m] == 0.0 or bwd[i_m] == 0.0:
        raise GridTooSmallError(f"tail matching failed for v={v}")
    psi = np.empty_like(V)
    psi[: i_m + 1] = fwd[: i_m + 1]
    psi[i_m + 1:] = bwd[i_m + 1:] * (fwd[i_m] / bwd[i_m])
    psi /= np.sqrt(np.sum(psi * psi) * dx)

    return EigenFunction(v=v, energy=eps, psi=psi, x=x, dx=dx)


def compute_spectrum(guide: GuideConfig, consts: PhysicalConstants,
                     levels=None) -> EigenSpectrum:
    """Semiclassical energies for the requested levels (default: all)."""
    n_max = count_bound_states(guide, consts)
    if levels is None:
        levels = np.arange(n_max)
    levels = np.asarray(levels, dtype=int)
    energies = np.array([wkb_energy(int(v), guide, consts) for v in levels])
    return EigenSpectrum(energies=energies, U0=guide.U0, w0=guide.w0,
                         m=consts.m, method="wkb", levels=levels)


# ---------------------------------------------------------------------------
# Level-energy cache
# ---------------------------------------------------------------------------

def spectrum_key(guide: GuideConfig, consts: PhysicalConstants, grid_tag: str) -> str:
    """Hash identifying a well + grid combination for the energy cache."""
    blob = repr((guide.U0, guide.w0, consts.m, consts.hbar, grid_tag)).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_energies(path: str | Path, key: str, pairs: dict[int, float]) -> None:
    """Write '(v, eps)' pairs as a small text cache file."""
    lines = [f"# crossguide level cache {key}"]
    lines += [f"{v} {eps!r}" for v, eps in sorted(pairs.items())]
    Path(path).write_text("\n".join(lines) + "\n")


def load_energies(path: str | Path, key: str) -> dict[int, float]:
    """Read a cache written by save_energies; {} if missing or key mismatch."""
    path = Path(path)
    if not path.exists():
        return {}
    lines = path.read_text().splitlines()
    if not lines or lines[0] != f"# crossguide level cache {key}":
        return {}
    out: dict[int, float] = {}
    for line in lines[1:]:
        if line.strip():
            v_str, eps_str = line.split()
            out[int(v_str)] = float(eps_str)
    return out
