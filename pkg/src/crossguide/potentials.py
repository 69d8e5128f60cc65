"""Guide potentials, rotated coordinates and the free-fall reduction.

The two guides create Gaussian wells

    V0(x)       = -U0 exp(-2 x^2 / w0^2)
    V1(x, z, t) = -U1 u(t - t0) exp(-2 x'^2 / w1^2)

where x' is the transverse coordinate of the oblique guide, obtained by
rotating (x, z - z_c) by the crossing angle, and u is the Heaviside step
(u(0) = 1: the guide is on exactly at t0). Replacing z by the classical
free-fall height z_ff(t) turns the 2D guide potential into the effective
1D time-dependent potential the quantum propagation uses.

Sign convention: zdot0 > 0 means moving downward,
z_ff(t) = z0 - zdot0 t - g t^2 / 2.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import GuideConfig, PhysicalConstants


class RotatedCoords(NamedTuple):
    """Coordinates in the oblique-guide frame (transverse x', longitudinal z')."""

    xp: float | np.ndarray
    zp: float | np.ndarray


def rotate(x, z, guide: GuideConfig) -> RotatedCoords:
    """Rotate (x, z) into the oblique-guide frame centered on the crossing.

    x' = x cos(gamma) + (z - z_c) sin(gamma)
    z' = (z - z_c) cos(gamma) - x sin(gamma)
    """
    c, s = np.cos(guide.gamma), np.sin(guide.gamma)
    dz = z - guide.z_c
    return RotatedCoords(x * c + dz * s, dz * c - x * s)


def vertical_potential(x, guide: GuideConfig):
    """V0(x): the static well of the vertical guide (J)."""
    return -guide.U0 * np.exp(-2.0 * np.square(x) / guide.w0**2)


def oblique_potential(x, z, t, guide: GuideConfig):
    """V1(x, z, t): the oblique well, zero before the switch-on time."""
    if t < guide.t0 or guide.U1 == 0.0:
        return np.zeros_like(np.asarray(x, dtype=float))
    xp = rotate(x, z, guide).xp
    return -guide.U1 * np.exp(-2.0 * np.square(xp) / guide.w1**2)


def guide_potential_2d(x, z, t, guide: GuideConfig):
    """Total guiding potential V0(x) + V1(x, z, t) in J (gravity excluded)."""
    return vertical_potential(x, guide) + oblique_potential(x, z, t, guide)


def free_fall_height(t, z0: float, zdot0: float, g: float):
    """Classical free-fall height z_ff(t) = z0 - zdot0 t - g t^2 / 2.

    zdot0 > 0 is downward.
    """
    return z0 - zdot0 * t - 0.5 * g * np.square(t)


def effective_potential_1d(x, t, z0: float, zdot0: float,
                           guide: GuideConfig, consts: PhysicalConstants):
    """1D time-dependent potential: the 2D potential on the free-fall line."""
    z = free_fall_height(t, z0, zdot0, consts.g)
    return guide_potential_2d(x, z, t, guide)


def oblique_well_center(z, guide: GuideConfig):
    """x position of the oblique guide axis (x' = 0) at height z."""
    return (guide.z_c - z) * np.tan(guide.gamma)
