"""Newtonian trajectories in the crossed-guide potential plus gravity.

Used to quantify how little the vertical motion deviates from free fall
(which is what licenses treating z classically), and to classify which
initial conditions are deflected into the oblique branch.

Integration is delegated to scipy's embedded Runge-Kutta 5(4) pair with
dense output; the guide switch-on at t0 is a forced segment boundary so the
error controller never straddles the Heaviside jump. Gradients of the
Gaussian wells are analytic.

Velocities in ClassicalState are true time derivatives (zdot < 0 while
falling); the free-fall helpers use the downward-positive convention, see
``potentials.free_fall_height``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .core import GuideConfig, PhysicalConstants
from .potentials import free_fall_height, rotate


class IntegrationError(RuntimeError):
    """Integrator failed (step-size underflow or non-finite state)."""

    def __init__(self, t: float, message: str):
        self.t = t
        super().__init__(f"t={t:.6e} s: {message}")


@dataclass(frozen=True)
class ClassicalState:
    """Phase-space point of one atom in the (x, z) plane."""

    x: float
    z: float
    xdot: float
    zdot: float
    t: float = 0.0

    def __post_init__(self):
        vals = (self.x, self.z, self.xdot, self.zdot, self.t)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"non-finite classical state {vals}")


@dataclass(frozen=True)
class Trajectory:
    """Sampled trajectory plus integrator statistics."""

    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    xdot: np.ndarray
    zdot: np.ndarray
    steps: int
    rejected_estimate: int   # reconstructed from nfev; scipy hides rejections
    n_rhs_evals: int
    rel_tol: float
    abs_tol: float

    def state_at(self, i: int) -> ClassicalState:
        return ClassicalState(x=self.x[i], z=self.z[i], xdot=self.xdot[i],
                              zdot=self.zdot[i], t=self.t[i])


def _acceleration(t, y, guide: GuideConfig, consts: PhysicalConstants, oblique_on: bool):
    x, z, vx, vz = y
    w0sq = guide.w0**2
    dvdx = guide.U0 * (4.0 * x / w0sq) * np.exp(-2.0 * x * x / w0sq)
    dvdz = 0.0
    if oblique_on and guide.U1 > 0.0:
        xp = rotate(x, z, guide).xp
        w1sq = guide.w1**2
        slope = guide.U1 * (4.0 * xp / w1sq) * np.exp(-2.0 * xp * xp / w1sq)
        dvdx += slope * np.cos(guide.gamma)
        dvdz += slope * np.sin(guide.gamma)
    return [vx, vz, -dvdx / consts.m, -dvdz / consts.m - consts.g]


def integrate_trajectory(init: ClassicalState, t_end: float,
                         guide: GuideConfig, consts: PhysicalConstants,
                         rel_tol: float = 1e-9, abs_tol: float = 1e-12,
                         t_eval: np.ndarray | None = None) -> Trajectory:
    """Integrate Newton's equations from init to t_end.

    The sample times default to 600 uniform points including the initial
    time; pass t_eval (strictly increasing, first element == init.t) to
    choose them.
    """
    if not t_end > init.t:
        raise ValueError("t_end must exceed the initial time")
    if rel_tol <= 0 or abs_tol <= 0:
        raise ValueError("tolerances must be positive")
    if t_eval is None:
        t_eval = np.linspace(init.t, t_end, 600)
    t_eval = np.asarray(t_eval, dtype=float)

    segments = []
    if init.t < guide.t0 < t_end:
        segments = [(init.t, guide.t0, False), (guide.t0, t_end, True)]
    else:
        segments = [(init.t, t_end, init.t >= guide.t0)]

    y = [init.x, init.z, init.xdot, init.zdot]
    ts, xs, zs, vxs, vzs = [], [], [], [], []
    steps = nfev = 0
    for (ta, tb, on) in segments:
        mask = (t_eval >= ta) & (t_eval <= tb) if tb != t_end else (t_eval >= ta)
        sol = solve_ivp(_acceleration, (ta, tb), y, method="RK45",
                        rtol=rel_tol, atol=abs_tol, dense_output=True,
                        args=(guide, consts, on))
        if not sol.success:
            raise IntegrationError(sol.t[-1] if sol.t.size else ta, sol.message)
        if not np.all(np.isfinite(sol.y[:, -1])):
            raise IntegrationError(sol.t[-1], "non-finite state")
        tq = t_eval[mask]
        if tq.size:
            yq = sol.sol(tq)
            ts.append(tq)
            xs.append(yq[0]); zs.append(yq[1]); vxs.append(yq[2]); vzs.append(yq[3])
        y = sol.y[:, -1]
        steps += sol.t.size - 1
        nfev += sol.nfev

    t_all = np.concatenate(ts)
    keep = np.concatenate([[True], np.diff(t_all) > 0])  # drop duplicate at t0
    rejected = max(0, (nfev - len(segments)) // 6 - steps)
    return Trajectory(t=t_all[keep],
                      x=np.concatenate(xs)[keep], z=np.concatenate(zs)[keep],
                      xdot=np.concatenate(vxs)[keep], zdot=np.concatenate(vzs)[keep],
                      steps=steps, rejected_estimate=rejected, n_rhs_evals=nfev,
                      rel_tol=rel_tol, abs_tol=abs_tol)


def free_fall_deviation(traj: Trajectory, z0: float, zdot0: float,
                        g: float) -> tuple[np.ndarray, np.ndarray]:
    """Relative deviation |z(t) - z_ff(t)| / |z_ff(t)| per sample.

    zdot0 follows the downward-positive convention of z_ff. Samples where
    z_ff = 0 (the release instant) are excluded.
    """
    if traj.t.size == 0:
        raise ValueError("empty trajectory")
    zff = free_fall_height(traj.t, z0, zdot0, g)
    keep = zff != 0.0
    return traj.t[keep], np.abs(traj.z[keep] - zff[keep]) / np.abs(zff[keep])


def transverse_kinetic_energy(state: ClassicalState, guide: GuideConfig,
                              consts: PhysicalConstants) -> float:
    """Kinetic energy in the oblique transverse direction x' (J)."""
    v_perp = state.xdot * np.cos(guide.gamma) + state.zdot * np.sin(guide.gamma)
    return 0.5 * consts.m * v_perp**2


def total_energy(state: ClassicalState, guide: GuideConfig,
                 consts: PhysicalConstants) -> float:
    """Kinetic + guide + gravitational energy (conserved for t > t0)."""
    from .potentials import guide_potential_2d
    kin = 0.5 * consts.m * (state.xdot**2 + state.zdot**2)
    return kin + guide_potential_2d(state.x, state.z, state.t, guide) \
        + consts.m * consts.g * state.z
