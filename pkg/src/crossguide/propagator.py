"""Strang split-operator propagation of the transverse wavepacket.

One step of size dt applies exp(-i T dt/2hbar) in momentum space, the full
potential phase exp(-i V(x, t + dt/2) dt/hbar) in position space, then the
second kinetic half step. The potential is evaluated at the midpoint time
(the well moves through the free-fall height), which keeps the local error
third order in dt. A step boundary is forced at the switch-on time t0 so no
potential evaluation straddles the Heaviside jump, and the last step is
shortened to land exactly on the probe-arrival time.

``propagate_to_probe`` fuses adjacent kinetic half steps (K/2 V K = K V K/2
chains), which halves the FFT count; it is algebraically identical to
repeated ``step`` calls at equal dt.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .core import GuideConfig, PhysicalConstants
from .eigensolver import solve_level
from .potentials import free_fall_height, vertical_potential


class TailClippingError(ValueError):
    """Initial state does not decay below threshold at the grid edges."""


class ProbeUnreachableError(ValueError):
    """Free fall from (z0, zdot0) never reaches the probe height."""


@dataclass(frozen=True)
class Grid1D:
    """Uniform spatial grid with its conjugate FFT momentum grid."""

    x_min: float
    x_max: float
    n: int
    x: np.ndarray = field(init=False, repr=False, compare=False)
    dx: float = field(init=False, repr=False, compare=False)
    k: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        dx = (self.x_max - self.x_min) / self.n
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "x", self.x_min + dx * np.arange(self.n))
        object.__setattr__(self, "k", 2.0 * np.pi * sfft.fftfreq(self.n, d=dx))


@dataclass(frozen=True)
class Wavepacket:
    """Complex transverse amplitude on a grid at time t.

    Carries the initial-condition labels (v0, z0, zdot0) so analysis code
    can aggregate without extra bookkeeping. psi is never mutated in place;
    steps return new objects.
    """

    psi: np.ndarray
    grid: Grid1D
    t: float
    v0: int | None = None
    z0: float = 0.0
    zdot0: float = 0.0

    def norm(self) -> float:
        """Total probability sum |psi|^2 dx."""
        return float(np.sum(np.abs(self.psi) ** 2) * self.grid.dx)

    def edge_fraction(self) -> float:
        """Larger edge amplitude relative to the peak amplitude."""
        peak = float(np.max(np.abs(self.psi)))
        if peak == 0.0:
            return 0.0
        return float(max(abs(self.psi[0]), abs(self.psi[-1])) / peak)

    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2


def prepare_initial(v0: int, grid: Grid1D, guide: GuideConfig,
                    consts: PhysicalConstants, z0: float = 0.0, zdot0: float = 0.0,
                    edge_tol: float = 1e-8) -> Wavepacket:
    """Initial wavepacket: bound level v0 of the vertical well at t = 0."""
    level = solve_level(v0, guide, consts, grid.x)
    psi = level.psi.astype(np.complex128)
    wp = Wavepacket(psi=psi, grid=grid, t=0.0, v0=v0, z0=z0, zdot0=zdot0)
    if wp.edge_fraction() > edge_tol:
        raise TailClippingError(
            f"level v0={v0} has edge amplitude {wp.edge_fraction():.2e} "
            f"(tolerance {edge_tol:.1e}); enlarge the grid")
    return wp


def advance_eigenstate(wp: Wavepacket, t: float, energy: float,
                       consts: PhysicalConstants) -> Wavepacket:
    """Exact time shift of a stationary state by a global phase.

    Valid while the potential is time independent (before the switch-on):
    the state only accumulates exp(-i eps t / hbar). Production sweeps use
    this to start stepping at t0.
    """
    phase = np.exp(-1j * energy * (t - wp.t) / consts.hbar)
    return replace(wp, psi=wp.psi * phase, t=t)


def _potential_now(x: np.ndarray, t_mid: float, z0: float, zdot0: float,
                   guide: GuideConfig, consts: PhysicalConstants,
                   v0_static: np.ndarray) -> np.ndarray:
    """V_1D(x, t_mid) reusing the precomputed static vertical well."""
    if t_mid < guide.t0 or guide.U1 == 0.0:
        return v0_static
    z = free_fall_height(t_mid, z0, zdot0, consts.g)
    xp = x * np.cos(guide.gamma) + (z - guide.z_c) * np.sin(guide.gamma)
    return v0_static - guide.U1 * np.exp(-2.0 * xp**2 / guide.w1**2)


def step(wp: Wavepacket, dt: float, z0: float, zdot0: float,
         guide: GuideConfig, consts: PhysicalConstants) -> Wavepacket:
    """One Strang step: kinetic half, midpoint potential, kinetic half."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    g = wp.grid
    v0_static = vertical_potential(g.x, guide)
    # exp(-i T dt / 2 hbar) with T = hbar^2 k^2 / 2m
    kin_half = np.exp(-1j * consts.hbar * g.k**2 / (4.0 * consts.m) * dt)
    psi = sfft.ifft(kin_half * sfft.fft(wp.psi))
    v_mid = _potential_now(g.x, wp.t + 0.5 * dt, z0, zdot0, guide, consts, v0_static)
    psi *= np.exp(-1j * v_mid * dt / consts.hbar)
    psi = sfft.ifft(kin_half * sfft.fft(psi))
    return replace(wp, psi=psi, t=wp.t + dt, z0=z0, zdot0=zdot0)


def probe_arrival_time(z0: float, zdot0: float, guide: GuideConfig,
                       consts: PhysicalConstants) -> float:
    """Positive root of z_ff(t) = z_p (free fall reaching the probe)."""
    if z0 <= guide.z_p:
        raise ProbeUnreachableError(
            f"initial height {z0} is not above the probe {guide.z_p}")
    disc = zdot0**2 + 2.0 * consts.g * (z0 - guide.z_p)
    return (-zdot0 + np.sqrt(disc)) / consts.g


def _step_schedule(t_start: float, t_f: float, dt: float, t0: float) -> np.ndarray:
    """Step sizes covering [t_start, t_f] with a forced boundary at t0."""
    bounds = [t0] if t_start < t0 < t_f else []
    dts: list[float] = []
    t = t_start
    for b in bounds + [t_f]:
        span = b - t
        n_full = int(np.floor(span / dt * (1.0 - 1e-12)))
        dts.extend([dt] * n_full)
        rem = span - n_full * dt
        if rem > 1e-9 * dt:
            dts.append(rem)
        t = b
    return np.asarray(dts)


class SnapshotWriter:
    """Binary space-time record of the density, decimated to n_out blocks.

    Layout (little endian): 8-byte magic ``CGSNAP01``, uint64 n_out,
    float64 x_min, float64 block_width, then per record float64 t,
    float64 z_ff(t), n_out float64 block-averaged densities.
    """

    MAGIC = b"CGSNAP01"

    def __init__(self, path: str | Path, grid: Grid1D, n_out: int = 1024):
        if grid.n % n_out != 0:
            raise ValueError("n_out must divide the grid size")
        self.n_out = n_out
        self.block = grid.n // n_out
        self._fh = open(path, "wb")
        self._fh.write(self.MAGIC)
        self._fh.write(struct.pack("<Qdd", n_out, grid.x_min, grid.dx * self.block))

    def add(self, t: float, z: float, density: np.ndarray) -> None:
        coarse = density.reshape(self.n_out, self.block).mean(axis=1)
        self._fh.write(struct.pack("<dd", t, z))
        coarse.astype("<f8").tofile(self._fh)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_snapshots(path: str | Path):
    """Read a SnapshotWriter file: (x_centers, t, z, densities[n_rec, n_out])."""
    raw = Path(path).read_bytes()
    if raw[:8] != SnapshotWriter.MAGIC:
        raise ValueError("not a crossguide snapshot file")
    n_out, x_min, width = struct.unpack_from("<Qdd", raw, 8)
    n_out = int(n_out)
    rec = 16 + 8 * n_out
    body = raw[8 + 24:]
    n_rec = len(body) // rec
    t = np.empty(n_rec)
    z = np.empty(n_rec)
    dens = np.empty((n_rec, n_out))
    for i in range(n_rec):
        off = i * rec
        t[i], z[i] = struct.unpack_from("<dd", body, off)
        dens[i] = np.frombuffer(body, dtype="<f8", count=n_out, offset=off + 16)
    x_centers = x_min + width * (np.arange(n_out) + 0.5)
    return x_centers, t, z, dens


def propagate_to_probe(wp: Wavepacket, dt: float, guide: GuideConfig,
                       consts: PhysicalConstants,
                       snapshot_every: int = 0,
                       snapshot_writer: SnapshotWriter | None = None) -> Wavepacket:
    """Propagate to the probe-arrival time t_f with fused kinetic steps.

    The (z0, zdot0) labels of the wavepacket select the free-fall line; t_f
    solves z_ff(t_f) = z_p. Identical to chaining ``step`` at the same dt,
    with half the transforms.
    """
    z0, zdot0 = wp.z0, wp.zdot0
    t_f = probe_arrival_time(z0, zdot0, guide, consts)
    if t_f <= wp.t:
        return wp
    g = wp.grid
    dts = _step_schedule(wp.t, t_f, dt, guide.t0)
    v0_static = vertical_potential(g.x, guide)
    kin = consts.hbar * g.k**2 / (2.0 * consts.m)  # T / hbar

    psi = wp.psi.astype(np.complex128, copy=True)
    t = wp.t
    psi = sfft.ifft(sfft.fft(psi) * np.exp(-0.5j * kin * dts[0]))
    for j, dtj in enumerate(dts):
        v_mid = _potential_now(g.x, t + 0.5 * dtj, z0, zdot0, guide, consts, v0_static)
        psi *= np.exp(-1j * v_mid * dtj / consts.hbar)
        t += dtj
        fused = 0.5 * (dtj + dts[j + 1]) if j + 1 < dts.size else 0.5 * dtj
        psi = sfft.ifft(sfft.fft(psi) * np.exp(-1j * kin * fused))
        if snapshot_writer is not None and snapshot_every > 0 and (
                j % snapshot_every == 0 or j == dts.size - 1):
            snapshot_writer.add(t, free_fall_height(t, z0, zdot0, consts.g),
                                np.abs(psi) ** 2)
    return replace(wp, psi=psi, t=t_f)
