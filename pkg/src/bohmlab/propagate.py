"""Split-operator propagation of the 1D Schroedinger equation.

Strang (symmetric) splitting: a half potential kick, a full kinetic step
in Fourier space, and another half kick. Unconditionally stable and
exactly norm-preserving up to FFT roundoff; second order in dt.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NATURAL_UNITS, PhysicalConstants, SpatialGrid, WaveFunction
from .errors import GridMismatchError


@dataclass(frozen=True)
class Potential:
    """Classical potential tabulated on a grid."""

    grid: SpatialGrid
    values: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_points,):
            raise GridMismatchError("potential values do not match grid size")
        if not np.all(np.isfinite(vals)):
            raise ValueError("potential values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def free_potential(grid: SpatialGrid) -> Potential:
    return Potential(grid, np.zeros(grid.n_points), "free")


def harmonic_potential(grid: SpatialGrid, omega: float, x_center: float = 0.0,
                       constants: PhysicalConstants = NATURAL_UNITS) -> Potential:
    v = 0.5 * constants.mass * omega ** 2 * (grid.x - x_center) ** 2
    return Potential(grid, v, f"harmonic(omega={omega})")


def gaussian_barrier_potential(grid: SpatialGrid, height: float, width: float,
                               x_center: float = 0.0) -> Potential:
    v = height * np.exp(-((grid.x - x_center) ** 2) / (2.0 * width ** 2))
    return Potential(grid, v, f"barrier(h={height})")


@dataclass(frozen=True)
class EvolutionPlan:
    dt: float
    n_steps: int
    snapshot_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 0:
            raise ValueError("n_steps must be nonnegative")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.n_steps % self.snapshot_stride != 0:
            raise ValueError("snapshot_stride must divide n_steps")


def default_dt(grid: SpatialGrid, constants: PhysicalConstants = NATURAL_UNITS,
               max_phase: float = 0.1) -> float:
    """dt keeping the kinetic phase advance at the Nyquist mode below max_phase."""
    k_max = np.max(np.abs(grid.wavenumbers))
    return max_phase * 2.0 * constants.mass / (constants.hbar * k_max ** 2)


def _phases(psi, pot, dt, constants):
    c = constants
    half_v = np.exp(-0.5j * pot.values * dt / c.hbar)
    kinetic = np.exp(-1j * c.hbar * psi.grid.wavenumbers ** 2 * dt / (2.0 * c.mass))
    return half_v, kinetic


def split_step(psi: WaveFunction, pot: Potential, dt: float,
               constants: PhysicalConstants = NATURAL_UNITS) -> WaveFunction:
    """One Strang step exp(-iV dt/2h) F^-1 exp(-iT dt/h) F exp(-iV dt/2h)."""
    if pot.grid != psi.grid:
        raise GridMismatchError("potential and wavefunction grids differ")
    half_v, kinetic = _phases(psi, pot, dt, constants)
    amps = half_v * psi.amplitudes
    amps = np.fft.ifft(kinetic * np.fft.fft(amps))
    amps = half_v * amps
    return psi.with_amplitudes(amps, time=psi.time + dt)


def evolve(psi0: WaveFunction, pot: Potential, plan: EvolutionPlan,
           constants: PhysicalConstants = NATURAL_UNITS) -> list[WaveFunction]:
    """Propagate and return snapshots every snapshot_stride steps, t=0 included."""
    if pot.grid != psi0.grid:
        raise GridMismatchError("potential and wavefunction grids differ")
    half_v, kinetic = _phases(psi0, pot, plan.dt, constants)
    snapshots = [psi0]
    amps = psi0.amplitudes
    for step in range(1, plan.n_steps + 1):
        amps = half_v * amps
        amps = np.fft.ifft(kinetic * np.fft.fft(amps))
        amps = half_v * amps
        if step % plan.snapshot_stride == 0:
            snapshots.append(psi0.with_amplitudes(amps, time=psi0.time + step * plan.dt))
    return snapshots
