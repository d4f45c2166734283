"""Standard initial states: Gaussian packets, plane waves, grid deltas."""
from __future__ import annotations

import numpy as np

from .core import NATURAL_UNITS, PhysicalConstants, SpatialGrid, WaveFunction, normalize


def gaussian_packet(grid: SpatialGrid, sigma: float, center: float = 0.0,
                    k0: float = 0.0, time: float = 0.0) -> WaveFunction:
    """Normalized Gaussian of width sigma at `center`, boosted by exp(i k0 x)."""
    x = grid.x
    amps = np.exp(-((x - center) ** 2) / (4.0 * sigma ** 2)) * np.exp(1j * k0 * x)
    return normalize(WaveFunction(grid, amps, time))


def plane_wave(grid: SpatialGrid, k_index: int, time: float = 0.0) -> WaveFunction:
    """exp(i k x)/sqrt(L) with the representable k = 2*pi*k_index/L."""
    k = 2.0 * np.pi * k_index / grid.length
    amps = np.exp(1j * k * grid.x) / np.sqrt(grid.length)
    return WaveFunction(grid, amps, time)


def plane_wave_k(grid: SpatialGrid, k_index: int) -> float:
    return 2.0 * np.pi * k_index / grid.length


def grid_delta(grid: SpatialGrid, x0: float, time: float = 0.0) -> WaveFunction:
    """Single hot cell at the grid point nearest x0; unit norm (1/sqrt(dx))."""
    amps = np.zeros(grid.n_points, dtype=np.complex128)
    amps[grid.nearest_index(x0)] = 1.0 / np.sqrt(grid.dx)
    return WaveFunction(grid, amps, time)


def harmonic_ground_state(grid: SpatialGrid, omega: float = 1.0,
                          constants: PhysicalConstants = NATURAL_UNITS,
                          time: float = 0.0) -> WaveFunction:
    """Ground state of the harmonic well centered at x = 0."""
    c = constants
    amps = np.exp(-c.mass * omega * grid.x ** 2 / (2.0 * c.hbar))
    return normalize(WaveFunction(grid, amps.astype(np.complex128), time))


def coherent_state(grid: SpatialGrid, omega: float, x_c: float,
                   constants: PhysicalConstants = NATURAL_UNITS,
                   time: float = 0.0) -> WaveFunction:
    """Harmonic ground state displaced to x_c (zero initial momentum)."""
    c = constants
    amps = np.exp(-c.mass * omega * (grid.x - x_c) ** 2 / (2.0 * c.hbar))
    return normalize(WaveFunction(grid, amps.astype(np.complex128), time))


def two_gaussian_superposition(grid: SpatialGrid, sigma: float, separation: float,
                               k0: float = 0.0, time: float = 0.0) -> WaveFunction:
    """Symmetric superposition of two Gaussians +-separation/2 about the box center."""
    mid = 0.5 * (grid.x_min + grid.x_max)
    x = grid.x
    left = np.exp(-((x - (mid - separation / 2)) ** 2) / (4.0 * sigma ** 2))
    right = np.exp(-((x - (mid + separation / 2)) ** 2) / (4.0 * sigma ** 2))
    amps = (left + right) * np.exp(1j * k0 * x)
    return normalize(WaveFunction(grid, amps, time))
