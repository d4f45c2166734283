"""Probability current, Bohmian velocity fields, quantum-equilibrium sampling,
trajectory integration, equivariance checks and the Bohmian energy decomposition.

Sign convention: J = (hbar/m) Im{conj(psi) d(psi)/dx}, so a plane wave
exp(+ikx) carries velocity +hbar*k/m.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .core import (NATURAL_UNITS, PhysicalConstants, SpatialGrid, WaveFunction,
                   spectral_derivative)
from .errors import IOFailureError, TimeMismatchError
from .propagate import Potential

DEFAULT_FLOOR = 1e-8


def current_density(psi: WaveFunction,
                    constants: PhysicalConstants = NATURAL_UNITS) -> np.ndarray:
    """J(x,t) = (hbar/m) Im{conj(psi) dpsi/dx}, spectral derivative."""
    c = constants
    d = spectral_derivative(psi.grid, psi.amplitudes)
    return (c.hbar / c.mass) * np.imag(np.conj(psi.amplitudes) * d)


def node_mask(psi: WaveFunction, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """True where |psi|^2 falls below floor * max|psi|^2."""
    rho = psi.density
    return rho < floor * np.max(rho)


@dataclass(frozen=True)
class VelocityField:
    grid: SpatialGrid
    values: np.ndarray
    time: float
    node_mask: np.ndarray


def velocity_field(psi: WaveFunction, floor: float = DEFAULT_FLOOR,
                   constants: PhysicalConstants = NATURAL_UNITS) -> VelocityField:
    """Guiding-equation field v = J/|psi|^2 with low-density cells masked."""
    if not (0.0 < floor <= 1e-3):
        raise ValueError("floor must lie in (0, 1e-3]")
    rho = psi.density
    mask = node_mask(psi, floor)
    j = current_density(psi, constants)
    v = np.zeros_like(rho)
    np.divide(j, rho, out=v, where=~mask)
    return VelocityField(psi.grid, v, psi.time, mask)


def sample_quantum_equilibrium(psi: WaveFunction, n: int, seed: int) -> np.ndarray:
    """n i.i.d. draws from |psi|^2 by inverting the piecewise-linear CDF.

    Sample j uses its own RNG stream keyed by seed ^ j, so the result is
    reproducible regardless of how the loop is scheduled.
    """
    if n < 1:
        raise ValueError("need n >= 1 samples")
    grid = psi.grid
    p = psi.density * grid.dx
    p = p / p.sum()
    cdf = np.concatenate(([0.0], np.cumsum(p)))
    cdf[-1] = 1.0
    u = np.empty(n)
    for j in range(n):
        u[j] = np.random.Generator(np.random.PCG64(seed ^ j)).random()
    cells = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, grid.n_points - 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = (u - cdf[cells]) / p[cells]
    frac = np.where(np.isfinite(frac), np.clip(frac, 0.0, 1.0), 0.0)
    return grid.x_min + (cells + frac) * grid.dx


@dataclass(frozen=True)
class NodeEncounter:
    trajectory: int
    time: float


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """N Bohmian trajectories sampled at the snapshot times, wrapped periodically."""

    times: np.ndarray
    positions: np.ndarray          # (N, len(times)), in [x_min, x_max)
    grid: SpatialGrid
    seed: int = 0
    frozen_since: np.ndarray = None   # per-trajectory freeze time, nan if never
    node_events: tuple = ()

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def frozen_flags(self) -> np.ndarray:
        if self.frozen_since is None:
            return np.zeros(self.n, dtype=bool)
        return np.isfinite(self.frozen_since)

    def unwrapped_positions(self) -> np.ndarray:
        """Continuous trajectories rebuilt via minimal-image displacements."""
        L = self.grid.length
        disp = np.diff(self.positions, axis=1)
        disp = (disp + L / 2.0) % L - L / 2.0
        out = np.empty_like(self.positions)
        out[:, 0] = self.positions[:, 0]
        np.cumsum(disp, axis=1, out=out[:, 1:])
        out[:, 1:] += out[:, :1]
        return out

    def to_csv(self, path):
        try:
            with open(path, "w", newline="") as f:
                w = csv.writer(f, lineterminator="\n")
                w.writerow(["traj_id", "t", "x", "frozen_flag"])
                fs = (self.frozen_since if self.frozen_since is not None
                      else np.full(self.n, np.nan))
                for j in range(self.n):
                    for k, t in enumerate(self.times):
                        flag = int(np.isfinite(fs[j]) and t >= fs[j])
                        w.writerow([j, f"{t:.17g}", f"{self.positions[j, k]:.17g}", flag])
        except OSError as exc:
            raise IOFailureError(str(exc)) from exc


def _interp_periodic(grid: SpatialGrid, values: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Linear interpolation on the periodic grid."""
    s = (x - grid.x_min) / grid.dx
    i0 = np.floor(s).astype(int) % grid.n_points
    frac = s - np.floor(s)
    i1 = (i0 + 1) % grid.n_points
    return values[i0] * (1.0 - frac) + values[i1] * frac


def _nearest_masked(grid: SpatialGrid, mask: np.ndarray, x: np.ndarray) -> np.ndarray:
    idx = np.rint((x - grid.x_min) / grid.dx).astype(int) % grid.n_points
    return mask[idx]


def integrate_trajectories(x0s: np.ndarray, snapshots, floor: float = DEFAULT_FLOOR,
                           constants: PhysicalConstants = NATURAL_UNITS,
                           substeps: int = 4, seed: int = 0) -> TrajectoryEnsemble:
    """Integrate dx/dt = v(x,t) with RK4; v linearly interpolated in x and t.

    A trajectory that wanders into the node mask is frozen at its current
    position and flagged, keeping the ensemble count intact.
    """
    if len(snapshots) < 1:
        raise ValueError("need at least one snapshot")
    grid = snapshots[0].grid
    times = np.array([s.time for s in snapshots])
    if len(snapshots) > 1:
        strides = np.diff(times)
        if not np.allclose(strides, strides[0], rtol=1e-9, atol=1e-12):
            raise ValueError("snapshots must be equally spaced in time")

    fields = [velocity_field(s, floor, constants) for s in snapshots]
    x = grid.wrap(np.asarray(x0s, dtype=float)).copy()
    n = x.size
    positions = np.empty((n, len(snapshots)))
    positions[:, 0] = x
    frozen_since = np.full(n, np.nan)
    events = []

    def velocity(xq, fi, fj, w):
        vi = _interp_periodic(grid, fields[fi].values, xq)
        vj = _interp_periodic(grid, fields[fj].values, xq)
        return (1.0 - w) * vi + w * vj

    for k in range(len(snapshots) - 1):
        t0, t1 = times[k], times[k + 1]
        h = (t1 - t0) / substeps
        for s in range(substeps):
            live = ~np.isfinite(frozen_since)
            if not live.any():
                break
            ts = t0 + s * h
            w0 = (ts - t0) / (t1 - t0)
            wm = (ts + 0.5 * h - t0) / (t1 - t0)
            w1 = (ts + h - t0) / (t1 - t0)
            xl = x[live]
            k1 = velocity(xl, k, k + 1, w0)
            k2 = velocity(grid.wrap(xl + 0.5 * h * k1), k, k + 1, wm)
            k3 = velocity(grid.wrap(xl + 0.5 * h * k2), k, k + 1, wm)
            k4 = velocity(grid.wrap(xl + h * k3), k, k + 1, w1)
            x[live] = grid.wrap(xl + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))
            hit = _nearest_masked(grid, fields[k].node_mask | fields[k + 1].node_mask, x) & live
            if hit.any():
                t_hit = ts + h
                for j in np.nonzero(hit)[0]:
                    events.append(NodeEncounter(int(j), float(t_hit)))
                frozen_since[hit] = t_hit
        positions[:, k + 1] = x
    return TrajectoryEnsemble(times, positions, grid, seed, frozen_since, tuple(events))


def equivariance_distance(ens: TrajectoryEnsemble, psi_t: WaveFunction,
                          n_bins: int) -> float:
    """Total-variation distance between the ensemble histogram and |psi|^2."""
    grid = psi_t.grid
    match = np.isclose(ens.times, psi_t.time, rtol=1e-9, atol=1e-9)
    if not match.any():
        raise TimeMismatchError(
            f"no ensemble sample at t={psi_t.time}; have {ens.times}")
    col = int(np.argmax(match))
    if grid.n_points % n_bins != 0:
        raise ValueError("n_bins must divide n_points for exact density binning")
    per = grid.n_points // n_bins
    p = (psi_t.density * grid.dx).reshape(n_bins, per).sum(axis=1)
    p = p / p.sum()
    edges = grid.x_min + grid.length * np.arange(n_bins + 1) / n_bins
    h, _ = np.histogram(ens.positions[:, col], bins=edges)
    h = h / ens.n
    return 0.5 * float(np.abs(h - p).sum())


@dataclass(frozen=True)
class BohmianEnergyField:
    """Pointwise particle energy: (1/2) m v^2 + V(x) + Q(x,t)."""

    grid: SpatialGrid
    kinetic: np.ndarray
    classical: np.ndarray
    quantum: np.ndarray
    node_mask: np.ndarray
    time: float

    @property
    def total(self) -> np.ndarray:
        return self.kinetic + self.classical + self.quantum


def bohmian_energy(psi: WaveFunction, pot: Potential, floor: float = DEFAULT_FLOOR,
                   constants: PhysicalConstants = NATURAL_UNITS) -> BohmianEnergyField:
    """Kinetic, classical and quantum-potential parts of the particle energy.

    Q = -(hbar^2/2m) R''/R with R = |psi|. Differentiating |psi| directly is
    spectrally poisoned by the kinks at nodes, so R''/R is evaluated through
    the identical smooth-psi form Re{psi''/psi} + (Im{psi'/psi})^2.
    """
    c = constants
    vf = velocity_field(psi, floor, constants)
    kinetic = 0.5 * c.mass * vf.values ** 2
    keep = ~vf.node_mask
    d1 = spectral_derivative(psi.grid, psi.amplitudes)
    d2 = spectral_derivative(psi.grid, psi.amplitudes, order=2)
    q = np.zeros(psi.grid.n_points)
    amps = psi.amplitudes[keep]
    rpp_over_r = (np.real(d2[keep] / amps) + np.imag(d1[keep] / amps) ** 2)
    q[keep] = -(c.hbar ** 2) / (2.0 * c.mass) * rpp_over_r
    return BohmianEnergyField(psi.grid, kinetic, pot.values.copy(), q,
                              vf.node_mask, psi.time)
