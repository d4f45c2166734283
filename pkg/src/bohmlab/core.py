"""Grids, wavefunctions, Hermitian operators and inner products.

Everything lives on a uniform periodic 1D grid; derivatives are spectral
(FFT), so plane waves with representable wavenumbers k = 2*pi*n/L are
treated exactly. All objects are immutable after construction and all
operations are pure functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GridMismatchError, ZeroNormError


@dataclass(frozen=True)
class PhysicalConstants:
    """hbar and particle mass; natural units by default."""

    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.mass > 0):
            raise ValueError("hbar and mass must be positive")


NATURAL_UNITS = PhysicalConstants()


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid on [x_min, x_max); x_max is identified with x_min."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if self.x_max <= self.x_min:
            raise ValueError("x_max must exceed x_min")
        if not _is_power_of_two(self.n_points) or self.n_points < 2:
            raise ValueError("n_points must be a power of two >= 2")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        # FFT ordering: 2*pi * signed spectral index / L
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    def nearest_index(self, x0: float) -> int:
        """Index of the grid cell closest to x0 (periodic)."""
        j = int(np.rint((x0 - self.x_min) / self.dx))
        return j % self.n_points

    def wrap(self, x):
        """Map positions into [x_min, x_max)."""
        return self.x_min + np.mod(np.asarray(x) - self.x_min, self.length)


@dataclass(frozen=True)
class WaveFunction:
    """Complex amplitudes on a SpatialGrid at a time stamp, units length^{-1/2}."""

    grid: SpatialGrid
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.grid.n_points,):
            raise ValueError("amplitude array does not match grid size")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm_squared(self) -> float:
        return float(np.sum(self.density) * self.grid.dx)

    def with_amplitudes(self, amps, time=None) -> "WaveFunction":
        return WaveFunction(self.grid, amps, self.time if time is None else time)


def normalize(psi: WaveFunction) -> WaveFunction:
    """Rescale to unit norm; phase untouched."""
    n2 = psi.norm_squared()
    if n2 < 1e-300:
        raise ZeroNormError("cannot normalize a zero wavefunction")
    return psi.with_amplitudes(psi.amplitudes / np.sqrt(n2))


def inner_product(phi: WaveFunction, psi: WaveFunction) -> complex:
    """<phi|psi> = sum conj(phi) * psi * dx."""
    if phi.grid != psi.grid:
        raise GridMismatchError("inner product requires a common grid")
    return complex(np.sum(np.conj(phi.amplitudes) * psi.amplitudes) * phi.grid.dx)


def spectral_derivative(grid: SpatialGrid, values: np.ndarray, order: int = 1) -> np.ndarray:
    """d^order/dx^order via FFT on the periodic grid."""
    ik = 1j * grid.wavenumbers
    return np.fft.ifft((ik ** order) * np.fft.fft(values))


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

class Operator:
    """Hermitian operator defined by its action on a WaveFunction."""

    label = "?"

    def apply(self, psi: WaveFunction) -> WaveFunction:
        raise NotImplementedError

    def __add__(self, other):
        return SumOperator(self, other)

    def __rmul__(self, c):
        return ScaledOperator(c, self)


class PositionOperator(Operator):
    label = "X"

    def apply(self, psi):
        return psi.with_amplitudes(psi.grid.x * psi.amplitudes)


class MomentumOperator(Operator):
    """P = -i hbar d/dx, spectral."""

    label = "P"

    def __init__(self, constants: PhysicalConstants = NATURAL_UNITS):
        self.constants = constants

    def apply(self, psi):
        d = spectral_derivative(psi.grid, psi.amplitudes)
        return psi.with_amplitudes(-1j * self.constants.hbar * d)


class VelocityOperator(Operator):
    """V = P / m = -i (hbar/m) d/dx."""

    label = "V"

    def __init__(self, constants: PhysicalConstants = NATURAL_UNITS):
        self.constants = constants

    def apply(self, psi):
        c = self.constants
        d = spectral_derivative(psi.grid, psi.amplitudes)
        return psi.with_amplitudes(-1j * (c.hbar / c.mass) * d)


class HamiltonianOperator(Operator):
    """H = -(hbar^2/2m) d^2/dx^2 + V(x), with V tabulated on the grid."""

    label = "H"

    def __init__(self, potential_values: np.ndarray, constants: PhysicalConstants = NATURAL_UNITS):
        self.potential_values = np.asarray(potential_values, dtype=float)
        if not np.all(np.isfinite(self.potential_values)):
            raise ValueError("potential values must be finite")
        self.constants = constants

    def apply(self, psi):
        c = self.constants
        d2 = spectral_derivative(psi.grid, psi.amplitudes, order=2)
        kin = -(c.hbar ** 2) / (2.0 * c.mass) * d2
        return psi.with_amplitudes(kin + self.potential_values * psi.amplitudes)


class DiagonalOperator(Operator):
    """Multiplication by a real array in the position basis."""

    def __init__(self, values: np.ndarray, label: str = "diag"):
        self.values = np.asarray(values, dtype=float)
        self.label = label

    def apply(self, psi):
        return psi.with_amplitudes(self.values * psi.amplitudes)


class MatrixOperator(Operator):
    """Dense Hermitian matrix in the grid basis; used for toy constructions."""

    def __init__(self, matrix: np.ndarray, label: str = "matrix"):
        m = np.asarray(matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("matrix must be square")
        self.matrix = m
        self.label = label

    def apply(self, psi):
        if self.matrix.shape[0] != psi.grid.n_points:
            raise GridMismatchError("matrix size does not match grid")
        return psi.with_amplitudes(self.matrix @ psi.amplitudes)


class ScaledOperator(Operator):
    def __init__(self, c: float, op: Operator):
        self.c = c
        self.op = op
        self.label = f"{c}*{op.label}"

    def apply(self, psi):
        out = self.op.apply(psi)
        return out.with_amplitudes(self.c * out.amplitudes)


class SumOperator(Operator):
    def __init__(self, a: Operator, b: Operator):
        self.a = a
        self.b = b
        self.label = f"{a.label}+{b.label}"

    def apply(self, psi):
        return psi.with_amplitudes(self.a.apply(psi).amplitudes + self.b.apply(psi).amplitudes)


class ZeroOperator(Operator):
    label = "0"

    def apply(self, psi):
        return psi.with_amplitudes(np.zeros_like(psi.amplitudes))


def diagonal_action(op: Operator, grid: SpatialGrid):
    """Resolve op to ("position"|"momentum", eigenvalue array) if it is
    diagonal in the corresponding grid basis; None otherwise."""
    if isinstance(op, PositionOperator):
        return "position", grid.x
    if isinstance(op, DiagonalOperator):
        return "position", op.values
    if isinstance(op, ZeroOperator):
        return "position", np.zeros(grid.n_points)
    if isinstance(op, MomentumOperator):
        return "momentum", op.constants.hbar * grid.wavenumbers
    if isinstance(op, VelocityOperator):
        c = op.constants
        return "momentum", (c.hbar / c.mass) * grid.wavenumbers
    if isinstance(op, ScaledOperator):
        inner = diagonal_action(op.op, grid)
        if inner is not None:
            return inner[0], op.c * inner[1]
        return None
    if isinstance(op, SumOperator):
        a = diagonal_action(op.a, grid)
        b = diagonal_action(op.b, grid)
        if a is not None and b is not None and a[0] == b[0]:
            return a[0], a[1] + b[1]
        return None
    return None


def expectation(op: Operator, psi: WaveFunction) -> float:
    """Re <psi|O|psi> for normalized psi; imaginary residue is discarded."""
    return inner_product(psi, op.apply(psi)).real


def hermiticity_defect(op: Operator, phi: WaveFunction, psi: WaveFunction) -> float:
    """|<phi|O psi> - <O phi|psi>|, the raw Hermiticity residual."""
    lhs = inner_product(phi, op.apply(psi))
    rhs = inner_product(op.apply(phi), psi)
    return abs(lhs - rhs)
