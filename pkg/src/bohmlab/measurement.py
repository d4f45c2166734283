"""Von Neumann weak-measurement protocol on a Gaussian pointer.

A system copy is impulsively coupled to the pointer momentum through
exp(-i g (O x P_ptr)/hbar), then the pointer reading o and the system
position f are drawn jointly from the Born density. Averaging o/g within
an f bin estimates the position-post-selected weak value of O at f, to
leading order in g.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import (NATURAL_UNITS, HamiltonianOperator, Operator,
                   PhysicalConstants, ScaledOperator, SpatialGrid,
                   SumOperator, WaveFunction, diagonal_action)
from .dynamics import DEFAULT_FLOOR, TrajectoryEnsemble, _interp_periodic
from .errors import IOFailureError, UnsupportedOperatorError
from .propagate import EvolutionPlan, Potential, free_potential
from .weak_values import local_expectation

# Divergences below this are indistinguishable from RK4 + interpolation error.
INTEGRATOR_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Pointer:
    grid: SpatialGrid
    sigma: float
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)


def gaussian_pointer(grid: SpatialGrid, sigma: float) -> Pointer:
    """Normalized real Gaussian centered at y = 0."""
    amps = np.exp(-grid.x ** 2 / (4.0 * sigma ** 2)).astype(np.complex128)
    amps /= np.sqrt(np.sum(np.abs(amps) ** 2) * grid.dx)
    return Pointer(grid, sigma, amps)


@dataclass(frozen=True)
class JointState:
    sys_grid: SpatialGrid
    ptr_grid: SpatialGrid
    amplitudes: np.ndarray    # (n_sys, n_ptr)
    time: float = 0.0

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.sys_grid.n_points, self.ptr_grid.n_points):
            raise ValueError("joint amplitude shape does not match grids")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm_squared(self) -> float:
        return float(np.sum(self.density) * self.sys_grid.dx * self.ptr_grid.dx)

    def system_marginal(self) -> np.ndarray:
        return self.density.sum(axis=1) * self.ptr_grid.dx

    def pointer_marginal(self) -> np.ndarray:
        return self.density.sum(axis=0) * self.sys_grid.dx

    def pointer_mean(self) -> float:
        return float(np.sum(self.pointer_marginal() * self.ptr_grid.x)
                     * self.ptr_grid.dx)


def prepare_joint(psi: WaveFunction, ptr: Pointer) -> JointState:
    """Product state psi(x) * phi(y)."""
    return JointState(psi.grid, ptr.grid,
                      np.outer(psi.amplitudes, ptr.amplitudes), psi.time)


def _shift_pointer(amps: np.ndarray, eigen: np.ndarray, basis: str,
                   sys_grid: SpatialGrid, ptr_grid: SpatialGrid,
                   g: float) -> np.ndarray:
    """Translate the pointer by g*eigen per system basis component (exact)."""
    ky = ptr_grid.wavenumbers
    phase = np.exp(-1j * g * np.outer(eigen, ky))
    if basis == "position":
        out = np.fft.ifft(phase * np.fft.fft(amps, axis=1), axis=1)
    else:
        tilde = np.fft.fft(amps, axis=0)
        tilde = np.fft.ifft(phase * np.fft.fft(tilde, axis=1), axis=1)
        out = np.fft.ifft(tilde, axis=0)
    return out


def _couple_amps(amps, op, g, sys_grid, ptr_grid, constants):
    action = diagonal_action(op, sys_grid)
    if action is not None:
        return _shift_pointer(amps, action[1], action[0], sys_grid, ptr_grid, g)
    # Split non-diagonal operators symmetrically; O(g^2) per coupling,
    # documented for Hamiltonian-like sums of position- and momentum-diagonal parts.
    if isinstance(op, HamiltonianOperator):
        c = op.constants
        kin_vals = (c.hbar ** 2) * sys_grid.wavenumbers ** 2 / (2.0 * c.mass)
        half = _shift_pointer(amps, op.potential_values, "position",
                              sys_grid, ptr_grid, g / 2.0)
        mid = _shift_pointer(half, kin_vals, "momentum", sys_grid, ptr_grid, g)
        return _shift_pointer(mid, op.potential_values, "position",
                              sys_grid, ptr_grid, g / 2.0)
    if isinstance(op, ScaledOperator):
        return _couple_amps(amps, op.op, g * op.c, sys_grid, ptr_grid, constants)
    if isinstance(op, SumOperator):
        half = _couple_amps(amps, op.a, g / 2.0, sys_grid, ptr_grid, constants)
        mid = _couple_amps(half, op.b, g, sys_grid, ptr_grid, constants)
        return _couple_amps(mid, op.a, g / 2.0, sys_grid, ptr_grid, constants)
    raise UnsupportedOperatorError(
        f"no coupling implementation for operator '{op.label}'")


def impulsive_couple(joint: JointState, op: Operator, g: float,
                     constants: PhysicalConstants = NATURAL_UNITS) -> JointState:
    """Apply exp(-i g (O x P_ptr)/hbar) to the joint state.

    Exact for operators diagonal in the position or momentum grid basis
    (X, V, P, tabulated diagonals and their sums/scalings); symmetric
    splitting otherwise.
    """
    if g == 0.0:
        return joint
    amps = _couple_amps(joint.amplitudes, op, g, joint.sys_grid,
                        joint.ptr_grid, constants)
    return JointState(joint.sys_grid, joint.ptr_grid, amps, joint.time)


def _cell_cdf(joint: JointState):
    p = (joint.density * joint.sys_grid.dx * joint.ptr_grid.dx).ravel()
    p = p / p.sum()
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    return cdf


def _pairs_from_uniforms(joint: JointState, cdf, u):
    """Map (n, 3) uniforms to (o, f) pairs; cell by inverse CDF, jitter within."""
    n_ptr = joint.ptr_grid.n_points
    cells = np.searchsorted(cdf, u[:, 0], side="right")
    cells = np.clip(cells, 0, cdf.size - 1)
    i, j = np.divmod(cells, n_ptr)
    f = joint.sys_grid.x[i] + (u[:, 1] - 0.5) * joint.sys_grid.dx
    o = joint.ptr_grid.x[j] + (u[:, 2] - 0.5) * joint.ptr_grid.dx
    return o, f


def sample_pair(joint: JointState, rng: np.random.Generator):
    """One draw (o, f) from the joint Born density |Psi(x,y)|^2 dx dy."""
    cdf = _cell_cdf(joint)
    o, f = _pairs_from_uniforms(joint, cdf, rng.random(3)[None, :])
    return float(o[0]), float(f[0])


@dataclass(frozen=True)
class ProtocolConfig:
    coupling_g: float
    n_runs: int
    f_bin_width: float
    seed: int = 0

    def validate(self, sys_grid: SpatialGrid):
        if self.coupling_g <= 0:
            raise ValueError("coupling_g must be positive")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.f_bin_width < sys_grid.dx:
            raise ValueError("f_bin_width must be at least the system dx")


@dataclass(frozen=True)
class ProtocolOutcome:
    pairs: np.ndarray         # (n_runs, 2): columns o, f
    bin_centers: np.ndarray
    counts: np.ndarray
    estimates: np.ndarray     # mean(o|bin) / g; nan for empty bins
    stderrs: np.ndarray       # nan where count < 2 (flagged undefined)
    g: float

    def to_csv(self, path, exact_values=None):
        try:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["bin_center", "count", "estimate", "stderr",
                            "exact_value", "deviation"])
                for k in range(self.bin_centers.size):
                    exact = (np.nan if exact_values is None
                             else float(exact_values[k]))
                    dev = (np.nan if exact_values is None or self.counts[k] == 0
                           else abs(self.estimates[k] - exact))
                    w.writerow([f"{self.bin_centers[k]:.17g}",
                                int(self.counts[k]),
                                f"{self.estimates[k]:.17g}",
                                f"{self.stderrs[k]:.17g}",
                                f"{exact:.17g}", f"{dev:.17g}"])
        except OSError as exc:
            raise IOFailureError(str(exc)) from exc

    def pairs_to_csv(self, path):
        try:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["run_id", "o", "f"])
                for a, (o, f) in enumerate(self.pairs):
                    w.writerow([a, f"{o:.17g}", f"{f:.17g}"])
        except OSError as exc:
            raise IOFailureError(str(exc)) from exc


def _draw_uniforms(seed: int, n: int) -> np.ndarray:
    """Per-run streams keyed by seed ^ run index; schedule-independent."""
    u = np.empty((n, 3))
    for a in range(n):
        u[a] = np.random.Generator(np.random.PCG64(seed ^ a)).random(3)
    return u


def run_protocol(psi: WaveFunction, op: Operator, ptr: Pointer,
                 cfg: ProtocolConfig,
                 constants: PhysicalConstants = NATURAL_UNITS) -> ProtocolOutcome:
    """Prepare, couple, sample n_runs pairs and bin the conditional averages.

    All copies are identically prepared, so the coupled state is computed
    once and only the Born sampling is repeated.
    """
    cfg.validate(psi.grid)
    joint = impulsive_couple(prepare_joint(psi, ptr), op, cfg.coupling_g, constants)
    cdf = _cell_cdf(joint)
    u = _draw_uniforms(cfg.seed, cfg.n_runs)
    o, f = _pairs_from_uniforms(joint, cdf, u)

    grid = psi.grid
    width = cfg.f_bin_width
    n_bins = int(np.ceil(grid.length / width))
    idx = np.clip(((f - grid.x_min) / width).astype(int), 0, n_bins - 1)
    centers = grid.x_min + (np.arange(n_bins) + 0.5) * width
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=o, minlength=n_bins)
    sq = np.bincount(idx, weights=o * o, minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = sums / counts
        var = np.maximum(sq / counts - mean ** 2, 0.0)
        est = mean / cfg.coupling_g
        se = np.sqrt(var / np.maximum(counts - 1, 1)) / cfg.coupling_g
    se = np.where(counts >= 2, se, np.nan)
    est = np.where(counts >= 1, est, np.nan)
    return ProtocolOutcome(np.column_stack([o, f]), centers, counts, est, se,
                           cfg.coupling_g)


def exact_field_at(psi: WaveFunction, op: Operator, points: np.ndarray,
                   floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """Local-expectation field interpolated at arbitrary positions."""
    field = local_expectation(op, psi, floor)
    return _interp_periodic(psi.grid, field.values, np.asarray(points))


def _bin_index(grid: SpatialGrid, width: float):
    n_bins = int(np.ceil(grid.length / width))
    idx = np.clip(((grid.x - grid.x_min) / width).astype(int), 0, n_bins - 1)
    return idx, n_bins


def bias_scan(psi: WaveFunction, op: Operator, ptr: Pointer,
              g_values, n_runs: int, f_bin_width: float, seed: int = 0,
              central_mass: float = 0.2,
              constants: PhysicalConstants = NATURAL_UNITS) -> dict:
    """Finite-coupling bias of the per-bin estimator, per g.

    The bias itself comes noise-free from quadrature: the exact conditional
    pointer mean over each central bin of the coupled joint state, against
    the density-weighted bin average of the g -> 0 field. Monte-Carlo
    estimates with standard errors at the same n_runs are reported
    alongside for the error bars. g_values must be strictly descending.
    """
    g_values = list(g_values)
    if any(b >= a for a, b in zip(g_values, g_values[1:])):
        raise ValueError("g_values must be strictly descending")

    grid = psi.grid
    field = local_expectation(op, psi)
    rho = psi.density
    bidx, n_bins = _bin_index(grid, f_bin_width)
    mass = np.bincount(bidx, weights=rho * grid.dx, minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        field_bin = (np.bincount(bidx, weights=field.values * rho * grid.dx,
                                 minlength=n_bins) / mass)
    sel = mass >= central_mass * mass.max()

    rows = []
    for g in g_values:
        joint = impulsive_couple(prepare_joint(psi, ptr), op, g, constants)
        rho2d = joint.density
        num_b = np.bincount(bidx, weights=rho2d @ joint.ptr_grid.x,
                            minlength=n_bins)
        den_b = np.bincount(bidx, weights=rho2d.sum(axis=1), minlength=n_bins)
        est_exact = num_b[sel] / den_b[sel] / g
        wts = mass[sel] / mass[sel].sum()
        bias = float(np.sum(wts * np.abs(est_exact - field_bin[sel])))

        out = run_protocol(psi, op, ptr,
                           ProtocolConfig(g, n_runs, f_bin_width, seed),
                           constants)
        mc_sel = sel & (out.counts >= 2)
        mc_dev = np.abs(out.estimates[mc_sel] - field_bin[mc_sel])
        mc_w = out.counts[mc_sel] / max(out.counts[mc_sel].sum(), 1)
        mc_bias = float(np.sum(mc_w * mc_dev)) if mc_sel.any() else np.nan
        mc_se = float(np.sqrt(np.sum((mc_w * out.stderrs[mc_sel]) ** 2))) \
            if mc_sel.any() else np.nan
        rows.append({"g": g, "bias": bias, "mc_bias": mc_bias,
                     "mc_stderr": mc_se, "n_bins_used": int(sel.sum())})
    return {"operator": op.label, "n_runs": n_runs,
            "f_bin_width": f_bin_width, "rows": rows}


# ---------------------------------------------------------------------------
# Back-action demonstration
# ---------------------------------------------------------------------------

def evolve_joint(joint: JointState, pot: Potential, plan: EvolutionPlan,
                 constants: PhysicalConstants = NATURAL_UNITS) -> list[JointState]:
    """Propagate the system factor; the pointer is inert after the impulse."""
    c = constants
    grid = joint.sys_grid
    half_v = np.exp(-0.5j * pot.values * plan.dt / c.hbar)[:, None]
    kinetic = np.exp(-1j * c.hbar * grid.wavenumbers ** 2 * plan.dt
                     / (2.0 * c.mass))[:, None]
    snaps = [joint]
    amps = joint.amplitudes
    for step in range(1, plan.n_steps + 1):
        amps = half_v * amps
        amps = np.fft.ifft(kinetic * np.fft.fft(amps, axis=0), axis=0)
        amps = half_v * amps
        if step % plan.snapshot_stride == 0:
            snaps.append(JointState(grid, joint.ptr_grid, amps,
                                    joint.time + step * plan.dt))
    return snaps


def _joint_velocity(joint: JointState, constants, floor):
    """System-coordinate Bohmian velocity on the joint grid, v_x(x, y)."""
    c = constants
    ik = (1j * joint.sys_grid.wavenumbers)[:, None]
    d = np.fft.ifft(ik * np.fft.fft(joint.amplitudes, axis=0), axis=0)
    rho = joint.density
    j = (c.hbar / c.mass) * np.imag(np.conj(joint.amplitudes) * d)
    mask = rho < floor * rho.max()
    v = np.zeros_like(rho)
    np.divide(j, rho, out=v, where=~mask)
    return v, mask


def _integrate_rows(grid: SpatialGrid, times, vrows, x0s, substeps=4):
    """RK4 where trajectory j follows its own velocity row vrows[k][j]."""
    n = len(x0s)
    x = grid.wrap(np.asarray(x0s, dtype=float)).copy()
    out = np.empty((n, len(times)))
    out[:, 0] = x
    rows = np.arange(n)

    def interp(vmat, xq):
        s = (xq - grid.x_min) / grid.dx
        i0 = np.floor(s).astype(int) % grid.n_points
        frac = s - np.floor(s)
        i1 = (i0 + 1) % grid.n_points
        return vmat[rows, i0] * (1.0 - frac) + vmat[rows, i1] * frac

    for k in range(len(times) - 1):
        h = (times[k + 1] - times[k]) / substeps
        va, vb = vrows[k], vrows[k + 1]
        for s in range(substeps):
            w0 = s / substeps
            wm = (s + 0.5) / substeps
            w1 = (s + 1) / substeps

            def vel(xq, w):
                return (1.0 - w) * interp(va, xq) + w * interp(vb, xq)

            k1 = vel(x, w0)
            k2 = vel(grid.wrap(x + 0.5 * h * k1), wm)
            k3 = vel(grid.wrap(x + 0.5 * h * k2), wm)
            k4 = vel(grid.wrap(x + h * k3), w1)
            x = grid.wrap(x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))
        out[:, k + 1] = x
    return out


def backaction_demo(psi: WaveFunction, op: Operator, ptr: Pointer, g: float,
                    horizon: float, n_traj: int = 64, seed: int = 7,
                    pot: Potential = None, n_steps: int = 400, stride: int = 8,
                    floor: float = DEFAULT_FLOOR,
                    constants: PhysicalConstants = NATURAL_UNITS) -> dict:
    """Compare unmeasured Bohmian trajectories with post-coupling conditional ones.

    The measured branch guides each trajectory by the joint-configuration
    velocity v_x(x, y0) at its pointer coordinate y0 (the pointer is inert,
    so y0 is constant). Divergence is the max minimal-image distance per
    trajectory over the horizon.
    """
    from .dynamics import integrate_trajectories, sample_quantum_equilibrium
    from .propagate import evolve

    if pot is None:
        pot = free_potential(psi.grid)
    plan = EvolutionPlan(horizon / n_steps, n_steps, stride)

    x0s = sample_quantum_equilibrium(psi, n_traj, seed)
    free_snaps = evolve(psi, pot, plan, constants)
    ens_free = integrate_trajectories(x0s, free_snaps, floor, constants)

    joint = impulsive_couple(prepare_joint(psi, ptr), op, g, constants) \
        if g != 0.0 else prepare_joint(psi, ptr)
    # Pointer coordinate per trajectory: drawn from p(y | x = x0 cell).
    y_idx = np.empty(n_traj, dtype=int)
    rho = joint.density
    for j in range(n_traj):
        i = joint.sys_grid.nearest_index(x0s[j])
        col = rho[i] / rho[i].sum()
        u = np.random.Generator(np.random.PCG64((seed + 1) ^ j)).random()
        y_idx[j] = np.clip(np.searchsorted(np.cumsum(col), u), 0,
                           joint.ptr_grid.n_points - 1)

    joint_snaps = evolve_joint(joint, pot, plan, constants)
    times = np.array([s.time for s in joint_snaps])
    vrows = []
    for s in joint_snaps:
        v2d, _ = _joint_velocity(s, constants, floor)
        vrows.append(v2d[:, y_idx].T.copy())
    meas_pos = _integrate_rows(psi.grid, times, vrows, x0s)

    L = psi.grid.length
    delta = np.abs(meas_pos - ens_free.positions)
    delta = np.minimum(delta, L - delta)
    per_traj = delta.max(axis=1)
    return {
        "g": g,
        "horizon": horizon,
        "n_traj": n_traj,
        "divergences": per_traj,
        "max_divergence": float(per_traj.max()),
        "integrator_tolerance": INTEGRATOR_TOLERANCE,
    }
