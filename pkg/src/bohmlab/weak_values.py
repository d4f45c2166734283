"""Pre/post-selected weak values and position-post-selected local expectations.

The central identity chain: the local expectation field of an operator S,
Re{<x|S|psi>/<x|psi>}, averaged over |psi|^2 reproduces <psi|S|psi>; for
S = X it is the coordinate itself, for S = V the guiding-equation velocity,
and for S = H the Bohmian particle energy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (NATURAL_UNITS, Operator, PhysicalConstants, SpatialGrid,
                   SumOperator, WaveFunction, diagonal_action, expectation,
                   inner_product)
from .dynamics import (DEFAULT_FLOOR, TrajectoryEnsemble, _interp_periodic,
                       node_mask)
from .errors import (PreconditionViolatedError, TimeMismatchError,
                     VanishingOverlapError)
from .states import grid_delta, plane_wave, plane_wave_k


@dataclass(frozen=True)
class WeakValueResult:
    value: float
    raw_complex: complex
    overlap_magnitude: float


def weak_value(op: Operator, psi_i: WaveFunction, psi_f: WaveFunction) -> WeakValueResult:
    """Re{<psi_f|O|psi_i>/<psi_f|psi_i>}, plus the unreduced complex ratio."""
    overlap = inner_product(psi_f, psi_i)
    if abs(overlap) < 1e-10:
        raise VanishingOverlapError(
            f"|<psi_f|psi_i>| = {abs(overlap):.3e} too small; weak value undefined")
    raw = inner_product(psi_f, op.apply(psi_i)) / overlap
    return WeakValueResult(raw.real, raw, abs(overlap))


@dataclass(frozen=True)
class LocalExpectationField:
    grid: SpatialGrid
    values: np.ndarray
    node_mask: np.ndarray
    time: float
    label: str


def local_expectation(op: Operator, psi: WaveFunction,
                      floor: float = DEFAULT_FLOOR) -> LocalExpectationField:
    """Field of position-post-selected weak values Re{(O psi)(x)/psi(x)}.

    Operators diagonal in the position basis cancel algebraically,
    Re{s(x) psi/psi} = s(x), so their field is the eigenvalue array itself
    with no roundoff; everything else goes through the complex ratio.
    """
    mask = node_mask(psi, floor)
    action = diagonal_action(op, psi.grid)
    if action is not None and action[0] == "position":
        vals = np.where(mask, 0.0, action[1])
        return LocalExpectationField(psi.grid, vals, mask, psi.time, op.label)
    num = op.apply(psi).amplitudes
    vals = np.zeros(psi.grid.n_points)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.real(num[~mask] / psi.amplitudes[~mask])
    vals[~mask] = ratio
    return LocalExpectationField(psi.grid, vals, mask, psi.time, op.label)


def mask_probability(psi: WaveFunction, floor: float = DEFAULT_FLOOR) -> float:
    """Probability mass sitting under the node mask (the leakage bound)."""
    mask = node_mask(psi, floor)
    return float(np.sum(psi.density[mask]) * psi.grid.dx)


def ensemble_average(op: Operator, psi: WaveFunction,
                     floor: float = DEFAULT_FLOOR) -> float:
    """Quadrature of the local-expectation field against |psi|^2, off mask."""
    f = local_expectation(op, psi, floor)
    keep = ~f.node_mask
    return float(np.sum(f.values[keep] * psi.density[keep]) * psi.grid.dx)


def trajectory_ensemble_average(op: Operator, ens: TrajectoryEnsemble,
                                psi_t: WaveFunction,
                                floor: float = DEFAULT_FLOOR) -> float:
    """Mean of the local-expectation field over trajectory positions at psi_t's time."""
    match = np.isclose(ens.times, psi_t.time, rtol=1e-9, atol=1e-9)
    if not match.any():
        raise TimeMismatchError(
            f"no ensemble sample at t={psi_t.time}; have {ens.times}")
    col = int(np.argmax(match))
    f = local_expectation(op, psi_t, floor)
    vals = _interp_periodic(psi_t.grid, f.values, ens.positions[:, col])
    return float(np.mean(vals))


def _state_norm(psi: WaveFunction) -> float:
    return float(np.sqrt(psi.norm_squared()))


def sum_rule_check(p_op: Operator, q_op: Operator, psi_i: WaveFunction,
                   psi_f: WaveFunction, p: float, q: float,
                   residual_tol: float = 1e-6) -> dict:
    """Verify <P+Q>_w = p+q for eigen-pairs (P, psi_i, p) and (Q, psi_f, q).

    The eigenvector preconditions are measured, not assumed; both operators
    are Hermitian so Q acting on psi_f stands in for its adjoint.
    """
    rp = p_op.apply(psi_i).amplitudes - p * psi_i.amplitudes
    res_p = float(np.sqrt(np.sum(np.abs(rp) ** 2) * psi_i.grid.dx))
    rq = q_op.apply(psi_f).amplitudes - q * psi_f.amplitudes
    res_q = float(np.sqrt(np.sum(np.abs(rq) ** 2) * psi_f.grid.dx))
    if res_p > residual_tol:
        raise PreconditionViolatedError(
            f"psi_i is not an eigenvector of P (residual {res_p:.3e})", res_p)
    if res_q > residual_tol:
        raise PreconditionViolatedError(
            f"psi_f is not an eigenvector of Q (residual {res_q:.3e})", res_q)
    wv_p = weak_value(p_op, psi_i, psi_f)
    wv_q = weak_value(q_op, psi_i, psi_f)
    wv_sum = weak_value(SumOperator(p_op, q_op), psi_i, psi_f)
    return {
        "p_weak": wv_p.value,
        "q_weak": wv_q.value,
        "sum_weak": wv_sum.value,
        "expected": p + q,
        "residual": abs(wv_sum.value - (p + q)),
        "eigen_residual_p": res_p,
        "eigen_residual_q": res_q,
    }


def counterexample_v_plus_x(k_index: int, x_o: float, grid: SpatialGrid,
                            constants: PhysicalConstants = NATURAL_UNITS) -> dict:
    """Plane-wave pre-selection, grid-delta post-selection at x_o.

    The velocity weak value is hbar*k/m, the position weak value is x_o, and
    their sum operator yields exactly the sum, all in one report.
    """
    from .core import PositionOperator, VelocityOperator

    c = constants
    psi_i = plane_wave(grid, k_index)
    x_cell = grid.x[grid.nearest_index(x_o)]
    psi_f = grid_delta(grid, x_o)
    k = plane_wave_k(grid, k_index)
    v_exact = c.hbar * k / c.mass

    v_op = VelocityOperator(c)
    x_op = PositionOperator()
    wv_v = weak_value(v_op, psi_i, psi_f)
    wv_x = weak_value(x_op, psi_i, psi_f)
    wv_sum = weak_value(SumOperator(v_op, x_op), psi_i, psi_f)
    return {
        "k": k,
        "x_o": x_o,
        "x_cell": x_cell,
        "v_weak": wv_v.value,
        "x_weak": wv_x.value,
        "sum_weak": wv_sum.value,
        "v_deviation": abs(wv_v.value - v_exact),
        "x_deviation": abs(wv_x.value - x_o),
        "sum_deviation": abs(wv_sum.value - (v_exact + x_o)),
    }
