"""Scenario orchestration: JSON config in, CSV/JSON artifacts and a
reproducibility manifest out. Every run is fully determined by config + seed."""
from __future__ import annotations

import csv
import json
import os
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .core import (HamiltonianOperator, PhysicalConstants, PositionOperator,
                   SpatialGrid, VelocityOperator, WaveFunction, expectation,
                   normalize)
from .dynamics import (bohmian_energy, current_density, equivariance_distance,
                       integrate_trajectories, sample_quantum_equilibrium,
                       velocity_field)
from .errors import ConfigParseError, ConfigValidationError, IOFailureError
from .measurement import (ProtocolConfig, backaction_demo, bias_scan,
                          exact_field_at, gaussian_pointer, run_protocol)
from .propagate import (EvolutionPlan, evolve, free_potential,
                        harmonic_potential)
from .states import (coherent_state, gaussian_packet, harmonic_ground_state,
                     plane_wave, plane_wave_k, two_gaussian_superposition)
from .weak_values import (counterexample_v_plus_x, ensemble_average,
                          local_expectation, mask_probability)

SCENARIOS = (
    "free_gaussian",
    "plane_wave",
    "two_gaussian_superposition",
    "harmonic_oscillator",
    "counterexample_v_plus_x",
    "protocol_velocity",
    "bias_scan",
    "backaction",
)

OUTPUT_DIR_ENV = "BOHMLAB_OUTPUT_DIR"

_DEFAULTS = {
    "seed": 20240901,
    "output_dir": "out",
    "constants": {"hbar": 1.0, "mass": 1.0},
    "grid": {"x_min": -10.0, "x_max": 10.0, "n_points": 1024},
    "evolution": {"dt": 0.002, "n_steps": 1000, "snapshot_stride": 25},
    "ensemble": {"n": 10000, "n_bins": 64, "floor": 1e-8},
    "state": {"sigma": 1.0, "center": 0.0, "k0": 0.0, "k_index": 4,
              "x_o": 0.5, "separation": 5.0, "omega": 1.0},
    "protocol": {"coupling_g": 0.05, "n_runs": 100000, "f_bin_width": 0.25,
                 "seed": 1234,
                 "pointer": {"x_min": -6.0, "x_max": 6.0, "n_points": 256,
                             "sigma": 1.0}},
    "bias": {"g_values": [0.8, 0.4, 0.2], "n_runs": 100000},
    "backaction": {"g": 0.3, "g_values": [0.1, 0.2, 0.4], "horizon": 1.0,
                   "n_traj": 64, "n_steps": 400, "stride": 8},
}


@dataclass
class ScenarioConfig:
    scenario: str
    seed: int
    output_dir: str
    constants: dict
    grid: dict
    evolution: dict
    ensemble: dict
    state: dict
    protocol: dict
    bias: dict
    backaction: dict

    def physical_constants(self) -> PhysicalConstants:
        return PhysicalConstants(self.constants["hbar"], self.constants["mass"])

    def spatial_grid(self) -> SpatialGrid:
        g = self.grid
        return SpatialGrid(g["x_min"], g["x_max"], g["n_points"])

    def plan(self) -> EvolutionPlan:
        e = self.evolution
        return EvolutionPlan(e["dt"], e["n_steps"], e["snapshot_stride"])


def _reject_duplicates(pairs):
    seen = set()
    out = {}
    for k, v in pairs:
        if k in seen:
            raise ConfigParseError(f"duplicate key: {k!r}")
        seen.add(k)
        out[k] = v
    return out


def _merge(defaults, given, path, errors):
    """Fill defaults, reject unknown keys, recurse into nested sections."""
    out = {}
    for k, v in given.items():
        if k not in defaults:
            errors.append(f"unknown key {path}{k}")
    for k, dflt in defaults.items():
        if k in given:
            v = given[k]
            if isinstance(dflt, dict):
                if isinstance(v, dict):
                    out[k] = _merge(dflt, v, f"{path}{k}.", errors)
                else:
                    errors.append(f"{path}{k} must be an object")
                    out[k] = dict(dflt)
            else:
                out[k] = v
        else:
            out[k] = dict(dflt) if isinstance(dflt, dict) else dflt
    return out


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a JSON scenario document; every violation listed."""
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicates)
    except ConfigParseError:
        raise
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigParseError("top-level document must be an object")

    errors = []
    scenario = doc.pop("scenario", None)
    if scenario is None:
        errors.append("missing required key 'scenario'")
    elif scenario not in SCENARIOS:
        errors.append(f"unknown scenario {scenario!r}; known: {', '.join(SCENARIOS)}")

    merged = _merge(_DEFAULTS, doc, "", errors)

    n = merged["grid"]["n_points"]
    if not (isinstance(n, int) and n >= 2 and (n & (n - 1)) == 0):
        errors.append("grid.n_points must be a power of two >= 2")
    if merged["grid"]["x_max"] <= merged["grid"]["x_min"]:
        errors.append("grid.x_max must exceed grid.x_min")
    if merged["constants"]["hbar"] <= 0 or merged["constants"]["mass"] <= 0:
        errors.append("constants.hbar and constants.mass must be positive")
    ev = merged["evolution"]
    if ev["dt"] <= 0:
        errors.append("evolution.dt must be positive")
    if ev["snapshot_stride"] < 1 or ev["n_steps"] % max(ev["snapshot_stride"], 1):
        errors.append("evolution.snapshot_stride must divide n_steps")
    if merged["ensemble"]["n"] < 1:
        errors.append("ensemble.n must be >= 1")
    if not (0 < merged["ensemble"]["floor"] <= 1e-3):
        errors.append("ensemble.floor must lie in (0, 1e-3]")
    np_ptr = merged["protocol"]["pointer"]["n_points"]
    if not (isinstance(np_ptr, int) and np_ptr >= 2 and (np_ptr & (np_ptr - 1)) == 0):
        errors.append("protocol.pointer.n_points must be a power of two >= 2")
    if merged["protocol"]["coupling_g"] <= 0:
        errors.append("protocol.coupling_g must be positive")
    gv = merged["bias"]["g_values"]
    if any(b >= a for a, b in zip(gv, gv[1:])):
        errors.append("bias.g_values must be strictly descending")

    if errors:
        raise ConfigValidationError(errors)
    return ScenarioConfig(scenario=scenario, **merged)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise IOFailureError(str(exc)) from exc


def _fmt(v):
    return f"{v:.17g}"


def emit_density(path, psi: WaveFunction):
    _write_csv(path, ["x", "density"],
               [[_fmt(x), _fmt(r)] for x, r in zip(psi.grid.x, psi.density)])


def emit_velocity_field(path, vf):
    _write_csv(path, ["x", "v", "masked"],
               [[_fmt(x), _fmt(v), int(m)]
                for x, v, m in zip(vf.grid.x, vf.values, vf.node_mask)])


class _Checks:
    def __init__(self):
        self.rows = []

    def add(self, name, value, residual, tolerance):
        self.rows.append({
            "name": name,
            "value": float(value),
            "residual": float(residual),
            "tolerance": float(tolerance),
            "passed": bool(residual <= tolerance),
        })

    @property
    def all_passed(self):
        return all(r["passed"] for r in self.rows)


def _identity_checks(psi, pot, checks, constants, floor, prefix=""):
    """The pointwise and averaged weak-value identities for one state."""
    x_op = PositionOperator()
    v_op = VelocityOperator(constants)
    h_op = HamiltonianOperator(pot.values, constants)

    fx = local_expectation(x_op, psi, floor)
    keep = ~fx.node_mask
    # algebraic cancellation: no tolerance at all
    checks.add(prefix + "position_field_identity",
               0.0, float(np.max(np.abs(fx.values[keep] - psi.grid.x[keep]))),
               0.0)

    fv = local_expectation(v_op, psi, floor)
    vf = velocity_field(psi, floor, constants)
    keep = ~(fv.node_mask | vf.node_mask)
    res = float(np.max(np.abs(fv.values[keep] - vf.values[keep]))) if keep.any() else 0.0
    checks.add(prefix + "velocity_field_identity", 0.0, res, 1e-10)

    leak = mask_probability(psi, floor)
    for op, name in ((x_op, "X"), (v_op, "V"), (h_op, "H")):
        f = local_expectation(op, psi, floor)
        sup = float(np.max(np.abs(f.values))) if f.values.size else 0.0
        ea = ensemble_average(op, psi, floor)
        ex = expectation(op, psi)
        checks.add(prefix + f"ensemble_average_{name}", ea, abs(ea - ex),
                   1e-8 + leak * sup)

    # the H ratio amplifies spectral noise by 1/rho; needs a tighter floor
    e_floor = max(floor, 1e-6)
    fh = local_expectation(h_op, psi, e_floor)
    en = bohmian_energy(psi, pot, e_floor, constants)
    keep = ~(fh.node_mask | en.node_mask)
    res = float(np.max(np.abs(fh.values[keep] - en.total[keep]))) if keep.any() else 0.0
    checks.add(prefix + "energy_decomposition_identity", 0.0, res, 1e-8)


# ---------------------------------------------------------------------------
# Scenario implementations
# ---------------------------------------------------------------------------

def _scenario_state(cfg: ScenarioConfig, grid: SpatialGrid):
    s = cfg.state
    name = cfg.scenario
    if name in ("free_gaussian", "protocol_velocity", "bias_scan", "backaction"):
        return gaussian_packet(grid, s["sigma"], s["center"], s["k0"])
    if name == "plane_wave":
        return plane_wave(grid, s["k_index"])
    if name == "two_gaussian_superposition":
        return two_gaussian_superposition(grid, s["sigma"], s["separation"], s["k0"])
    if name == "harmonic_oscillator":
        return harmonic_ground_state(grid, s["omega"], cfg.physical_constants())
    raise ValueError(f"scenario {name} has no single initial state")


def _run_evolution_scenario(cfg, grid, constants, outdir, checks):
    floor = cfg.ensemble["floor"]
    n = cfg.ensemble["n"]
    n_bins = cfg.ensemble["n_bins"]
    psi0 = _scenario_state(cfg, grid)
    if cfg.scenario == "harmonic_oscillator":
        pot = harmonic_potential(grid, cfg.state["omega"], 0.0, constants)
    else:
        pot = free_potential(grid)
    snaps = evolve(psi0, pot, cfg.plan(), constants)
    psi_T = snaps[-1]
    checks.add("norm_drift", psi_T.norm_squared(),
               abs(psi_T.norm_squared() - 1.0), 1e-10)

    x0s = sample_quantum_equilibrium(psi0, n, cfg.seed)
    ens = integrate_trajectories(x0s, snaps, floor, constants)
    d0 = equivariance_distance(ens, psi0, n_bins)
    dT = equivariance_distance(ens, psi_T, n_bins)
    checks.add("equivariance_t0", d0, d0, 0.06)
    checks.add("equivariance_final", dT, dT, 0.06)

    unwrapped = ens.unwrapped_positions()
    order0 = np.argsort(unwrapped[:, 0], kind="stable")
    sorted_ok = all(np.all(np.diff(unwrapped[order0, k]) >= 0)
                    for k in range(unwrapped.shape[1]))
    checks.add("no_crossing", float(sorted_ok), 0.0 if sorted_ok else 1.0, 0.5)

    _identity_checks(psi_T, pot, checks, constants, floor)

    emit_density(os.path.join(outdir, "density_final.csv"), psi_T)
    emit_velocity_field(os.path.join(outdir, "velocity_field_final.csv"),
                        velocity_field(psi_T, floor, constants))
    ens.to_csv(os.path.join(outdir, "trajectories.csv"))


def _run_counterexample(cfg, grid, constants, outdir, checks):
    s = cfg.state
    # box of length 2*pi centered on x_o, so the post-selection point is on-grid
    cgrid = SpatialGrid(s["x_o"] - np.pi, s["x_o"] + np.pi, grid.n_points)
    rep = counterexample_v_plus_x(s["k_index"], s["x_o"], cgrid, constants)
    checks.add("counterexample_v_weak", rep["v_weak"], rep["v_deviation"], 1e-8)
    checks.add("counterexample_x_weak", rep["x_weak"], rep["x_deviation"], 1e-8)
    checks.add("counterexample_sum_weak", rep["sum_weak"], rep["sum_deviation"], 1e-8)
    with open(os.path.join(outdir, "counterexample.json"), "w") as fh:
        json.dump(rep, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_protocol_velocity(cfg, grid, constants, outdir, checks):
    p = cfg.protocol
    ptr_grid = SpatialGrid(p["pointer"]["x_min"], p["pointer"]["x_max"],
                           p["pointer"]["n_points"])
    ptr = gaussian_pointer(ptr_grid, p["pointer"]["sigma"])
    psi = _scenario_state(cfg, grid)
    op = VelocityOperator(constants)
    out = run_protocol(psi, op, ptr,
                       ProtocolConfig(p["coupling_g"], p["n_runs"],
                                      p["f_bin_width"], p["seed"]), constants)
    exact = exact_field_at(psi, op, out.bin_centers)
    sel = out.counts >= 100
    dev = np.abs(out.estimates[sel] - exact[sel])
    within = dev <= 3.0 * out.stderrs[sel]
    frac = float(np.mean(within)) if within.size else 0.0
    checks.add("protocol_bins_within_3se", frac, 1.0 - frac, 0.35)
    out.to_csv(os.path.join(outdir, "protocol_bins.csv"), exact)


def _run_bias_scan(cfg, grid, constants, outdir, checks):
    p = cfg.protocol
    b = cfg.bias
    ptr_grid = SpatialGrid(p["pointer"]["x_min"], p["pointer"]["x_max"],
                           p["pointer"]["n_points"])
    ptr = gaussian_pointer(ptr_grid, p["pointer"]["sigma"])
    psi = _scenario_state(cfg, grid)
    op = VelocityOperator(constants)
    rep = bias_scan(psi, op, ptr, b["g_values"], b["n_runs"],
                    p["f_bin_width"], p["seed"], constants=constants)
    rows = rep["rows"]
    for a, bb in zip(rows, rows[1:]):
        ratio = bb["bias"] / max(a["bias"], 1e-300)
        checks.add(f"bias_ratio_g_{a['g']}_to_{bb['g']}", ratio, ratio, 0.7)
    _write_csv(os.path.join(outdir, "bias_scan.csv"),
               ["g", "bias", "mc_bias", "mc_stderr", "n_bins_used"],
               [[_fmt(r["g"]), _fmt(r["bias"]), _fmt(r["mc_bias"]),
                 _fmt(r["mc_stderr"]), r["n_bins_used"]] for r in rows])


def _run_backaction(cfg, grid, constants, outdir, checks):
    p = cfg.protocol
    b = cfg.backaction
    ptr_grid = SpatialGrid(p["pointer"]["x_min"], p["pointer"]["x_max"],
                           p["pointer"]["n_points"])
    ptr = gaussian_pointer(ptr_grid, p["pointer"]["sigma"])
    psi = _scenario_state(cfg, grid)
    op = VelocityOperator(constants)

    zero = backaction_demo(psi, op, ptr, 0.0, b["horizon"], b["n_traj"],
                           cfg.seed, None, b["n_steps"], b["stride"],
                           cfg.ensemble["floor"], constants)
    checks.add("backaction_g0", zero["max_divergence"], zero["max_divergence"],
               zero["integrator_tolerance"])
    divs = []
    for g in b["g_values"]:
        rep = backaction_demo(psi, op, ptr, g, b["horizon"], b["n_traj"],
                              cfg.seed, None, b["n_steps"], b["stride"],
                              cfg.ensemble["floor"], constants)
        divs.append((g, rep["max_divergence"]))
    exceeds = divs[0][1] > 10.0 * zero["integrator_tolerance"]
    checks.add("backaction_exceeds_10x_tol", divs[0][1],
               0.0 if exceeds else 1.0, 0.5)
    mono = all(a[1] < b_[1] for a, b_ in zip(divs, divs[1:]))
    checks.add("backaction_monotone_in_g", float(mono),
               0.0 if mono else 1.0, 0.5)
    _write_csv(os.path.join(outdir, "backaction.csv"),
               ["g", "max_divergence"],
               [[_fmt(g), _fmt(d)] for g, d in divs])


def run_scenario(cfg: ScenarioConfig) -> dict:
    """Run one scenario; writes outputs and returns the manifest dict."""
    outdir = os.environ.get(OUTPUT_DIR_ENV, cfg.output_dir)
    os.makedirs(outdir, exist_ok=True)
    constants = cfg.physical_constants()
    grid = cfg.spatial_grid()
    checks = _Checks()
    t0 = _time.perf_counter()

    if cfg.scenario in ("free_gaussian", "plane_wave",
                        "two_gaussian_superposition", "harmonic_oscillator"):
        _run_evolution_scenario(cfg, grid, constants, outdir, checks)
    elif cfg.scenario == "counterexample_v_plus_x":
        _run_counterexample(cfg, grid, constants, outdir, checks)
    elif cfg.scenario == "protocol_velocity":
        _run_protocol_velocity(cfg, grid, constants, outdir, checks)
    elif cfg.scenario == "bias_scan":
        _run_bias_scan(cfg, grid, constants, outdir, checks)
    elif cfg.scenario == "backaction":
        _run_backaction(cfg, grid, constants, outdir, checks)
    else:
        raise ValueError(f"unhandled scenario {cfg.scenario}")

    manifest = {
        "scenario": cfg.scenario,
        "version": __version__,
        "seed": cfg.seed,
        "config": {
            "constants": cfg.constants, "grid": cfg.grid,
            "evolution": cfg.evolution, "ensemble": cfg.ensemble,
            "state": cfg.state, "protocol": cfg.protocol,
            "bias": cfg.bias, "backaction": cfg.backaction,
        },
        "wall_clock_s": _time.perf_counter() - t0,
        "checks": checks.rows,
        "passed": checks.all_passed,
    }
    path = os.path.join(outdir, f"manifest_{cfg.scenario}.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def default_config(scenario: str, **overrides) -> ScenarioConfig:
    doc = {"scenario": scenario}
    doc.update(overrides)
    return parse_config(json.dumps(doc))
