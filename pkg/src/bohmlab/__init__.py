"""bohmlab: 1D Bohmian trajectories, weak values, and the von Neumann
weak-measurement protocol on periodic spectral grids."""

__version__ = "0.1.0"

from .core import (NATURAL_UNITS, DiagonalOperator, HamiltonianOperator,
                   MatrixOperator, MomentumOperator, Operator,
                   PhysicalConstants, PositionOperator, ScaledOperator,
                   SpatialGrid, SumOperator, VelocityOperator, WaveFunction,
                   ZeroOperator, expectation, inner_product, normalize,
                   spectral_derivative)
from .dynamics import (BohmianEnergyField, NodeEncounter, TrajectoryEnsemble,
                       VelocityField, bohmian_energy, current_density,
                       equivariance_distance, integrate_trajectories,
                       sample_quantum_equilibrium, velocity_field)
from .measurement import (JointState, Pointer, ProtocolConfig,
                          ProtocolOutcome, backaction_demo, bias_scan,
                          evolve_joint, gaussian_pointer, impulsive_couple,
                          prepare_joint, run_protocol, sample_pair)
from .propagate import (EvolutionPlan, Potential, default_dt, evolve,
                        free_potential, gaussian_barrier_potential,
                        harmonic_potential, split_step)
from .states import (coherent_state, gaussian_packet, grid_delta,
                     harmonic_ground_state, plane_wave, plane_wave_k,
                     two_gaussian_superposition)
from .weak_values import (LocalExpectationField, WeakValueResult,
                          counterexample_v_plus_x, ensemble_average,
                          local_expectation, mask_probability, sum_rule_check,
                          trajectory_ensemble_average, weak_value)
