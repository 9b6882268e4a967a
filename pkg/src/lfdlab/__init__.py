"""Velocity-space laboratory for quantum Landau relaxation.

Solves the homogeneous Landau equation with Pauli blocking on a cubic
velocity grid, computes the Fermi-Dirac equilibria and their explicit
constants, and verifies the structural properties of the flow:
conservation, entropy monotonicity, entropy-production inequalities,
and spectral-gap lower bounds.
"""

__version__ = "0.1.0"

from .errors import (AliasingRisk, BallTooLarge, BlowUp, DegenerateFit,
                     EpsilonOutOfRange, GramSingular, InvalidGrid, LfdError,
                     MassMismatch, NoConvergence, NoEquilibrium,
                     NonConvergence, NotRadial, PauliViolation,
                     ProjectionInfeasible, StepTooLarge)
from .grid import (Convolver, DistributionField, VelocityGrid, build_grid,
                   convolve, kernel_drift, kernel_scalar, kernel_tensor)
from .equilibrium import (FermiDiracParams, GasMoments, Thresholds,
                          classical_params, electron_quantum_parameter,
                          equilibrium_relative_entropy, evaluate_equilibrium,
                          lemma_brackets, measure_moments, saturated_state,
                          saturation_threshold, solve_fermi_dirac)
from .collision import (CollisionCoefficients, EllipticityReport,
                        coefficient_bounds_report, coefficients,
                        collision_operator, ellipticity_estimate,
                        invariant_residuals, j_p_moment, kernel_eval,
                        pair_flux, sigma_spectral_decomposition)
from .diagnostics import (boltzmann_entropy, classical_production,
                          classical_relative_entropy, csiszar_kullback_check,
                          entropy, entropy_difference_bound,
                          entropy_production, fd_entropy, fit_decay_rate,
                          grad_l2_sq, l12_distance, moment_l1,
                          production_comparison, relative_entropy,
                          weighted_l2_sq)
from .integrator import (SimulationConfig, SimulationResult, Stepper,
                         TrajectoryRecord, conservative_projection,
                         make_initial, simulate, stable_dt)
from .linearized import (ConfinementReport, GapConstants, LinearizedOperator,
                         apply_linearized, classical_lambda2_floor,
                         confinement_profile, dense_spectrum, dirichlet_form,
                         gap_constants, gap_with_uncertainty, lambda1_field,
                         numeric_spectral_gap, spectral_projection, weight_m,
                         zeta_eps)
from .fieldio import (TRAJECTORY_COLUMNS, load_field, load_field_csv,
                      save_field, save_field_csv, save_trajectory_csv)
