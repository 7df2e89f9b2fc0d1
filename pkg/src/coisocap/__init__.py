"""Numerical laboratory for Hamiltonian dynamics relative to coisotropic subspaces.

Geometry of the standard coisotropic pair, spectral paths with parity
constraints, admissible radial Hamiltonians with truncated extensions,
analytic and numeric leafwise return times, a discretized minimax search
for leafwise chords, and closed-form capacity bounds with a non-squeezing
verdict.  The `coisocap` console script exposes the flow, capacity, chord,
and nonsqueeze commands.
"""

__version__ = "0.1.0"

from .geometry import (CoisoSpace, Leaf, NotOnCoisotropic, apply_J,
                       involution_c, leaf_of, leaf_residual, rotate,
                       symplectic_form)
from .spectral import (ParityViolation, SpaceMismatch, SpectralDecomposition,
                       SpectralPath, action_form_a, action_form_a_quadrature,
                       action_value, e_plus, evaluate, from_modes, hs_inner,
                       hs_norm, flow_inner, flow_norm, path_from_json,
                       path_to_json, project, project_part, truncate,
                       zero_path)
from .hamiltonian import (ExtendedHamiltonian, InvalidTarget,
                          NormalizationHamiltonian, ProfileInvalid,
                          RadialHamiltonian, RadialProfile,
                          canonical_center, canonical_lower_profile,
                          comparison_Q, eval_H, extend_hamiltonian,
                          extension_profile, grad_Hbar,
                          normalization_hamiltonian, q2, q_pi,
                          simple_hamiltonian, steep_profile,
                          validate_extension_profile, validate_lower_profile)
from .dynamics import (AdmissibilityReport, ReturnEvent, SamplerConfig,
                       StepFailure, TrajectorySample, closed_form_radial,
                       first_return_radial, integrate, is_admissible,
                       return_time, trajectory_to_csv)
from .chord import (ActionFunctional, BoundsNotFound, ChordResult,
                    GalerkinSpace, LinkingConfig, NoConvergence,
                    StepRejected, ValidationFailed, build_sigma_sample,
                    check_linking_bounds, flow_step,
                    integral_inequality_check, minimax_estimate,
                    phi_gradient, phi_value, refine_and_validate,
                    shooting_chords)
from .capacity import (CapacityReport, DomainError, NonsqueezeReport,
                       RegionSpec, arccos_integral, area_A,
                       axiom_property_suite, lower_bound_capacity,
                       nonsqueeze_check, radius_R, strict_nontriviality_map)
