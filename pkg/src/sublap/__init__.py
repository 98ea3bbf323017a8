"""sublap: sub-Laplacians, geodesic random walks and the volume/complement
equivalence problem on frame-defined sub-Riemannian structures."""

__version__ = "0.1.0"

from .frames import (Structure, StructuralTensor, VolumeForm, jacobian,
                     fd_jacobian, lie_bracket, structural_functions, grad_h,
                     second_directional, div_omega, get_theta, lebesgue,
                     scaled, exp_scaled, directional_derivative,
                     field_derivative)
from .geodesics import (CovectorCoords, GeodesicState, GeodesicResult,
                        hamiltonian, geodesic_rhs, exp_map, exp_map_batch,
                        integrate_geodesic, taylor_residual)
from .operators import (OperatorValue, macroscopic, microscopic,
                        horizontal_divergence, chi, chi_norm)
from .corank1 import (OneForm, JMatrix, d_eta, j_matrix, j_matrix_normalized,
                      normalized_one_form, annihilator_one_form, reeb,
                      popp_corank1, popp_volume, quasi_reeb, eigen_generators)
from .compatibility import (SolvabilityReport, CarnotSpec, ComplementFamily,
                            contact_complement, corank1_solve,
                            carnot_complements, contact_integrability,
                            reconstruct_theta, rebuild_with_complement,
                            constant_complement_field, roundtrip_chi)
from .forms import exterior_d, wedge, interior, evaluate, wedge_power
from .randomwalk import (MeasureSpec, WalkConfig, WalkResult, EstimateResult,
                         sample_cylinder, sample_cylinder_batch,
                         single_step_estimate, single_step_estimates,
                         simulate_walk, reference_diffusion,
                         endpoint_statistics, drift_vector)
from .models import (Model, heisenberg3, carnot_corank1, quasicontact_r4,
                     contact3_perturbed, load_model, model_from_dict,
                     volume_from_spec, BUILTINS)
from . import errors

__all__ = [name for name in dir() if not name.startswith("_")]
