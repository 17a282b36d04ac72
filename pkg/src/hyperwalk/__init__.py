"""Random walks on hyperbolic groups: Green functions, pressure and boundary measures."""

__version__ = "0.1.0"

from .errors import (AdmissibilityError, BudgetExceeded, CalibrationError, ConfigError,
                     ConvergenceError, HyperwalkError, ModelError, ParseError)
from .group_model import (Element, GroupModel, ShadowSpec, ball_enumerate, busemann_along,
                          distance, free_group, free_product, geodesic_prefixes, gromov_product,
                          load_model, reduce, rewriting_model, shadow_contains, z2_z3)
from .automaton import (builtin_automaton, growth_rate, load_automaton, scc_decompose,
                        sphere_paths, validate)
from .green import (GreenEvaluator, StepDistribution, green_value, load_steps,
                    martin_kernel_approx, mc_first_passage, solve_tree_first_passage,
                    truncated_green)
from .walk_stats import (estimate_drift, estimate_entropy_convolution,
                         estimate_entropy_green_speed, ray_tracking, simulate)
from .thermo import (beta_curve, beta_direct, build_potential, legendre, pressure,
                     semisimplicity_check)
from .boundary import (gibbs_ratio_report, harmonic_shadow_mass, local_dimension_samples,
                       mutheta_shadow_mass, stationarity_residual)
from .experiments import confinement_experiment, fundamental_report, hitting_experiment
from .config import ExperimentConfig
from .pipeline import run_pipeline
