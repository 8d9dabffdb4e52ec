"""Best-arm identification with instrumental variables.

Confounded linear bandits where treatments cannot be assigned directly, only
encouraged through instruments. See the README for an overview.
"""

from .errors import *  # noqa: F401,F403
from .instances import (Dataset, Gram, NoiseKind, NoiseSpec, ProblemInstance, best_arm,
                        instance_from_spec, make_compliance, make_gaussian, make_interpolation,
                        make_jump_around, sample_counts, sample_rounds, trial_rng)
from .estimators import (LogBarMode, NoiseBounds, estimate_theta_2sls, estimate_theta_ols,
                         estimate_theta_psi, fit_gamma_ols, log_bar, oracle_ci_width, p2sls_ci_width)
from .design import (Design, SolverOptions, e_design, oracle_lower_bound_samples, rho_star,
                     round_design, xy_design)
from .algorithms import (AlgoParams, TrialResult, estimate_lambda_min, run_cpeg, run_cpeg_plugin,
                         run_cpeug, run_static_baseline, run_ucb_baseline)

__version__ = "0.1.0"
